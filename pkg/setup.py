"""Build hook for the optional compiled pair-counting kernels.

The package is pure Python and fully functional without the extension;
when Cython and a C compiler are available, `socmob._ckernels` is built
and selected automatically at import time.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/socmob/_ckernels.pyx"],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
