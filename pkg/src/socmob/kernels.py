"""Backend selection for the windowed pair-counting kernels.

At import time the compiled extension is preferred; the pure-Python
implementation is the fallback.  ``backend_name()`` reports which one is
active.  The environment variable ``SOCMOB_PURE_PYTHON=1`` forces the
fallback (used by the test suite to exercise both paths).
"""

import os

from . import _kernels_py

if os.environ.get("SOCMOB_PURE_PYTHON") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

count_pairs_within = _impl.count_pairs_within
count_pairs_within_weighted = _impl.count_pairs_within_weighted


def backend_name() -> str:
    return _impl.BACKEND
