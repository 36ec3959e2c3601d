"""Spatial-temporal sequence model: prediction by partial matching over a
variable-order context tree.

A context combines the most recent venues (up to ``kappa`` of them) with
calendar features of the target time (day class, day of week, hour slot).
Training increments symbol counters along the context and all of its
fallback suffixes; prediction blends counter estimates with escape mass
routed to progressively shorter contexts, ending in a uniform share over
the registered alphabet.

The fallback order peels the finest temporal feature first (slot, then
day, then day class), then shortens the venue suffix by its oldest entry
and re-applies the temporal refinement, so coarse calendar patterns
remain available at every spatial order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .core import (
    CheckIn,
    DEFAULT_UTC_OFFSET_HOURS,
    TemporalContext,
    WEEKEND,
)
from .errors import ModelEmpty

Label = tuple[str, object]
Context = tuple[Label, ...]


@dataclass(frozen=True, slots=True)
class TreeConfig:
    """Structural knobs shared by every context tree in a run."""

    kappa: int = 3
    slot_hours: int = 1
    utc_offset_hours: float = DEFAULT_UTC_OFFSET_HOURS

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if 24 % self.slot_hours != 0:
            raise ValueError("slot_hours must divide 24")

    def temporal(self, timestamp: int) -> TemporalContext:
        return TemporalContext.from_timestamp(
            timestamp, slot_hours=self.slot_hours, utc_offset_hours=self.utc_offset_hours
        )


@dataclass(frozen=True, slots=True)
class ContextKey:
    """A prediction context: recent venues plus the target's calendar slot."""

    spatial: tuple[str, ...]
    temporal: TemporalContext


def temporal_labels(t: TemporalContext) -> tuple[Label, Label, Label]:
    return (
        ("W", 1 if t.day_class == WEEKEND else 0),
        ("D", t.day_of_week),
        ("S", t.slot),
    )


def escape_chain(spatial: Sequence[str], temporal: TemporalContext) -> list[Context]:
    """All fallback contexts, longest first, ending with the empty context."""
    tl = temporal_labels(temporal)
    chain: list[Context] = []
    n = len(spatial)
    for k in range(n, -1, -1):
        sp = tuple(("L", v) for v in spatial[n - k :])
        for t in (3, 2, 1, 0):
            chain.append(sp + tl[:t])
    return chain


class _Node:
    __slots__ = ("children", "counts")

    def __init__(self):
        self.children: dict[Label, _Node] = {}
        self.counts: dict[str, int] = {}


class ContextTree:
    """Counter trie over contexts with escape-based probability estimates."""

    def __init__(self, config: TreeConfig | None = None):
        self.config = config or TreeConfig()
        self.root = _Node()
        self.n_events = 0
        self._frozen = False

    # -- training -------------------------------------------------------

    def freeze(self) -> None:
        """Mark the tree read-only; concurrent readers are then safe."""
        self._frozen = True

    def observe(self, symbol: str, spatial: Sequence[str], temporal: TemporalContext) -> None:
        """Record one event: bump the symbol's counter at every fallback context."""
        if self._frozen:
            raise RuntimeError("tree is frozen")
        tl = temporal_labels(temporal)
        n = len(spatial)
        if n > self.config.kappa:
            spatial = spatial[n - self.config.kappa :]
            n = self.config.kappa
        for k in range(n, -1, -1):
            node = self.root
            for v in spatial[n - k :]:
                node = self._child(node, ("L", v))
            node.counts[symbol] = node.counts.get(symbol, 0) + 1
            for lab in tl:
                node = self._child(node, lab)
                node.counts[symbol] = node.counts.get(symbol, 0) + 1
        self.n_events += 1

    @staticmethod
    def _child(node: _Node, label: Label) -> _Node:
        nxt = node.children.get(label)
        if nxt is None:
            nxt = node.children[label] = _Node()
        return nxt

    def train_event(self, venue: str, timestamp: int, prev_venues: Sequence[str]) -> None:
        self.observe(venue, tuple(prev_venues), self.config.temporal(timestamp))

    def train_history(self, history: Sequence[CheckIn]) -> None:
        """Feed a time-sorted single-user history event by event."""
        prev: list[str] = []
        for ci in history:
            self.train_event(ci.venue_id, ci.timestamp, prev)
            prev.append(ci.venue_id)
            if len(prev) > self.config.kappa:
                prev.pop(0)
        return None

    # -- queries --------------------------------------------------------

    @property
    def alphabet(self) -> Mapping[str, int]:
        """Registered symbols with their total event counts."""
        return self.root.counts

    def counts_at(self, context: Context) -> Mapping[str, int] | None:
        node = self.root
        for lab in context:
            node = node.children.get(lab)
            if node is None:
                return None
        return node.counts

    def key(self, prev_venues: Sequence[str], timestamp: int) -> ContextKey:
        sp = tuple(prev_venues)
        if len(sp) > self.config.kappa:
            sp = sp[len(sp) - self.config.kappa :]
        return ContextKey(spatial=sp, temporal=self.config.temporal(timestamp))

    def prob(self, symbol: str, key: ContextKey) -> float:
        """Probability of ``symbol`` after the given context."""
        return _ppm_prob(self, symbol, escape_chain(key.spatial, key.temporal))

    def distribution(
        self, key: ContextKey, candidates: Iterable[str] | None = None
    ) -> tuple[dict[str, float], float]:
        """Per-candidate probabilities and the mass of a never-seen symbol.

        Without an explicit candidate set the registered alphabet is used.
        The second value is the probability any single unregistered symbol
        would receive (the explicitly reported residual escape mass).
        """
        return _ppm_distribution(self, escape_chain(key.spatial, key.temporal), candidates)

    def predict(self, key: ContextKey, limit: int | None = None) -> list[tuple[str, float]]:
        """Known symbols ranked by probability, ties broken by symbol id."""
        dist, _ = self.distribution(key)
        ranked = sorted(dist.items(), key=lambda kv: (-kv[1], kv[0]))
        return ranked[:limit] if limit is not None else ranked

    def unseen_prob(self, key: ContextKey) -> float:
        """Probability assigned to a symbol never seen in training."""
        _, unseen = self.distribution(key, candidates=())
        return unseen

    def escape_at_root(self) -> float:
        """Escape estimate of the empty context: new-symbol mass at order 0."""
        sigma = len(self.root.counts)
        if sigma == 0:
            raise ModelEmpty("tree has no training events")
        total = sum(self.root.counts.values())
        return sigma / (sigma + total)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": "socmob-context-tree",
            "version": 1,
            "config": {
                "kappa": self.config.kappa,
                "slot_hours": self.config.slot_hours,
                "utc_offset_hours": self.config.utc_offset_hours,
            },
            "n_events": self.n_events,
            "root": _encode_node(self.root),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ContextTree":
        if data.get("format") != "socmob-context-tree" or data.get("version") != 1:
            raise ValueError("not a version-1 context tree dump")
        cfg = data["config"]
        tree = cls(
            TreeConfig(
                kappa=cfg["kappa"],
                slot_hours=cfg["slot_hours"],
                utc_offset_hours=cfg["utc_offset_hours"],
            )
        )
        tree.root = _decode_node(data["root"])
        tree.n_events = data["n_events"]
        return tree

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "ContextTree":
        return cls.from_dict(json.loads(text))


def _encode_label(label: Label) -> str:
    kind, value = label
    return f"{kind}:{value}"


def _decode_label(text: str) -> Label:
    kind, _, value = text.partition(":")
    return (kind, value if kind == "L" else int(value))


def _encode_node(node: _Node) -> dict:
    return {
        "c": dict(sorted(node.counts.items())),
        "k": {
            _encode_label(lab): _encode_node(child)
            for lab, child in sorted(node.children.items(), key=lambda kv: _encode_label(kv[0]))
        },
    }


def _decode_node(data: dict) -> _Node:
    node = _Node()
    node.counts = dict(data["c"])
    node.children = {_decode_label(k): _decode_node(v) for k, v in data["k"].items()}
    return node


class MergedContextView:
    """Read-only view over several trees as if their counters were summed.

    Serves as the general-trend model: the merged view over the individual
    trees of a user's friends behaves exactly like one tree trained on all
    of their trajectories, without duplicating storage.
    """

    def __init__(self, trees: Sequence[ContextTree]):
        if not trees:
            raise ValueError("need at least one tree")
        self.trees = list(trees)
        self.config = self.trees[0].config

    @property
    def alphabet(self) -> dict[str, int]:
        merged: dict[str, int] = {}
        for t in self.trees:
            for q, c in t.root.counts.items():
                merged[q] = merged.get(q, 0) + c
        return merged

    def counts_at(self, context: Context) -> dict[str, int] | None:
        merged: dict[str, int] | None = None
        for t in self.trees:
            counts = t.counts_at(context)
            if counts:
                if merged is None:
                    merged = dict(counts)
                else:
                    for q, c in counts.items():
                        merged[q] = merged.get(q, 0) + c
        return merged

    def distribution(
        self, key: ContextKey, candidates: Iterable[str] | None = None
    ) -> tuple[dict[str, float], float]:
        return _ppm_distribution(self, escape_chain(key.spatial, key.temporal), candidates)

    def predict(self, key: ContextKey, limit: int | None = None) -> list[tuple[str, float]]:
        dist, _ = self.distribution(key)
        ranked = sorted(dist.items(), key=lambda kv: (-kv[1], kv[0]))
        return ranked[:limit] if limit is not None else ranked


def _ppm_prob(model, symbol: str, chain: Sequence[Context]) -> float:
    alphabet = model.alphabet
    if not alphabet:
        raise ModelEmpty("model has no training events")
    acc = 1.0
    for context in chain[:-1]:
        counts = model.counts_at(context)
        if not counts:
            continue
        total = sum(counts.values())
        denom = len(counts) + total
        c = counts.get(symbol)
        if c:
            return acc * c / denom
        acc *= len(counts) / denom
    # empty context: uniform over the registered alphabet
    return acc / len(alphabet)


def _ppm_distribution(
    model, chain: Sequence[Context], candidates: Iterable[str] | None
) -> tuple[dict[str, float], float]:
    alphabet = model.alphabet
    if not alphabet:
        raise ModelEmpty("model has no training events")
    out: dict[str, float] = {}
    acc = 1.0
    for context in chain[:-1]:
        counts = model.counts_at(context)
        if not counts:
            continue
        total = sum(counts.values())
        denom = len(counts) + total
        for q, c in counts.items():
            if q not in out:
                out[q] = acc * c / denom
        acc *= len(counts) / denom
    unseen = acc / len(alphabet)
    wanted = alphabet.keys() if candidates is None else candidates
    dist = {q: out.get(q, unseen) for q in wanted}
    return dist, unseen
