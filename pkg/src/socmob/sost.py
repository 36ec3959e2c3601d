"""Social extension of the sequence model: co-presence influence records,
time drift, tie-strength-weighted set matching, and the two social
probability estimators, combined with the individual model and a
general-trend fallback at prediction time.

Influence classes, from the point of view of the target user:

* Class I   — the target together with at least one friend.
* Class II  — two or more friends, target absent.
* Class III — a single friend on their own.

Each record keeps the set of users involved, the time of its latest
occurrence, and a counter reinforced on recurrence; between occurrences
the counter decays lazily at read time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .core import CheckIn, TemporalContext, WEEK_SECONDS
from .errors import ConfigError, ModelEmpty
from .homophily import WeightScheme, colocation_count
from .vomm import ContextKey, ContextTree, MergedContextView, TreeConfig

HOUR_SECONDS = 3_600

CLASS_I = "I"
CLASS_II = "II"
CLASS_III = "III"
ALL_CLASSES = frozenset({CLASS_I, CLASS_II, CLASS_III})

DRIFT_KINDS = ("none", "geometric", "exponential")
ESTIMATORS = ("A", "B")


@dataclass(frozen=True)
class SostConfig:
    """Model configuration; defaults mirror the strongest reported setup."""

    beta: float = 0.05
    drift: str = "exponential"
    estimator: str = "B"
    classes: frozenset[str] = ALL_CLASSES
    stay_hours: float = 3.0
    situation_window: int = HOUR_SECONDS
    tie_window: int = WEEK_SECONDS
    enable_trend: bool = True
    tree: TreeConfig = field(default_factory=TreeConfig)

    def __post_init__(self):
        if self.drift not in DRIFT_KINDS:
            raise ConfigError(f"unknown drift kind {self.drift!r}")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {self.estimator!r}")
        if self.drift != "none" and not 0.0 < self.beta < 1.0:
            raise ConfigError(f"beta must be in (0, 1), got {self.beta}")
        if not self.classes <= ALL_CLASSES:
            raise ConfigError(f"unknown influence classes {self.classes - ALL_CLASSES}")
        if self.stay_hours <= 0:
            raise ConfigError("stay_hours must be positive")


def drift_factor(elapsed: float, beta: float, stay_hours: float, kind: str) -> float:
    """Decay multiplier for a record last reinforced ``elapsed`` seconds ago.

    Elapsed time is measured in units of the average stay time.  The
    geometric variant decays by (1 - beta) per unit, the exponential one by
    e^(-beta) per unit; both are 1 at zero elapsed time.
    """
    if kind == "none":
        return 1.0
    if kind not in DRIFT_KINDS:
        raise ConfigError(f"unknown drift kind {kind!r}")
    if not 0.0 < beta < 1.0:
        raise ConfigError(f"beta must be in (0, 1), got {beta}")
    if elapsed < 0:
        raise ValueError("elapsed time is negative")
    units = elapsed / (stay_hours * HOUR_SECONDS)
    if kind == "geometric":
        return (1.0 - beta) ** units
    return math.exp(-beta * units)


@dataclass(slots=True)
class InfluenceRecord:
    """⟨user set, last occurrence, counter⟩ stored at a tree node."""

    users: frozenset[str]
    last_seen: int
    counter: float

    def value_at(self, now: int | None, config: SostConfig) -> float:
        """Counter as seen at ``now`` (lazily decayed)."""
        if now is None or config.drift == "none":
            return self.counter
        return self.counter * drift_factor(
            now - self.last_seen, config.beta, config.stay_hours, config.drift
        )

    def reinforce(self, now: int, config: SostConfig) -> None:
        if config.drift == "none":
            self.counter += 1.0
        else:
            psi = drift_factor(
                now - self.last_seen, config.beta, config.stay_hours, config.drift
            )
            self.counter *= psi + 1.0
        self.last_seen = now


def influence_jaccard(
    users: Iterable[str], other: Iterable[str], tie: Mapping[str, float]
) -> float:
    """Tie-strength-weighted Jaccard overlap of two user sets.

    Users without a tie weight (the target themselves, strangers)
    contribute zero mass; an all-zero union gives 0.
    """
    a = frozenset(users)
    b = frozenset(other)
    inter = sum(tie.get(u, 0.0) for u in a & b)
    union = sum(tie.get(u, 0.0) for u in a | b)
    if union <= 0.0:
        return 0.0
    return inter / union


def tie_strength_map(
    target: str,
    neighbors: Iterable[str],
    histories: Mapping[str, Sequence[CheckIn]],
    scheme: WeightScheme = WeightScheme(),
    venues=None,
    window: int = WEEK_SECONDS,
) -> tuple[dict[str, float], bool]:
    """Normalized co-location mass of each friend w.r.t. the target.

    The weights sum to 1 whenever any friend overlaps the target at all;
    the second return value is False when no friend has any overlap (the
    all-zero case).
    """
    hist_t = histories.get(target, ())
    masses: dict[str, float] = {}
    for j in sorted(neighbors):
        masses[j] = colocation_count(
            hist_t, histories.get(j, ()), window=window, scheme=scheme, venues=venues
        )
    total = sum(masses.values())
    if total <= 0.0:
        return ({j: 0.0 for j in masses}, False)
    return ({j: m / total for j, m in masses.items()}, True)


def tie_strength(
    target: str,
    friend: str,
    neighbors: Iterable[str],
    histories: Mapping[str, Sequence[CheckIn]],
    scheme: WeightScheme = WeightScheme(),
    venues=None,
    window: int = WEEK_SECONDS,
) -> float:
    ties, _ = tie_strength_map(
        target, neighbors, histories, scheme=scheme, venues=venues, window=window
    )
    if friend not in ties:
        raise ValueError(f"{friend!r} is not a neighbor of {target!r}")
    return ties[friend]


def classify_situation(users: frozenset[str], target: str) -> str | None:
    """Influence class of a circle-restricted situation, or None."""
    if target in users:
        return CLASS_I if len(users) >= 2 else None
    if len(users) >= 2:
        return CLASS_II
    if len(users) == 1:
        return CLASS_III
    return None


class _SocialNode:
    __slots__ = ("children", "records", "users")

    def __init__(self):
        self.children: dict[tuple, _SocialNode] = {}
        self.records: dict[frozenset[str], InfluenceRecord] = {}
        # union of all user sets recorded here; a cheap prefilter for
        # candidate discovery
        self.users: set[str] = set()


def _situation_labels(venue: str, temporal: TemporalContext) -> tuple[tuple, ...]:
    from .vomm import temporal_labels

    return (("L", venue),) + temporal_labels(temporal)


class SocialTree:
    """Trie of venue/temporal nodes, each holding influence records.

    Records are attached along the whole path (venue node and each
    temporal refinement), so coarser nodes aggregate the evidence of
    their subtrees.
    """

    def __init__(self):
        self.root = _SocialNode()
        self.n_records = 0

    def record(
        self,
        venue: str,
        temporal: TemporalContext,
        users: frozenset[str],
        timestamp: int,
        config: SostConfig,
    ) -> None:
        node = self.root
        for lab in _situation_labels(venue, temporal):
            child = node.children.get(lab)
            if child is None:
                child = node.children[lab] = _SocialNode()
            rec = child.records.get(users)
            if rec is None:
                child.records[users] = InfluenceRecord(
                    users=users, last_seen=timestamp, counter=1.0
                )
                self.n_records += 1
            else:
                rec.reinforce(timestamp, config)
            child.users |= users
            node = child

    def path_nodes(self, venue: str, temporal: TemporalContext) -> list[_SocialNode]:
        """Existing nodes along venue → day class → day → slot, root excluded."""
        nodes = []
        node = self.root
        for lab in _situation_labels(venue, temporal):
            node = node.children.get(lab)
            if node is None:
                break
            nodes.append(node)
        return nodes

    def query_node(
        self, venue: str, temporal: TemporalContext
    ) -> tuple[_SocialNode, list[_SocialNode]] | None:
        """The node for the venue's full temporal context, with its path.

        Returns None when the exact cell holds no records; evidence from
        other slots or days deliberately does not leak across cells.
        """
        nodes = self.path_nodes(venue, temporal)
        if len(nodes) == 4 and nodes[3].records:
            return nodes[3], nodes
        return None

    def venues_at(
        self, temporal: TemporalContext, users: Iterable[str] | None = None
    ) -> list[str]:
        """Venues holding records at this exact temporal context
        (optionally restricted to records overlapping the given users)."""
        from .vomm import temporal_labels

        tl = temporal_labels(temporal)
        out = []
        user_set = None if users is None else frozenset(users)
        for lab, node in self.root.children.items():
            n = node
            for t in tl:
                n = n.children.get(t)
                if n is None:
                    break
            if n is None or not n.records:
                continue
            if user_set is not None and not (n.users & user_set):
                continue
            out.append(lab[1])
        return sorted(out)

    @staticmethod
    def effective_counter(
        node: _SocialNode | None,
        users_now: Iterable[str],
        tie: Mapping[str, float],
        now: int | None,
        config: SostConfig,
    ) -> float:
        """Jaccard-weighted sum of the node's decayed record counters."""
        if node is None:
            return 0.0
        total = 0.0
        users_now = frozenset(users_now)
        for rec in node.records.values():
            j = influence_jaccard(users_now, rec.users, tie)
            if j > 0.0:
                total += rec.value_at(now, config) * j
        return total

    @staticmethod
    def raw_total(node: _SocialNode | None, now: int | None, config: SostConfig) -> float:
        if node is None:
            return 0.0
        return sum(rec.value_at(now, config) for rec in node.records.values())

    # -- serialization --------------------------------------------------

    def to_dict(self) -> dict:
        def enc(node: _SocialNode) -> dict:
            return {
                "r": [
                    {
                        "users": sorted(rec.users),
                        "t": rec.last_seen,
                        "c": repr(rec.counter),
                    }
                    for key, rec in sorted(
                        node.records.items(), key=lambda kv: sorted(kv[0])
                    )
                ],
                "k": {
                    f"{lab[0]}:{lab[1]}": enc(child)
                    for lab, child in sorted(
                        node.children.items(), key=lambda kv: f"{kv[0][0]}:{kv[0][1]}"
                    )
                },
            }

        return {"format": "socmob-social-tree", "version": 1, "root": enc(self.root)}

    @classmethod
    def from_dict(cls, data: dict) -> "SocialTree":
        if data.get("format") != "socmob-social-tree" or data.get("version") != 1:
            raise ValueError("not a version-1 social tree dump")

        def dec(payload: dict) -> _SocialNode:
            node = _SocialNode()
            for entry in payload["r"]:
                users = frozenset(entry["users"])
                node.records[users] = InfluenceRecord(
                    users=users, last_seen=entry["t"], counter=float(entry["c"])
                )
            for key, child in payload["k"].items():
                kind, _, value = key.partition(":")
                lab = (kind, value if kind == "L" else int(value))
                node.children[lab] = dec(child)
            return node

        tree = cls()
        tree.root = dec(data["root"])
        tree.n_records = sum(1 for _ in _walk_records(tree.root))
        return tree

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "SocialTree":
        return cls.from_dict(json.loads(text))


def _walk_records(node: _SocialNode):
    yield from node.records.values()
    for child in node.children.values():
        yield from _walk_records(child)


@dataclass
class PredictOutcome:
    """Prediction plus the diagnostics needed to audit which path fired."""

    venue: str | None
    prob: float
    branch: str  # "main" | "trend"
    active_situation: bool
    threshold: float
    social_matched: bool


class SostModel:
    """Per-target social model: influence records, tie masses, trend view."""

    def __init__(
        self,
        target: str,
        neighbors: Iterable[str],
        config: SostConfig | None = None,
        trend: ContextTree | MergedContextView | None = None,
    ):
        self.target = target
        self.neighbors = frozenset(neighbors)
        self.config = config or SostConfig()
        self.social = SocialTree()
        self.trend = trend
        # raw co-location masses; influence_jaccard is scale invariant so
        # these never need normalizing
        self.tie_mass: dict[str, float] = {}
        self.influencers: set[str] = set()

    # -- training ----------------------------------------------------------

    def record_social_context(
        self,
        users: frozenset[str],
        venue: str,
        timestamp: int,
        cls: str | None = None,
    ) -> str | None:
        """Store one situation occurrence if its class is enabled.

        Returns the class that was recorded, or None when gated off.
        """
        users = frozenset(users) & (self.neighbors | {self.target})
        if cls is None:
            cls = classify_situation(users, self.target)
        if cls is None or cls not in self.config.classes:
            return None
        temporal = self.config.tree.temporal(timestamp)
        self.social.record(venue, temporal, users, timestamp, self.config)
        self.influencers.update(users - {self.target})
        return cls

    def add_tie_mass(self, friend: str, mass: float) -> None:
        if mass > 0.0:
            self.tie_mass[friend] = self.tie_mass.get(friend, 0.0) + mass

    def train_social(self, circle_events: Sequence[CheckIn]) -> None:
        """Batch trainer over a time-sorted stream of circle check-ins.

        Each event is matched against circle visits to the same venue in
        the preceding situation window, classified, and recorded.  Tie
        masses accumulate from week-window co-locations with the target.
        """
        recent: dict[str, list[tuple[int, str]]] = {}
        window = self.config.situation_window
        tie_window = self.config.tie_window
        circle = self.neighbors | {self.target}
        for ci in circle_events:
            if ci.user_id not in circle:
                continue
            visits = recent.setdefault(ci.venue_id, [])
            present = {u for ts, u in visits if ts >= ci.timestamp - window}
            present.add(ci.user_id)
            self.record_social_context(frozenset(present), ci.venue_id, ci.timestamp)
            if ci.user_id == self.target:
                for ts, u in visits:
                    if u != self.target and ts >= ci.timestamp - tie_window:
                        self.add_tie_mass(u, 1.0)
            else:
                n = sum(
                    1
                    for ts, u in visits
                    if u == self.target and ts >= ci.timestamp - tie_window
                )
                if n:
                    self.add_tie_mass(ci.user_id, float(n))
            visits.append((ci.timestamp, ci.user_id))
            if len(visits) > 64 and visits[0][0] < ci.timestamp - tie_window:
                recent[ci.venue_id] = [
                    (ts, u) for ts, u in visits if ts >= ci.timestamp - tie_window
                ]

    # -- estimation ---------------------------------------------------------

    def effective_counter(
        self,
        users_now: Iterable[str],
        venue: str,
        temporal: TemporalContext,
        now: int | None = None,
    ) -> float:
        found = self.social.query_node(venue, temporal)
        if found is None:
            return 0.0
        return SocialTree.effective_counter(
            found[0], users_now, self.tie_mass, now, self.config
        )

    def social_prob(
        self,
        venue: str,
        users_now: Iterable[str],
        temporal: TemporalContext,
        now: int | None = None,
        estimator: str | None = None,
    ) -> float:
        """Social probability mass for one venue under the active situation."""
        estimator = estimator or self.config.estimator
        found = self.social.query_node(venue, temporal)
        if found is None:
            return 0.0
        eta, path = found
        num = SocialTree.effective_counter(eta, users_now, self.tie_mass, now, self.config)
        if num <= 0.0:
            return 0.0
        if estimator == "B":
            den = SocialTree.raw_total(eta, now, self.config)
            return num / den if den > 0.0 else 0.0
        # estimator A: normalize over the node, its ancestors, and their
        # sibling nodes
        siblings: list[_SocialNode] = list(self.social.root.children.values())
        for parent in path[:-1]:
            siblings.extend(parent.children.values())
        den = float(len(siblings))
        for node in siblings:
            den += SocialTree.effective_counter(
                node, users_now, self.tie_mass, now, self.config
            )
        return num / den if den > 0.0 else 0.0

    def social_factors(
        self,
        candidates: Iterable[str],
        users_now: frozenset[str] | None,
        temporal: TemporalContext,
        now: int | None = None,
    ) -> dict[str, float] | None:
        """Multiplicative social factor per candidate venue.

        Returns None when no situation is active or no stored record
        matches the current one: every factor is then 1 and the model
        degrades to the individual component.
        """
        if not users_now or len(users_now) < 2:
            return None
        probs = {
            q: self.social_prob(q, users_now, temporal, now=now) for q in candidates
        }
        if all(p <= 0.0 for p in probs.values()):
            return None
        return probs

    def combined_prob(
        self,
        st_tree: ContextTree,
        venue: str,
        users_now: frozenset[str] | None,
        prev_venues: Sequence[str],
        timestamp: int,
    ) -> float:
        """Product of the social factor and the individual-mobility term."""
        key = st_tree.key(prev_venues, timestamp)
        dist, unseen = st_tree.distribution(key, candidates=(venue,))
        individual = dist[venue]
        cands = set(st_tree.alphabet) | set(self.social.venues_at(key.temporal))
        cands.add(venue)
        factors = self.social_factors(cands, users_now, key.temporal, now=timestamp)
        return individual if factors is None else factors[venue] * individual

    # -- prediction ----------------------------------------------------------

    def rank_with(
        self,
        key: ContextKey,
        dist: Mapping[str, float],
        unseen: float,
        timestamp: int,
        users_now: frozenset[str] | None = None,
    ) -> PredictOutcome:
        """Prediction given a precomputed individual distribution.

        ``dist``/``unseen`` must come from the individual tree at ``key``;
        the engine computes them once per event and shares them across
        model variants.  The main branch multiplies each candidate by its
        social factor; the trend model takes over when even the best
        candidate is no more likely than a never-seen venue would be (the
        gate threshold), that is, when the main model has no evidence
        above its uniform floor.
        """
        active = bool(users_now and len(users_now) >= 2)
        factors: dict[str, float] | None = None
        if active:
            social_venues = self.social.venues_at(key.temporal, users_now)
            if any(q not in dist for q in social_venues):
                dist = dict(dist)
                for q in social_venues:
                    dist.setdefault(q, unseen)
            factors = self.social_factors(
                dist.keys(), users_now, key.temporal, now=timestamp
            )
        matched = factors is not None
        best_q: str | None = None
        best_p = -1.0
        if factors is None:
            for q, p in dist.items():
                if p > best_p or (p == best_p and (best_q is None or q < best_q)):
                    best_q, best_p = q, p
        else:
            for q, p_ind in dist.items():
                p = p_ind * factors[q]
                if p > best_p or (p == best_p and (best_q is None or q < best_q)):
                    best_q, best_p = q, p
        threshold = unseen
        if self.config.enable_trend and best_p <= threshold:
            trend_pred = self._trend_prediction(key.spatial, timestamp)
            if trend_pred is not None:
                return PredictOutcome(
                    venue=trend_pred[0],
                    prob=trend_pred[1],
                    branch="trend",
                    active_situation=active,
                    threshold=threshold,
                    social_matched=matched,
                )
        if best_q is None:
            raise ModelEmpty("neither the individual nor the trend model has data")
        return PredictOutcome(
            venue=best_q,
            prob=best_p,
            branch="main",
            active_situation=active,
            threshold=threshold,
            social_matched=matched,
        )

    def _trend_prediction(
        self, spatial: Sequence[str], timestamp: int
    ) -> tuple[str, float] | None:
        if self.trend is None:
            return None
        tkey = ContextKey(
            spatial=tuple(spatial)[len(spatial) - self.config.tree.kappa :]
            if len(spatial) > self.config.tree.kappa
            else tuple(spatial),
            temporal=self.config.tree.temporal(timestamp),
        )
        try:
            ranked = self.trend.predict(tkey, limit=1)
        except ModelEmpty:
            return None
        return ranked[0] if ranked else None

    def predict_next(
        self,
        st_tree: ContextTree,
        prev_venues: Sequence[str],
        timestamp: int,
        users_now: frozenset[str] | None = None,
    ) -> PredictOutcome:
        """Best next venue, falling back to the general-trend model.

        The gate compares the best social-weighted individual probability
        against the mass a brand-new venue would receive; at or below that
        floor the trend model predicts instead.
        """
        if st_tree.alphabet:
            key = st_tree.key(prev_venues, timestamp)
            dist, unseen = st_tree.distribution(key)
            return self.rank_with(key, dist, unseen, timestamp, users_now)
        active = bool(users_now and len(users_now) >= 2)
        if self.config.enable_trend:
            trend_pred = self._trend_prediction(tuple(prev_venues), timestamp)
            if trend_pred is not None:
                return PredictOutcome(
                    venue=trend_pred[0],
                    prob=trend_pred[1],
                    branch="trend",
                    active_situation=active,
                    threshold=math.inf,
                    social_matched=False,
                )
        raise ModelEmpty("neither the individual nor the trend model has data")

    def with_config(self, **changes) -> "SostModel":
        clone = SostModel(
            self.target,
            self.neighbors,
            config=replace(self.config, **changes),
            trend=self.trend,
        )
        clone.tie_mass = self.tie_mass
        return clone
