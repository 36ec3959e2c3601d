"""Mobile-homophily measures between pairs of users.

Spatial overlap (co-location counts, weekly co-location rate, cosine
similarity of visit vectors) and spatial-temporal overlap (the social
situation rate), each with optional venue weighting, plus the detector
for social situations (co-presence windows gated by the friendship
graph).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from . import kernels
from .core import (
    CheckIn,
    SocialSituation,
    Venue,
    WEEK_SECONDS,
    group_by_venue,
    home_location,
    haversine_km,
)
from .errors import InsufficientSpan, NoData, UnsupportedScheme

HOUR_SECONDS = 3_600

WEIGHT_KINDS = ("none", "density", "distance_from_home", "population", "entropy", "extra_role")


@dataclass(frozen=True, slots=True)
class WeightScheme:
    """Venue weighting applied to co-location style measures.

    ``density`` favors venues in dense areas, ``distance_from_home`` scales
    with the distance between the two users' homes, ``population`` and
    ``entropy`` damp busy public venues.  All weights are strictly positive.
    ``extra_role`` is a named placeholder without a defined formula and
    always raises UnsupportedScheme.
    """

    kind: str = "none"
    home_cell_m: float = 500.0

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ValueError(f"unknown weight scheme {self.kind!r}")


def _weight_fn(
    scheme: WeightScheme,
    venues: Mapping[str, Venue] | None,
    hist_i: Sequence[CheckIn],
    hist_j: Sequence[CheckIn],
) -> Callable[[str], float]:
    kind = scheme.kind
    if kind == "none":
        return lambda v: 1.0
    if kind == "extra_role":
        raise UnsupportedScheme(
            "the 'extra_role' weighting is a named placeholder with no defined formula"
        )
    if kind == "distance_from_home":
        hi = home_location(hist_i, cell_m=scheme.home_cell_m)
        hj = home_location(hist_j, cell_m=scheme.home_cell_m)
        w = math.log(2.0 + haversine_km(hi[0], hi[1], hj[0], hj[1]))
        return lambda v: w
    if venues is None:
        raise ValueError(f"scheme {kind!r} needs venue metadata")
    if kind == "density":
        return lambda v: math.log(2.0 + venues[v].density)
    if kind == "population":
        return lambda v: 1.0 / math.log(2.0 + venues[v].population)
    if kind == "entropy":
        return lambda v: 1.0 / (1.0 + venues[v].entropy)
    raise AssertionError(kind)


def colocation_count(
    hist_i: Sequence[CheckIn],
    hist_j: Sequence[CheckIn],
    window: int = WEEK_SECONDS,
    scheme: WeightScheme = WeightScheme(),
    venues: Mapping[str, Venue] | None = None,
) -> float:
    """Weighted count of same-venue visit pairs within the time window.

    For each venue both users visited, every pair of visits (one from each
    user) at most ``window`` seconds apart contributes the venue's weight.
    Disjoint venue sets give 0.
    """
    if not hist_i or not hist_j:
        return 0.0
    wf = _weight_fn(scheme, venues, hist_i, hist_j)
    by_i = group_by_venue(hist_i)
    by_j = group_by_venue(hist_j)
    total = 0.0
    for venue, ts_i in by_i.items():
        ts_j = by_j.get(venue)
        if ts_j:
            total += wf(venue) * kernels.count_pairs_within(ts_i, ts_j, window)
    return total


def weekly_visit_prob(
    history: Sequence[CheckIn], span: tuple[int, int]
) -> dict[str, float]:
    """Per-venue fraction of observation weeks with at least one visit."""
    start, end = span
    if end - start < WEEK_SECONDS:
        raise InsufficientSpan("observation span is shorter than one week")
    n_weeks = math.ceil((end - start + 1) / WEEK_SECONDS)
    weeks_seen: dict[str, set[int]] = {}
    for ci in history:
        wk = (ci.timestamp - start) // WEEK_SECONDS
        weeks_seen.setdefault(ci.venue_id, set()).add(wk)
    return {v: len(wks) / n_weeks for v, wks in weeks_seen.items()}


def scol_rate(
    hist_i: Sequence[CheckIn],
    hist_j: Sequence[CheckIn],
    span: tuple[int, int] | None = None,
) -> float:
    """Chance of an independent same-week co-location.

    Sums, over venues, the product of each user's per-week visit
    probabilities; the sum is clamped to 1 so the result stays a
    probability even for users with several near-certain venues.
    """
    if not hist_i or not hist_j:
        raise NoData("empty history")
    if span is None:
        ts = [c.timestamp for c in hist_i] + [c.timestamp for c in hist_j]
        span = (min(ts), max(ts))
    p_i = weekly_visit_prob(hist_i, span)
    p_j = weekly_visit_prob(hist_j, span)
    total = sum(p * p_j[v] for v, p in p_i.items() if v in p_j)
    return min(total, 1.0)


def spatial_cosine(
    hist_i: Sequence[CheckIn],
    hist_j: Sequence[CheckIn],
    scheme: WeightScheme = WeightScheme(),
    venues: Mapping[str, Venue] | None = None,
) -> float:
    """Cosine similarity of the users' weighted per-venue visit counts."""
    if not hist_i or not hist_j:
        raise NoData("empty history")
    wf = _weight_fn(scheme, venues, hist_i, hist_j)
    ci = {v: len(ts) for v, ts in group_by_venue(hist_i).items()}
    cj = {v: len(ts) for v, ts in group_by_venue(hist_j).items()}
    dot = 0.0
    for v, n in ci.items():
        if v in cj:
            w = wf(v)
            dot += (w * n) * (w * cj[v])
    norm_i = math.sqrt(sum((wf(v) * n) ** 2 for v, n in ci.items()))
    norm_j = math.sqrt(sum((wf(v) * n) ** 2 for v, n in cj.items()))
    if norm_i == 0.0 or norm_j == 0.0:
        return 0.0
    return min(dot / (norm_i * norm_j), 1.0)


def social_situation_rate(
    hist_i: Sequence[CheckIn],
    hist_j: Sequence[CheckIn],
    window: int = HOUR_SECONDS,
    scheme: WeightScheme = WeightScheme(),
    venues: Mapping[str, Venue] | None = None,
) -> float:
    """Share of temporally close visit pairs that are also co-located.

    Numerator: same-venue visit pairs within the window, weighted by the
    venue weight.  Denominator: all visit pairs within the window whatever
    the venues, each weighted by the geometric mean of the two venue
    weights (which reduces to the venue weight for co-located pairs, so the
    rate stays in [0, 1]).  Returns 0 when the users never overlap in time.
    """
    if not hist_i or not hist_j:
        raise NoData("empty history")
    wf = _weight_fn(scheme, venues, hist_i, hist_j)

    num = 0.0
    by_i = group_by_venue(hist_i)
    by_j = group_by_venue(hist_j)
    for venue, ts_i in by_i.items():
        ts_j = by_j.get(venue)
        if ts_j:
            num += wf(venue) * kernels.count_pairs_within(ts_i, ts_j, window)

    sorted_i = sorted(hist_i, key=lambda c: c.timestamp)
    sorted_j = sorted(hist_j, key=lambda c: c.timestamp)
    ts_a = [c.timestamp for c in sorted_i]
    ts_b = [c.timestamp for c in sorted_j]
    wa = [math.sqrt(wf(c.venue_id)) for c in sorted_i]
    wb = [math.sqrt(wf(c.venue_id)) for c in sorted_j]
    den = kernels.count_pairs_within_weighted(ts_a, ts_b, window, wa, wb)
    if den <= 0.0:
        return 0.0
    return min(num / den, 1.0)


def _maximal_windows(
    events: Sequence[tuple[int, str]], window: int
) -> list[tuple[int, int]]:
    """Maximal [i, j] index ranges whose timestamps span at most ``window``.

    ``events`` must be sorted by timestamp.  A range is kept only when it is
    not contained in the previous one, which is exactly the set of maximal
    windows of the sliding scan.
    """
    out = []
    n = len(events)
    hi = 0
    prev_hi = -1
    for lo in range(n):
        limit = events[lo][0] + window
        if hi < lo:
            hi = lo
        while hi < n and events[hi][0] <= limit:
            hi += 1
        if hi - 1 > prev_hi or lo == 0:
            out.append((lo, hi - 1))
            prev_hi = hi - 1
    return out


def detect_social_situations(dataset, window: int = HOUR_SECONDS) -> list[SocialSituation]:
    """Find co-presence situations among friends.

    For each venue, every maximal sliding window of length ``window`` is
    examined; participants are split into connected components of the
    friendship graph, and each component with two or more users becomes a
    situation.  Users co-located with strangers only are not reported here
    (they surface per-target as individual influence factors downstream).
    Output is sorted by (window_start, venue_id).
    """
    graph = dataset.graph
    by_venue: dict[str, list[tuple[int, str]]] = {}
    for ci in dataset.checkins:
        by_venue.setdefault(ci.venue_id, []).append((ci.timestamp, ci.user_id))
    situations: list[SocialSituation] = []
    for venue in sorted(by_venue):
        events = sorted(by_venue[venue])
        for lo, hi in _maximal_windows(events, window):
            chunk = events[lo : hi + 1]
            users = {u for _, u in chunk}
            if len(users) < 2:
                continue
            for comp in _friend_components(graph, users):
                if len(comp) < 2:
                    continue
                ts = [t for t, u in chunk if u in comp]
                situations.append(
                    SocialSituation(
                        participants=frozenset(comp),
                        venue_id=venue,
                        window_start=min(ts),
                        window_end=max(ts),
                    )
                )
    uniq = {(s.participants, s.venue_id, s.window_start, s.window_end): s for s in situations}
    return sorted(
        uniq.values(), key=lambda s: (s.window_start, s.venue_id, sorted(s.participants))
    )


def _friend_components(graph, users: set[str]) -> list[set[str]]:
    remaining = {u for u in users if u in graph}
    comps = []
    while remaining:
        seed = min(remaining)
        comp = {seed}
        frontier = [seed]
        remaining.discard(seed)
        while frontier:
            u = frontier.pop()
            for v in graph.neighbors(u) & remaining:
                comp.add(v)
                remaining.discard(v)
                frontier.append(v)
        comps.append(comp)
    return comps
