"""Loading and describing check-in corpora.

File formats
------------
Check-in file: CSV with header ``user_id,venue_id,timestamp,lat,lon``;
UTF-8; timestamps are integer seconds.  Edge file: CSV with header
``user_a,user_b``, one undirected edge per row; duplicates are ignored.

Loading derives per-venue population, entropy and density, builds the
friendship graph, and marks the active users (those with at least
``activity_threshold`` check-ins).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from . import cohesion
from .core import (
    CheckIn,
    SocialGraph,
    Venue,
    entropy_nats,
    haversine_km,
    histories_by_user,
    user_entropy,
)
from .errors import IntegrityError, NoData, ParseError

CHECKIN_HEADER = ["user_id", "venue_id", "timestamp", "lat", "lon"]
EDGE_HEADER = ["user_a", "user_b"]


@dataclass(frozen=True)
class IngestConfig:
    """Knobs for dataset derivation.

    ``density_radius_m`` bounds the neighborhood used for venue density;
    ``activity_threshold`` is the minimum check-in count for a user to be
    considered active.
    """

    activity_threshold: int = 50
    density_radius_m: float = 200.0
    utc_offset_hours: float = -8.0


@dataclass(frozen=True)
class Dataset:
    """A loaded corpus: time-sorted check-ins, venues, graph, active users."""

    checkins: tuple[CheckIn, ...]
    venues: dict[str, Venue]
    graph: SocialGraph
    active_users: frozenset[str]
    config: IngestConfig = field(default_factory=IngestConfig)

    def histories(self) -> dict[str, list[CheckIn]]:
        return histories_by_user(self.checkins)

    def span(self) -> tuple[int, int]:
        if not self.checkins:
            raise NoData("empty dataset")
        return (self.checkins[0].timestamp, self.checkins[-1].timestamp)


def load_checkins(path: str | Path) -> list[CheckIn]:
    rows: list[CheckIn] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return rows
        if [h.strip() for h in header] != CHECKIN_HEADER:
            raise ParseError(f"bad check-in header {header!r}", line_no=1)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise ParseError(f"expected 5 fields, got {len(row)}", line_no)
            try:
                rows.append(
                    CheckIn(
                        user_id=row[0],
                        venue_id=row[1],
                        timestamp=int(row[2]),
                        lat=float(row[3]),
                        lon=float(row[4]),
                    )
                )
            except (ValueError, TypeError) as exc:
                raise ParseError(str(exc), line_no) from exc
    return rows


def load_edges(path: str | Path) -> set[tuple[str, str]]:
    edges: set[tuple[str, str]] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return edges
        if [h.strip() for h in header] != EDGE_HEADER:
            raise ParseError(f"bad edge header {header!r}", line_no=1)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", line_no)
            a, b = row[0], row[1]
            if a == b:
                raise ParseError(f"self-loop on {a!r}", line_no)
            edges.add((min(a, b), max(a, b)))
    return edges


def _venue_density(coords: dict[str, tuple[float, float]], radius_m: float) -> dict[str, int]:
    """Venues within radius_m of each venue, bucketed to avoid O(n^2)."""
    radius_km = radius_m / 1000.0
    # bucket size just above the radius in degrees of latitude
    step = max(radius_km / 111.32, 1e-9)
    buckets: dict[tuple[int, int], list[str]] = {}
    for vid, (lat, lon) in coords.items():
        key = (math.floor(lat / step), math.floor(lon / step))
        buckets.setdefault(key, []).append(vid)
    density = dict.fromkeys(coords, 0)
    for (bi, bj), members in buckets.items():
        nearby: list[str] = []
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                nearby.extend(buckets.get((bi + di, bj + dj), ()))
        for vid in members:
            lat, lon = coords[vid]
            n = 0
            for other in nearby:
                if other == vid:
                    continue
                olat, olon = coords[other]
                if haversine_km(lat, lon, olat, olon) * 1000.0 <= radius_m:
                    n += 1
            density[vid] = n
    return density


def build_dataset(
    checkins: Iterable[CheckIn],
    edges: Iterable[tuple[str, str]],
    config: IngestConfig | None = None,
) -> Dataset:
    """Assemble a Dataset from in-memory records, deriving venue statistics."""
    config = config or IngestConfig()
    ordered = tuple(sorted(checkins, key=lambda c: (c.timestamp, c.user_id, c.venue_id)))

    coords: dict[str, tuple[float, float]] = {}
    visitors: dict[str, dict[str, int]] = {}
    for ci in ordered:
        prev = coords.get(ci.venue_id)
        if prev is None:
            coords[ci.venue_id] = (ci.lat, ci.lon)
        elif haversine_km(prev[0], prev[1], ci.lat, ci.lon) * 1000.0 > 1.0:
            raise IntegrityError(
                f"venue {ci.venue_id!r} appears with conflicting coordinates"
            )
        visitors.setdefault(ci.venue_id, {})
        visitors[ci.venue_id][ci.user_id] = visitors[ci.venue_id].get(ci.user_id, 0) + 1

    density = _venue_density(coords, config.density_radius_m)
    venues = {
        vid: Venue(
            venue_id=vid,
            lat=coords[vid][0],
            lon=coords[vid][1],
            population=len(visitors[vid]),
            entropy=entropy_nats(visitors[vid].values()),
            density=density[vid],
        )
        for vid in coords
    }

    users_seen = {ci.user_id for ci in ordered}
    graph = SocialGraph(edges, nodes=users_seen)

    per_user: dict[str, int] = {}
    for ci in ordered:
        per_user[ci.user_id] = per_user.get(ci.user_id, 0) + 1
    active = frozenset(u for u, n in per_user.items() if n >= config.activity_threshold)

    return Dataset(
        checkins=ordered,
        venues=venues,
        graph=graph,
        active_users=active,
        config=config,
    )


def load_dataset(
    checkin_path: str | Path,
    edges_path: str | Path,
    config: IngestConfig | None = None,
) -> Dataset:
    return build_dataset(load_checkins(checkin_path), load_edges(edges_path), config)


def save_checkins(checkins: Sequence[CheckIn], path: str | Path) -> None:
    """Write check-ins in the canonical CSV format (exact float round-trip)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CHECKIN_HEADER)
        for ci in checkins:
            writer.writerow([ci.user_id, ci.venue_id, ci.timestamp, repr(ci.lat), repr(ci.lon)])


def save_edges(edges: Iterable[tuple[str, str]], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(EDGE_HEADER)
        for a, b in sorted((min(e), max(e)) for e in edges):
            writer.writerow([a, b])


def save_dataset(dataset: Dataset, checkin_path: str | Path, edges_path: str | Path) -> None:
    save_checkins(dataset.checkins, checkin_path)
    save_edges(dataset.graph.edges(), edges_path)


def _mean_std(values: Sequence[float]) -> dict[str, float]:
    n = len(values)
    if n == 0:
        return {"mean": 0.0, "std": 0.0}
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / n
    return {"mean": mean, "std": math.sqrt(var)}


def descriptive_stats(
    dataset: Dataset,
    path_length_samples: int = 50,
    seed: int = 0,
) -> dict:
    """Corpus-level descriptive statistics.

    Averages that vary per user or venue are reported as mean/std pairs.
    The "degree of repetition" entry is interpretive: average check-ins per
    user-location pair minus one (repeat visits beyond the first).
    """
    if not dataset.checkins:
        raise NoData("empty dataset")
    histories = dataset.histories()
    g = dataset.graph

    checkins_per_user = [float(len(h)) for h in histories.values()]
    locations_per_user = [float(len({c.venue_id for c in h})) for h in histories.values()]
    entropies = [user_entropy(h) for h in histories.values()]

    per_venue_checkins: dict[str, int] = {}
    per_venue_users: dict[str, set[str]] = {}
    for ci in dataset.checkins:
        per_venue_checkins[ci.venue_id] = per_venue_checkins.get(ci.venue_id, 0) + 1
        per_venue_users.setdefault(ci.venue_id, set()).add(ci.user_id)
    checkins_per_location = [float(n) for n in per_venue_checkins.values()]
    users_per_location = [float(len(s)) for s in per_venue_users.values()]
    location_entropies = [v.entropy for v in dataset.venues.values()]

    pair_counts: list[float] = []
    for h in histories.values():
        per_venue: dict[str, int] = {}
        for ci in h:
            per_venue[ci.venue_id] = per_venue.get(ci.venue_id, 0) + 1
        pair_counts.extend(float(n) for n in per_venue.values())
    repetition = [c - 1.0 for c in pair_counts]

    start, end = dataset.span()
    days = max((end - start) / 86_400.0, 1e-9)

    stats: dict = {
        "n_users": len(g.nodes),
        "n_edges": g.edge_count,
        "n_active_users": len(dataset.active_users),
        "avg_degree": (2.0 * g.edge_count / len(g.nodes)) if len(g.nodes) else 0.0,
        "n_locations": len(dataset.venues),
        "n_checkins": len(dataset.checkins),
        "avg_checkins_per_user_day": len(dataset.checkins) / max(len(histories), 1) / days,
        "clustering_coefficient": cohesion.clustering_coefficient(g) if len(g.nodes) else 0.0,
        "avg_checkins_per_location": _mean_std(checkins_per_location),
        "avg_checkins_per_user": _mean_std(checkins_per_user),
        "avg_locations_per_user": _mean_std(locations_per_user),
        "avg_users_per_location": _mean_std(users_per_location),
        "avg_checkins_per_user_location": _mean_std(pair_counts),
        "avg_degree_of_repetition": _mean_std(repetition),
        "avg_user_entropy": _mean_std(entropies),
        "avg_location_entropy": _mean_std(location_entropies),
    }
    if g.edge_count > 0:
        mean, std = cohesion.avg_path_length(g, sample_size=path_length_samples, seed=seed)
        stats["mean_avg_path_length"] = {"mean": mean, "std": std}
    return stats


def stats_to_json(stats: dict) -> str:
    return json.dumps(stats, indent=2, sort_keys=True)


def dataset_from_strings(checkin_csv: str, edge_csv: str, config: IngestConfig | None = None) -> Dataset:
    """Test helper: build a dataset from CSV text blobs."""
    checkins: list[CheckIn] = []
    reader = csv.reader(io.StringIO(checkin_csv.strip()))
    header = next(reader, None)
    if header and [h.strip() for h in header] != CHECKIN_HEADER:
        raise ParseError(f"bad check-in header {header!r}", line_no=1)
    for row in reader:
        if row:
            checkins.append(
                CheckIn(row[0], row[1], int(row[2]), float(row[3]), float(row[4]))
            )
    edges: set[tuple[str, str]] = set()
    reader = csv.reader(io.StringIO(edge_csv.strip()))
    header = next(reader, None)
    for row in reader:
        if row:
            edges.add((min(row[0], row[1]), max(row[0], row[1])))
    return build_dataset(checkins, edges, config)
