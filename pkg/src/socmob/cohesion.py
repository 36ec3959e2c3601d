"""Social-cohesion measurements and cohesive-subgroup enumeration.

Pairwise metrics (common neighbors, Adamic-Adar, Jaccard, degree of
cliquishness), whole-graph baselines (clustering coefficient, sampled
path length, Poisson random graphs), maximal clique and 2-plex
enumeration, and the internal/boundary density ratio used to score
subgroups.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass
from typing import Iterator, Sequence

from .core import SocialGraph
from .errors import UnknownNode


@dataclass(frozen=True, slots=True)
class Subgroup:
    """A maximal cohesive subgroup (clique or 2-plex) with its cohesion score."""

    members: frozenset[str]
    kind: str  # "clique" | "two_plex"
    cohesion: float

    def __post_init__(self):
        if self.kind not in ("clique", "two_plex"):
            raise ValueError(f"bad subgroup kind {self.kind!r}")
        if len(self.members) < 3:
            raise ValueError("subgroups have at least 3 members")


def common_neighbors(g: SocialGraph, i: str, j: str) -> int:
    """|N(i) ∩ N(j)|."""
    return len(g.neighbors(i) & g.neighbors(j))


def adamic_adar(g: SocialGraph, i: str, j: str) -> float:
    """Common neighbors, each damped by the inverse log of its degree.

    Neighbors of degree 1 are skipped (1/ln 1 is undefined); for distinct
    i and j every common neighbor has degree >= 2, so the guard only
    matters defensively.
    """
    score = 0.0
    for k in g.neighbors(i) & g.neighbors(j):
        d = g.degree(k)
        if d > 1:
            score += 1.0 / math.log(d)
    return score


def jaccard_users(g: SocialGraph, i: str, j: str) -> float:
    """|N(i) ∩ N(j)| / |N(i) ∪ N(j)|, 0 when both neighborhoods are empty."""
    ni, nj = g.neighbors(i), g.neighbors(j)
    union = len(ni | nj)
    if union == 0:
        return 0.0
    return len(ni & nj) / union


def degree_of_cliquishness(g: SocialGraph, i: str, j: str) -> float:
    """Edge density among the combined neighborhoods of i and j.

    Operationalizes "how cohesive a group do the friends of the two users
    form": the fraction of realized edges among N(i) ∪ N(j) \\ {i, j}.
    """
    group = (g.neighbors(i) | g.neighbors(j)) - {i, j}
    n = len(group)
    if n < 2:
        return 0.0
    edges = 0
    members = sorted(group)
    for a_idx, a in enumerate(members):
        na = g.neighbors(a)
        for b in members[a_idx + 1 :]:
            if b in na:
                edges += 1
    return edges / (n * (n - 1) / 2)


def local_clustering(g: SocialGraph, v: str) -> float:
    neigh = sorted(g.neighbors(v))
    d = len(neigh)
    if d < 2:
        return 0.0
    links = 0
    for idx, a in enumerate(neigh):
        na = g.neighbors(a)
        for b in neigh[idx + 1 :]:
            if b in na:
                links += 1
    return links / (d * (d - 1) / 2)


def clustering_coefficient(g: SocialGraph) -> float:
    """Average local clustering coefficient (Watts-Strogatz)."""
    nodes = g.nodes
    if not nodes:
        return 0.0
    return sum(local_clustering(g, v) for v in nodes) / len(nodes)


def avg_path_length(
    g: SocialGraph, sample_size: int = 50, seed: int = 0
) -> tuple[float, float]:
    """Mean and std of shortest-path lengths, BFS from sampled sources.

    Only reachable pairs contribute.  Sampling without replacement when the
    graph is small enough, deterministic per seed.
    """
    nodes = sorted(g.nodes)
    if not nodes or g.edge_count == 0:
        raise UnknownNode("path length needs a graph with at least one edge")
    rng = random.Random(seed)
    if sample_size >= len(nodes):
        sources = nodes
    else:
        sources = rng.sample(nodes, sample_size)
    total = 0.0
    total_sq = 0.0
    count = 0
    for src in sources:
        dist = {src: 0}
        q = deque([src])
        while q:
            u = q.popleft()
            du = dist[u]
            for v in g.neighbors(u):
                if v not in dist:
                    dist[v] = du + 1
                    q.append(v)
        for v, d in dist.items():
            if v != src:
                total += d
                total_sq += d * d
                count += 1
    if count == 0:
        return (0.0, 0.0)
    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0)
    return (mean, math.sqrt(var))


def poisson_random_graph(n: int, avg_degree: float, seed: int = 0) -> SocialGraph:
    """Erdős–Rényi G(n, p) with p chosen to match the target average degree."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if not 0 <= avg_degree <= n - 1:
        raise ValueError(f"avg_degree must be in [0, n-1], got {avg_degree}")
    p = avg_degree / (n - 1)
    rng = random.Random(seed)
    names = [f"n{i}" for i in range(n)]
    edges = []
    if p >= 1.0:
        edges = [(names[i], names[j]) for i in range(n) for j in range(i + 1, n)]
    elif p > 0.0:
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < p:
                    edges.append((names[i], names[j]))
    return SocialGraph(edges, nodes=names)


# --- maximal clique enumeration (Bron–Kerbosch with pivoting) ---------------


def _bron_kerbosch(
    adj: dict[str, frozenset[str]],
    r: set[str],
    p: set[str],
    x: set[str],
    out: list[frozenset[str]],
    cap: int | None,
) -> bool:
    """Emit maximal cliques; returns False when the cap was hit."""
    if cap is not None and len(out) >= cap:
        return False
    if not p and not x:
        out.append(frozenset(r))
        return True
    pivot = max(p | x, key=lambda u: (len(adj[u] & p), u))
    for v in sorted(p - adj[pivot]):
        if not _bron_kerbosch(adj, r | {v}, p & adj[v], x & adj[v], out, cap):
            return False
        p.discard(v)
        x.add(v)
    return True


def enumerate_cliques(
    g: SocialGraph, min_size: int = 3, max_count: int | None = None
) -> tuple[list[Subgroup], bool]:
    """All maximal cliques with at least ``min_size`` members.

    Returns (subgroups, truncated).  When ``max_count`` is reached the
    enumeration stops and the truncated flag is set.
    """
    adj = {u: g.neighbors(u) for u in g.nodes}
    found: list[frozenset[str]] = []
    complete = _bron_kerbosch(adj, set(), set(g.nodes), set(), found, max_count)
    members = sorted(
        (m for m in found if len(m) >= min_size), key=lambda m: (len(m), sorted(m))
    )
    groups = [
        Subgroup(members=m, kind="clique", cohesion=_safe_cohesion(g, m))
        for m in members
    ]
    return groups, not complete


def _safe_cohesion(g: SocialGraph, members: frozenset[str]) -> float:
    # a subgroup spanning the whole graph has no boundary at all
    if members == g.nodes:
        return math.inf
    return group_cohesion(g, members)


# --- maximal 2-plex enumeration ---------------------------------------------


def _is_plex_with(adj, members: set[str], deg_in: dict[str, int], v: str, k: int) -> bool:
    """Would members | {v} still be a k-plex?"""
    nv = adj[v]
    size = len(members) + 1
    dv = 0
    for u in members:
        if u in nv:
            dv += 1
        elif deg_in[u] < size - k:
            # u would fall below the required in-group degree
            return False
    return dv >= size - k


def _plex_extend(
    adj,
    members: set[str],
    deg_in: dict[str, int],
    cand: list[str],
    excl: list[str],
    k: int,
    min_size: int,
    seen: set[frozenset[str]],
    out: list[frozenset[str]],
    cap: int | None,
) -> bool:
    if cap is not None and len(out) >= cap:
        return False
    viable_cand = [v for v in cand if _is_plex_with(adj, members, deg_in, v, k)]
    if not viable_cand:
        if len(members) >= min_size and not any(
            _is_plex_with(adj, members, deg_in, v, k) for v in excl
        ):
            fs = frozenset(members)
            if fs not in seen:
                seen.add(fs)
                out.append(fs)
        return True
    # when viable candidates remain, the current set is extendable and hence
    # not maximal, so emission only ever happens in the branch above
    new_excl = list(excl)
    for idx, v in enumerate(viable_cand):
        nv = adj[v]
        members.add(v)
        for u in members:
            if u in nv:
                deg_in[u] += 1
        deg_in[v] = sum(1 for u in members if u in nv and u != v)
        ok = _plex_extend(
            adj,
            members,
            deg_in,
            viable_cand[idx + 1 :],
            new_excl,
            k,
            min_size,
            seen,
            out,
            cap,
        )
        for u in members:
            if u in nv and u != v:
                deg_in[u] -= 1
        del deg_in[v]
        members.discard(v)
        if not ok:
            return False
        new_excl.append(v)
    return True


def enumerate_two_plexes(
    g: SocialGraph, min_size: int = 3, max_count: int | None = None
) -> tuple[list[Subgroup], bool]:
    """All maximal 2-plexes with at least ``min_size`` members.

    Binary include/exclude search over an ordered vertex list, pruned by
    the plex degree condition (membership is hereditary, so partial sets
    can be extended safely).  Returns (subgroups, truncated).
    """
    adj = {u: g.neighbors(u) for u in g.nodes}
    nodes = sorted(g.nodes)
    seen: set[frozenset[str]] = set()
    found: list[frozenset[str]] = []
    complete = True
    for idx, v in enumerate(nodes):
        members = {v}
        deg_in = {v: 0}
        # candidates restricted to later vertices keeps each maximal plex
        # reachable from its lexicographically smallest member
        if not _plex_extend(
            adj, members, deg_in, nodes[idx + 1 :], nodes[:idx], 2, min_size, seen, found, max_count
        ):
            complete = False
            break
    # the no-extender emission test already guarantees maximality: 2-plexes
    # are closed under subsets, so any proper superset is reachable one
    # vertex at a time
    members_sorted = sorted(set(found), key=lambda m: (len(m), sorted(m)))
    groups = [
        Subgroup(members=m, kind="two_plex", cohesion=_safe_cohesion(g, m))
        for m in members_sorted
    ]
    return groups, not complete


def is_clique(g: SocialGraph, members: frozenset[str] | set[str]) -> bool:
    ms = sorted(members)
    for i, a in enumerate(ms):
        na = g.neighbors(a)
        for b in ms[i + 1 :]:
            if b not in na:
                return False
    return True


def is_two_plex(g: SocialGraph, members: frozenset[str] | set[str]) -> bool:
    size = len(members)
    for u in members:
        if len(g.neighbors(u) & members) < size - 2:
            return False
    return True


def group_cohesion(g: SocialGraph, members: frozenset[str] | set[str]) -> float:
    """Internal edge density divided by boundary edge density.

    Directed-count convention over a symmetric adjacency: the numerator
    normalizes ordered in-group pairs by |U|(|U|-1), the denominator
    normalizes group-to-outside pairs by |U|(|V\\U|-1).  A subgroup with no
    boundary edges scores +inf (a distinguished sentinel, not an error).
    """
    members = frozenset(members)
    n_in = len(members)
    if n_in < 2:
        raise ValueError("group cohesion needs at least 2 members")
    outside = g.nodes - members
    if not outside:
        raise ValueError("group must be a proper subset of the graph")
    internal = 0
    boundary = 0
    for u in members:
        nu = g.neighbors(u)
        internal += len(nu & members)
        boundary += len(nu - members)
    # internal already counts ordered pairs (each edge twice)
    num = internal / (n_in * (n_in - 1))
    if boundary == 0:
        return math.inf
    boundary_norm = n_in * (len(outside) - 1)
    if boundary_norm == 0:
        return 0.0
    return num / (boundary / boundary_norm)


def subgroups_to_jsonl(groups: Sequence[Subgroup]) -> Iterator[str]:
    import json

    for sg in groups:
        yield json.dumps(
            {
                "members": sorted(sg.members),
                "kind": sg.kind,
                "cohesion": None if math.isinf(sg.cohesion) else sg.cohesion,
            },
            sort_keys=True,
        )
