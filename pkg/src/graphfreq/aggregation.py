"""Vertex aggregation by randomized greedy matching with singleton attachment.

Vertices are visited in a seeded Fisher-Yates permutation. An unmatched
vertex pairs with its unmatched neighbor of least dynamic degree (ties to the
smallest vertex index); dynamic degrees of both endpoints' neighborhoods are
then decremented. Vertices left unmatched join, in increasing vertex order,
the smallest adjacent aggregate (ties to the lowest aggregate index at that
moment). Aggregates are finally renumbered by ascending minimum vertex, which
fixes the vertex numbering of the quotient graph independently of visit order.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import GraphFormatError, GraphValidationError
from .graph import Graph, is_connected

__all__ = [
    "Aggregation",
    "AggregationStats",
    "build_aggregation",
    "aggregation_from_arrays",
    "quotient_graph",
    "aggregation_stats",
]


def _match_kernel(indptr, indices, degrees, order):
    n = degrees.shape[0]
    alive = np.ones(n, dtype=np.bool_)
    single = np.zeros(n, dtype=np.bool_)
    pair_a = np.empty(n // 2, dtype=np.int64)
    pair_b = np.empty(n // 2, dtype=np.int64)
    npairs = 0
    d = degrees.copy()
    for t in range(n):
        i = order[t]
        if not alive[i]:
            continue
        best = np.int64(-1)
        best_d = np.int64(1) << np.int64(62)
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            # neighbors scan in ascending index order, so strict '<' breaks
            # degree ties toward the smallest vertex index
            if alive[j] and d[j] < best_d:
                best_d = d[j]
                best = j
        if best >= 0:
            pair_a[npairs] = i
            pair_b[npairs] = best
            npairs += 1
            alive[i] = False
            alive[best] = False
            for p in range(indptr[i], indptr[i + 1]):
                d[indices[p]] -= 1
            for p in range(indptr[best], indptr[best + 1]):
                d[indices[p]] -= 1
        else:
            alive[i] = False
            single[i] = True
    return pair_a[:npairs], pair_b[:npairs], single


try:  # pragma: no cover - exercised when numba is installed
    from numba import njit

    _match_kernel = njit(cache=True)(_match_kernel)
except ImportError:  # pragma: no cover
    pass


@dataclass(frozen=True)
class Aggregation:
    """Partition of a graph's vertices into ordered, connected aggregates.

    ``members[offsets[k]:offsets[k + 1]]`` lists aggregate k's vertices in
    position order: position 0 is the matched pair's first vertex (the sum
    output slot), position 1 its partner (the difference slot), later
    positions are attached singletons. Aggregates are ordered by ascending
    minimum vertex.
    """

    graph_n: int
    offsets: np.ndarray   # int64, len count + 1
    members: np.ndarray   # int64, len graph_n
    agg_index: np.ndarray  # int64 per vertex
    agg_position: np.ndarray  # int64 per vertex

    @property
    def count(self) -> int:
        return len(self.offsets) - 1

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.diff(self.offsets)

    def aggregate(self, k: int) -> np.ndarray:
        return self.members[self.offsets[k]:self.offsets[k + 1]]

    def aggregates_as_lists(self) -> list[list[int]]:
        return [list(map(int, self.aggregate(k))) for k in range(self.count)]

    @classmethod
    def from_member_lists(cls, g: Graph, lists, *, validate: bool = True) -> "Aggregation":
        """Build from explicit per-aggregate vertex sequences (position order)."""
        n = g.vertex_count
        lists = [list(map(int, a)) for a in lists]
        if validate:
            flat = [v for a in lists for v in a]
            if sorted(flat) != list(range(n)):
                raise GraphValidationError("aggregates must partition the vertex set")
            for a in lists:
                if len(a) < 2 and n > 1:
                    raise GraphValidationError(f"aggregate {a} has size < 2")
                if not _members_connected(g, a):
                    raise GraphValidationError(f"aggregate {a} does not induce a connected subgraph")
        lists = sorted(lists, key=min)
        sizes = np.array([len(a) for a in lists], dtype=np.int64)
        offsets = np.zeros(len(lists) + 1, dtype=np.int64)
        np.cumsum(sizes, out=offsets[1:])
        members = np.fromiter((v for a in lists for v in a), dtype=np.int64, count=n)
        agg_index = np.empty(n, dtype=np.int64)
        agg_position = np.empty(n, dtype=np.int64)
        agg_index[members] = np.repeat(np.arange(len(lists), dtype=np.int64), sizes)
        agg_position[members] = np.arange(n, dtype=np.int64) - np.repeat(offsets[:-1], sizes)
        return cls(graph_n=n, offsets=offsets, members=members,
                   agg_index=agg_index, agg_position=agg_position)

    def to_text(self) -> str:
        """One line per aggregate: 1-based vertices in position order."""
        return "".join(
            " ".join(str(int(v) + 1) for v in self.aggregate(k)) + "\n"
            for k in range(self.count)
        )

    @classmethod
    def from_text(cls, g: Graph, text: str) -> "Aggregation":
        lists = []
        for ln, raw in enumerate(text.splitlines(), start=1):
            body = raw.split("#", 1)[0].strip()
            if not body:
                continue
            try:
                row = [int(t) - 1 for t in body.split()]
            except ValueError:
                raise GraphFormatError(f"line {ln}: non-integer vertex token") from None
            lists.append(row)
        return cls.from_member_lists(g, lists)


def aggregation_from_arrays(n: int, sizes: np.ndarray, members: np.ndarray) -> Aggregation:
    """Rebuild an Aggregation from stored size/member arrays (trusted input;
    the given aggregate order is preserved)."""
    sizes = np.asarray(sizes, dtype=np.int64)
    members = np.asarray(members, dtype=np.int64)
    offsets = np.zeros(len(sizes) + 1, dtype=np.int64)
    np.cumsum(sizes, out=offsets[1:])
    agg_index = np.empty(n, dtype=np.int64)
    agg_position = np.empty(n, dtype=np.int64)
    agg_index[members] = np.repeat(np.arange(len(sizes), dtype=np.int64), sizes)
    agg_position[members] = np.arange(n, dtype=np.int64) - np.repeat(offsets[:-1], sizes)
    return Aggregation(graph_n=n, offsets=offsets, members=members,
                       agg_index=agg_index, agg_position=agg_position)


def _members_connected(g: Graph, members: list[int]) -> bool:
    if len(members) == 1:
        return True
    inside = set(members)
    seen = {members[0]}
    stack = [members[0]]
    while stack:
        v = stack.pop()
        for nb in g.neighbors(v):
            nb = int(nb)
            if nb in inside and nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == len(members)


def _attach_singletons(g: Graph, pair_a, pair_b, single_mask) -> list[list[int]]:
    members: list[list[int]] = [[int(a), int(b)] for a, b in zip(pair_a, pair_b)]
    sizes = [2] * len(members)
    agg_of = np.full(g.vertex_count, -1, dtype=np.int64)
    for k, (a, b) in enumerate(zip(pair_a, pair_b)):
        agg_of[a] = k
        agg_of[b] = k
    for i in np.flatnonzero(single_mask):
        best = -1
        best_size = 1 << 62
        for j in g.neighbors(int(i)):
            k = int(agg_of[j])
            if k >= 0 and (sizes[k] < best_size or (sizes[k] == best_size and k < best)):
                best = k
                best_size = sizes[k]
        if best < 0:
            raise GraphValidationError(
                f"vertex {int(i) + 1} has no matched neighbor to attach to"
            )
        members[best].append(int(i))
        sizes[best] += 1
        agg_of[i] = best
    return members


def _build_with_order(g: Graph, order: np.ndarray) -> Aggregation:
    pair_a, pair_b, single = _match_kernel(
        g.indptr, g.indices, g.degrees.astype(np.int64), order.astype(np.int64)
    )
    members = _attach_singletons(g, pair_a, pair_b, single)
    return Aggregation.from_member_lists(g, members, validate=False)


def _build_with_rng(g: Graph, rng: np.random.RandomState,
                    forced_pairs=None) -> Aggregation:
    n = g.vertex_count
    if n == 1:
        return Aggregation.from_member_lists(g, [[0]], validate=False)
    if forced_pairs is None:
        return _build_with_order(g, rng.permutation(n))
    used: set[int] = set()
    pa: list[int] = []
    pb: list[int] = []
    for pair in forced_pairs:
        a, b = int(pair[0]), int(pair[1])
        if not (0 <= a < n and 0 <= b < n):
            raise GraphValidationError(f"forced pair ({a + 1}, {b + 1}) out of range")
        if a in used or b in used or a == b:
            raise GraphValidationError(f"forced pair ({a + 1}, {b + 1}) overlaps another pair")
        if not g.has_edge(a, b):
            raise GraphValidationError(f"forced pair ({a + 1}, {b + 1}) is not an edge")
        used.add(a)
        used.add(b)
        pa.append(a)
        pb.append(b)
    single = np.ones(n, dtype=bool)
    single[list(used)] = False
    members = _attach_singletons(g, np.array(pa, np.int64), np.array(pb, np.int64), single)
    return Aggregation.from_member_lists(g, members, validate=False)


def build_aggregation(g: Graph, seed: int = 0, forced_pairs=None, *,
                      check_connected: bool = True) -> Aggregation:
    """Aggregate a connected graph into matched pairs plus attached singletons.

    ``forced_pairs`` replaces the randomized matching phase with the given
    disjoint adjacent pairs (only the singleton pass runs), which makes
    fixtures reproducible. Identical (graph, seed, forced_pairs) inputs yield
    identical aggregations.
    """
    if check_connected and not is_connected(g):
        raise GraphValidationError("graph is disconnected; aggregation requires a connected graph")
    rng = np.random.RandomState(_seed_words(seed))
    return _build_with_rng(g, rng, forced_pairs)


def _seed_words(seed: int) -> np.ndarray:
    s = int(seed) % (1 << 64)
    return np.array([s & 0xFFFFFFFF, s >> 32], dtype=np.uint32)


def quotient_graph(g: Graph, agg: Aggregation) -> Graph:
    """Graph on aggregates: an edge wherever any cross edge exists."""
    eu, ev = g.edge_arrays
    au = agg.agg_index[eu]
    av = agg.agg_index[ev]
    mask = au != av
    count = agg.count
    if not np.any(mask):
        return Graph.from_edges(count, [], [], validate=False)
    lo = np.minimum(au[mask], av[mask])
    hi = np.maximum(au[mask], av[mask])
    keys = np.unique(lo * count + hi)
    return Graph.from_edges(count, keys // count, keys % count, validate=False)


@dataclass(frozen=True)
class AggregationStats:
    max_size: int
    size_histogram: dict[int, int]
    pair_fraction: float


def aggregation_stats(agg: Aggregation) -> AggregationStats:
    sizes = agg.sizes
    hist = dict(sorted(Counter(int(s) for s in sizes).items()))
    return AggregationStats(
        max_size=int(sizes.max()),
        size_histogram=hist,
        pair_fraction=float(np.count_nonzero(sizes == 2) / agg.count),
    )
