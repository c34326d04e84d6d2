"""Multilevel orthogonal frequency transform on connected graphs.

A plan stacks, per level j, an aggregation of the current quotient graph and
one orthonormal eigenbasis per aggregate. The same level-j structure applies
to each of the 2^j working channels. Applying a level turns every channel of
length n_j into a sum channel and a difference channel of length n_{j+1}
(old channel c yields new channels 2c and 2c+1) plus ``leftover`` finalized
coefficients per channel; finalized blocks are prepended to the tail in
channel-descending order, so the final layout is::

    [ channel 0 | ... | channel 2^(J+1)-1 | level-J stars | ... | level-0 stars ]

The implied change of basis is orthogonal; the recursion stops when the
quotient has a single vertex.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .aggregation import (
    Aggregation,
    _build_with_rng,
    _seed_words,
    aggregation_from_arrays,
    quotient_graph,
)
from .errors import (
    ChecksumMismatchError,
    FormatError,
    GraphValidationError,
    TruncatedPayloadError,
)
from .graph import Graph, as_signal, induced_subgraph, is_connected
from .hashutil import fnv1a64
from .localspectral import (
    DEFAULT_SIZE_CAP,
    DICTIONARY_MAX_SIZE,
    HAAR,
    HAAR_EIGENVALUES,
    LocalBasis,
    _pattern_basis,
    local_eigenbasis,
)

__all__ = [
    "SPINE",
    "DENSE_GUARD",
    "SizeGroup",
    "LevelTransform",
    "TransformPlan",
    "FrequencyVector",
    "PlanSummary",
    "build_plan",
    "forward",
    "inverse",
    "assemble_dense_basis",
    "band_of",
    "plan_summary",
    "encode_plan_body",
    "decode_plan_body",
]

SPINE = "spine"
DENSE_GUARD = 4096
# magic + version byte + trailing checksum in the plan file framing
PLAN_FILE_OVERHEAD = 13


@dataclass(frozen=True)
class SizeGroup:
    """All aggregates of one size at one level, stacked for batched apply."""

    size: int
    agg_ids: np.ndarray      # (g,) ascending aggregate numbers
    members: np.ndarray      # (g, size) channel-local vertex ids, position order
    matrices: np.ndarray     # (g, size, size), columns ascending by eigenvalue
    eigenvalues: np.ndarray  # (g, size)
    star_slots: np.ndarray   # (g, size - 2) slots in the channel star block


@dataclass(frozen=True)
class LevelTransform:
    level: int
    level_graph_size: int       # n_j
    aggregation: Aggregation
    next_size: int              # n_{j+1}
    leftover: int               # n_j - 2 n_{j+1}
    channel_count: int          # 2^j
    size_groups: tuple[SizeGroup, ...]

    def basis_for(self, k: int) -> LocalBasis:
        """LocalBasis of aggregate k at this level."""
        size = int(self.aggregation.sizes[k])
        for grp in self.size_groups:
            if grp.size == size:
                gi = int(np.searchsorted(grp.agg_ids, k))
                return LocalBasis(size, grp.matrices[gi].copy(),
                                  grp.eigenvalues[gi].copy())
        raise KeyError(k)


@dataclass(frozen=True)
class TransformPlan:
    n: int
    levels: tuple[LevelTransform, ...]
    tail_sizes: tuple[int, ...]       # m_0 .. m_{J+1}
    band_map: np.ndarray              # int64 per coefficient, -1 == spine
    observed_max_aggregate: int
    seed: int
    checksum: int

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    @property
    def level_sizes(self) -> tuple[int, ...]:
        """n_0 .. n_{J+1}."""
        if not self.levels:
            return (self.n,)
        return tuple(lv.level_graph_size for lv in self.levels) + (self.levels[-1].next_size,)


@dataclass(frozen=True)
class FrequencyVector:
    """Coefficients in the plan's frequency basis, bound by plan checksum."""

    coefficients: np.ndarray
    plan_checksum: int


@dataclass(frozen=True)
class PlanSummary:
    n: int
    depth: Optional[int]              # J; None for the zero-level plan
    level_sizes: tuple[int, ...]
    tail_sizes: tuple[int, ...]
    max_aggregate_size: int
    storage_bytes: int


def _level_from_flat(level_idx: int, n_j: int, agg: Aggregation,
                     eig_flat: np.ndarray, mat_flat: np.ndarray) -> LevelTransform:
    """Group per-aggregate flat eigen data into stacked SizeGroups.

    This is the single canonical grouping used by both the builder and the
    plan loader, so rebuilt plans apply bit-identically.
    """
    sizes = agg.sizes
    offsets = agg.offsets
    sq_off = np.zeros(agg.count + 1, dtype=np.int64)
    np.cumsum(sizes * sizes, out=sq_off[1:])
    star_off = np.zeros(agg.count + 1, dtype=np.int64)
    np.cumsum(np.maximum(sizes - 2, 0), out=star_off[1:])
    groups = []
    for s in np.unique(sizes):
        s = int(s)
        ids = np.flatnonzero(sizes == s)
        members = agg.members[offsets[ids][:, None] + np.arange(s)]
        matrices = mat_flat[sq_off[ids][:, None] + np.arange(s * s)].reshape(-1, s, s)
        eigenvalues = eig_flat[offsets[ids][:, None] + np.arange(s)]
        if s > 2:
            star_slots = star_off[ids][:, None] + np.arange(s - 2)
        else:
            star_slots = np.zeros((len(ids), 0), dtype=np.int64)
        groups.append(SizeGroup(size=s, agg_ids=ids, members=members,
                                matrices=matrices, eigenvalues=eigenvalues,
                                star_slots=star_slots))
    return LevelTransform(
        level=level_idx,
        level_graph_size=n_j,
        aggregation=agg,
        next_size=agg.count,
        leftover=n_j - 2 * agg.count,
        channel_count=2 ** level_idx,
        size_groups=tuple(groups),
    )


def _make_level(graph_j: Graph, agg: Aggregation, level_idx: int,
                cap: int) -> LevelTransform:
    sizes = agg.sizes
    if int(sizes.max()) > cap:
        raise GraphValidationError(
            f"aggregate size {int(sizes.max())} exceeds the local basis cap {cap}; "
            "inspect aggregation_stats for pathological aggregates"
        )
    offsets = agg.offsets
    sq_off = np.zeros(agg.count + 1, dtype=np.int64)
    np.cumsum(sizes * sizes, out=sq_off[1:])
    mat_flat = np.empty(int(sq_off[-1]))
    eig_flat = np.empty(int(offsets[-1]))
    for s in np.unique(sizes):
        s = int(s)
        ids = np.flatnonzero(sizes == s)
        g_count = len(ids)
        if s == 1:
            mats = np.ones((g_count, 1, 1))
            eigs = np.zeros((g_count, 1))
        elif s == 2:
            mats = np.broadcast_to(HAAR, (g_count, 2, 2))
            eigs = np.broadcast_to(HAAR_EIGENVALUES, (g_count, 2))
        elif s <= DICTIONARY_MAX_SIZE:
            rows = agg.members[offsets[ids][:, None] + np.arange(s)]
            masks = np.zeros(g_count, dtype=np.int64)
            bit = 0
            for p in range(s):
                for q in range(p + 1, s):
                    present = graph_j.has_edges(rows[:, p], rows[:, q])
                    masks |= present.astype(np.int64) << bit
                    bit += 1
            mats = np.empty((g_count, s, s))
            eigs = np.empty((g_count, s))
            for mask in np.unique(masks):
                basis = _pattern_basis(s, int(mask))
                sel = masks == mask
                mats[sel] = basis.matrix
                eigs[sel] = basis.eigenvalues
        else:
            mats = np.empty((g_count, s, s))
            eigs = np.empty((g_count, s))
            for gi, k in enumerate(ids):
                sub, _ = induced_subgraph(graph_j, agg.aggregate(int(k)))
                basis = local_eigenbasis(sub, cap=cap)
                mats[gi] = basis.matrix
                eigs[gi] = basis.eigenvalues
        mat_flat[sq_off[ids][:, None] + np.arange(s * s)] = mats.reshape(g_count, s * s)
        eig_flat[offsets[ids][:, None] + np.arange(s)] = eigs
    return _level_from_flat(level_idx, graph_j.vertex_count, agg, eig_flat, mat_flat)


def _level_forward(level: LevelTransform, chan: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(b, c, n_j) channels -> ((b, 2c, n_{j+1}) channels, (b, c, leftover) stars)."""
    b, c, _ = chan.shape
    out = np.empty((b, 2 * c, level.next_size))
    stars = np.empty((b, c, level.leftover))
    plus_view = out[:, 0::2, :]
    minus_view = out[:, 1::2, :]
    for grp in level.size_groups:
        x = chan[:, :, grp.members]                         # (b, c, g, s)
        y = np.einsum("gji,bcgj->bcgi", grp.matrices, x)    # apply Q_a^T blockwise
        plus_view[:, :, grp.agg_ids] = y[..., 0]
        minus_view[:, :, grp.agg_ids] = y[..., 1]
        if grp.size > 2:
            stars[:, :, grp.star_slots] = y[..., 2:]
    return out, stars


def _level_inverse(level: LevelTransform, newchan: np.ndarray,
                   stars: np.ndarray) -> np.ndarray:
    """Inverse of _level_forward for one level."""
    b = newchan.shape[0]
    c = newchan.shape[1] // 2
    chan = np.empty((b, c, level.level_graph_size))
    plus_view = newchan[:, 0::2, :]
    minus_view = newchan[:, 1::2, :]
    for grp in level.size_groups:
        s = grp.size
        g = len(grp.agg_ids)
        y = np.empty((b, c, g, s))
        y[..., 0] = plus_view[:, :, grp.agg_ids]
        y[..., 1] = minus_view[:, :, grp.agg_ids]
        if s > 2:
            y[..., 2:] = stars[:, :, grp.star_slots]
        chan[:, :, grp.members] = np.einsum("gij,bcgj->bcgi", grp.matrices, y)
    return chan


def _apply_forward(plan: TransformPlan, x: np.ndarray) -> np.ndarray:
    b = x.shape[0]
    if not plan.levels:
        return x.copy()
    chan = x.reshape(b, 1, plan.n)
    star_parts = []
    for level in plan.levels:
        chan, stars = _level_forward(level, chan)
        if level.leftover:
            star_parts.append(stars[:, ::-1, :].reshape(b, -1))
    parts = [chan.reshape(b, -1)]
    parts.extend(reversed(star_parts))
    return np.concatenate(parts, axis=1)


def _apply_inverse(plan: TransformPlan, f: np.ndarray) -> np.ndarray:
    b = f.shape[0]
    if not plan.levels:
        return f.copy()
    last = plan.levels[-1]
    nfinal = 2 * last.channel_count
    chan = f[:, :nfinal * last.next_size].reshape(b, nfinal, last.next_size)
    tail = f[:, nfinal * last.next_size:]
    for level in reversed(plan.levels):
        c = level.channel_count
        lo = level.leftover
        if lo:
            stars = tail[:, :c * lo].reshape(b, c, lo)[:, ::-1, :]
            tail = tail[:, c * lo:]
        else:
            stars = np.zeros((b, c, 0))
        chan = _level_inverse(level, chan, stars)
    return chan.reshape(b, plan.n)


def _build_band_map(n: int, levels: tuple[LevelTransform, ...]) -> np.ndarray:
    """Label each coefficient with the level where its path left the all-sum
    spine (-1 for the single spine coefficient)."""
    if not levels:
        return np.full(1, -1, dtype=np.int64)
    depth = len(levels)  # J + 1
    nchan = 2 ** depth
    chan_bands = np.full(nchan, -1, dtype=np.int64)
    for j in range(depth):
        lo = 2 ** (depth - 1 - j)
        chan_bands[lo: 2 * lo] = j
    parts = [chan_bands]
    for level in reversed(levels):
        if not level.leftover:
            continue
        c = level.channel_count
        j = level.level
        bands = np.full(c, j, dtype=np.int64)
        for b in range(1, j + 1):
            bands[2 ** (b - 1): 2 ** b] = j - b
        parts.append(np.repeat(bands[::-1], level.leftover))
    out = np.concatenate(parts)
    assert len(out) == n
    return out


def build_plan(g: Graph, seed: int = 0, forced_aggregations=None, *,
               size_cap: int = DEFAULT_SIZE_CAP) -> TransformPlan:
    """Construct the full multilevel transform for a connected graph.

    ``forced_aggregations`` optionally injects per-level aggregations (each a
    sequence of vertex sequences in that level's numbering); levels beyond
    the injected list fall back to the seeded matcher. The plan is a
    deterministic function of (graph, seed, forced_aggregations).
    """
    n = g.vertex_count
    if not is_connected(g):
        raise GraphValidationError("graph is disconnected; the transform requires a connected graph")
    seed = int(seed) % (1 << 64)
    rng = np.random.RandomState(_seed_words(seed))
    levels: list[LevelTransform] = []
    current = g
    j = 0
    while current.vertex_count > 1:
        forced = None
        if forced_aggregations is not None and j < len(forced_aggregations):
            forced = forced_aggregations[j]
        if forced is not None:
            agg = Aggregation.from_member_lists(current, forced)
        else:
            agg = _build_with_rng(current, rng)
        levels.append(_make_level(current, agg, j, size_cap))
        current = quotient_graph(current, agg)
        j += 1
    tails = [0]
    for level in levels:
        tails.append(tails[-1] + level.channel_count * level.leftover)
    for jj, level in enumerate(levels):
        assert 2 ** jj * level.level_graph_size + tails[jj] == n
    if levels:
        assert 2 ** len(levels) * levels[-1].next_size + tails[-1] == n
        assert len(levels) <= math.ceil(math.log2(n))
    observed = max((int(lv.aggregation.sizes.max()) for lv in levels), default=1)
    body = _encode_body(n, seed, tuple(levels))
    return TransformPlan(
        n=n,
        levels=tuple(levels),
        tail_sizes=tuple(tails),
        band_map=_build_band_map(n, tuple(levels)),
        observed_max_aggregate=observed,
        seed=seed,
        checksum=fnv1a64(body),
    )


def forward(plan: TransformPlan, u) -> FrequencyVector:
    """Transform a signal into its frequency coefficients."""
    x = as_signal(u, plan.n)
    coeffs = _apply_forward(plan, x[None, :])[0]
    return FrequencyVector(coefficients=coeffs, plan_checksum=plan.checksum)


def inverse(plan: TransformPlan, f: FrequencyVector) -> np.ndarray:
    """Reconstruct the signal from frequency coefficients bound to this plan."""
    if f.plan_checksum != plan.checksum:
        raise ChecksumMismatchError(
            f"frequency vector bound to plan {f.plan_checksum:016x}, "
            f"this plan is {plan.checksum:016x}"
        )
    x = as_signal(f.coefficients, plan.n)
    return _apply_inverse(plan, x[None, :])[0]


def assemble_dense_basis(plan: TransformPlan, guard: int = DENSE_GUARD) -> np.ndarray:
    """Materialize the basis as an n x n orthogonal matrix (column i is the
    inverse image of coefficient unit vector e_i). Desk-scale only."""
    if plan.n > guard:
        raise GraphValidationError(f"n={plan.n} exceeds the dense-basis guard {guard}")
    return _apply_inverse(plan, np.eye(plan.n)).T


def band_of(plan: TransformPlan, index: int):
    """Band label of one coefficient: a level in 0..J, or SPINE."""
    if not 0 <= index < plan.n:
        raise IndexError(f"coefficient index {index} out of range for n={plan.n}")
    b = int(plan.band_map[index])
    return SPINE if b < 0 else b


def plan_summary(plan: TransformPlan) -> PlanSummary:
    return PlanSummary(
        n=plan.n,
        depth=None if not plan.levels else plan.num_levels - 1,
        level_sizes=plan.level_sizes,
        tail_sizes=plan.tail_sizes,
        max_aggregate_size=plan.observed_max_aggregate,
        storage_bytes=len(encode_plan_body(plan)) + PLAN_FILE_OVERHEAD,
    )


# --- canonical byte form -------------------------------------------------

def _flatten_level(level: LevelTransform) -> tuple[np.ndarray, np.ndarray]:
    sizes = level.aggregation.sizes
    offsets = level.aggregation.offsets
    sq_off = np.zeros(level.aggregation.count + 1, dtype=np.int64)
    np.cumsum(sizes * sizes, out=sq_off[1:])
    mat_flat = np.empty(int(sq_off[-1]))
    eig_flat = np.empty(int(offsets[-1]))
    for grp in level.size_groups:
        s = grp.size
        mat_flat[sq_off[grp.agg_ids][:, None] + np.arange(s * s)] = \
            grp.matrices.reshape(len(grp.agg_ids), s * s)
        eig_flat[offsets[grp.agg_ids][:, None] + np.arange(s)] = grp.eigenvalues
    return eig_flat, mat_flat


def _encode_body(n: int, seed: int, levels: tuple[LevelTransform, ...]) -> bytes:
    out = bytearray()
    out += struct.pack("<QQQ", n, len(levels), seed)
    for level in levels:
        sizes = level.aggregation.sizes
        out += struct.pack("<QQQ", level.level_graph_size, level.aggregation.count,
                           level.leftover)
        out += sizes.astype("<u1").tobytes()
        out += level.aggregation.members.astype("<u4").tobytes()
        eig_flat, mat_flat = _flatten_level(level)
        out += eig_flat.astype("<f8").tobytes()
        out += mat_flat.astype("<f8").tobytes()
    return bytes(out)


def encode_plan_body(plan: TransformPlan) -> bytes:
    """Canonical little-endian byte form of the plan (checksum input)."""
    return _encode_body(plan.n, plan.seed, plan.levels)


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, nbytes: int) -> bytes:
        if self.pos + nbytes > len(self.data):
            raise TruncatedPayloadError(
                f"stream ends at byte {len(self.data)}, needed {self.pos + nbytes}"
            )
        out = self.data[self.pos:self.pos + nbytes]
        self.pos += nbytes
        return out

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, dtype: str, count: int) -> np.ndarray:
        itemsize = np.dtype(dtype).itemsize
        return np.frombuffer(self.take(itemsize * count), dtype=dtype).copy()

    def exhausted(self) -> bool:
        return self.pos == len(self.data)


def decode_plan_body(body: bytes) -> TransformPlan:
    """Rebuild a plan from its canonical byte form."""
    cur = _Cursor(body)
    n, num_levels, seed = cur.unpack("<QQQ")
    if n < 1:
        raise FormatError("plan body declares an empty graph")
    levels: list[LevelTransform] = []
    expect_nj = n
    for j in range(num_levels):
        n_j, n_agg, leftover = cur.unpack("<QQQ")
        if n_j != expect_nj:
            raise FormatError(f"level {j} size {n_j} breaks the level chain (expected {expect_nj})")
        sizes = cur.array("<u1", n_agg).astype(np.int64)
        if n_agg == 0 or np.any(sizes < 2):
            raise FormatError(f"level {j} has an aggregate of size < 2")
        if int(sizes.sum()) != n_j or n_j - 2 * n_agg != leftover:
            raise FormatError(f"level {j} aggregate sizes do not cover the level")
        members = cur.array("<u4", n_j).astype(np.int64)
        if not np.array_equal(np.sort(members), np.arange(n_j)):
            raise FormatError(f"level {j} members are not a permutation")
        eig_flat = cur.array("<f8", n_j)
        mat_flat = cur.array("<f8", int(np.sum(sizes * sizes)))
        agg = aggregation_from_arrays(int(n_j), sizes, members)
        levels.append(_level_from_flat(j, int(n_j), agg, eig_flat, mat_flat))
        expect_nj = int(n_agg)
    if num_levels and expect_nj != 1:
        raise FormatError("plan recursion does not terminate at a single vertex")
    if num_levels == 0 and n != 1:
        raise FormatError("zero-level plan is only valid for a single-vertex graph")
    if not cur.exhausted():
        raise FormatError(f"{len(body) - cur.pos} trailing bytes after plan body")
    tails = [0]
    for level in levels:
        tails.append(tails[-1] + level.channel_count * level.leftover)
    observed = max((int(lv.aggregation.sizes.max()) for lv in levels), default=1)
    return TransformPlan(
        n=int(n),
        levels=tuple(levels),
        tail_sizes=tuple(tails),
        band_map=_build_band_map(int(n), tuple(levels)),
        observed_max_aggregate=observed,
        seed=int(seed),
        checksum=fnv1a64(body),
    )
