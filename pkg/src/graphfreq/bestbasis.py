"""Adaptive basis selection over the sum/difference hierarchy.

Every node of the binary channel tree (depth j, channels indexed so that the
level-0 sign is the most significant bit, '+' = 0) spans an orthonormal
sub-basis; expanding a node replaces it by its two child channels plus the
finalized coefficients the node emits. The selection minimizing the l1 norm
of the represented coefficients is found by a bottom-up dynamic program; ties
keep the unexpanded parent.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import FormatError, TruncatedPayloadError
from .filtering import _top_k_indices
from .graph import as_signal
from .transform import (
    TransformPlan,
    _level_forward,
    _level_inverse,
)

__all__ = [
    "BasisTree",
    "BasisSelection",
    "LayoutSegment",
    "build_basis_tree",
    "node_cost",
    "best_basis",
    "coefficients_for_selection",
    "reconstruct_from_selection",
    "selection_encode",
    "selection_decode",
    "AdaptiveFilterResult",
    "adaptive_filter_k",
]


@dataclass(frozen=True)
class BasisTree:
    """Channel snapshots of one signal at every depth of the hierarchy.

    ``snapshots[j]`` has shape (2^j, n_j): the coefficient vector of every
    depth-j channel before the level-j transform. ``stars[j]`` has shape
    (2^j, leftover_j): the coefficients finalized at depth j.
    """

    plan: TransformPlan
    snapshots: tuple[np.ndarray, ...]
    stars: tuple[np.ndarray, ...]

    @property
    def depth(self) -> int:
        """Leaf depth (J + 1); 0 when the plan has no levels."""
        return len(self.snapshots) - 1


@dataclass(frozen=True)
class BasisSelection:
    """One admissible basis: a keep/expand bit per internal tree node.

    ``keep[j][c]`` is True when channel c at depth j is kept whole instead of
    being expanded into its children. Leaves are always kept.
    """

    keep: tuple[np.ndarray, ...]
    total_cost: Optional[float] = None

    @property
    def depth(self) -> int:
        return len(self.keep)


@dataclass(frozen=True)
class LayoutSegment:
    node: str          # sign path, '' for the root
    kind: str          # "node" (kept channel) or "star" (finalized block)
    start: int
    stop: int


def _node_address(s: str, tree_depth: int) -> tuple[int, int]:
    j = len(s)
    if j > tree_depth or any(ch not in "+-" for ch in s):
        raise KeyError(f"invalid tree node {s!r}")
    c = 0
    for ch in s:
        c = 2 * c + (1 if ch == "-" else 0)
    return j, c


def _node_path(j: int, c: int) -> str:
    return "".join("-" if c >> (j - 1 - i) & 1 else "+" for i in range(j))


def build_basis_tree(plan: TransformPlan, u) -> BasisTree:
    """Run one forward pass, recording every channel snapshot."""
    x = as_signal(u, plan.n)
    chan = x[None, None, :].copy()
    snapshots = [chan[0].copy()]
    stars_list = []
    for level in plan.levels:
        chan, stars = _level_forward(level, chan)
        stars_list.append(stars[0].copy())
        snapshots.append(chan[0].copy())
    return BasisTree(plan=plan, snapshots=tuple(snapshots), stars=tuple(stars_list))


def node_cost(tree: BasisTree, s: str) -> float:
    """l1 norm of the signal's coefficients on one node's sub-basis."""
    j, c = _node_address(s, tree.depth)
    return float(np.sum(np.abs(tree.snapshots[j][c])))


def best_basis(tree: BasisTree) -> BasisSelection:
    """Bottom-up dynamic program minimizing the selected-basis l1 cost."""
    depth = tree.depth
    best = np.sum(np.abs(tree.snapshots[depth]), axis=1)
    keep_bits: list[np.ndarray] = []
    for j in range(depth - 1, -1, -1):
        keep_cost = np.sum(np.abs(tree.snapshots[j]), axis=1)
        expand_cost = best[0::2] + best[1::2] + np.sum(np.abs(tree.stars[j]), axis=1)
        kb = keep_cost <= expand_cost
        keep_bits.insert(0, kb)
        best = np.where(kb, keep_cost, expand_cost)
    return BasisSelection(keep=tuple(keep_bits), total_cost=float(best[0]))


def _walk_segments(sel: BasisSelection, depth: int):
    """Yield ("node" | "star", j, c) for the selected basis in canonical
    depth-first order: children before the node's finalized block."""
    def rec(j: int, c: int):
        if j == depth or sel.keep[j][c]:
            yield ("node", j, c)
            return
        yield from rec(j + 1, 2 * c)
        yield from rec(j + 1, 2 * c + 1)
        yield ("star", j, c)

    yield from rec(0, 0)


def coefficients_for_selection(tree: BasisTree,
                               sel: BasisSelection) -> tuple[np.ndarray, tuple[LayoutSegment, ...]]:
    """Concatenate the selected nodes' coefficients; returns the vector and
    its layout (node path, kind, slice bounds per segment)."""
    if sel.depth != tree.depth:
        raise ValueError(
            f"selection depth {sel.depth} does not match tree depth {tree.depth}"
        )
    parts = []
    layout = []
    pos = 0
    for kind, j, c in _walk_segments(sel, tree.depth):
        block = tree.snapshots[j][c] if kind == "node" else tree.stars[j][c]
        parts.append(block)
        layout.append(LayoutSegment(node=_node_path(j, c), kind=kind,
                                    start=pos, stop=pos + len(block)))
        pos += len(block)
    coeffs = np.concatenate(parts) if parts else np.zeros(0)
    assert len(coeffs) == tree.plan.n
    return coeffs, tuple(layout)


def reconstruct_from_selection(plan: TransformPlan, sel: BasisSelection,
                               coeffs) -> np.ndarray:
    """Invert coefficients_for_selection."""
    depth = plan.num_levels
    if sel.depth != depth:
        raise ValueError(f"selection depth {sel.depth} does not match plan depth {depth}")
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if len(coeffs) != plan.n:
        raise ValueError(f"expected {plan.n} coefficients, got {len(coeffs)}")
    widths = [lv.level_graph_size for lv in plan.levels] + [1] if plan.levels else [plan.n]
    cursor = 0

    def take(count: int) -> np.ndarray:
        nonlocal cursor
        out = coeffs[cursor:cursor + count]
        cursor += count
        return out

    def rec(j: int, c: int) -> np.ndarray:
        if j == depth or sel.keep[j][c]:
            return take(widths[j])
        plus = rec(j + 1, 2 * c)
        minus = rec(j + 1, 2 * c + 1)
        level = plan.levels[j]
        star = take(level.leftover)
        pair = np.empty((1, 2, level.next_size))
        pair[0, 0] = plus
        pair[0, 1] = minus
        return _level_inverse(level, pair, star[None, None, :])[0, 0]

    out = rec(0, 0)
    assert cursor == plan.n
    return out


def selection_encode(sel: BasisSelection) -> bytes:
    """Depth-first prefix code: one bit per reachable internal node (1 = keep);
    children of kept nodes are omitted."""
    bits: list[int] = []

    def rec(j: int, c: int):
        if j == sel.depth:
            return
        keep = bool(sel.keep[j][c])
        bits.append(1 if keep else 0)
        if not keep:
            rec(j + 1, 2 * c)
            rec(j + 1, 2 * c + 1)

    rec(0, 0)
    packed = np.packbits(np.asarray(bits, dtype=np.uint8)) if bits else np.zeros(0, np.uint8)
    return struct.pack("<I", len(bits)) + packed.tobytes()


def selection_decode(data: bytes, plan: TransformPlan) -> BasisSelection:
    """Rebuild a selection from its bit encoding; nodes under kept nodes are
    normalized to kept."""
    if len(data) < 4:
        raise TruncatedPayloadError("selection encoding shorter than its header")
    (nbits,) = struct.unpack("<I", data[:4])
    body = data[4:]
    if len(body) != (nbits + 7) // 8:
        raise FormatError(f"selection encoding: expected {(nbits + 7) // 8} bit bytes, got {len(body)}")
    bits = np.unpackbits(np.frombuffer(body, dtype=np.uint8))[:nbits] if nbits else np.zeros(0, np.uint8)
    depth = plan.num_levels
    keep = [np.ones(2 ** j, dtype=bool) for j in range(depth)]
    pos = 0

    def rec(j: int, c: int):
        nonlocal pos
        if j == depth:
            return
        if pos >= nbits:
            raise FormatError("selection encoding ran out of bits")
        bit = bool(bits[pos])
        pos += 1
        keep[j][c] = bit
        if not bit:
            rec(j + 1, 2 * c)
            rec(j + 1, 2 * c + 1)

    rec(0, 0)
    if pos != nbits:
        raise FormatError(f"selection encoding has {nbits - pos} unused bits")
    return BasisSelection(keep=tuple(keep), total_cost=None)


@dataclass(frozen=True)
class AdaptiveFilterResult:
    filtered_signal: np.ndarray
    support: np.ndarray
    kept_energy: float
    residual_energy: float
    relative_error: float
    selection: BasisSelection
    coefficients: np.ndarray
    layout: tuple[LayoutSegment, ...]


def adaptive_filter_k(plan: TransformPlan, u, k: int) -> AdaptiveFilterResult:
    """Best-basis analog of filter_k: pick the l1-minimizing basis for u,
    then keep its k largest-magnitude coefficients."""
    x = as_signal(u, plan.n)
    tree = build_basis_tree(plan, x)
    sel = best_basis(tree)
    coeffs, layout = coefficients_for_selection(tree, sel)
    support = _top_k_indices(np.abs(coeffs), k)
    kept = np.zeros_like(coeffs)
    kept[support] = coeffs[support]
    v = reconstruct_from_selection(plan, sel, kept)
    kept_energy = float(np.sum(coeffs[support] ** 2))
    residual_energy = max(float(np.sum(coeffs ** 2) - kept_energy), 0.0)
    norm = float(np.linalg.norm(x))
    rel = float(np.linalg.norm(x - v) / norm) if norm > 0.0 else 0.0
    return AdaptiveFilterResult(
        filtered_signal=v,
        support=support,
        kept_energy=kept_energy,
        residual_energy=residual_energy,
        relative_error=rel,
        selection=sel,
        coefficients=coeffs,
        layout=layout,
    )
