"""Per-aggregate orthonormal Laplacian eigenbases with a small-graph cache.

Bases are a deterministic function of the aggregate's local adjacency
pattern: a fixed-sweep cyclic Jacobi solve, a stable ascending eigenvalue
sort, the constant vector forced exactly into column 0, modified Gram-Schmidt
re-orthonormalization, and a sign convention (largest-magnitude entry of each
column positive, earliest entry on ties).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GraphValidationError
from .graph import Graph, dense_laplacian

__all__ = [
    "LocalBasis",
    "DEFAULT_SIZE_CAP",
    "DICTIONARY_MAX_SIZE",
    "jacobi_eigh",
    "local_eigenbasis",
    "dictionary_lookup",
    "adjacency_bitmask",
]

DEFAULT_SIZE_CAP = 16
DICTIONARY_MAX_SIZE = 5
JACOBI_TOL = 1e-14
CONNECTIVITY_TOL = 1e-10

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
HAAR = np.array([[_INV_SQRT2, _INV_SQRT2], [_INV_SQRT2, -_INV_SQRT2]])
HAAR_EIGENVALUES = np.array([0.0, 2.0])


@dataclass(frozen=True)
class LocalBasis:
    """Orthonormal eigenbasis of one aggregate's induced Laplacian.

    ``matrix`` columns are eigenvectors in ascending eigenvalue order;
    column 0 is exactly the constant vector 1/sqrt(size).
    """

    size: int
    matrix: np.ndarray
    eigenvalues: np.ndarray


def jacobi_eigh(a: np.ndarray, tol: float = JACOBI_TOL,
                max_sweeps: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a small symmetric matrix.

    Sweeps rotate pairs (p, q) in fixed row-major order until the largest
    off-diagonal magnitude drops below ``tol``. Returns (eigenvalues,
    eigenvector columns) in solver output order (not sorted).
    """
    a = np.array(a, dtype=np.float64)
    m = a.shape[0]
    v = np.eye(m)
    if m == 1:
        return np.diag(a).copy(), v
    iu = np.triu_indices(m, 1)
    for _ in range(max_sweeps):
        if np.max(np.abs(a[iu])) <= tol:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:  # pragma: no cover - cannot trigger at supported sizes
        raise RuntimeError("Jacobi iteration did not converge")
    return np.diag(a).copy(), v


def _fix_column_signs(q: np.ndarray) -> None:
    for c in range(q.shape[1]):
        col = q[:, c]
        lead = int(np.argmax(np.abs(col)))
        if col[lead] < 0.0:
            np.negative(col, out=col)


def local_eigenbasis(sub: Graph, cap: int = DEFAULT_SIZE_CAP) -> LocalBasis:
    """Deterministic orthonormal eigenbasis of a connected induced subgraph."""
    m = sub.vertex_count
    if m > cap:
        raise GraphValidationError(
            f"aggregate size {m} exceeds the local basis cap {cap}; "
            "inspect aggregation_stats for pathological aggregates"
        )
    if m == 1:
        return LocalBasis(1, np.array([[1.0]]), np.array([0.0]))
    if m == 2:
        if sub.edge_count != 1:
            raise GraphValidationError("2-vertex aggregate is not connected")
        return LocalBasis(2, HAAR.copy(), HAAR_EIGENVALUES.copy())
    lam, q = jacobi_eigh(dense_laplacian(sub))
    order = np.argsort(lam, kind="stable")
    lam = lam[order]
    q = q[:, order]
    if lam[1] <= CONNECTIVITY_TOL:
        raise GraphValidationError(
            "aggregate induces a disconnected subgraph (second eigenvalue ~ 0)"
        )
    lam[0] = 0.0
    q[:, 0] = 1.0 / math.sqrt(m)
    for c in range(1, m):
        col = q[:, c]
        for p in range(c):
            col -= np.dot(q[:, p], col) * q[:, p]
        col /= np.linalg.norm(col)
    _fix_column_signs(q)
    return LocalBasis(m, q, lam)


def adjacency_bitmask(sub: Graph) -> int:
    """Pack the upper-triangle adjacency into an integer, pair (p, q) p < q
    in lexicographic order from bit 0."""
    m = sub.vertex_count
    mask = 0
    bit = 0
    for p in range(m):
        for q in range(p + 1, m):
            if sub.has_edge(p, q):
                mask |= 1 << bit
            bit += 1
    return mask


def _graph_from_pattern(m: int, mask: int) -> Graph:
    us = []
    vs = []
    bit = 0
    for p in range(m):
        for q in range(p + 1, m):
            if mask >> bit & 1:
                us.append(p)
                vs.append(q)
            bit += 1
    return Graph.from_edges(m, us, vs, validate=False)


_PATTERN_CACHE: dict[tuple[int, int], LocalBasis] = {}


def _pattern_basis(m: int, mask: int) -> LocalBasis:
    key = (m, mask)
    basis = _PATTERN_CACHE.get(key)
    if basis is None:
        basis = local_eigenbasis(_graph_from_pattern(m, mask))
        _PATTERN_CACHE[key] = basis
    return basis


def dictionary_lookup(sub: Graph) -> LocalBasis:
    """Cached eigenbasis keyed by (size, local adjacency pattern).

    Sizes above DICTIONARY_MAX_SIZE fall through to direct computation.
    Results are identical to local_eigenbasis either way.
    """
    m = sub.vertex_count
    if m > DICTIONARY_MAX_SIZE:
        return local_eigenbasis(sub)
    return _pattern_basis(m, adjacency_bitmask(sub))
