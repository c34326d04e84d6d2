"""Dense Laplacian eigenbasis and spectral low-pass filtering (desk scale).

Serves as the comparison baseline and as an independent oracle; the guard
keeps the cubic-cost eigendecomposition away from large graphs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bestbasis import adaptive_filter_k
from .errors import GraphValidationError
from .filtering import filter_k
from .graph import Graph, as_signal, dense_laplacian
from .transform import build_plan

__all__ = [
    "SPECTRAL_GUARD",
    "SpectralBasis",
    "dense_spectral_basis",
    "spectral_filter_k",
    "ComparisonRow",
    "compare_filters",
]

SPECTRAL_GUARD = 4096


@dataclass(frozen=True)
class SpectralBasis:
    eigenvalues: np.ndarray   # ascending, eigenvalues[0] == 0
    vectors: np.ndarray       # orthonormal columns


def dense_spectral_basis(g: Graph, guard: int = SPECTRAL_GUARD) -> SpectralBasis:
    """Full eigendecomposition of the dense Laplacian, ascending order, each
    column's largest-magnitude entry made positive (earliest entry on ties)."""
    n = g.vertex_count
    if n > guard:
        raise GraphValidationError(f"n={n} exceeds the spectral guard {guard}")
    lam, vec = np.linalg.eigh(dense_laplacian(g))
    for c in range(n):
        col = vec[:, c]
        lead = int(np.argmax(np.abs(col)))
        if col[lead] < 0.0:
            np.negative(col, out=col)
    lam = lam.copy()
    lam[0] = 0.0
    return SpectralBasis(eigenvalues=lam, vectors=vec)


def _project(basis: SpectralBasis, w: np.ndarray, k: int, include_constant: bool) -> np.ndarray:
    n = len(w)
    if include_constant:
        cols = basis.vectors[:, :min(k, n)]
    else:
        cols = basis.vectors[:, 1:min(k, n - 1) + 1]
    return cols @ (cols.T @ w)


def spectral_filter_k(g: Graph, u, k: int, preprocess: bool = True,
                      guard: int = SPECTRAL_GUARD) -> np.ndarray:
    """Project onto the k lowest eigenvectors.

    With preprocessing the signal is centered and scaled to unit norm first,
    the constant eigenvector is excluded, and the preprocessing is undone on
    output. Without preprocessing the constant eigenvector counts toward k.
    """
    n = g.vertex_count
    x = as_signal(u, n)
    if not 0 <= k <= n:
        raise ValueError(f"k must be in [0, {n}], got {k}")
    basis = dense_spectral_basis(g, guard=guard)
    if not preprocess:
        return _project(basis, x, k, include_constant=True)
    mean = float(x.mean())
    centered = x - mean
    norm = float(np.linalg.norm(centered))
    if norm == 0.0:
        return np.full(n, mean)
    w = centered / norm
    return mean + norm * _project(basis, w, k, include_constant=False)


@dataclass(frozen=True)
class ComparisonRow:
    k: int
    err_alg2: float
    err_adaptive: float
    err_spectral: float


def compare_filters(g: Graph, u, ks, seed: int = 0,
                    guard: int = SPECTRAL_GUARD) -> list[ComparisonRow]:
    """Relative k-term errors of the multilevel, adaptive, and spectral
    filters on the centered, unit-normalized signal."""
    n = g.vertex_count
    if n > guard:
        raise GraphValidationError(f"n={n} exceeds the spectral guard {guard}")
    x = as_signal(u, n)
    centered = x - x.mean()
    norm = float(np.linalg.norm(centered))
    if norm == 0.0:
        return [ComparisonRow(int(k), 0.0, 0.0, 0.0) for k in ks]
    w = centered / norm
    plan = build_plan(g, seed=seed)
    basis = dense_spectral_basis(g, guard=guard)
    rows = []
    for k in ks:
        k = int(k)
        err_alg2 = filter_k(plan, w, k).relative_error
        err_adaptive = adaptive_filter_k(plan, w, k).relative_error
        err_spectral = float(np.linalg.norm(w - _project(basis, w, k, include_constant=False)))
        rows.append(ComparisonRow(k, err_alg2, err_adaptive, err_spectral))
    return rows
