"""k-term filtering, band energies, and the approximation bound calculators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ChecksumMismatchError
from .graph import Graph, as_signal, smoothness_seminorm
from .transform import (
    SPINE,
    FrequencyVector,
    TransformPlan,
    _apply_inverse,
    forward,
)

__all__ = [
    "FilterResult",
    "top_k_support",
    "filter_k",
    "band_energies",
    "decay_bound",
    "band_bound",
    "constant_fit_residual",
    "error_curve",
]


@dataclass(frozen=True)
class FilterResult:
    filtered_signal: np.ndarray
    support: np.ndarray          # ascending coefficient indices, |support| = min(k, n)
    kept_energy: float
    residual_energy: float
    relative_error: float


def _top_k_indices(magnitudes: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest magnitudes; threshold ties go to the smallest
    index. Returned ascending."""
    n = len(magnitudes)
    if k < 0 or k > n:
        raise ValueError(f"k must be in [0, {n}], got {k}")
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    if k == n:
        return np.arange(n, dtype=np.int64)
    threshold = np.partition(magnitudes, n - k)[n - k]
    above = np.flatnonzero(magnitudes > threshold)
    ties = np.flatnonzero(magnitudes == threshold)[: k - len(above)]
    return np.sort(np.concatenate([above, ties]))


def top_k_support(f: FrequencyVector, k: int) -> np.ndarray:
    """Support of the best k-term approximation of a frequency vector."""
    return _top_k_indices(np.abs(f.coefficients), k)


def filter_k(plan: TransformPlan, u, k: int) -> FilterResult:
    """Keep the k largest-magnitude coefficients and reconstruct."""
    x = as_signal(u, plan.n)
    f = forward(plan, x)
    coeffs = f.coefficients
    support = _top_k_indices(np.abs(coeffs), k)
    kept = np.zeros_like(coeffs)
    kept[support] = coeffs[support]
    v = _apply_inverse(plan, kept[None, :])[0]
    kept_energy = float(np.sum(coeffs[support] ** 2))
    residual_energy = float(np.sum(coeffs ** 2) - kept_energy)
    norm = float(np.linalg.norm(x))
    rel = float(np.linalg.norm(x - v) / norm) if norm > 0.0 else 0.0
    return FilterResult(
        filtered_signal=v,
        support=support,
        kept_energy=kept_energy,
        residual_energy=max(residual_energy, 0.0),
        relative_error=rel,
    )


def band_energies(plan: TransformPlan, f: FrequencyVector) -> list[tuple[object, float]]:
    """Energy per spine-departure band, bands ascending then SPINE last."""
    if f.plan_checksum != plan.checksum:
        raise ChecksumMismatchError(
            f"frequency vector bound to plan {f.plan_checksum:016x}, "
            f"this plan is {plan.checksum:016x}"
        )
    weights = np.asarray(f.coefficients, dtype=np.float64) ** 2
    sums = np.bincount(plan.band_map + 1, weights=weights, minlength=plan.num_levels + 1)
    rows: list[tuple[object, float]] = [(j, float(sums[j + 1])) for j in range(plan.num_levels)]
    rows.append((SPINE, float(sums[0])))
    return rows


def decay_bound(n: int, k: int, max_aggregate: int, seminorm: float) -> float:
    """A priori bound on the squared k-term reconstruction error of a signal
    with the given edge-difference seminorm."""
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if max_aggregate < 2:
        raise ValueError("max_aggregate must be at least 2")
    if seminorm < 0:
        raise ValueError("seminorm must be nonnegative")
    c3 = float(max_aggregate) ** 3
    return c3 * n / 12.0 * (n / k) ** (math.log2(c3) - 1.0) * seminorm ** 2


def band_bound(n: int, band: int, max_aggregate: int, seminorm: float) -> float:
    """A priori bound on the energy a smooth signal can place in one band."""
    if band < 0:
        raise ValueError("band must be nonnegative")
    if max_aggregate < 2:
        raise ValueError("max_aggregate must be at least 2")
    if seminorm < 0:
        raise ValueError("seminorm must be nonnegative")
    c3 = float(max_aggregate) ** 3
    return n / 12.0 * (c3 / 2.0) ** (band + 1) * seminorm ** 2


def constant_fit_residual(u) -> float:
    """Squared distance from a vector to the span of the constant vector."""
    arr = np.asarray(u, dtype=np.float64)
    if arr.ndim != 1 or len(arr) == 0:
        raise ValueError("expected a nonempty 1-D vector")
    m = len(arr)
    val = float(np.sum(arr ** 2) - np.sum(arr) ** 2 / m)
    return max(val, 0.0)


def error_curve(plan: TransformPlan, g: Graph, u, ks) -> list[tuple[int, float, float]]:
    """Rows (k, relative_error, bound) for a k sweep on one signal."""
    x = as_signal(u, plan.n)
    seminorm = smoothness_seminorm(g, x)
    rows = []
    for k in ks:
        res = filter_k(plan, x, int(k))
        bound = decay_bound(plan.n, max(int(k), 1), plan.observed_max_aggregate, seminorm)
        rows.append((int(k), res.relative_error, bound))
    return rows
