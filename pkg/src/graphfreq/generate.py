"""Synthetic graphs and signals for tests, benchmarks, and the CLI."""

from __future__ import annotations

import math

import numpy as np

from .errors import GraphValidationError
from .graph import Graph, is_connected

__all__ = [
    "path_graph",
    "cycle_graph",
    "lattice_graph",
    "erdos_renyi_graph",
    "lattice_dims",
    "ramp_signal",
    "sinusoid_signal",
    "lattice_field",
    "noise_signal",
]


def path_graph(n: int) -> Graph:
    i = np.arange(n - 1, dtype=np.int64)
    return Graph.from_edges(n, i, i + 1, validate=False)


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise GraphValidationError("cycle needs at least 3 vertices")
    i = np.arange(n, dtype=np.int64)
    return Graph.from_edges(n, i, (i + 1) % n, validate=False)


def lattice_graph(rows: int, cols: int) -> Graph:
    """rows x cols grid, vertex (r, c) -> r * cols + c, 4-neighbor edges."""
    r, c = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    idx = (r * cols + c).astype(np.int64)
    right_u = idx[:, :-1].ravel()
    right_v = idx[:, 1:].ravel()
    down_u = idx[:-1, :].ravel()
    down_v = idx[1:, :].ravel()
    return Graph.from_edges(
        rows * cols,
        np.concatenate([right_u, down_u]),
        np.concatenate([right_v, down_v]),
        validate=False,
    )


def lattice_dims(n: int) -> tuple[int, int]:
    """Factor n into the most square rows x cols with rows * cols == n."""
    r = int(math.isqrt(n))
    while n % r:
        r -= 1
    return r, n // r


def erdos_renyi_graph(n: int, m: int | None = None, seed: int = 0,
                      require_connected: bool = True, max_tries: int = 64) -> Graph:
    """Uniform random graph with m distinct edges (default ~ n log n)."""
    if n < 2:
        raise GraphValidationError("random graph needs at least 2 vertices")
    max_edges = n * (n - 1) // 2
    if m is None:
        m = math.ceil(n * math.log(max(n, 2)))
    m = min(m, max_edges)
    rng = np.random.RandomState(seed % (2 ** 32))
    for _ in range(max_tries):
        # sample edge slots without replacement from the upper triangle
        slots = rng.choice(max_edges, size=m, replace=False)
        # invert the row-major upper-triangle enumeration
        u = (n - 2 - np.floor(np.sqrt(-8.0 * slots + 4 * n * (n - 1) - 7) / 2.0 - 0.5)).astype(np.int64)
        v = (slots + u + 1 - n * (n - 1) // 2 + (n - u) * ((n - u) - 1) // 2).astype(np.int64)
        g = Graph.from_edges(n, u, v, validate=False)
        if not require_connected or is_connected(g):
            return g
    raise GraphValidationError(f"could not sample a connected graph with n={n}, m={m}")


def ramp_signal(n: int) -> np.ndarray:
    return np.arange(n, dtype=np.float64)


def sinusoid_signal(n: int, periods: float = 1.0, phase: float = 0.0) -> np.ndarray:
    i = np.arange(n, dtype=np.float64)
    return np.sin(2.0 * np.pi * periods * i / n + phase)


def lattice_field(rows: int, cols: int, kind: str = "smooth") -> np.ndarray:
    """Smooth analytic fields on a grid, flattened row-major.

    ``ramp`` is x + y; ``smooth`` adds low-frequency sinusoids to the ramp.
    """
    r, c = np.meshgrid(np.arange(rows, dtype=np.float64),
                       np.arange(cols, dtype=np.float64), indexing="ij")
    if kind == "ramp":
        field = r + c
    elif kind == "smooth":
        field = (
            r + c
            + 0.5 * rows * np.sin(np.pi * r / max(rows - 1, 1))
            + 0.5 * cols * np.sin(np.pi * c / max(cols - 1, 1))
            + 0.25 * rows * np.sin(2.0 * np.pi * r / max(rows, 1))
        )
    else:
        raise ValueError(f"unknown field kind {kind!r}")
    return field.ravel()


def noise_signal(n: int, seed: int = 0, scale: float = 1.0) -> np.ndarray:
    rng = np.random.RandomState(seed % (2 ** 32))
    return scale * rng.standard_normal(n)
