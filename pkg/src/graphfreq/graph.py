"""Undirected graph container, text formats, and Laplacian-form helpers.

Graphs are simple (no self-loops, no multi-edges), stored in CSR form with
sorted adjacency. Vertices are 0-based throughout the API; every text format
uses 1-based indices.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import GraphFormatError, GraphValidationError

__all__ = [
    "Graph",
    "parse_graph",
    "serialize_graph",
    "parse_signal",
    "serialize_signal",
    "as_signal",
    "is_connected",
    "induced_subgraph",
    "dense_laplacian",
    "laplacian_quadratic",
    "smoothness_seminorm",
]


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph with sorted CSR adjacency.

    Attributes
    ----------
    indptr : int64 array of length n + 1
    indices : int64 array; row i is the strictly increasing neighbor list
        ``indices[indptr[i]:indptr[i + 1]]``
    """

    indptr: np.ndarray
    indices: np.ndarray

    @property
    def vertex_count(self) -> int:
        return len(self.indptr) - 1

    @property
    def edge_count(self) -> int:
        return len(self.indices) // 2

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @cached_property
    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Each undirected edge once, as arrays (u, v) with u < v."""
        u = np.repeat(np.arange(self.vertex_count, dtype=np.int64), self.degrees)
        v = self.indices
        mask = u < v
        return u[mask], v[mask]

    @cached_property
    def _edge_keys(self) -> np.ndarray:
        # both orientations, packed as u * n + v, sorted for membership queries
        n = self.vertex_count
        u, v = self.edge_arrays
        keys = np.concatenate([u * n + v, v * n + u])
        keys.sort()
        return keys

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors(u)
        p = np.searchsorted(row, v)
        return p < len(row) and row[p] == v

    def has_edges(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Vectorized membership test for vertex-pair arrays."""
        keys = np.asarray(u, dtype=np.int64) * self.vertex_count + np.asarray(v, dtype=np.int64)
        table = self._edge_keys
        if len(table) == 0:
            return np.zeros(len(keys), dtype=bool)
        pos = np.minimum(np.searchsorted(table, keys), len(table) - 1)
        return table[pos] == keys

    @classmethod
    def from_edges(cls, n: int, u, v, *, validate: bool = True) -> "Graph":
        """Build a graph from edge endpoint arrays, merging duplicates.

        Both orientations of an edge and repeated edges collapse to a single
        undirected edge. Self-loops are rejected.
        """
        if n < 1:
            raise GraphValidationError("graph needs at least one vertex")
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        if validate:
            if u.shape != v.shape or u.ndim != 1:
                raise GraphValidationError("edge arrays must be 1-D and of equal length")
            if len(u) and (u.min() < 0 or v.min() < 0 or u.max() >= n or v.max() >= n):
                raise GraphValidationError("edge endpoint out of range")
            if np.any(u == v):
                raise GraphValidationError("self-loops are not allowed")
        lo = np.minimum(u, v)
        hi = np.maximum(u, v)
        keys = np.unique(lo * n + hi) if len(lo) else lo
        lo = keys // n
        hi = keys % n
        ends = np.concatenate([lo, hi])
        other = np.concatenate([hi, lo])
        order = np.lexsort((other, ends))
        counts = np.bincount(ends, minlength=n)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        return cls(indptr=indptr, indices=other[order])

    @classmethod
    def from_adjacency(cls, lists) -> "Graph":
        n = len(lists)
        u = np.concatenate([np.full(len(row), i, dtype=np.int64) for i, row in enumerate(lists)]) \
            if n else np.zeros(0, np.int64)
        v = np.concatenate([np.asarray(row, dtype=np.int64) for row in lists]) if n \
            else np.zeros(0, np.int64)
        return cls.from_edges(n, u, v)

    def validate(self) -> None:
        """Check structural invariants; raises on violation (test helper)."""
        n = self.vertex_count
        if self.indptr[0] != 0 or self.indptr[-1] != len(self.indices):
            raise GraphValidationError("bad indptr bounds")
        if np.any(np.diff(self.indptr) < 0):
            raise GraphValidationError("indptr not monotone")
        for i in range(n):
            row = self.neighbors(i)
            if len(row) and (row.min() < 0 or row.max() >= n):
                raise GraphValidationError("neighbor out of range")
            if np.any(np.diff(row) <= 0):
                raise GraphValidationError(f"adjacency of vertex {i} not strictly increasing")
            if np.any(row == i):
                raise GraphValidationError(f"self-loop at vertex {i}")
        u, v = self.edge_arrays
        for a, b in zip(u, v):
            if not self.has_edge(int(b), int(a)):
                raise GraphValidationError("adjacency not symmetric")
        if 2 * self.edge_count != len(self.indices):
            raise GraphValidationError("edge count inconsistent with adjacency")


def _strip_comment(line: str) -> str:
    for ch in "#%":
        p = line.find(ch)
        if p >= 0:
            line = line[:p]
    return line.strip()


def _parse_edge_list(lines: list[str]) -> Graph:
    us: list[int] = []
    vs: list[int] = []
    n = 0
    for ln, raw in enumerate(lines, start=1):
        body = _strip_comment(raw)
        if not body:
            continue
        tokens = body.split()
        if len(tokens) != 2:
            raise GraphFormatError(f"line {ln}: expected two vertex indices, got {raw!r}")
        try:
            i, j = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise GraphFormatError(f"line {ln}: non-integer vertex token in {raw!r}") from None
        if i < 1 or j < 1:
            raise GraphFormatError(f"line {ln}: vertex indices are 1-based and positive")
        if i == j:
            raise GraphFormatError(f"line {ln}: self-loop at vertex {i}")
        us.append(i - 1)
        vs.append(j - 1)
        n = max(n, i, j)
    if not us:
        raise GraphFormatError("no edges found in edge-list input")
    return Graph.from_edges(n, us, vs, validate=False)


def _parse_matrix_market(lines: list[str]) -> Graph:
    header = lines[0].split()
    want = ["%%matrixmarket", "matrix", "coordinate", "pattern"]
    if [t.lower() for t in header[:4]] != want or len(header) < 5:
        raise GraphFormatError("unsupported MatrixMarket header (need 'matrix coordinate pattern')")
    symmetry = header[4].lower()
    if symmetry not in ("symmetric", "general"):
        raise GraphFormatError(f"unsupported MatrixMarket symmetry {header[4]!r}")
    size_line = None
    entries_start = 0
    for ln, raw in enumerate(lines[1:], start=2):
        if raw.startswith("%") or not raw.strip():
            continue
        size_line = (ln, raw)
        entries_start = ln
        break
    if size_line is None:
        raise GraphFormatError("MatrixMarket input has no size line")
    tokens = size_line[1].split()
    if len(tokens) != 3:
        raise GraphFormatError(f"line {size_line[0]}: size line must be 'rows cols nnz'")
    try:
        rows, cols, nnz = (int(t) for t in tokens)
    except ValueError:
        raise GraphFormatError(f"line {size_line[0]}: non-integer size token") from None
    if rows != cols:
        raise GraphFormatError(f"line {size_line[0]}: adjacency matrix must be square")
    us: list[int] = []
    vs: list[int] = []
    for ln, raw in enumerate(lines[entries_start:], start=entries_start + 1):
        if raw.startswith("%") or not raw.strip():
            continue
        tokens = raw.split()
        if len(tokens) != 2:
            raise GraphFormatError(f"line {ln}: pattern entry must be two indices")
        try:
            i, j = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise GraphFormatError(f"line {ln}: non-integer vertex token") from None
        if not (1 <= i <= rows and 1 <= j <= rows):
            raise GraphFormatError(f"line {ln}: vertex index out of declared range 1..{rows}")
        if i == j:
            raise GraphFormatError(f"line {ln}: self-loop at vertex {i}")
        us.append(i - 1)
        vs.append(j - 1)
    if len(us) != nnz:
        raise GraphFormatError(f"expected {nnz} entries, found {len(us)}")
    return Graph.from_edges(rows, us, vs, validate=False)


def parse_graph(text: str) -> Graph:
    """Parse edge-list or MatrixMarket coordinate-pattern text into a Graph.

    Edge lists give one ``i j`` pair per line (1-based) with ``#``/``%``
    comments; MatrixMarket input starts with a ``%%MatrixMarket`` header.
    Duplicate edges and both orientations merge into one undirected edge.
    """
    lines = text.splitlines()
    if lines and lines[0].lstrip().lower().startswith("%%matrixmarket"):
        return _parse_matrix_market([line.strip() for line in lines])
    return _parse_edge_list(lines)


def serialize_graph(g: Graph) -> str:
    """Canonical edge-list text: one '<i> <j>' line per edge, 1-based, i < j."""
    u, v = g.edge_arrays
    return "".join(f"{a + 1} {b + 1}\n" for a, b in zip(u, v))


def parse_signal(text: str) -> np.ndarray:
    """Parse one decimal value per line; '#' starts a comment."""
    values: list[float] = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        try:
            x = float(body)
        except ValueError:
            raise GraphFormatError(f"line {ln}: not a number: {raw!r}") from None
        if not np.isfinite(x):
            raise GraphFormatError(f"line {ln}: non-finite value")
        values.append(x)
    return np.asarray(values, dtype=np.float64)


def serialize_signal(u: np.ndarray) -> str:
    return "".join(f"{repr(float(x))}\n" for x in np.asarray(u, dtype=np.float64))


def as_signal(u, n: int) -> np.ndarray:
    """Validate a vertex signal: 1-D, length n, finite, float64."""
    arr = np.asarray(u, dtype=np.float64)
    if arr.ndim != 1 or len(arr) != n:
        raise GraphValidationError(f"signal must have length {n}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GraphValidationError("signal contains non-finite values")
    return arr


def is_connected(g: Graph) -> bool:
    """True iff every vertex is reachable from vertex 0."""
    n = g.vertex_count
    if n == 1:
        return True
    mat = csr_matrix(
        (np.ones(len(g.indices), dtype=np.int8), g.indices, g.indptr), shape=(n, n)
    )
    return connected_components(mat, directed=False, return_labels=False) == 1


def induced_subgraph(g: Graph, vertices) -> tuple[Graph, np.ndarray]:
    """Subgraph induced by an ordered vertex selection.

    Returns the subgraph (vertices renumbered 0..m-1 in the given order) and
    the local-to-global index map.
    """
    vertices = np.asarray(vertices, dtype=np.int64)
    n = g.vertex_count
    if len(vertices) == 0:
        raise GraphValidationError("vertex selection is empty")
    if vertices.min() < 0 or vertices.max() >= n:
        raise GraphValidationError("vertex selection out of range")
    if len(np.unique(vertices)) != len(vertices):
        raise GraphValidationError("vertex selection contains duplicates")
    local = {int(gv): p for p, gv in enumerate(vertices)}
    us: list[int] = []
    vs: list[int] = []
    for p, gv in enumerate(vertices):
        for nb in g.neighbors(int(gv)):
            q = local.get(int(nb))
            if q is not None and p < q:
                us.append(p)
                vs.append(q)
    sub = Graph.from_edges(len(vertices), us, vs, validate=False)
    return sub, vertices.copy()


def dense_laplacian(g: Graph) -> np.ndarray:
    """Dense unnormalized Laplacian (degree on the diagonal, -1 per edge)."""
    n = g.vertex_count
    lap = np.zeros((n, n), dtype=np.float64)
    u, v = g.edge_arrays
    np.add.at(lap, (u, u), 1.0)
    np.add.at(lap, (v, v), 1.0)
    lap[u, v] = -1.0
    lap[v, u] = -1.0
    return lap


def laplacian_quadratic(g: Graph, u, v) -> float:
    """Bilinear Laplacian form: sum over edges of (u_i - u_j)(v_i - v_j)."""
    n = g.vertex_count
    u = as_signal(u, n)
    v = as_signal(v, n)
    eu, ev = g.edge_arrays
    if len(eu) == 0:
        return 0.0
    return float(np.dot(u[eu] - u[ev], v[eu] - v[ev]))


def smoothness_seminorm(g: Graph, u) -> float:
    """Largest absolute difference of the signal across any edge."""
    u = as_signal(u, g.vertex_count)
    eu, ev = g.edge_arrays
    if len(eu) == 0:
        return 0.0
    return float(np.max(np.abs(u[eu] - u[ev])))
