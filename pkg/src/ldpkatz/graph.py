"""Undirected graphs, edge-list ingestion, degree statistics and clipping parameters."""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import IO, Iterable, Union

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Graph",
    "DegreeProfile",
    "ClippingParams",
    "EdgeListParseError",
    "ConvergenceError",
    "load_edge_list",
    "parse_edge_list",
    "write_edge_list",
    "degree_profile",
    "max_eigenvalue",
    "select_clipping_params",
    "clipping_params_for",
]


class EdgeListParseError(ValueError):
    """Raised on a malformed edge-list line or an empty edge list."""

    def __init__(self, message, lineno=None, source=None):
        self.lineno = lineno
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if lineno is not None:
            where += f"{lineno}: "
        elif where:
            where += " "
        super().__init__(where + message)


class ConvergenceError(RuntimeError):
    """Power iteration ran out of iterations. ``estimate`` holds the last value."""

    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True)
class LoadStats:
    lines: int = 0
    self_loops: int = 0
    duplicates: int = 0
    asymmetric: int = 0


class Graph:
    """Immutable undirected simple graph on nodes ``0..n-1``.

    Adjacency is held in CSR form (``indptr``, ``indices``) with every row
    sorted, symmetric, without self-loops or repeated neighbors.
    """

    def __init__(self, n: int, indptr, indices, remap=None, load_stats=None):
        if n < 1:
            raise ValueError("graph needs at least one node")
        indptr = np.asarray(indptr, dtype=np.int64)
        indices = np.asarray(indices, dtype=np.int64)
        if indptr.shape != (n + 1,) or indptr[0] != 0 or indptr[-1] != len(indices):
            raise ValueError("inconsistent CSR arrays")
        indptr.setflags(write=False)
        indices.setflags(write=False)
        self._n = int(n)
        self._indptr = indptr
        self._indices = indices
        self.remap = dict(remap) if remap is not None else {v: v for v in range(n)}
        self.load_stats = load_stats if load_stats is not None else LoadStats()

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], remap=None, load_stats=None) -> "Graph":
        """Build a graph from undirected edges; self-loops and repeats are dropped."""
        e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if len(e) and (e.min() < 0 or e.max() >= n):
            raise ValueError(f"edge endpoint outside [0, {n})")
        e = e[e[:, 0] != e[:, 1]]
        both = np.concatenate([e, e[:, ::-1]])
        if len(both):
            both = np.unique(both, axis=0)
        rows, cols = both[:, 0], both[:, 1]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        np.cumsum(indptr, out=indptr)
        # np.unique sorts lexicographically, so each row's columns are already ascending
        return cls(n, indptr, cols.copy(), remap=remap, load_stats=load_stats)

    @classmethod
    def from_adjacency(cls, adjacency: Iterable[Iterable[int]]) -> "Graph":
        adjacency = [list(a) for a in adjacency]
        edges = [(v, u) for v, nbrs in enumerate(adjacency) for u in nbrs]
        g = cls.from_edges(len(adjacency), edges)
        if any(sorted(set(a)) != g.neighbors(v).tolist() for v, a in enumerate(adjacency)):
            raise ValueError("adjacency lists are not symmetric simple-graph lists")
        return g

    @property
    def n(self) -> int:
        return self._n

    @property
    def m(self) -> int:
        return len(self._indices) // 2

    @property
    def indptr(self) -> np.ndarray:
        return self._indptr

    @property
    def indices(self) -> np.ndarray:
        return self._indices

    def neighbors(self, v: int) -> np.ndarray:
        return self._indices[self._indptr[v] : self._indptr[v + 1]]

    @property
    def adjacency(self) -> list[np.ndarray]:
        return [self.neighbors(v) for v in range(self._n)]

    @cached_property
    def degrees(self) -> np.ndarray:
        d = np.diff(self._indptr)
        d.setflags(write=False)
        return d

    @cached_property
    def csr(self) -> sp.csr_matrix:
        """Adjacency matrix with unit float64 entries."""
        data = np.ones(len(self._indices), dtype=np.float64)
        a = sp.csr_matrix((data, self._indices, self._indptr), shape=(self._n, self._n))
        a.has_sorted_indices = True
        return a

    def edges(self) -> np.ndarray:
        """Array of shape (m, 2) with ``u < v``, sorted."""
        rows = np.repeat(np.arange(self._n), self.degrees)
        keep = rows < self._indices
        return np.column_stack([rows[keep], self._indices[keep]])

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self._n == other._n
            and np.array_equal(self._indptr, other._indptr)
            and np.array_equal(self._indices, other._indices)
        )

    def __hash__(self):
        return hash((self._n, self._indices.tobytes()))

    def __repr__(self):
        return f"Graph(n={self._n}, m={self.m})"


Source = Union[str, os.PathLike, IO[str]]


def parse_edge_list(text: str, source=None) -> Graph:
    """Parse edge-list text. See :func:`load_edge_list`."""
    remap: dict[int, int] = {}
    pairs = []
    lines = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise EdgeListParseError(f"expected 2 node ids, got {len(tokens)} tokens", lineno, source)
        try:
            u, v = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise EdgeListParseError(f"non-integer node id in {line!r}", lineno, source) from None
        if u < 0 or v < 0:
            raise EdgeListParseError(f"negative node id in {line!r}", lineno, source)
        lines += 1
        for x in (u, v):
            if x not in remap:
                remap[x] = len(remap)
        pairs.append((remap[u], remap[v]))
    if not pairs:
        raise EdgeListParseError("empty edge list", None, source)

    arr = np.asarray(pairs, dtype=np.int64)
    loops = int(np.count_nonzero(arr[:, 0] == arr[:, 1]))
    arr = arr[arr[:, 0] != arr[:, 1]]
    directed = np.unique(arr, axis=0) if len(arr) else arr
    undirected = np.unique(np.sort(directed, axis=1), axis=0) if len(directed) else directed
    reciprocated = len(directed) - len(undirected)
    # a file listing each edge once is undirected; only count one-way pairs when
    # the file otherwise lists both directions
    asym = len(undirected) - reciprocated if reciprocated else 0
    stats = LoadStats(
        lines=lines,
        self_loops=loops,
        duplicates=len(arr) - len(undirected),
        asymmetric=asym,
    )
    return Graph.from_edges(len(remap), undirected, remap=remap, load_stats=stats)


def load_edge_list(source: Source) -> Graph:
    """Read a SNAP-style edge list.

    Lines starting with ``#`` are comments; every other non-blank line holds
    two whitespace-separated nonnegative integer ids. The result is
    symmetrized with self-loops and duplicates dropped, and ids are compacted
    to ``0..n-1`` in order of first appearance (``graph.remap`` maps original
    id to compact id).
    """
    if hasattr(source, "read"):
        return parse_edge_list(source.read(), getattr(source, "name", None))
    with open(source, encoding="utf-8") as fh:
        return parse_edge_list(fh.read(), os.fspath(source))


def write_edge_list(g: Graph, dest: Source | None = None) -> str:
    """Write one ``u v`` line per edge (``u < v``, compact ids); returns the text."""
    buf = io.StringIO()
    for u, v in g.edges():
        buf.write(f"{u} {v}\n")
    text = buf.getvalue()
    if dest is None:
        return text
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        with open(dest, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


@dataclass(frozen=True)
class DegreeProfile:
    n: int
    max_degree: int
    histogram: np.ndarray = field(repr=False)
    avg_degree: float

    def count_above(self, d: int) -> int:
        """Number of nodes with degree strictly greater than ``d``."""
        return int(self.histogram[d + 1 :].sum())


def degree_profile(g: Graph) -> DegreeProfile:
    deg = g.degrees
    hist = np.bincount(deg, minlength=1)
    hist.setflags(write=False)
    return DegreeProfile(
        n=g.n,
        max_degree=int(deg.max()),
        histogram=hist,
        avg_degree=float(deg.sum()) / g.n,
    )


def max_eigenvalue(g: Graph, tol: float = 1e-6, max_iter: int = 1000) -> float:
    """Spectral radius of the adjacency matrix by power iteration.

    Starts from the all-ones vector and stops once the Rayleigh quotient moves
    by less than ``tol`` between iterations. The iteration runs on ``A + I`` so
    bipartite graphs (where ``-lambda`` is also an eigenvalue) still converge;
    the quotient itself is always taken against ``A``.
    """
    if g.m == 0:
        raise ValueError("graph has no edges")
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = g.csr
    x = np.ones(g.n) / math.sqrt(g.n)
    ax = a @ x
    prev = float(x @ ax)
    for _ in range(max_iter):
        y = ax + x
        x = y / np.linalg.norm(y)
        ax = a @ x
        cur = float(x @ ax)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations", prev)


@dataclass(frozen=True)
class ClippingParams:
    X: float
    d: int
    N: int

    def feasible(self, D: int, slack: float = 1e-9) -> bool:
        return self.N * self.X + D * self.d <= self.X**2 + slack * max(1.0, self.X**2) and self.X <= D


def _min_x(N: int, D: int, d: int) -> float:
    return (N + math.sqrt(N * N + 4.0 * D * d)) / 2.0


def select_clipping_params(p: DegreeProfile) -> ClippingParams:
    """Smallest clipping factor satisfying ``N*X + D*d <= X**2`` and ``X <= D``.

    Every integer threshold ``d`` in ``[0, D]`` is tried; ``N`` counts nodes
    with degree above ``d`` and ``X`` is the positive root of
    ``X**2 - N*X - D*d = 0``. Ties go to the smaller ``d``. ``d = D`` always
    gives ``X = D`` with ``N = 0``.
    """
    D = p.max_degree
    best = ClippingParams(X=float(D), d=D, N=0)
    for d in range(D + 1):
        N = p.count_above(d)
        x = _min_x(N, D, d)
        if x < best.X or (x == best.X and d < best.d):
            best = ClippingParams(X=x, d=d, N=N)
    if best.X > D:
        best = ClippingParams(X=float(D), d=D, N=0)
    return best


def clipping_params_for(p: DegreeProfile, X: float) -> ClippingParams | None:
    """The ``(d, N)`` pair that makes a given ``X`` feasible with fewest high-degree nodes.

    Returns ``None`` when no threshold works (``X`` below the minimal feasible value
    or above ``D``).
    """
    D = p.max_degree
    if X > D:
        return None
    for d in range(D, -1, -1):
        N = p.count_above(d)
        if N * X + D * d <= X * X:
            return ClippingParams(X=float(X), d=d, N=N)
    return None
