"""Exact walk counts and Katz centrality.

Three independent routes: the neighbor-sum recursion, a dense linear solve,
and explicit walk enumeration for tiny graphs.
"""

from __future__ import annotations

import csv
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .graph import Graph, max_eigenvalue, ConvergenceError

__all__ = [
    "CentralityVector",
    "propagate",
    "exact_path_counts",
    "brute_force_walk_count",
    "exact_katz_iterative",
    "exact_katz_solve",
    "true_katz_horizon",
    "true_katz",
    "EXACT_INT_LIMIT",
]

EXACT_INT_LIMIT = 2.0**53
SOLVE_MAX_NODES = 2000
BRUTE_MAX_NODES = 12
BRUTE_MAX_STEPS = 10


@dataclass
class CentralityVector:
    values: np.ndarray
    alpha: float
    steps: Union[int, str]
    overflow: bool = field(default=False)

    def __len__(self):
        return len(self.values)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node", "value"])
            for v, x in enumerate(self.values):
                w.writerow([v, repr(float(x))])

    @classmethod
    def from_csv(cls, path, alpha=float("nan"), steps="unknown") -> "CentralityVector":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if rows[0] != ["node", "value"]:
            raise ValueError(f"{os.fspath(path)}: expected header node,value")
        vals = np.array([float(r[1]) for r in rows[1:]])
        return cls(vals, alpha, steps)


def propagate(g: Graph, k: np.ndarray, alpha: float = 1.0) -> np.ndarray:
    """One round of ``alpha * sum_{u in nbrs(v)} k[u]`` for every node.

    ``k`` may be a vector or an ``(n, trials)`` matrix. Each row is summed
    sequentially in ascending neighbor order, so the result is identical to a
    per-node left-to-right loop regardless of the number of columns.
    """
    k2 = k.reshape(g.n, -1)
    out = g.csr @ k2
    if alpha != 1.0:
        out *= alpha
    return out.reshape(k.shape)


def exact_path_counts(g: Graph, i: int) -> CentralityVector:
    """Number of length-``i`` walks starting at each node (``P^(0)`` is all ones).

    Values are float64; ``overflow`` is set once any count passes 2**53, after
    which the entries are no longer exact integers.
    """
    if i < 0:
        raise ValueError("walk length must be nonnegative")
    p = np.ones(g.n)
    for _ in range(i):
        p = propagate(g, p)
    over = bool(np.any(p > EXACT_INT_LIMIT))
    return CentralityVector(p, 1.0, i, overflow=over)


def brute_force_walk_count(g: Graph, v: int, i: int) -> int:
    """Count length-``i`` walks from ``v`` by depth-first enumeration."""
    if g.n > BRUTE_MAX_NODES or i > BRUTE_MAX_STEPS:
        raise ValueError(f"brute force limited to n <= {BRUTE_MAX_NODES} and i <= {BRUTE_MAX_STEPS}")
    if i < 0:
        raise ValueError("walk length must be nonnegative")
    nbrs = [[int(u) for u in g.neighbors(x)] for x in range(g.n)]
    count = 0
    stack = [(v, 0)]
    while stack:
        x, depth = stack.pop()
        if depth == i:
            count += 1
            continue
        for u in nbrs[x]:
            stack.append((u, depth + 1))
    return count


def _check_alpha(g: Graph, alpha: float) -> None:
    if g.m == 0:
        return
    try:
        lam = max_eigenvalue(g)
    except ConvergenceError as exc:
        lam = exc.estimate
    if alpha * lam >= 1.0:
        warnings.warn(
            f"alpha={alpha:g} is not below 1/lambda_max={1 / lam:g}; the Katz series diverges",
            RuntimeWarning,
            stacklevel=3,
        )


def exact_katz_iterative(g: Graph, alpha: float, S: int, check_alpha: bool = True) -> CentralityVector:
    """Truncated Katz centrality ``sum_{i=1..S} alpha^i P^(i)`` via the recursion."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if S < 1:
        raise ValueError("S must be at least 1")
    if check_alpha:
        _check_alpha(g, alpha)
    k = np.ones(g.n)
    katz = np.zeros(g.n)
    for _ in range(S):
        k = propagate(g, k, alpha)
        katz += k
    return CentralityVector(katz, alpha, S)


def exact_katz_solve(g: Graph, alpha: float) -> CentralityVector:
    """Katz centrality from the dense system ``(I - alpha A) x = 1``, minus the ones."""
    if g.n > SOLVE_MAX_NODES:
        raise ValueError(f"dense solve limited to n <= {SOLVE_MAX_NODES}; use exact_katz_iterative")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    a = g.csr.toarray()
    if g.m:
        lam = float(np.max(np.abs(np.linalg.eigvalsh(a))))
        if alpha * lam >= 1.0:
            raise np.linalg.LinAlgError(
                f"I - alpha*A is singular or indefinite: alpha={alpha:g} >= 1/lambda_max={1 / lam:g}"
            )
    ones = np.ones(g.n)
    x = np.linalg.solve(np.eye(g.n) - alpha * a, ones)
    return CentralityVector(x - ones, alpha, "closed-form")


def true_katz_horizon(alpha: float, lam: float, tail: float = 1e-10) -> int:
    """Smallest S with ``(alpha*lam)**(S+1) / (1 - alpha*lam) < tail``."""
    r = alpha * lam
    if not 0 < r < 1:
        raise ValueError("need 0 < alpha * lambda_max < 1")
    s = math.ceil(math.log(tail * (1 - r)) / math.log(r) - 1)
    s = max(s, 1)
    while r ** (s + 1) / (1 - r) >= tail:
        s += 1
    return s


def true_katz(g: Graph, alpha: float, lam: float | None = None, tail: float = 1e-10) -> CentralityVector:
    """Reference Katz vector used by the experiments, truncated where the tail is below ``tail``."""
    if g.m == 0:
        return CentralityVector(np.zeros(g.n), alpha, 1)
    if lam is None:
        lam = max_eigenvalue(g)
    return exact_katz_iterative(g, alpha, true_katz_horizon(alpha, lam, tail), check_alpha=False)
