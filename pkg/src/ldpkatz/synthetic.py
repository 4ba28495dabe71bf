"""Small graph generators for tests, demos and regime experiments."""

from __future__ import annotations

import itertools

import numpy as np

from .graph import Graph


def empty(n: int) -> Graph:
    return Graph.from_edges(n, [])


def path(n: int) -> Graph:
    return Graph.from_edges(n, [(v, v + 1) for v in range(n - 1)])


def cycle(n: int) -> Graph:
    return Graph.from_edges(n, [(v, (v + 1) % n) for v in range(n)])


def star(leaves: int) -> Graph:
    """K_{1,leaves} with the centre at node 0."""
    return Graph.from_edges(leaves + 1, [(0, v) for v in range(1, leaves + 1)])


def complete(m: int) -> Graph:
    return Graph.from_edges(m, itertools.combinations(range(m), 2))


def erdos_renyi(n: int, p: float, seed: int = 0) -> Graph:
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    return Graph.from_edges(n, np.column_stack([iu[keep], ju[keep]]))


def hub_periphery(hub_degree: int, periphery: int, max_degree: int = 3, seed: int = 0) -> Graph:
    """One hub joined to ``hub_degree`` periphery nodes; periphery degrees stay <= ``max_degree``.

    Node 0 is the hub and nodes ``1..periphery`` form the periphery. Extra
    periphery-periphery edges are added at random until no further edge fits
    under the degree cap (or a fixed number of attempts runs out).
    """
    if hub_degree > periphery:
        raise ValueError("hub cannot have more neighbors than there are periphery nodes")
    rng = np.random.default_rng(seed)
    n = periphery + 1
    deg = np.zeros(n, dtype=int)
    edges = set()
    for v in range(1, hub_degree + 1):
        edges.add((0, v))
        deg[0] += 1
        deg[v] += 1
    for _ in range(20 * periphery):
        u, v = rng.integers(1, n, size=2)
        if u == v:
            continue
        e = (min(u, v), max(u, v))
        if e in edges or deg[u] >= max_degree or deg[v] >= max_degree:
            continue
        edges.add(e)
        deg[u] += 1
        deg[v] += 1
    return Graph.from_edges(n, sorted(edges))


def chung_lu(n: int, avg_degree: float, exponent: float = 2.5, max_degree: int | None = None,
             seed: int = 0) -> Graph:
    """Heavy-tailed random graph with expected degrees following a power law."""
    rng = np.random.default_rng(seed)
    w = (np.arange(1, n + 1) / n) ** (-1.0 / (exponent - 1.0))
    w *= avg_degree / w.mean()
    if max_degree is not None:
        w = np.minimum(w, max_degree)
    total = w.sum()
    iu, ju = np.triu_indices(n, k=1)
    prob = np.minimum(w[iu] * w[ju] / total, 1.0)
    keep = rng.random(len(iu)) < prob
    return Graph.from_edges(n, np.column_stack([iu[keep], ju[keep]]))
