from __future__ import annotations

from typing import List, Tuple

import numpy as np

from ..correlation import SquareDependencyMatrix
from .graph import FilteredGraph


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True


def sorted_pairs(values: np.ndarray) -> List[Tuple[int, int, float]]:
    """Upper-triangle pairs in ascending order of value.

    Equal values are ordered by ``(min index, max index)`` so every
    construction that consumes this list is deterministic.
    """
    n = values.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    w = values[iu, ju]
    order = np.lexsort((ju, iu, w))
    return [(int(iu[k]), int(ju[k]), float(w[k])) for k in order]


def _check_distance(dist: SquareDependencyMatrix) -> np.ndarray:
    if dist.kind != "distance":
        raise ValueError(f"expected a distance matrix, got kind {dist.kind!r}")
    d = dist.values
    if np.isnan(d).any():
        raise ValueError("distance matrix contains NaN")
    return d


def mst(dist: SquareDependencyMatrix) -> FilteredGraph:
    """Kruskal's algorithm: add pairs by ascending distance, skipping any that close a loop."""
    d = _check_distance(dist)
    n = d.shape[0]
    uf = UnionFind(n)
    edges = []
    for i, j, w in sorted_pairs(d):
        if uf.union(i, j):
            edges.append((i, j, w))
            if len(edges) == n - 1:
                break
    return FilteredGraph(list(dist.assets), edges, False, "mst")
