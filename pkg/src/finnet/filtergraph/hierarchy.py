from __future__ import annotations

import numpy as np
from scipy.cluster import hierarchy as sch
from scipy.spatial.distance import squareform

from ..correlation import SquareDependencyMatrix
from .graph import Clustering, Dendrogram
from .mst import UnionFind, _check_distance


def hierarchical(dist: SquareDependencyMatrix, linkage: str = "average") -> Dendrogram:
    """Agglomerative clustering; cluster distance is the minimum (``single``) or mean (``average``)."""
    if linkage not in ("single", "average"):
        raise ValueError(f"unsupported linkage {linkage!r}")
    d = _check_distance(dist)
    n = d.shape[0]
    if n < 2:
        return Dendrogram(list(dist.assets), [], linkage)
    z = sch.linkage(squareform(d, checks=False), method=linkage)
    merges = [(int(a), int(b), float(h), n + k) for k, (a, b, h, _) in enumerate(z)]
    return Dendrogram(list(dist.assets), merges, linkage)


def cut_dendrogram(dend: Dendrogram, height: float) -> Clustering:
    """Clusters formed by all merges strictly below ``height``."""
    if height < 0:
        raise ValueError("cut height must be non-negative")
    n = len(dend.leaves)
    uf = UnionFind(n)
    rep = {k: k for k in range(n)}
    for a, b, h, c in dend.merges:
        if h < height:
            uf.union(rep[a], rep[b])
        rep[c] = rep[a]
    return Clustering.from_labels(dend.leaves, [uf.find(k) for k in range(n)], "dendrogram-cut")


def cut_to_k(dend: Dendrogram, k: int) -> Clustering:
    """Cut just above the merge that leaves ``k`` clusters."""
    n = len(dend.leaves)
    if not 1 <= k <= n:
        raise ValueError("k must lie between 1 and N")
    if k == n:
        return cut_dendrogram(dend, 0.0)
    heights = [m[2] for m in dend.merges]
    return cut_dendrogram(dend, float(np.nextafter(heights[n - k - 1], np.inf)))
