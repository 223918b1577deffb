from __future__ import annotations

import networkx as nx

from ..correlation import SquareDependencyMatrix
from .graph import FilteredGraph
from .mst import UnionFind, _check_distance, sorted_pairs
from .planarity import is_planar


def pmfg(dist: SquareDependencyMatrix) -> FilteredGraph:
    """Planar maximally filtered graph.

    Pairs are taken in ascending distance (ties by index pair) and kept when
    the graph stays planar, until ``3(N - 2)`` edges are present.
    """
    d = _check_distance(dist)
    n = d.shape[0]
    if n < 3:
        raise ValueError("a PMFG needs at least 3 nodes")
    target = 3 * (n - 2)
    g = nx.Graph()
    g.add_nodes_from(range(n))
    # joining two components never breaks planarity, so those pairs skip the test
    components = UnionFind(n)
    edges = []
    for i, j, w in sorted_pairs(d):
        g.add_edge(i, j)
        if components.union(i, j) or len(edges) < 9:
            ok = True
        else:
            ok, _ = nx.check_planarity(g)
        if ok:
            edges.append((i, j, w))
            if len(edges) == target:
                break
        else:
            g.remove_edge(i, j)
    return FilteredGraph(list(dist.assets), edges, False, "pmfg", genus=0)


def verify_planar(graph: FilteredGraph) -> bool:
    """Independent planarity check of a finished graph (path-addition algorithm)."""
    return is_planar(graph.n_nodes, [(i, j) for i, j, _ in graph.edges])
