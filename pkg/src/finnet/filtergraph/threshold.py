from __future__ import annotations

from typing import Optional

import networkx as nx
import numpy as np

from ..correlation import SquareDependencyMatrix
from .graph import FilteredGraph


def threshold_graph(matrix: SquareDependencyMatrix, value: Optional[float] = None,
                    quantile: Optional[float] = None, weighted: bool = True) -> FilteredGraph:
    """Keep pairs whose correlation is strictly above a threshold.

    Give either an absolute ``value`` or a ``quantile`` in (0, 1) of the
    off-diagonal correlations. Weighted graphs use ``|C_ij|`` as edge weight,
    unweighted ones weight 1.
    """
    if matrix.kind != "correlation":
        raise ValueError(f"expected a correlation matrix, got kind {matrix.kind!r}")
    if (value is None) == (quantile is None):
        raise ValueError("give exactly one of value or quantile")
    c = matrix.values
    iu, ju = np.triu_indices(c.shape[0], k=1)
    off = c[iu, ju]
    if quantile is not None:
        if not 0 < quantile < 1:
            raise ValueError("quantile must lie in (0, 1)")
        value = float(np.quantile(off, quantile))
    keep = off > value
    w = np.abs(off[keep]) if weighted else np.ones(int(keep.sum()))
    edges = list(zip(iu[keep].tolist(), ju[keep].tolist(), w.tolist()))
    g = FilteredGraph(list(matrix.assets), edges, False, "threshold")
    g.attrs["threshold"] = value
    return g


def giant_component(graph: FilteredGraph):
    """Node and edge count of the largest connected component."""
    g = graph.to_networkx()
    if graph.directed:
        g = g.to_undirected()
    comp = max(nx.connected_components(g), key=len)
    return len(comp), g.subgraph(comp).number_of_edges()
