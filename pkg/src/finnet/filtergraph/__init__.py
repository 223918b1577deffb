"""Graph filtering of dependence matrices: threshold graphs, MST, PMFG,
hierarchical dendrograms and DBHT clustering."""

from .dbht import DbhtResult, bubble_decomposition, dbht, dbht_details
from .graph import Clustering, Dendrogram, FilteredGraph, cluster_composition
from .hierarchy import cut_dendrogram, cut_to_k, hierarchical
from .mst import mst, sorted_pairs
from .planarity import is_planar, planar_faces
from .pmfg import pmfg, verify_planar
from .threshold import giant_component, threshold_graph

__all__ = [
    "Clustering", "DbhtResult", "Dendrogram", "FilteredGraph", "bubble_decomposition",
    "cluster_composition", "cut_dendrogram", "cut_to_k", "dbht", "dbht_details",
    "giant_component", "hierarchical", "is_planar", "mst", "planar_faces", "pmfg",
    "sorted_pairs", "threshold_graph", "verify_planar",
]
