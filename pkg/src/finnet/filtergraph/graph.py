from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Tuple

import networkx as nx
import numpy as np

PROVENANCES = ("threshold", "mst", "pmfg", "fevd", "regression", "aggregate")


@dataclass
class FilteredGraph:
    """Edge set over a fixed node list.

    Edges are ``(i, j, weight)`` with integer node indices. Undirected graphs
    store ``i < j``; directed graphs store ``i -> j``.
    """

    nodes: List[str]
    edges: List[Tuple[int, int, float]]
    directed: bool = False
    provenance: str = "threshold"
    genus: int = 0
    attrs: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        clean = []
        for i, j, w in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop on node {self.nodes[i]!r}")
            if not self.directed and i > j:
                i, j = j, i
            clean.append((i, j, float(w)))
        self.edges = clean

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edge_set(self) -> set:
        return {(i, j) for i, j, _ in self.edges}

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n_nodes, self.n_nodes))
        for i, j, w in self.edges:
            a[i, j] = w
            if not self.directed:
                a[j, i] = w
        return a

    def to_networkx(self) -> nx.Graph:
        g = nx.DiGraph() if self.directed else nx.Graph()
        g.add_nodes_from(range(self.n_nodes))
        g.add_weighted_edges_from(self.edges)
        return g

    # -- serialization ----------------------------------------------------

    def edge_rows(self) -> List[Tuple[str, str, float]]:
        return [(self.nodes[i], self.nodes[j], w) for i, j, w in self.edges]

    def to_edge_csv(self, path, extra: Mapping[str, List] | None = None) -> None:
        extra = dict(extra or {})
        header = ["source", "target", "weight"] + list(extra)
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for k, (a, b, w) in enumerate(self.edge_rows()):
                cols = [a, b, f"{w:.12g}"] + [_fmt(extra[c][k]) for c in extra]
                fh.write(",".join(cols) + "\n")

    def to_json(self) -> str:
        return json.dumps({
            "nodes": self.nodes,
            "edges": [{"source": a, "target": b, "weight": w} for a, b, w in self.edge_rows()],
            "directed": self.directed,
            "provenance": self.provenance,
            "genus": self.genus,
        })

    @classmethod
    def from_json(cls, text: str) -> "FilteredGraph":
        obj = json.loads(text)
        idx = {a: k for k, a in enumerate(obj["nodes"])}
        edges = [(idx[e["source"]], idx[e["target"]], e["weight"]) for e in obj["edges"]]
        return cls(obj["nodes"], edges, obj["directed"], obj["provenance"], obj.get("genus", 0))

    def to_dot(self) -> str:
        kind, arrow = ("digraph", "->") if self.directed else ("graph", "--")
        lines = [f"{kind} {self.provenance} {{"]
        lines += [f'  "{a}";' for a in self.nodes]
        lines += [f'  "{a}" {arrow} "{b}" [weight={w:.12g}];' for a, b, w in self.edge_rows()]
        lines.append("}")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    return f"{v:.12g}" if isinstance(v, float) else str(v)


@dataclass
class Dendrogram:
    """Merge list ``(a, b, height, new_id)``; leaves are ``0..N-1``, merge ``k`` creates ``N + k``."""

    leaves: List[str]
    merges: List[Tuple[int, int, float, int]]
    linkage: str = "average"

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("cluster_a,cluster_b,height,new_cluster\n")
            for a, b, h, c in self.merges:
                fh.write(f"{a},{b},{h:.12g},{c}\n")

    def leaf_order(self) -> List[int]:
        """Leaves in dendrogram order (left-to-right), for ordering a correlation matrix."""
        n = len(self.leaves)
        children = {c: (a, b) for a, b, _, c in self.merges}
        if not self.merges:
            return list(range(n))
        order, stack = [], [self.merges[-1][3]]
        while stack:
            node = stack.pop()
            if node < n:
                order.append(node)
            else:
                a, b = children[node]
                stack.extend([b, a])
        return order


@dataclass
class Clustering:
    assignment: Dict[str, int]
    method: str

    @property
    def n_clusters(self) -> int:
        return len(set(self.assignment.values()))

    def groups(self) -> Dict[int, List[str]]:
        out = defaultdict(list)
        for a, c in self.assignment.items():
            out[c].append(a)
        return dict(sorted(out.items()))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("asset,cluster\n")
            for a, c in self.assignment.items():
                fh.write(f"{a},{c}\n")

    @classmethod
    def from_labels(cls, assets, labels, method: str) -> "Clustering":
        """Relabel arbitrary cluster labels as ``0, 1, ...`` in order of first appearance."""
        remap: Dict = {}
        for lab in labels:
            remap.setdefault(lab, len(remap))
        return cls({a: remap[lab] for a, lab in zip(assets, labels)}, method)


def cluster_composition(c: Clustering, labels: Mapping[str, object]) -> Dict[int, Dict[str, float]]:
    """Share of each sector label within each cluster.

    ``labels`` maps asset to a sector string, or to a tuple whose first entry
    is the sector.
    """
    missing = [a for a in c.assignment if a not in labels]
    if missing:
        raise ValueError(f"no sector label for assets {missing[:5]}")
    out = {}
    for cid, members in c.groups().items():
        counts = Counter(_sector(labels[a]) for a in members)
        total = sum(counts.values())
        out[cid] = {s: counts[s] / total for s in sorted(counts)}
    return out


def _sector(label) -> str:
    return label[0] if isinstance(label, (tuple, list)) else str(label)
