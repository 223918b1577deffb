"""Directed bubble hierarchical tree (DBHT) clustering on a PMFG.

Construction notes, one per sub-step:

* Similarity. PMFG links are weighted by ``S = 2 - D^2 / 2`` (equal to
  ``1 + C`` for correlation distances), so every weight is non-negative.
* Bubbles. A maximal planar graph is cut recursively along separating
  3-cliques (triangles that are not faces); each cut copies the triangle
  into both halves. Pieces with no separating triangle left are bubbles.
  Two bubbles are adjacent in the bubble tree when they share the triangle
  that separated them.
* Direction. Removing a tree edge splits the bubbles, and hence the
  vertices outside the shared triangle, into two sides. The edge points
  towards the side whose vertices have the larger total similarity to the
  triangle (sum over PMFG links). Exact ties point to the lower-indexed bubble.
* Converging bubbles (no outgoing edge) seed the clusters.
* Assignment, stage 1. A vertex inside exactly one converging bubble joins
  it; a vertex inside several joins the one maximizing
  ``sum_{u in b} S_vu / (3 (|b| - 2))``, its link strength per bubble edge.
* Assignment, stage 2. Every other vertex lies in bubbles whose directed
  paths reach some converging bubbles; it joins the reachable one with the
  smallest mean shortest-path distance (over PMFG links weighted by ``D``)
  to the vertices placed in stage 1.
* Clusters left empty after stage 1 are dropped; ids are renumbered in
  asset order.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Set, Tuple

import networkx as nx
import numpy as np
from scipy.sparse.csgraph import shortest_path

from ..correlation import SquareDependencyMatrix
from .graph import Clustering, FilteredGraph
from .mst import _check_distance
from .pmfg import pmfg

Triangle = Tuple[int, int, int]


@dataclass
class DbhtResult:
    clustering: Clustering
    graph: FilteredGraph
    bubbles: List[Tuple[int, ...]]
    # (from_bubble, to_bubble, separating triangle)
    directed_edges: List[Tuple[int, int, Triangle]] = field(default_factory=list)
    converging: List[int] = field(default_factory=list)


def _triangles(adj: Dict[int, Set[int]]) -> List[Triangle]:
    out = []
    for u in sorted(adj):
        for v in sorted(w for w in adj[u] if w > u):
            for w in sorted(adj[u] & adj[v]):
                if w > v:
                    out.append((u, v, w))
    return out


def _faces(g: nx.Graph) -> Set[Triangle]:
    ok, emb = nx.check_planarity(g)
    if not ok:
        raise ValueError("graph is not planar")
    faces = set()
    seen = set()
    for u, v in emb.edges():
        if (u, v) in seen:
            continue
        face = emb.traverse_face(u, v, mark_half_edges=seen)
        if len(face) == 3:
            faces.add(tuple(sorted(face)))
    return faces


def _components(adj: Dict[int, Set[int]], vertices: Set[int]) -> List[Set[int]]:
    comps, seen = [], set()
    for s in sorted(vertices):
        if s in seen:
            continue
        comp = {s}
        seen.add(s)
        queue = deque([s])
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if w in vertices and w not in seen:
                    seen.add(w)
                    comp.add(w)
                    queue.append(w)
        comps.append(comp)
    return comps


def bubble_decomposition(n: int, edges) -> Tuple[List[Tuple[int, ...]], List[Tuple[int, int, Triangle]]]:
    """Bubbles of a maximal planar graph and the (undirected) bubble-tree edges."""
    adj: Dict[int, Set[int]] = {v: set() for v in range(n)}
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from(edges)
    separating = [t for t in _triangles(adj) if t not in _faces(g)] if n > 4 else []

    bubbles: List[Tuple[int, ...]] = []
    used: List[Triangle] = []
    pieces = [(set(range(n)), set(separating))]
    while pieces:
        verts, candidates = pieces.pop()
        split = None
        for t in sorted(candidates):
            if not set(t) <= verts:
                continue
            comps = _components(adj, verts - set(t))
            if len(comps) > 1:
                split = (t, comps)
                break
        if split is None:
            bubbles.append(tuple(sorted(verts)))
            continue
        t, comps = split
        used.append(t)
        rest = candidates - {t}
        for comp in reversed(comps):
            part = comp | set(t)
            pieces.append((part, {c for c in rest if set(c) <= part}))

    bubbles.sort()
    tree = []
    for t in used:
        holders = [b for b, verts in enumerate(bubbles) if set(t) <= set(verts)]
        if len(holders) != 2:
            raise AssertionError(f"separating triangle {t} held by {len(holders)} bubbles")
        tree.append((holders[0], holders[1], t))
    tree.sort()
    return bubbles, tree


def _direct(bubbles, tree, weights: np.ndarray):
    nb = len(bubbles)
    nbr: Dict[int, Set[int]] = {b: set() for b in range(nb)}
    for a, b, _ in tree:
        nbr[a].add(b)
        nbr[b].add(a)
    directed = []
    for a, b, t in tree:
        side_a = {a}
        queue = deque([a])
        while queue:
            x = queue.popleft()
            for y in nbr[x]:
                if y not in side_a and not (x == a and y == b):
                    side_a.add(y)
                    queue.append(y)
        side_b = set(range(nb)) - side_a
        tri = list(t)
        va = sorted(set().union(*(bubbles[k] for k in side_a)) - set(t))
        vb = sorted(set().union(*(bubbles[k] for k in side_b)) - set(t))
        sa = weights[np.ix_(tri, va)].sum()
        sb = weights[np.ix_(tri, vb)].sum()
        if sa > sb or (sa == sb and a < b):
            directed.append((b, a, t))
        else:
            directed.append((a, b, t))
    return directed


def dbht_details(dist: SquareDependencyMatrix) -> DbhtResult:
    d = _check_distance(dist)
    n = d.shape[0]
    assets = list(dist.assets)
    graph = pmfg(dist)
    edges = [(i, j) for i, j, _ in graph.edges]

    sim = 2.0 - d ** 2 / 2.0
    weights = np.zeros((n, n))
    dmat = np.zeros((n, n))
    for i, j in edges:
        weights[i, j] = weights[j, i] = sim[i, j]
        # zero-length links would vanish from the sparse graph
        dmat[i, j] = dmat[j, i] = max(d[i, j], 1e-300)
    path_len = shortest_path(dmat, method="D", directed=False)

    bubbles, tree = bubble_decomposition(n, edges)
    directed = _direct(bubbles, tree, weights)
    out_deg = [0] * len(bubbles)
    into: Dict[int, List[int]] = {b: [] for b in range(len(bubbles))}
    for a, b, _ in directed:
        out_deg[a] += 1
        into[b].append(a)
    converging = [b for b in range(len(bubbles)) if out_deg[b] == 0]

    if len(converging) == 1:
        clustering = Clustering({a: 0 for a in assets}, "dbht")
        return DbhtResult(clustering, graph, bubbles, directed, converging)

    label = [-1] * n
    member_of = {v: [c for c in converging if v in bubbles[c]] for v in range(n)}
    for v in range(n):
        cs = member_of[v]
        if len(cs) == 1:
            label[v] = cs[0]
        elif len(cs) > 1:
            chi = [weights[v, list(bubbles[c])].sum() / (3.0 * (len(bubbles[c]) - 2)) for c in cs]
            label[v] = cs[int(np.argmax(chi))]

    basin: Dict[int, Set[int]] = {}
    for c in converging:
        seen = {c}
        queue = deque([c])
        while queue:
            x = queue.popleft()
            for y in into[x]:
                if y not in seen:
                    seen.add(y)
                    queue.append(y)
        basin[c] = seen

    core = {c: [v for v in range(n) if label[v] == c] for c in converging}
    final = list(label)
    for v in range(n):
        if label[v] != -1:
            continue
        holders = {b for b, verts in enumerate(bubbles) if v in verts}
        reach = [c for c in converging if basin[c] & holders and core[c]]
        if not reach:
            reach = [c for c in converging if core[c]]
        if len(reach) == 1:
            final[v] = reach[0]
        else:
            mean_d = [path_len[v, core[c]].mean() for c in reach]
            final[v] = reach[int(np.argmin(mean_d))]

    clustering = Clustering.from_labels(assets, final, "dbht")
    return DbhtResult(clustering, graph, bubbles, directed, converging)


def dbht(dist: SquareDependencyMatrix) -> Clustering:
    """Parameter-free clustering of the PMFG by its directed bubble tree."""
    return dbht_details(dist).clustering
