"""Planarity by face-by-face path embedding (Demoucron, Malgrange, Pertuiset).

Used as the independent verifier for PMFG output; the construction itself
relies on the left-right test in networkx. Quadratic per biconnected block,
fine for desk-scale graphs.
"""

from __future__ import annotations

from collections import deque
from typing import Dict, Iterable, List, Optional, Set, Tuple


def _biconnected_blocks(adj: Dict[int, Set[int]]) -> List[Set[Tuple[int, int]]]:
    """Edge sets of the biconnected blocks (iterative Hopcroft-Tarjan)."""
    disc: Dict[int, int] = {}
    low: Dict[int, int] = {}
    blocks = []
    counter = 0
    for root in sorted(adj):
        if root in disc:
            continue
        disc[root] = low[root] = counter
        counter += 1
        edge_stack: List[Tuple[int, int]] = []
        stack = [(root, None, iter(sorted(adj[root])))]
        while stack:
            v, parent, it = stack[-1]
            advanced = False
            for w in it:
                if w == parent:
                    continue
                if w not in disc:
                    edge_stack.append((v, w))
                    disc[w] = low[w] = counter
                    counter += 1
                    stack.append((w, v, iter(sorted(adj[w]))))
                    advanced = True
                    break
                if disc[w] < disc[v]:
                    edge_stack.append((v, w))
                    low[v] = min(low[v], disc[w])
            if advanced:
                continue
            stack.pop()
            if parent is not None:
                low[parent] = min(low[parent], low[v])
                if low[v] >= disc[parent]:
                    block = set()
                    while True:
                        e = edge_stack.pop()
                        block.add((min(e), max(e)))
                        if e == (parent, v):
                            break
                    blocks.append(block)
    return blocks


def _find_cycle(adj: Dict[int, Set[int]]) -> List[int]:
    start = min(adj)
    parent = {start: None}
    depth = {start: 0}
    stack = [start]
    while stack:
        v = stack.pop()
        for w in sorted(adj[v]):
            if w == parent[v]:
                continue
            if w in parent:
                # back edge closes a cycle: walk both ends up to their meeting point
                a, b = v, w
                left, right = [a], [b]
                while depth[a] > depth[b]:
                    a = parent[a]
                    left.append(a)
                while depth[b] > depth[a]:
                    b = parent[b]
                    right.append(b)
                while a != b:
                    a, b = parent[a], parent[b]
                    left.append(a)
                    right.append(b)
                return left + right[-2::-1]
            parent[w] = v
            depth[w] = depth[v] + 1
            stack.append(w)
    raise ValueError("block has no cycle")


class _Fragment:
    __slots__ = ("attachments", "inner", "chord")

    def __init__(self, attachments: Set[int], inner: Set[int], chord: Optional[Tuple[int, int]]):
        self.attachments = attachments
        self.inner = inner
        self.chord = chord


def _fragments(adj, h_vertices: Set[int], h_edges: Set[Tuple[int, int]]) -> List[_Fragment]:
    frags = []
    for v in sorted(h_vertices):
        for w in sorted(adj[v]):
            if v < w and w in h_vertices and (v, w) not in h_edges:
                frags.append(_Fragment({v, w}, set(), (v, w)))
    seen: Set[int] = set()
    for s in sorted(adj):
        if s in h_vertices or s in seen:
            continue
        comp, att = {s}, set()
        queue = deque([s])
        seen.add(s)
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if w in h_vertices:
                    att.add(w)
                elif w not in seen:
                    seen.add(w)
                    comp.add(w)
                    queue.append(w)
        frags.append(_Fragment(att, comp, None))
    return frags


def _fragment_path(adj, frag: _Fragment) -> List[int]:
    if frag.chord is not None:
        return list(frag.chord)
    a = min(frag.attachments)
    starts = sorted(w for w in adj[a] if w in frag.inner)
    prev = {s: None for s in starts}
    queue = deque(starts)
    while queue:
        v = queue.popleft()
        for w in sorted(adj[v]):
            if w in frag.attachments and w != a:
                path = [w, v]
                while prev[v] is not None:
                    v = prev[v]
                    path.append(v)
                return [a] + path[::-1]
            if w in frag.inner and w not in prev:
                prev[w] = v
                queue.append(w)
    raise ValueError("fragment with a single attachment in a biconnected block")


def _split_face(face: List[int], path: List[int]) -> Tuple[List[int], List[int]]:
    a, b = path[0], path[-1]
    ia, ib = face.index(a), face.index(b)
    k = len(face)
    arc_ab = [face[(ia + s) % k] for s in range((ib - ia) % k + 1)]
    arc_ba = [face[(ib + s) % k] for s in range((ia - ib) % k + 1)]
    interior = path[1:-1]
    return arc_ab + interior[::-1], arc_ba + interior


def _embed_block(edges: Set[Tuple[int, int]]) -> Optional[List[List[int]]]:
    """Faces of a planar embedding of a biconnected block, or ``None`` if non-planar."""
    adj: Dict[int, Set[int]] = {}
    for u, v in edges:
        adj.setdefault(u, set()).add(v)
        adj.setdefault(v, set()).add(u)
    if len(edges) == 1:
        return []
    cycle = _find_cycle(adj)
    faces = [list(cycle), list(cycle[::-1])]
    h_vertices = set(cycle)
    h_edges = {(min(cycle[k], cycle[k - 1]), max(cycle[k], cycle[k - 1])) for k in range(len(cycle))}
    while len(h_edges) < len(edges):
        frags = _fragments(adj, h_vertices, h_edges)
        choice = None
        for frag in frags:
            admissible = [f for f in range(len(faces)) if frag.attachments <= set(faces[f])]
            if not admissible:
                return None
            if choice is None or len(admissible) == 1:
                choice = (frag, admissible[0])
                if len(admissible) == 1:
                    break
        frag, f = choice
        path = _fragment_path(adj, frag)
        faces[f:f + 1] = list(_split_face(faces[f], path))
        h_vertices.update(path)
        h_edges.update((min(p, q), max(p, q)) for p, q in zip(path, path[1:]))
    return faces


def is_planar(n_nodes: int, edges: Iterable[Tuple[int, int]]) -> bool:
    """True if the simple graph on ``0..n_nodes-1`` with ``edges`` is planar."""
    return planar_faces(n_nodes, edges) is not None


def planar_faces(n_nodes: int, edges: Iterable[Tuple[int, int]]) -> Optional[List[List[List[int]]]]:
    """Per-block face lists of a planar embedding; ``None`` for non-planar graphs.

    Every block's embedding is checked against Euler's formula ``V - E + F = 2``.
    """
    adj: Dict[int, Set[int]] = {v: set() for v in range(n_nodes)}
    for u, v in edges:
        if u == v:
            continue
        adj[u].add(v)
        adj[v].add(u)
    m = sum(len(s) for s in adj.values()) // 2
    if n_nodes >= 3 and m > 3 * n_nodes - 6:
        return None
    out = []
    for block in _biconnected_blocks(adj):
        faces = _embed_block(block)
        if faces is None:
            return None
        if faces:
            nv = len({v for e in block for v in e})
            if nv - len(block) + len(faces) != 2:
                raise AssertionError("embedding violates Euler's formula")
        out.append(faces)
    return out
