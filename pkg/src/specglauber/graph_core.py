"""Graphs, oriented edges, vertex-split extensions and trees of self-avoiding walks."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np

Label = Union[int, tuple]

# Cycle-closing spin conventions for the SAW tree.
#   "weitz":   fixed +1 when the entry edge precedes the exit edge at the repeated vertex
#   "literal": fixed -1 when the last vertex exceeds the one before it
CONVENTIONS = ("weitz", "literal")
DEFAULT_CONVENTION = "weitz"


class GraphError(ValueError):
    pass


def _label_key(label: Label):
    if isinstance(label, tuple):
        return (1,) + label
    return (0, label)


def _base(label: Label):
    """Original vertex a label stands for (a split vertex ws stands for w)."""
    return label[0] if isinstance(label, tuple) else label


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices 0..n-1.

    `labels[i]` is the external name of vertex i: an int for ordinary vertices,
    a pair (w, s) for the split vertex ws of an extension. The total order used
    by the spin-fixing rules is the index order.
    """

    n: int
    edges: tuple
    adjacency: tuple
    labels: tuple = field(default=None, compare=True)

    def __post_init__(self):
        if self.labels is None:
            object.__setattr__(self, "labels", tuple(range(self.n)))

    @property
    def m(self) -> int:
        return len(self.edges)

    def neighbors(self, v: int) -> tuple:
        return self.adjacency[v]

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    @cached_property
    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency), default=0)

    @cached_property
    def index(self) -> dict:
        return {lab: i for i, lab in enumerate(self.labels)}

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adjacency[u]

    @cached_property
    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        seen = {0}
        stack = [0]
        while stack:
            v = stack.pop()
            for x in self.adjacency[v]:
                if x not in seen:
                    seen.add(x)
                    stack.append(x)
        return len(seen) == self.n

    @cached_property
    def is_regular(self) -> bool:
        return len({len(a) for a in self.adjacency}) <= 1

    def to_json(self) -> dict:
        out = {"n": self.n, "edges": [list(e) for e in self.edges]}
        if self.labels != tuple(range(self.n)):
            out["labels"] = [list(l) if isinstance(l, tuple) else l for l in self.labels]
        return out

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"


def build_graph(n: int, edge_list: Iterable[Sequence[int]], labels: Sequence[Label] | None = None) -> Graph:
    if n < 0:
        raise GraphError(f"negative vertex count {n}")
    seen = set()
    for pair in edge_list:
        u, v = int(pair[0]), int(pair[1])
        if not (0 <= u < n and 0 <= v < n):
            raise GraphError(f"vertex out of range in edge ({u}, {v}) for n={n}")
        if u == v:
            raise GraphError(f"self-loop ({u}, {v})")
        seen.add((min(u, v), max(u, v)))
    edges = tuple(sorted(seen))
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    adjacency = tuple(tuple(sorted(a)) for a in adj)
    return Graph(n, edges, adjacency, None if labels is None else tuple(labels))


def _relabeled(labels: Sequence[Label], label_edges: Iterable[tuple]) -> Graph:
    """Build a graph from labelled vertices, indexing them in canonical label order."""
    order = sorted(labels, key=_label_key)
    idx = {lab: i for i, lab in enumerate(order)}
    return build_graph(len(order), [(idx[a], idx[b]) for a, b in label_edges], order)


class OrientedEdge(NamedTuple):
    tail: int
    head: int

    def reverse(self) -> "OrientedEdge":
        return OrientedEdge(self.head, self.tail)

    def __str__(self):
        return f"{self.tail}->{self.head}"


def oriented_edges(g: Graph) -> list:
    out = []
    for u, v in g.edges:
        out.append(OrientedEdge(u, v))
        out.append(OrientedEdge(v, u))
    out.sort()
    return out


def vertex_extension(g: Graph, w: int):
    """Split vertex w into one split vertex per neighbour.

    Returns (G_w, split_map) where split_map sends each neighbour label s to the
    index of the split vertex (w, s) in G_w. Split vertices are named by the
    original vertex ids, so splitting twice gives the same names in any order.
    """
    if not 0 <= w <= g.n - 1:
        raise GraphError(f"no vertex {w}")
    lw = g.labels[w]
    if isinstance(lw, tuple):
        raise GraphError("cannot split a split vertex")
    splits = {}
    labels = [lab for i, lab in enumerate(g.labels) if i != w]
    label_edges = []
    for a, b in g.edges:
        if a != w and b != w:
            label_edges.append((g.labels[a], g.labels[b]))
    for s in g.adjacency[w]:
        ls = g.labels[s]
        name = (lw, _base(ls))
        splits[_base(ls)] = name
        labels.append(name)
        label_edges.append((name, ls))
    h = _relabeled(labels, label_edges)
    return h, {s: h.index[name] for s, name in splits.items()}


def pair_extension(g: Graph, u: int, w: int):
    """The {u, w}-extension. Returns (G_{u,w}, {u: split_map_u, w: split_map_w})."""
    if u == w:
        raise GraphError("pair_extension needs two distinct vertices")
    lu, lw = g.labels[u], g.labels[w]
    g1, _ = vertex_extension(g, u)
    g2, _ = vertex_extension(g1, g1.index[lw])
    maps = {}
    for v, lv in ((u, lu), (w, lw)):
        maps[v] = {_base(g.labels[s]): g2.index[(lv, _base(g.labels[s]))] for s in g.adjacency[v]}
    return g2, maps


# ---------------------------------------------------------------------------
# Boundary conditions


@dataclass(frozen=True)
class Boundary:
    """Pinned region Lambda with spins tau, stored as sorted (vertex, spin) pairs."""

    pins: tuple = ()

    def __post_init__(self):
        pins = tuple(sorted((int(v), int(x)) for v, x in self.pins))
        for v, x in pins:
            if x not in (1, -1):
                raise GraphError(f"spin {x} at vertex {v} is not +1/-1")
        if len({v for v, _ in pins}) != len(pins):
            raise GraphError("vertex pinned twice")
        object.__setattr__(self, "pins", pins)

    @classmethod
    def from_dict(cls, d: dict) -> "Boundary":
        return cls(tuple((int(k), int(v)) for k, v in d.items()))

    @cached_property
    def assignment(self) -> dict:
        return dict(self.pins)

    @cached_property
    def region(self) -> frozenset:
        return frozenset(v for v, _ in self.pins)

    def __len__(self):
        return len(self.pins)

    def __contains__(self, v):
        return v in self.assignment

    def extend(self, more: dict) -> "Boundary":
        d = dict(self.assignment)
        d.update(more)
        return Boundary.from_dict(d)

    def to_json(self) -> dict:
        return {"pins": {str(v): x for v, x in self.pins}}

    def __str__(self):
        if not self.pins:
            return "{}"
        return "{" + ", ".join(f"{v}:{'+' if x > 0 else '-'}" for v, x in self.pins) + "}"


EMPTY = Boundary()


# ---------------------------------------------------------------------------
# Trees of self-avoiding walks


@dataclass(frozen=True, slots=True)
class SawNode:
    walk: tuple
    parent: int  # -1 for the root
    children: tuple
    fixed_spin: int  # 0 when free

    @property
    def graph_vertex(self) -> int:
        return self.walk[-1]

    @property
    def depth(self) -> int:
        return len(self.walk) - 1


@dataclass(frozen=True)
class SawTree:
    nodes: tuple
    origin: Label
    root: int = 0

    def __len__(self):
        return len(self.nodes)

    @cached_property
    def arrays(self) -> dict:
        """Struct-of-arrays view used by the dynamic programs."""
        k = len(self.nodes)
        parent = np.fromiter((nd.parent for nd in self.nodes), dtype=np.int64, count=k)
        vertex = np.fromiter((nd.walk[-1] for nd in self.nodes), dtype=np.int64, count=k)
        depth = np.fromiter((len(nd.walk) - 1 for nd in self.nodes), dtype=np.int64, count=k)
        fixed = np.fromiter((nd.fixed_spin for nd in self.nodes), dtype=np.int64, count=k)
        pvert = np.where(parent >= 0, vertex[np.maximum(parent, 0)], -1)
        first = np.fromiter(
            (nd.walk[1] if len(nd.walk) > 1 else -1 for nd in self.nodes), dtype=np.int64, count=k
        )
        saw = np.fromiter((len(set(nd.walk)) == len(nd.walk) for nd in self.nodes), dtype=bool, count=k)
        levels = [np.flatnonzero(depth == d) for d in range(int(depth.max()) + 1)]
        return dict(parent=parent, vertex=vertex, depth=depth, fixed=fixed,
                    parent_vertex=pvert, first=first, saw=saw, levels=levels)


def _closing_spin(walk: tuple, j: int, convention: str) -> int:
    entry, exit_, last = walk[-2], walk[j + 1], walk[-1]
    if convention == "weitz":
        return 1 if entry < exit_ else -1
    return -1 if last > entry else 1


def saw_tree(g: Graph, w: int, boundary: Boundary = EMPTY, convention: str = DEFAULT_CONVENTION) -> SawTree:
    """Tree of self-avoiding walks from w.

    Copies of pinned vertices are leaves carrying the pinned spin. A walk that
    returns to an earlier vertex is a leaf with a spin fixed by `convention`.
    """
    if convention not in CONVENTIONS:
        raise GraphError(f"unknown convention {convention!r}")
    pins = boundary.assignment
    if w in pins:
        raise GraphError(f"root {w} is pinned")
    walks = [(w,)]
    parents = [-1]
    fixed = [0]
    children = [[]]
    stack = [0]
    while stack:
        i = stack.pop()
        walk = walks[i]
        prev = walk[-2] if len(walk) > 1 else -1
        for x in g.adjacency[walk[-1]]:
            if x == prev:
                continue
            new = walk + (x,)
            k = len(walks)
            walks.append(new)
            parents.append(i)
            children.append([])
            children[i].append(k)
            if x in walk:
                fixed.append(_closing_spin(new, walk.index(x), convention))
            elif x in pins:
                fixed.append(pins[x])
            else:
                fixed.append(0)
                stack.append(k)
    nodes = tuple(SawNode(walks[i], parents[i], tuple(children[i]), fixed[i]) for i in range(len(walks)))
    return _reindexed(nodes, list(range(len(nodes))), w)


def _reindexed(nodes, keep, origin) -> SawTree:
    """Keep the given node ids (closed under parents), renumber in BFS order."""
    keep_set = set(keep)
    order = []
    queue = [0]
    while queue:
        nxt = []
        for i in queue:
            order.append(i)
            nxt.extend(c for c in nodes[i].children if c in keep_set)
        queue = nxt
    new_id = {old: k for k, old in enumerate(order)}
    out = []
    for old in order:
        nd = nodes[old]
        out.append(SawNode(nd.walk, new_id.get(nd.parent, -1),
                           tuple(new_id[c] for c in nd.children if c in keep_set), nd.fixed_spin))
    return SawTree(tuple(out), origin)


def saw_subtree(tree: SawTree, s: int) -> SawTree:
    """The subtree T(ws): root, its child copying s, and that child's descendants."""
    root = tree.nodes[tree.root]
    child = [c for c in root.children if tree.nodes[c].graph_vertex == s]
    if not child:
        raise GraphError(f"{s} is not a child of the root")
    keep = [tree.root]
    stack = [child[0]]
    while stack:
        i = stack.pop()
        keep.append(i)
        stack.extend(tree.nodes[i].children)
    w = root.graph_vertex
    return _reindexed(tree.nodes, keep, (w, s))


# ---------------------------------------------------------------------------
# I/O


def parse_graph_text(text: str) -> Graph:
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    if not rows:
        raise GraphError("empty graph file")
    try:
        n, m = int(rows[0][0]), int(rows[0][1])
        pairs = [(int(a), int(b)) for a, b in rows[1:]]
    except (ValueError, IndexError) as exc:
        raise GraphError(f"malformed graph text: {exc}") from None
    if len(pairs) != m:
        raise GraphError(f"header says {m} edges, found {len(pairs)}")
    return build_graph(n, pairs)


def graph_from_json(obj: dict) -> Graph:
    try:
        return build_graph(int(obj["n"]), obj["edges"])
    except KeyError as exc:
        raise GraphError(f"graph JSON missing key {exc}") from None


def load_graph(path: str | Path) -> Graph:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        return graph_from_json(json.loads(text))
    return parse_graph_text(text)


def graph_to_text(g: Graph) -> str:
    return "\n".join([f"{g.n} {g.m}"] + [f"{u} {v}" for u, v in g.edges]) + "\n"
