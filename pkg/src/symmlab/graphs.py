"""Discrete ground spaces, symmetrization orders and Cartesian products.

A ground space is a finite graph together with an enumeration of its
vertices whose initial segments serve as the discrete balls about the
origin.  Spaces that stand in for an infinite graph (the line Z, the
regular tree T_m) carry an *ambient degree* per vertex: the degree the
vertex has in the infinite graph.  Edges leaving the finite piece are
treated as leading to vertices where every function vanishes.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Graph",
    "Order",
    "GroundSpace",
    "ProductSpace",
    "SpaceSpecError",
    "build_space",
    "canonical_order",
    "parse_space_spec",
    "product",
    "ball",
    "single_vertex",
    "product_candidate_orders",
]


class SpaceSpecError(ValueError):
    """Raised for malformed or out-of-range space specifications."""


@dataclass(frozen=True)
class Graph:
    vertex_count: int
    edges: tuple[tuple[int, int], ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.vertex_count < 1:
            raise SpaceSpecError("a graph needs at least one vertex")
        seen = set()
        norm = []
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise SpaceSpecError(f"self-loop at vertex {a}")
            if not (0 <= a < self.vertex_count and 0 <= b < self.vertex_count):
                raise SpaceSpecError(f"edge ({a}, {b}) out of range")
            e = (a, b) if a < b else (b, a)
            if e in seen:
                raise SpaceSpecError(f"duplicate edge {e}")
            seen.add(e)
            norm.append(e)
        object.__setattr__(self, "edges", tuple(sorted(norm)))
        if self.labels is not None and len(self.labels) != self.vertex_count:
            raise SpaceSpecError("one label per vertex is required")

    @property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.vertex_count, dtype=int)
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.vertex_count, self.vertex_count))
        if self.edges:
            e = np.asarray(self.edges)
            A[e[:, 0], e[:, 1]] = 1.0
            A[e[:, 1], e[:, 0]] = 1.0
        return A

    def neighbors(self, v: int) -> list[int]:
        return [b if a == v else a for a, b in self.edges if v in (a, b)]

    def label(self, v: int) -> str:
        return self.labels[v] if self.labels is not None else str(v)


@dataclass(frozen=True)
class Order:
    """Symmetrization order: ``permutation[j]`` is the vertex of rank ``j``."""

    permutation: tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(v) for v in self.permutation)
        if sorted(perm) != list(range(len(perm))):
            raise SpaceSpecError("order is not a bijection on the vertices")
        object.__setattr__(self, "permutation", perm)

    def __len__(self):
        return len(self.permutation)

    @property
    def perm(self) -> np.ndarray:
        return np.asarray(self.permutation, dtype=int)

    @property
    def rank(self) -> np.ndarray:
        r = np.empty(len(self.permutation), dtype=int)
        r[self.perm] = np.arange(len(self.permutation))
        return r


@dataclass(frozen=True)
class GroundSpace:
    graph: Graph
    order: Order
    ambient_degree: tuple[int, ...] = ()
    name: str = "custom"

    def __post_init__(self):
        if len(self.order) != self.graph.vertex_count:
            raise SpaceSpecError("order must cover exactly the graph's vertices")
        deg = tuple(int(d) for d in self.graph.degrees)
        amb = tuple(int(d) for d in self.ambient_degree) or deg
        if len(amb) != len(deg) or any(a < d for a, d in zip(amb, deg)):
            raise SpaceSpecError("ambient degrees must dominate graph degrees")
        object.__setattr__(self, "ambient_degree", amb)

    @property
    def vertex_count(self) -> int:
        return self.graph.vertex_count

    @property
    def origin(self) -> int:
        return self.order.permutation[0]

    @property
    def fiber_shape(self) -> tuple[int, int]:
        return self.vertex_count, 1

    def with_order(self, order: Order | Sequence[int]) -> "GroundSpace":
        if not isinstance(order, Order):
            order = Order(tuple(order))
        return GroundSpace(self.graph, order, self.ambient_degree, self.name)


@dataclass(frozen=True)
class ProductSpace:
    """Cartesian product M x N; vertex (x, y) has index ``x * |N| + y``."""

    m_space: GroundSpace
    n_graph: Graph
    graph: Graph = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        nm, nn = self.m_space.vertex_count, self.n_graph.vertex_count
        edges = []
        for a, b in self.m_space.graph.edges:
            edges.extend((a * nn + y, b * nn + y) for y in range(nn))
        for a, b in self.n_graph.edges:
            edges.extend((x * nn + a, x * nn + b) for x in range(nm))
        labels = tuple(
            f"({self.m_space.graph.label(x)},{self.n_graph.label(y)})"
            for x in range(nm)
            for y in range(nn)
        )
        object.__setattr__(self, "graph", Graph(nm * nn, tuple(edges), labels))

    @property
    def vertex_count(self) -> int:
        return self.graph.vertex_count

    @property
    def fiber_shape(self) -> tuple[int, int]:
        return self.m_space.vertex_count, self.n_graph.vertex_count

    @property
    def order(self) -> Order:
        return self.m_space.order

    @property
    def ambient_degree(self) -> tuple[int, ...]:
        am = np.asarray(self.m_space.ambient_degree)
        dn = self.n_graph.degrees
        return tuple(int(v) for v in (am[:, None] + dn[None, :]).ravel())

    @property
    def name(self) -> str:
        return f"{self.m_space.name}x{self.n_graph.vertex_count}"

    def index(self, x: int, y: int) -> int:
        return x * self.n_graph.vertex_count + y


def single_vertex() -> Graph:
    return Graph(1, ())


# --------------------------------------------------------------------------
# space constructors
# --------------------------------------------------------------------------

def _line(n: int) -> tuple[Graph, Order, tuple[int, ...]]:
    if n < 0:
        raise SpaceSpecError("line half-width must be >= 0")
    size = 2 * n + 1
    g = Graph(size, tuple((i, i + 1) for i in range(size - 1)),
              tuple(str(i - n) for i in range(size)))
    perm = [n]
    for k in range(1, n + 1):
        perm += [n + k, n - k]
    return g, Order(tuple(perm)), (2,) * size


def _cycle(m: int) -> tuple[Graph, Order, tuple[int, ...]]:
    if m < 3:
        raise SpaceSpecError("cycle needs m >= 3")
    g = Graph(m, tuple((i, (i + 1) % m) for i in range(m)))
    perm = [0]
    k = 1
    while len(perm) < m:
        perm.append(k % m)
        if len(perm) < m:
            perm.append((-k) % m)
        k += 1
    return g, Order(tuple(perm)), ()


def _tree(degree: int, depth: int) -> tuple[Graph, Order, tuple[int, ...]]:
    # BFS construction; vertex index = spiral rank (level by level, children
    # listed in their parent's rank order, then by child index)
    if degree < 3:
        raise SpaceSpecError("regular tree needs degree >= 3")
    if depth < 0:
        raise SpaceSpecError("tree depth must be >= 0")
    words = [""]
    edges = []
    level = [0]
    for _ in range(depth):
        nxt = []
        for parent in level:
            nchild = degree if parent == 0 else degree - 1
            for c in range(nchild):
                words.append(words[parent] + str(c))
                edges.append((parent, len(words) - 1))
                nxt.append(len(words) - 1)
        level = nxt
    labels = tuple(w if w else "root" for w in words)
    g = Graph(len(words), tuple(edges), labels)
    return g, Order(tuple(range(len(words)))), (degree,) * len(words)


def _octahedron() -> tuple[Graph, Order, tuple[int, ...]]:
    # antipodal pairs (0,1), (2,3), (4,5); the order is a face 0,2,4 followed by
    # the antipodes of 4, 2, 0 (other neighbor orders fail the kernel inequality)
    edges = [(a, b) for a, b in itertools.combinations(range(6), 2) if b != a ^ 1]
    g = Graph(6, tuple(edges))
    return g, Order((0, 2, 4, 5, 3, 1)), ()


def _hypercube(dim: int) -> tuple[Graph, Order, tuple[int, ...]]:
    if dim < 1:
        raise SpaceSpecError("hypercube dimension must be >= 1")
    n = 1 << dim
    edges = [(v, v ^ (1 << i)) for v in range(n) for i in range(dim) if v < v ^ (1 << i)]
    labels = tuple(format(v, f"0{dim}b") for v in range(n))
    return Graph(n, tuple(edges), labels), Order(tuple(range(n))), ()


def _torus(q: int, dim: int) -> tuple[Graph, Order, tuple[int, ...]]:
    """Z_q^dim with the Cayley graph of the standard generators."""
    if q < 3 or dim < 1:
        raise SpaceSpecError("torus needs q >= 3 and dim >= 1")
    pts = list(itertools.product(range(q), repeat=dim))
    idx = {p: i for i, p in enumerate(pts)}
    edges = set()
    for p in pts:
        for i in range(dim):
            nb = list(p)
            nb[i] = (nb[i] + 1) % q
            a, b = idx[p], idx[tuple(nb)]
            edges.add((min(a, b), max(a, b)))
    labels = tuple("".join(map(str, p)) for p in pts)
    g = Graph(len(pts), tuple(sorted(edges)), labels)
    return g, product_candidate_orders_for_torus(q, dim)[0], ()


def _custom(spec: Mapping) -> tuple[Graph, Order, tuple[int, ...]]:
    edges = tuple(tuple(e) for e in spec.get("edges", ()))
    n = int(spec.get("n", 1 + max((max(e) for e in edges), default=0)))
    g = Graph(n, edges, tuple(spec["labels"]) if "labels" in spec else None)
    order = Order(tuple(spec.get("order", range(n))))
    return g, order, tuple(spec.get("ambient_degree", ()))


def parse_space_spec(spec: str | Mapping) -> dict:
    """Normalize a space spec to a dict with a ``type`` key.

    Accepts the JSON object form (``{"type": "tree", "degree": 3, "depth": 2}``)
    or the compact CLI form ``type[:args]``, e.g. ``line:5``, ``cycle:8``,
    ``tree:3,2``, ``octahedron``, ``cube``, ``hypercube:3``, ``torus:3,2``.
    """
    if isinstance(spec, Mapping):
        if "type" not in spec:
            raise SpaceSpecError("space spec needs a 'type' field")
        return dict(spec)
    text = spec.strip()
    if text.startswith("{"):
        try:
            return parse_space_spec(json.loads(text))
        except json.JSONDecodeError as exc:
            raise SpaceSpecError(f"bad space JSON: {exc}") from None
    kind, _, args = text.partition(":")
    try:
        nums = [int(a) for a in args.split(",")] if args else []
    except ValueError:
        raise SpaceSpecError(f"bad space arguments in {spec!r}") from None

    def need(k):
        if len(nums) != k:
            raise SpaceSpecError(f"{kind} takes {k} argument(s): {spec!r}")
        return nums

    if kind == "line":
        return {"type": "line", "n": need(1)[0]}
    if kind == "cycle":
        return {"type": "cycle", "m": need(1)[0]}
    if kind == "tree":
        d, h = need(2)
        return {"type": "tree", "degree": d, "depth": h}
    if kind == "octahedron":
        need(0)
        return {"type": "octahedron"}
    if kind == "cube":
        need(0)
        return {"type": "hypercube", "dim": 3}
    if kind == "hypercube":
        return {"type": "hypercube", "dim": need(1)[0]}
    if kind == "torus":
        q, d = need(2)
        return {"type": "torus", "q": q, "dim": d}
    raise SpaceSpecError(f"unknown space type {kind!r}")


def _construct(spec: Mapping) -> tuple[Graph, Order, tuple[int, ...], str]:
    kind = spec["type"]
    try:
        if kind == "line":
            g, o, a = _line(int(spec["n"]))
            name = f"line:{spec['n']}"
        elif kind == "cycle":
            g, o, a = _cycle(int(spec["m"]))
            name = f"cycle:{spec['m']}"
        elif kind == "tree":
            g, o, a = _tree(int(spec["degree"]), int(spec["depth"]))
            name = f"tree:{spec['degree']},{spec['depth']}"
        elif kind == "octahedron":
            g, o, a = _octahedron()
            name = "octahedron"
        elif kind == "hypercube":
            g, o, a = _hypercube(int(spec["dim"]))
            name = f"hypercube:{spec['dim']}"
        elif kind == "torus":
            g, o, a = _torus(int(spec["q"]), int(spec["dim"]))
            name = f"torus:{spec['q']},{spec['dim']}"
        elif kind == "custom":
            g, o, a = _custom(spec)
            name = spec.get("name", "custom")
        else:
            raise SpaceSpecError(f"unknown space type {kind!r}")
    except KeyError as exc:
        raise SpaceSpecError(f"{kind} spec is missing field {exc}") from None
    return g, o, a, name


def build_space(spec: str | Mapping) -> GroundSpace:
    """Build a ground space with its canonical symmetrization order."""
    g, o, a, name = _construct(parse_space_spec(spec))
    return GroundSpace(g, o, a, name)


def canonical_order(spec: str | Mapping) -> Order:
    return _construct(parse_space_spec(spec))[1]


def product(m_space: GroundSpace, n_graph: Graph | GroundSpace) -> ProductSpace:
    if isinstance(n_graph, GroundSpace):
        n_graph = n_graph.graph
    return ProductSpace(m_space, n_graph)


def ball(space: GroundSpace, j: int) -> frozenset[int]:
    if not 0 <= j <= space.vertex_count:
        raise ValueError(f"ball size {j} outside [0, {space.vertex_count}]")
    return frozenset(space.order.permutation[:j])


def product_candidate_orders_for_torus(q: int, dim: int) -> list[Order]:
    """Natural orders on Z_q^dim built from the cycle order on each factor.

    Returned in a fixed sequence: lexicographic on per-factor ranks (first
    coordinate slowest), the same with the last coordinate slowest, then the
    "diamond" order by the sum of per-factor ranks and the "box" order by
    their maximum (ties broken lexicographically).
    """
    crank = _cycle(q)[1].rank
    pts = list(itertools.product(range(q), repeat=dim))
    ranks = [tuple(int(crank[c]) for c in p) for p in pts]
    keys = [
        lambda r: r,
        lambda r: r[::-1],
        lambda r: (sum(r), r),
        lambda r: (max(r), sum(r), r),
    ]
    out = []
    for key in keys:
        perm = tuple(sorted(range(len(pts)), key=lambda i: key(ranks[i])))
        order = Order(perm)
        if order not in out:
            out.append(order)
    return out


def product_candidate_orders(space: GroundSpace) -> list[Order]:
    """Candidate orders for the spaces that have no single natural one."""
    kind, _, args = space.name.partition(":")
    if kind == "torus":
        q, d = (int(a) for a in args.split(","))
        return product_candidate_orders_for_torus(q, d)
    return [space.order]


def is_connected(graph: Graph, vertices: Iterable[int]) -> bool:
    vs = set(vertices)
    if not vs:
        return True
    start = next(iter(vs))
    seen = {start}
    stack = [start]
    adj = {v: [] for v in vs}
    for a, b in graph.edges:
        if a in vs and b in vs:
            adj[a].append(b)
            adj[b].append(a)
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen == vs
