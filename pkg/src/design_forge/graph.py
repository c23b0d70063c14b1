"""Graphs, cliques, packings and the design hypergraph.

Vertices are dense integer ids ``0..n-1``. A clique is a strictly increasing
tuple of vertex ids, so packings can be handled as plain sets of tuples.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Iterable, Iterator

from .errors import InvalidParameter, ResourceLimit

log = logging.getLogger(__name__)

Edge = tuple[int, int]
Clique = tuple[int, ...]

DEFAULT_CLIQUE_CAP = 10**7


def edge(u: int, v: int) -> Edge:
    if u == v:
        raise InvalidParameter(f"self-loop at {u}")
    return (u, v) if u < v else (v, u)


def clique(vertices: Iterable[int]) -> Clique:
    c = tuple(sorted(vertices))
    if len(set(c)) != len(c):
        raise InvalidParameter(f"repeated vertex in clique {c}")
    return c


def clique_edges(c: Clique) -> list[Edge]:
    return list(combinations(c, 2))


def packing_edges(cliques: Iterable[Clique]) -> set[Edge]:
    return {e for c in cliques for e in combinations(c, 2)}


@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset[Edge]
    adj: tuple[frozenset[int], ...] = field(init=False, repr=False, compare=False)

    def __init__(self, n: int, edges: Iterable[Iterable[int]] = ()):
        norm = set()
        for uv in edges:
            u, v = uv
            e = edge(int(u), int(v))
            if not (0 <= e[0] and e[1] < n):
                raise InvalidParameter(f"edge {e} outside [0, {n})")
            norm.add(e)
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for u, v in norm:
            nbrs[u].add(v)
            nbrs[v].add(u)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", frozenset(norm))
        object.__setattr__(self, "adj", tuple(frozenset(s) for s in nbrs))

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls(n, combinations(range(n), 2))

    @classmethod
    def cycle(cls, n: int) -> "Graph":
        return cls(n, ((i, (i + 1) % n) for i in range(n)))

    def __len__(self):
        return len(self.edges)

    def __contains__(self, uv) -> bool:
        u, v = uv
        return u != v and edge(u, v) in self.edges

    def has_edge(self, u: int, v: int) -> bool:
        return u != v and edge(u, v) in self.edges

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    def degrees(self) -> list[int]:
        return [len(a) for a in self.adj]

    def max_degree(self) -> int:
        return max(self.degrees(), default=0)

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    def common_neighbors(self, vertices: Iterable[int]) -> set[int]:
        vs = list(vertices)
        if not vs:
            return set(range(self.n))
        out = set(self.adj[vs[0]])
        for v in vs[1:]:
            out &= self.adj[v]
        return out

    def is_clique(self, vertices: Iterable[int]) -> bool:
        return all(self.has_edge(u, v) for u, v in combinations(vertices, 2))

    def union(self, other: "Graph | Iterable[Edge]") -> "Graph":
        es = other.edges if isinstance(other, Graph) else set(other)
        n = max(self.n, other.n) if isinstance(other, Graph) else self.n
        return Graph(n, self.edges | set(es))

    def minus(self, other: "Graph | Iterable[Edge]") -> "Graph":
        es = other.edges if isinstance(other, Graph) else {edge(*e) for e in other}
        return Graph(self.n, self.edges - es)

    def with_n(self, n: int) -> "Graph":
        return Graph(n, self.edges)


def is_kq_divisible(G: Graph, q: int) -> bool:
    if q < 3:
        raise InvalidParameter(f"q must be >= 3, got {q}")
    if len(G.edges) % comb(q, 2):
        return False
    return all(d % (q - 1) == 0 for d in G.degrees())


def complete_graph_divisible(n: int, q: int) -> bool:
    """Arithmetic form of divisibility for K_n."""
    return (n - 1) % (q - 1) == 0 and comb(n, 2) % comb(q, 2) == 0


def check_packing(G: Graph, S: Iterable[Clique], q: int) -> list[str]:
    """Return diagnostics for ``S`` as a K_q-packing of ``G``; empty means valid."""
    problems = []
    seen: dict[Edge, Clique] = {}
    for c in S:
        c = tuple(c)
        if len(c) != q or len(set(c)) != q:
            problems.append(f"{c} is not a set of {q} distinct vertices")
            continue
        if list(c) != sorted(c):
            problems.append(f"{c} is not in canonical order")
        for e in combinations(sorted(c), 2):
            if e not in G.edges:
                problems.append(f"{c} uses non-edge {e}")
            elif e in seen:
                problems.append(f"{c} and {seen[e]} share edge {e}")
            else:
                seen[e] = c
    return problems


def verify_packing(G: Graph, S: Iterable[Clique], q: int) -> bool:
    problems = check_packing(G, S, q)
    for p in problems:
        log.debug("packing check: %s", p)
    return not problems


def verify_decomposition(G: Graph, S: Iterable[Clique], q: int) -> bool:
    S = list(S)
    if not verify_packing(G, S, q):
        return False
    covered = packing_edges(S)
    missing = G.edges - covered
    if missing:
        log.debug("decomposition check: %d uncovered edges, e.g. %s", len(missing), min(missing))
    return not missing


def iter_cliques(G: Graph, q: int) -> Iterator[Clique]:
    """Cliques of size q in increasing vertex order, extending by higher neighbours."""
    higher = [frozenset(w for w in G.adj[v] if w > v) for v in range(G.n)]

    def extend(prefix: list[int], cand: frozenset[int]):
        if len(prefix) == q:
            yield tuple(prefix)
            return
        need = q - len(prefix)
        for w in sorted(cand):
            nxt = cand & higher[w]
            if len(nxt) + 1 < need:
                continue
            prefix.append(w)
            yield from extend(prefix, nxt)
            prefix.pop()

    if q == 1:
        yield from ((v,) for v in range(G.n))
        return
    for v in range(G.n):
        if len(higher[v]) >= q - 1:
            yield from extend([v], higher[v])


def list_cliques(G: Graph, q: int, cap: int = DEFAULT_CLIQUE_CAP) -> list[Clique]:
    if q < 2:
        raise InvalidParameter(f"q must be >= 2, got {q}")
    out = []
    for c in iter_cliques(G, q):
        out.append(c)
        if len(out) > cap:
            raise ResourceLimit(f"more than {cap} cliques of size {q}")
    return out


@dataclass(frozen=True)
class Hypergraph:
    """A simple hypergraph: explicit vertex set and a tuple of distinct hyperedges."""

    vertices: frozenset[int]
    edges: tuple[frozenset[int], ...]

    def __post_init__(self):
        edges = tuple(frozenset(e) for e in self.edges)
        if len(set(edges)) != len(edges):
            raise InvalidParameter("duplicate hyperedges are not supported")
        stray = set().union(*edges) - self.vertices if edges else set()
        if stray:
            raise InvalidParameter(f"hyperedges use unknown vertices {sorted(stray)[:5]}")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "vertices", frozenset(self.vertices))

    def degrees(self) -> Counter:
        deg = Counter({v: 0 for v in self.vertices})
        for e in self.edges:
            deg.update(e)
        return deg

    def codegrees(self) -> Counter:
        cod: Counter = Counter()
        for e in self.edges:
            cod.update(combinations(sorted(e), 2))
        return cod

    def max_codegree(self) -> int:
        return max(self.codegrees().values(), default=0)

    def incidence(self) -> dict[int, list[int]]:
        inc: dict[int, list[int]] = {v: [] for v in self.vertices}
        for i, e in enumerate(self.edges):
            for v in e:
                inc[v].append(i)
        return inc

    def subhypergraph(self, keep: Iterable[int]) -> "Hypergraph":
        return Hypergraph(self.vertices, tuple(self.edges[i] for i in keep))


@dataclass(frozen=True)
class DesignHypergraph(Hypergraph):
    """Hypergraph on the edges of ``graph``; one hyperedge per q-clique.

    ``edge_list[i]`` is the graph edge behind vertex ``i`` and ``cliques[j]``
    the clique behind hyperedge ``j``.
    """

    graph: Graph = None
    q: int = 0
    edge_list: tuple[Edge, ...] = ()
    cliques: tuple[Clique, ...] = ()

    def edge_id(self, e: Edge) -> int:
        return self._index[edge(*e)]

    @property
    def _index(self) -> dict[Edge, int]:
        idx = self.__dict__.get("_idx")
        if idx is None:
            idx = {e: i for i, e in enumerate(self.edge_list)}
            object.__setattr__(self, "_idx", idx)
        return idx

    def restrict(self, keep: Iterable[int]) -> "DesignHypergraph":
        keep = list(keep)
        return DesignHypergraph(
            vertices=self.vertices,
            edges=tuple(self.edges[i] for i in keep),
            graph=self.graph,
            q=self.q,
            edge_list=self.edge_list,
            cliques=tuple(self.cliques[i] for i in keep),
        )


def design_hypergraph(G: Graph, q: int) -> DesignHypergraph:
    if q < 3:
        raise InvalidParameter(f"q must be >= 3, got {q}")
    edge_list = tuple(G.sorted_edges())
    index = {e: i for i, e in enumerate(edge_list)}
    cliques = tuple(list_cliques(G, q))
    hyperedges = tuple(frozenset(index[e] for e in combinations(c, 2)) for c in cliques)
    return DesignHypergraph(
        vertices=frozenset(range(len(edge_list))),
        edges=hyperedges,
        graph=G,
        q=q,
        edge_list=edge_list,
        cliques=cliques,
    )


# -- text formats ------------------------------------------------------------

def _content_lines(text: str) -> Iterator[str]:
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            yield line


def format_edgelist(G: Graph) -> str:
    lines = [f"{G.n} {len(G.edges)}"]
    lines += [f"{u} {v}" for u, v in G.sorted_edges()]
    return "\n".join(lines) + "\n"


def parse_edgelist(text: str) -> Graph:
    lines = list(_content_lines(text))
    if not lines:
        raise InvalidParameter("empty edge-list file")
    n, m = (int(x) for x in lines[0].split())
    body = lines[1:]
    if len(body) != m:
        raise InvalidParameter(f"header says {m} edges, found {len(body)}")
    edges = []
    for line in body:
        u, v = (int(x) for x in line.split())
        if not u < v:
            raise InvalidParameter(f"edge line '{line}' must have u < v")
        edges.append((u, v))
    return Graph(n, edges)


def format_packing(S: Iterable[Clique], comment: str | None = None) -> str:
    lines = [f"# {comment}"] if comment else []
    lines += [" ".join(map(str, c)) for c in sorted(S)]
    return "\n".join(lines) + "\n"


def parse_packing(text: str) -> list[Clique]:
    return [clique(int(x) for x in line.split()) for line in _content_lines(text)]
