"""Rooted K_q-boosters: the grid-plus-two-apexes base booster, the layering
loop that pushes the special clique off the root, and exact rooted densities.

All densities are ``Fraction``s; a family whose vertices all lie in the root
has density ``math.inf``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable

import networkx as nx
import numpy as np

from .checks import Report
from .errors import InvalidParameter, ResourceLimit
from .graph import Clique, Graph, clique, packing_edges, verify_decomposition

DEFAULT_SUBSET_CAP = 24


def rooted_density(H: Iterable[Clique], R: Iterable[int]):
    H = list(H)
    if not H:
        raise InvalidParameter("rooted density of an empty family")
    outside = set().union(*map(set, H)) - set(R)
    if not outside:
        return math.inf
    return Fraction(len(H), len(outside))


def _brute_force(H: list[Clique], R: set[int]):
    # union[mask] built by doubling: subsets containing clique i extend those that do not
    verts = sorted(set().union(*map(set, H)) - R)
    if len(verts) > 63:
        return _brute_force_py(H, R)
    bit = {v: 1 << i for i, v in enumerate(verts)}
    vm = np.array([sum(bit[v] for v in c if v not in R) for c in H], dtype=np.uint64)
    union = np.zeros(1, dtype=np.uint64)
    count = np.zeros(1, dtype=np.int64)
    for i in range(len(H)):
        union = np.concatenate([union, union | vm[i]])
        count = np.concatenate([count, count + 1])
    size = np.bitwise_count(union[1:]).astype(np.int64)
    count = count[1:]
    if np.any(size == 0):
        return math.inf, _mask_members(H, int(np.flatnonzero(size == 0)[0]) + 1)
    # candidate by float, then confirm exactly against all ties
    ratio = count / size
    best = ratio.max()
    idx = np.flatnonzero(ratio >= best - 1e-12)
    value, arg = max((Fraction(int(count[i]), int(size[i])), i) for i in idx)
    return value, _mask_members(H, int(arg) + 1)


def _brute_force_py(H: list[Clique], R: set[int]):
    best, best_sub = Fraction(-1), None
    for k in range(1, len(H) + 1):
        for sub in combinations(H, k):
            d = rooted_density(sub, R)
            if d > best:
                best, best_sub = d, list(sub)
    return best, best_sub


def _mask_members(H, mask):
    return [c for i, c in enumerate(H) if mask >> i & 1]


def _max_closure(H: list[Clique], R: set[int], num: int, den: int):
    """Maximise den*|F| - num*|V(F) minus R| over subfamilies F, by min cut."""
    g = nx.DiGraph()
    g.add_node("s")
    g.add_node("t")
    for i, c in enumerate(H):
        g.add_edge("s", ("c", i), capacity=den)
        for v in c:
            if v not in R:
                g.add_edge(("c", i), ("v", v))  # no capacity attribute: infinite
    for v in set().union(*map(set, H)) - R:
        g.add_edge(("v", v), "t", capacity=num)
    cut, (source_side, _) = nx.minimum_cut(g, "s", "t")
    chosen = [H[i] for i in range(len(H)) if ("c", i) in source_side]
    return den * len(H) - cut, chosen


def _parametric(H: list[Clique], R: set[int]):
    if any(not set(c) - R for c in H):
        return math.inf, [next(c for c in H if not set(c) - R)]
    lam, arg = rooted_density(H, R), list(H)
    while True:
        gain, chosen = _max_closure(H, R, lam.numerator, lam.denominator)
        if gain <= 0 or not chosen:
            return lam, arg
        lam, arg = rooted_density(chosen, R), chosen


def densest_subfamily(H: Iterable[Clique], R: Iterable[int], cap: int = DEFAULT_SUBSET_CAP,
                      method: str = "auto"):
    """Return ``(m(H, R), maximising subfamily)``.

    ``method`` is ``"brute"`` (exhaustive subset scan, at most ``cap`` cliques),
    ``"flow"`` (exact parametric min-cut) or ``"auto"`` (brute when within cap).
    """
    H = sorted({tuple(c) for c in H})
    R = set(R)
    if not H:
        raise InvalidParameter("maximum rooted density of an empty family")
    if method == "brute" or (method == "auto" and len(H) <= cap):
        if len(H) > cap:
            raise ResourceLimit(f"subset scan over {len(H)} cliques exceeds cap {cap}")
        return _brute_force(H, R)
    if method not in ("auto", "flow"):
        raise InvalidParameter(f"unknown method {method!r}")
    return _parametric(H, R)


def max_rooted_density(H: Iterable[Clique], R: Iterable[int], cap: int = DEFAULT_SUBSET_CAP,
                       method: str = "auto"):
    return densest_subfamily(H, R, cap, method)[0]


def density_bound(q: int) -> Fraction:
    return Fraction(2, q - 2)


@dataclass
class TwoCliqueBooster:
    """A K_q-booster with two disjoint decompositions and a special clique in each."""

    q: int
    graph: Graph
    decomp1: list[Clique]
    decomp2: list[Clique]
    S1: Clique
    S2: Clique

    def overlap(self) -> set[int]:
        return set(self.S1) & set(self.S2)

    def density1(self, **kw):
        rest = [c for c in self.decomp1 if c != self.S1]
        return max_rooted_density(rest, self.S1, **kw) if rest else Fraction(0)

    def density2(self, **kw):
        rest = [c for c in self.decomp2 if c != self.S2]
        return max_rooted_density(rest, set(self.S1) | set(self.S2), **kw) if rest else Fraction(0)

    def satisfies_bounds(self, **kw) -> bool:
        bound = density_bound(self.q)
        return self.density1(**kw) <= bound and self.density2(**kw) <= bound


def base_booster(q: int) -> TwoCliqueBooster:
    """Grid K_{q-1} x K_{q-1} plus two dominating vertices.

    Vertex 0 is the first apex, 1 the second, and grid cell (i, j) with
    ``0 <= i, j < q-1`` is ``2 + i*(q-1) + j``.
    """
    if q < 3:
        raise InvalidParameter(f"q must be >= 3, got {q}")
    k = q - 1
    cell = lambda i, j: 2 + i * k + j  # noqa: E731
    rows = [[cell(i, j) for j in range(k)] for i in range(k)]
    cols = [[cell(i, j) for i in range(k)] for j in range(k)]
    d1 = [clique([0, *r]) for r in rows] + [clique([1, *c]) for c in cols]
    d2 = [clique([1, *r]) for r in rows] + [clique([0, *c]) for c in cols]
    graph = Graph(2 + k * k, packing_edges(d1))
    return TwoCliqueBooster(q, graph, d1, d2, S1=d1[0], S2=d2[0])


@dataclass
class RootedBooster:
    q: int
    graph: Graph
    on: list[Clique]
    off: list[Clique]
    root: Clique
    meta: dict = field(default_factory=dict)

    @property
    def extension_size(self) -> int:
        used = set().union(*map(set, self.on + self.off))
        return len(used - set(self.root))

    def rooted_density(self, **kw):
        R = set(self.root)
        return max(max_rooted_density(self.on, R, **kw), max_rooted_density(self.off, R, **kw))

    def to_json(self) -> dict:
        return {
            "q": self.q,
            "vertices": list(range(self.graph.n)),
            "edges": [list(e) for e in self.graph.sorted_edges()],
            "on_decomp": [list(c) for c in sorted(self.on)],
            "off_decomp": [list(c) for c in sorted(self.off)],
            "root": list(self.root),
        }

    @classmethod
    def from_json(cls, data: dict) -> "RootedBooster":
        n = max(data["vertices"], default=-1) + 1
        return cls(
            q=int(data["q"]),
            graph=Graph(n, data["edges"]),
            on=[clique(c) for c in data["on_decomp"]],
            off=[clique(c) for c in data["off_decomp"]],
            root=clique(data["root"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def _glue(cur: TwoCliqueBooster) -> TwoCliqueBooster:
    """Attach a fresh base booster along S2, shrinking |V(S1) & V(S2)| by one."""
    q = cur.q
    fresh = base_booster(q)
    pivot = min(cur.overlap())
    # S'1 = apex 0 plus grid row 0; the apex lands on the pivot, the row on the rest of S2
    row = sorted(set(fresh.S1) - {0})
    targets = sorted(set(cur.S2) - {pivot})
    mapping = {0: pivot, **dict(zip(row, targets))}
    nxt = cur.graph.n
    for v in range(fresh.graph.n):
        if v not in mapping:
            mapping[v] = nxt
            nxt += 1
    relabel = lambda c: clique(mapping[v] for v in c)  # noqa: E731
    d1p = [relabel(c) for c in fresh.decomp1]
    d2p = [relabel(c) for c in fresh.decomp2]
    S1p, S2p = relabel(fresh.S1), relabel(fresh.S2)
    assert S1p == cur.S2
    new_edges = packing_edges(d1p)
    shared = cur.graph.edges & new_edges
    assert shared == set(combinations(cur.S2, 2)), "glued boosters must meet exactly in S2"
    graph = Graph(nxt, cur.graph.edges | new_edges)
    d1 = cur.decomp1 + [c for c in d1p if c != S1p]
    d2 = [c for c in cur.decomp2 if c != cur.S2] + d2p
    return TwoCliqueBooster(q, graph, d1, d2, S1=cur.S1, S2=S2p)


def layer_boosters(q: int, check: bool = False) -> RootedBooster:
    """Glue base boosters until the special clique is vertex-disjoint from the root.

    With ``check=True`` the two density bounds and the strict overlap decrease
    are asserted after every glue step.
    """
    cur = base_booster(q)
    steps = 0
    history = [len(cur.overlap())]
    while cur.overlap():
        before = len(cur.overlap())
        cur = _glue(cur)
        steps += 1
        history.append(len(cur.overlap()))
        if check:
            assert len(cur.overlap()) < before
            assert verify_decomposition(cur.graph, cur.decomp1, q)
            assert verify_decomposition(cur.graph, cur.decomp2, q)
            assert not set(cur.decomp1) & set(cur.decomp2)
            assert cur.satisfies_bounds(), f"density bound broken after glue {steps}"
    root = cur.S1
    body = cur.graph.minus(combinations(root, 2))
    off = [c for c in cur.decomp1 if c != root]
    return RootedBooster(q, body, on=list(cur.decomp2), off=off, root=root,
                         meta={"glue_steps": steps, "overlap_history": history,
                               "special_clique": cur.S2})


def verify_rooted_booster(rb: RootedBooster, **kw) -> Report:
    q, R = rb.q, rb.root
    rep = Report()
    root_edges = set(combinations(R, 2))
    rep.add("root is a q-clique on booster vertices",
            len(set(R)) == q and all(0 <= v < rb.graph.n for v in R))
    rep.add("R edge-disjoint from B", not (root_edges & rb.graph.edges))
    rep.add("off-decomposition decomposes B", verify_decomposition(rb.graph, rb.off, q))
    rep.add("on-decomposition decomposes B + R",
            verify_decomposition(rb.graph.union(root_edges), rb.on, q))
    rep.add("R not in on-decomposition", tuple(R) not in set(rb.on))
    clash = set(rb.on) & (set(rb.off) | {tuple(R)})
    rep.add("on and off+R disjoint", not clash, f"shared {sorted(clash)[:3]}" if clash else "")
    if not (rb.on and rb.off):
        rep.add("densities computable", False, "empty decomposition")
        return rep
    m_on = max_rooted_density(rb.on, R, **kw)
    m_off = max_rooted_density(rb.off, R, **kw)
    dens = max(m_on, m_off)
    rep.values.update(m_on=m_on, m_off=m_off, rooted_density=dens)
    upper, lower = density_bound(q), Fraction(2, q)
    rep.add("rooted density <= 2/(q-2)", dens <= upper, f"{dens} vs {upper}")
    rep.add("rooted density >= 2/q", dens >= lower, f"{dens} vs {lower}")
    return rep
