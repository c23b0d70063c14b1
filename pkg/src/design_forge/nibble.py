"""Reservoir selection, design regularization, nibble with reserves, and the
sparsified spread nibble.

Hypergraph vertices are integer ids. In the Steiner application the ids of
``E(J)`` come first (matching ``design_hypergraph(J, q).edge_list``) and the
reserve edges follow, see :func:`reserve_hypergraph`.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import asdict, dataclass, field
from itertools import combinations
from math import comb
from typing import Iterable

import networkx as nx
import numpy as np

from .errors import InvalidParameter, PreconditionViolation, RetryExhausted
from .graph import Clique, DesignHypergraph, Edge, Graph, Hypergraph, clique, iter_cliques

log = logging.getLogger(__name__)

OK = "ok"
FAILED = "failed"
SPARSIFY_EXHAUSTED = "sparsification-retry-exhausted"


@dataclass(frozen=True)
class BipartiteHypergraph(Hypergraph):
    """Every hyperedge meets ``A`` in exactly one vertex."""

    A: frozenset[int] = frozenset()

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "A", frozenset(self.A))
        if not self.A <= self.vertices:
            raise InvalidParameter("A must be a subset of the vertex set")
        for e in self.edges:
            if len(e & self.A) != 1:
                raise InvalidParameter(f"hyperedge {sorted(e)} meets A in {len(e & self.A)} vertices")

    @property
    def B(self) -> frozenset[int]:
        return self.vertices - self.A

    def a_vertex(self, e: frozenset[int]) -> int:
        return next(iter(e & self.A))


@dataclass
class NibbleParams:
    D: float | None = None
    gamma: float = 0.5
    bite: float = 0.25
    max_rounds: int = 100
    reserve_policy: str = "greedy"
    floor: float = 0.05
    codegree_cap: float | None = None
    upper_exp: float = 2 / 3
    lower_exp: float = 1 / 3
    alpha: float = 0.0
    sparsify_cap: int = 1000
    completion_budget: int = 2000

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise InvalidParameter("gamma must lie in (0, 1)")
        if not 0 < self.bite < 1:
            raise InvalidParameter("bite must lie in (0, 1)")
        if self.reserve_policy not in ("greedy", "matching"):
            raise InvalidParameter(f"unknown reserve policy {self.reserve_policy!r}")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class NibbleResult:
    status: str
    matching: list[frozenset[int]] = field(default_factory=list)
    covered_A: int = 0
    uncovered_A: list[int] = field(default_factory=list)
    rounds: int = 0
    leave_fraction: float = 0.0
    reserve_used: int = 0
    sparsified: set[frozenset[int]] | None = None
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == OK

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "covered_A": self.covered_A,
            "uncovered_A": self.uncovered_A,
            "rounds": self.rounds,
            "leave_fraction": self.leave_fraction,
            "reserve_used": self.reserve_used,
            "matching": [sorted(e) for e in self.matching],
            **({"info": self.info} if self.info else {}),
        }


# -- reservoir and regularity ------------------------------------------------

def cliques_through_edges(X: Graph, pairs: Iterable[Edge], q: int) -> dict[Edge, int]:
    """Number of K_q in X + {e} containing e, for each pair e."""
    pairs = list(pairs)
    if q == 3:
        M = np.zeros((X.n, X.n), dtype=np.int32)
        for u, v in X.edges:
            M[u, v] = M[v, u] = 1
        common = M @ M
        return {(u, v): int(common[u, v]) for u, v in pairs}
    out = {}
    for u, v in pairs:
        nb = X.adj[u] & X.adj[v]
        sub = Graph(X.n, [e for e in X.edges if e[0] in nb and e[1] in nb])
        out[(u, v)] = sum(1 for c in iter_cliques(sub, q - 2) if set(c) <= nb)
    return out


def select_reservoir(G: Graph, q: int, p: float, seed=None, eps: float = 0.05,
                     retries: int = 2000) -> Graph:
    """Random p-subgraph X of G with Delta(X) <= 2pn and every other edge well covered through X."""
    if not 0 < p <= 1 and p != 0:
        raise InvalidParameter(f"p must lie in [0, 1], got {p}")
    n = G.n
    threshold = eps * p ** (comb(q, 2) - 1) * n ** (q - 2)
    rng = np.random.default_rng(seed)
    edges = G.sorted_edges()
    worst = None
    for attempt in range(retries):
        keep = rng.random(len(edges)) < p
        X = Graph(n, (e for e, k in zip(edges, keep) if k))
        if X.max_degree() > 2 * p * n:
            worst = ("max_degree", X.max_degree(), 2 * p * n)
            continue
        rest = [e for e, k in zip(edges, keep) if not k]
        counts = cliques_through_edges(X, rest, q)
        low = min(counts.values(), default=math.inf)
        if low >= threshold:
            log.debug("reservoir accepted on attempt %d", attempt + 1)
            return X
        worst = ("min_cliques_through_edge", low, threshold)
    raise RetryExhausted(f"no reservoir accepted in {retries} attempts; last failure {worst}", worst)


def regularize_design(D: DesignHypergraph, tol: float, seed=None, retries: int = 20,
                      keep: float = 0.5) -> DesignHypergraph:
    """Keep each hyperedge independently with probability ``keep`` until all degrees
    are within (keep +- tol) * C(n-2, q-2)."""
    if not 0 < keep <= 1:
        raise InvalidParameter(f"keep probability must lie in (0, 1], got {keep}")
    n, q = D.graph.n, D.q
    target = comb(n - 2, q - 2)
    lo, hi = (keep - tol) * target, (keep + tol) * target
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(retries):
        kept = np.flatnonzero(rng.random(len(D.edges)) < keep)
        sub = D.restrict(kept)
        deg = sub.degrees()
        dev = max((abs(d / target - keep) for d in deg.values()), default=0.0)
        if all(lo <= d <= hi for d in deg.values()):
            return sub
        best = dev if best is None else min(best, dev)
    raise RetryExhausted(f"no thinning within tol {tol} after {retries} tries; best deviation {best:.3f}",
                         best)


# -- nibble with reserves ------------------------------------------------------

def _check_pair(G1: Hypergraph, G2: BipartiteHypergraph):
    if G1.vertices & G2.vertices != G2.A:
        raise PreconditionViolation("V(G1) and V(G2) must intersect exactly in A")
    if set(G1.edges) & set(G2.edges):
        raise PreconditionViolation("G1 and G2 must be edge-disjoint")


def _complete_greedy(G2, uncovered, covered, rng, budget=0):
    """Cover A-vertices by reserve edges, always serving the most constrained vertex next.

    The first descent is the plain randomized greedy; ``budget`` extra search
    nodes allow backtracking when it dead-ends. Returns (chosen, still uncovered).
    """
    inc = G2.incidence()
    order = {a: rng.random() for a in uncovered}
    best = ([], sorted(uncovered))
    nodes = 0

    class _Stop(Exception):
        pass

    def rec(todo, used, chosen):
        nonlocal best, nodes
        if not todo:
            best = (list(chosen), [])
            raise _Stop
        options = {a: [G2.edges[i] for i in inc[a] if not (G2.edges[i] & used)] for a in todo}
        a = min(todo, key=lambda x: (len(options[x]), order[x]))
        if not options[a]:
            if len(todo) < len(best[1]):
                best = (list(chosen), sorted(todo))
            return
        opts = options[a]
        rng.shuffle(opts)
        for e in opts:
            nodes += 1
            if nodes > budget + len(uncovered):
                raise _Stop
            chosen.append(e)
            rec(todo - {a}, used | e, chosen)
            chosen.pop()

    try:
        rec(frozenset(uncovered), frozenset(covered), [])
    except _Stop:
        pass
    if best[1]:
        best = _greedy_partial(G2, inc, uncovered, covered, order, rng)
    return best


def _greedy_partial(G2, inc, uncovered, covered, order, rng):
    """One greedy pass that skips stranded vertices, for a maximal partial cover."""
    used = set(covered)
    chosen, missing = [], []
    todo = set(uncovered)
    while todo:
        options = {a: [G2.edges[i] for i in inc[a] if not (G2.edges[i] & used)] for a in todo}
        a = min(todo, key=lambda x: (len(options[x]), order[x]))
        todo.discard(a)
        if not options[a]:
            missing.append(a)
            continue
        e = rng.choice(options[a])
        chosen.append(e)
        used |= e
    return chosen, sorted(missing)


def _complete_matching(G2, uncovered, covered):
    bg = nx.Graph()
    left = [("a", a) for a in uncovered]
    bg.add_nodes_from(left)
    by_pair = {}
    for e in G2.edges:
        a = G2.a_vertex(e)
        rest = e - {a}
        if len(rest) != 1:
            raise InvalidParameter("matching policy needs exactly one B-vertex per reserve edge")
        (b,) = rest
        if a in uncovered and b not in covered:
            bg.add_edge(("a", a), ("b", b))
            by_pair[(a, b)] = e
    match = nx.bipartite.hopcroft_karp_matching(bg, top_nodes=left)
    chosen, missing = [], []
    for a in uncovered:
        m = match.get(("a", a))
        if m is None:
            missing.append(a)
        else:
            chosen.append(by_pair[(a, m[1])])
    return chosen, sorted(missing)


def nibble_with_reserves(G1: Hypergraph, G2: BipartiteHypergraph, params: NibbleParams,
                         seed=None) -> NibbleResult:
    _check_pair(G1, G2)
    rng = random.Random(seed)
    A = G2.A
    covered: set[int] = set()
    matching: list[frozenset[int]] = []
    alive = list(G1.edges)
    rounds = idle = 0
    while alive and rounds < params.max_rounds and not A <= covered:
        rounds += 1
        bite = [e for e in alive if rng.random() < params.bite]
        rng.shuffle(bite)
        added = 0
        for e in bite:
            if not e & covered:
                matching.append(e)
                covered |= e
                added += 1
        alive = [e for e in alive if not e & covered]
        idle = idle + 1 if added == 0 else 0
        if idle >= 2:
            break
    left = sorted(A - covered)
    leave_fraction = len(left) / len(A) if A else 0.0
    if params.reserve_policy == "matching":
        extra, missing = _complete_matching(G2, left, covered)
    else:
        extra, missing = _complete_greedy(G2, left, covered, rng, params.completion_budget)
    matching += extra
    for e in extra:
        covered |= e
    _assert_matching(matching)
    status = OK if not missing else FAILED
    return NibbleResult(status, matching, covered_A=len(A & covered), uncovered_A=missing,
                        rounds=rounds, leave_fraction=leave_fraction, reserve_used=len(extra))


def _assert_matching(matching):
    seen: set[int] = set()
    for e in matching:
        assert not (e & seen), f"matching edges overlap at {sorted(e & seen)}"
        seen |= e


def is_a_perfect(matching: Iterable[frozenset[int]], A: Iterable[int]) -> bool:
    matching = list(matching)
    seen = []
    for e in matching:
        seen.extend(e)
    if len(seen) != len(set(seen)):
        return False
    return set(A) <= set(seen)


# -- spread nibble ---------------------------------------------------------------

def _thresholds(params, D, rate):
    m = rate * D
    cod = params.codegree_cap if params.codegree_cap is not None else math.log(max(D, 2)) ** 2
    return m, cod


def sparsify(G1: Hypergraph, G2: BipartiteHypergraph, params: NibbleParams, rng: random.Random,
             D: float, rate: float):
    """Independent ``rate``-thinning of both parts, resampling the trials behind the
    first bad event until none holds. Returns (kept G1 edges, kept G2 edges, resamples)
    or None when the cap is hit."""
    edges = [("1", e) for e in G1.edges] + [("2", e) for e in G2.edges]
    keep = [rng.random() < rate for _ in edges]
    by_vertex: dict[int, list[int]] = {}
    for i, (_, e) in enumerate(edges):
        for v in e:
            by_vertex.setdefault(v, []).append(i)
    m, cod_cap = _thresholds(params, D, rate)
    upper = m + m ** params.upper_exp
    deg1_orig = G1.degrees()
    deg2_orig = G2.degrees()

    def first_bad():
        deg1: dict[int, int] = {}
        deg2: dict[int, int] = {}
        codeg: dict[tuple[int, int], int] = {}
        for i, (part, e) in enumerate(edges):
            if not keep[i]:
                continue
            d = deg1 if part == "1" else deg2
            for v in e:
                d[v] = d.get(v, 0) + 1
            for pr in combinations(sorted(e), 2):
                codeg[pr] = codeg.get(pr, 0) + 1
        for pr in sorted(codeg):
            if codeg[pr] > cod_cap:
                return [i for i in by_vertex[pr[0]] if pr[1] in edges[i][1]]
        for b in sorted(G2.B):
            if deg2.get(b, 0) > upper:
                return [i for i in by_vertex[b] if edges[i][0] == "2"]
        for v in sorted(G1.vertices):
            if deg1.get(v, 0) > upper:
                return [i for i in by_vertex.get(v, []) if edges[i][0] == "1"]
        for a in sorted(G2.A):
            mu1 = rate * deg1_orig[a]
            if mu1 > 0 and deg1.get(a, 0) < mu1 * (1 - mu1 ** -params.lower_exp):
                return [i for i in by_vertex[a] if edges[i][0] == "1"]
            mu2 = rate * deg2_orig[a] * D ** -params.alpha
            if deg2_orig[a] and deg2.get(a, 0) < max(1.0, mu2 - mu2 ** params.upper_exp):
                return [i for i in by_vertex[a] if edges[i][0] == "2"]
        return None

    for resamples in range(params.sparsify_cap + 1):
        bad = first_bad()
        if bad is None:
            g1 = [e for (part, e), k in zip(edges, keep) if k and part == "1"]
            g2 = [e for (part, e), k in zip(edges, keep) if k and part == "2"]
            return g1, g2, resamples
        for i in bad:
            keep[i] = rng.random() < rate
    return None


def spread_nibble(G1: Hypergraph, G2: BipartiteHypergraph, params: NibbleParams, seed=None) -> NibbleResult:
    _check_pair(G1, G2)
    D = params.D
    if D is None:
        degs = list(G1.degrees().values()) + list(G2.degrees().values())
        D = max(degs, default=1) or 1
    true_rate = D ** (params.gamma / 2 - 1)
    rate = min(1.0, max(params.floor, true_rate))
    log.debug("sparsification rate %.4g (formula %.4g, floor %.4g)", rate, true_rate, params.floor)
    rng = random.Random(seed)
    if rate >= 1:
        res = nibble_with_reserves(G1, G2, params, seed)
        res.sparsified = set(G1.edges) | set(G2.edges)
        res.info.update(rate=1.0, formula_rate=true_rate, resamples=0)
        return res
    out = sparsify(G1, G2, params, rng, D, rate)
    if out is None:
        return NibbleResult(SPARSIFY_EXHAUSTED, info={"rate": rate, "formula_rate": true_rate})
    g1, g2, resamples = out
    H1 = Hypergraph(G1.vertices, tuple(g1))
    H2 = BipartiteHypergraph(G2.vertices, tuple(g2), A=G2.A)
    res = nibble_with_reserves(H1, H2, params, rng.getrandbits(64))
    res.sparsified = set(g1) | set(g2)
    assert all(e in res.sparsified for e in res.matching)
    res.info.update(rate=rate, formula_rate=true_rate, resamples=resamples)
    return res


# -- Steiner application -----------------------------------------------------------

def reserve_hypergraph(J: Graph, X: Graph, q: int) -> tuple[BipartiteHypergraph, list[Edge]]:
    """Hyperedges = edge sets of q-cliques in J + X with exactly one J-edge.

    Returns the hypergraph and the id -> graph-edge table (J's edges first, in
    sorted order, then X's).
    """
    j_edges = J.sorted_edges()
    x_edges = X.sorted_edges()
    table = j_edges + x_edges
    idx = {e: i for i, e in enumerate(table)}
    G = J.union(X)
    hyper = []
    for c in iter_cliques(G, q):
        es = list(combinations(c, 2))
        if sum(1 for e in es if e in J.edges) == 1:
            hyper.append(frozenset(idx[e] for e in es))
    A = frozenset(range(len(j_edges)))
    return BipartiteHypergraph(frozenset(range(len(table))), tuple(hyper), A=A), table


def matching_to_packing(matching: Iterable[frozenset[int]], table: list[Edge]) -> list[Clique]:
    out = []
    for e in matching:
        verts = {v for i in e for v in table[i]}
        out.append(clique(verts))
    return sorted(out)


# -- text formats ------------------------------------------------------------------

def format_hypergraph(H: Hypergraph) -> str:
    """``N M`` header, one hyperedge per line, then optional ``A ...`` and ``V ...`` lines.

    The vertex set is whatever the edges and the ``A`` line mention; a ``V``
    line lists the remaining isolated vertices.
    """
    n = max(H.vertices, default=-1) + 1
    lines = [f"{n} {len(H.edges)}"] + [" ".join(map(str, sorted(e))) for e in H.edges]
    seen = set().union(*H.edges) if H.edges else set()
    if isinstance(H, BipartiteHypergraph):
        lines.append("A " + " ".join(map(str, sorted(H.A))))
        seen |= H.A
    isolated = sorted(H.vertices - seen)
    if isolated:
        lines.append("V " + " ".join(map(str, isolated)))
    return "\n".join(lines) + "\n"


def parse_hypergraph(text: str) -> Hypergraph:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.strip().startswith("#")]
    n, m = (int(x) for x in lines[0].split())
    A = None
    extra: set[int] = set()
    edges = []
    for ln in lines[1:]:
        if ln.startswith("A"):
            A = frozenset(int(x) for x in ln.split()[1:])
        elif ln.startswith("V"):
            extra.update(int(x) for x in ln.split()[1:])
        else:
            edges.append(frozenset(int(x) for x in ln.split()))
    if len(edges) != m:
        raise InvalidParameter(f"header says {m} hyperedges, found {len(edges)}")
    verts = frozenset(set().union(*edges) | extra | (A or set()))
    if any(not 0 <= v < n for v in verts):
        raise InvalidParameter(f"vertex labels must lie in [0, {n})")
    if A is not None:
        return BipartiteHypergraph(verts, tuple(edges), A=A)
    return Hypergraph(verts, tuple(edges))
