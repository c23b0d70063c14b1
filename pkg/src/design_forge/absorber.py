"""Omni-absorbers: verification, a desk-scale brute-force constructor, and
booster replacement.

The decomposition function is stored as an explicit table keyed by the sorted
edge tuple of each divisible leave ``L``.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Iterable, Mapping

import numpy as np

from .booster import RootedBooster
from .checks import Report
from .errors import NotFound, PreconditionViolation, ResourceLimit
from .graph import Clique, Edge, Graph, clique, edge, iter_cliques, packing_edges
from .solver import CoverInstance, find_decomposition

log = logging.getLogger(__name__)

DEFAULT_RESERVE_CAP = 20
DEFAULT_MAX_ABSORBER_EDGES = 18

LeaveKey = tuple[Edge, ...]


def leave_key(L: Graph | Iterable[Edge]) -> LeaveKey:
    es = L.edges if isinstance(L, Graph) else (edge(*e) for e in L)
    return tuple(sorted(es))


def divisible_subgraphs(X: Graph, q: int, cap: int = DEFAULT_RESERVE_CAP) -> list[Graph]:
    """Every edge subset of X that is K_q-divisible, the empty graph included."""
    edges = X.sorted_edges()
    if len(edges) > cap:
        raise ResourceLimit(f"reserve has {len(edges)} edges, enumeration cap is {cap}")
    verts = sorted({v for e in edges for v in e})
    col = {v: i for i, v in enumerate(verts)}
    mod_deg, mod_e = q - 1, comb(q, 2)
    deg = np.zeros((1, len(verts)), dtype=np.int16)
    cnt = np.zeros(1, dtype=np.int16)
    for u, v in edges:
        step = np.zeros(len(verts), dtype=np.int16)
        step[col[u]] = step[col[v]] = 1
        deg = np.concatenate([deg, (deg + step) % mod_deg])
        cnt = np.concatenate([cnt, (cnt + 1) % mod_e])
    ok = (cnt == 0) & ~deg.any(axis=1)
    out = []
    for mask in np.flatnonzero(ok):
        out.append(Graph(X.n, [e for i, e in enumerate(edges) if mask >> i & 1]))
    return out


@dataclass
class OmniAbsorber:
    q: int
    X: Graph
    A: Graph
    family: list[Clique]
    qmap: dict[LeaveKey, list[Clique]]
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return max(self.X.n, self.A.n)

    def decompose(self, L: Graph | Iterable[Edge]) -> list[Clique]:
        return self.qmap[leave_key(L)]

    def to_json(self) -> dict:
        return {
            "q": self.q,
            "n": self.n,
            "X_edges": [list(e) for e in self.X.sorted_edges()],
            "A_edges": [list(e) for e in self.A.sorted_edges()],
            "family": [list(c) for c in sorted(self.family)],
            "qmap": [{"L": [list(e) for e in k], "cliques": [list(c) for c in sorted(v)]}
                     for k, v in sorted(self.qmap.items())],
        }

    @classmethod
    def from_json(cls, data: dict) -> "OmniAbsorber":
        n = int(data["n"])
        return cls(
            q=int(data["q"]),
            X=Graph(n, data["X_edges"]),
            A=Graph(n, data["A_edges"]),
            family=[clique(c) for c in data["family"]],
            qmap={leave_key(map(tuple, item["L"])): [clique(c) for c in item["cliques"]]
                  for item in data["qmap"]},
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def x_edge_count(c: Clique, X: Graph) -> int:
    return sum(1 for e in combinations(c, 2) if e in X.edges)


def _try_absorber(X, A_edges, leaves, q, budget):
    A = Graph(X.n, A_edges)
    qmap = {}
    for L in leaves:
        host = A.union(L)
        cands = [c for c in iter_cliques(host, q) if x_edge_count(c, X) <= 1]
        res = find_decomposition(CoverInstance(host, q, cands), budget=budget)
        if not res.found:
            return None
        qmap[leave_key(L)] = res.packing
    return A, qmap


def _packings(cliques: list[Clique], t: int):
    """Edge-disjoint t-subsets of ``cliques`` in index order."""
    ce = [set(combinations(c, 2)) for c in cliques]

    def rec(start, used, chosen):
        if len(chosen) == t:
            yield list(chosen)
            return
        for i in range(start, len(cliques)):
            if used & ce[i]:
                continue
            chosen.append(i)
            yield from rec(i + 1, used | ce[i], chosen)
            chosen.pop()

    for idx in rec(0, frozenset(), []):
        yield [cliques[i] for i in idx]


def brute_force_absorber(X: Graph, q: int, host_n: int, *,
                         max_edges: int = DEFAULT_MAX_ABSORBER_EDGES,
                         reserve_cap: int = DEFAULT_RESERVE_CAP,
                         budget: int | None = 200_000) -> OmniAbsorber:
    """Smallest omni-absorber for X inside K_{host_n} minus X, by exhaustive search.

    Candidates are K_q-decomposable graphs avoiding X (forced by the empty
    leave), tried by edge count then lexicographic edge list. Vertices not
    touched by X are interchangeable, so only prefixes of them are used.
    """
    X = X.with_n(max(X.n, host_n))
    leaves = divisible_subgraphs(X, q, reserve_cap)
    core = sorted({v for e in X.edges for v in e})
    fresh = [v for v in range(host_n) if v not in set(core)]
    k2 = comb(q, 2)
    need = {e for L in leaves for e in L.edges}
    for t in range(0, max_edges // k2 + 1):
        seen = set()
        for m in range(0, len(fresh) + 1):
            allowed = set(core) | set(fresh[:m])
            if t == 0 and m > 0:
                break
            if t * q < m:  # cannot touch m fresh vertices with t cliques
                break
            room = Graph(host_n, (e for e in combinations(sorted(allowed), 2) if e not in X.edges))
            cl = list(iter_cliques(room, q))
            for pack in _packings(cl, t):
                used_fresh = {v for c in pack for v in c} - set(core)
                if used_fresh != set(fresh[:m]):
                    continue
                A_edges = frozenset(packing_edges(pack))
                if A_edges in seen:
                    continue
                seen.add(A_edges)
        for A_edges in sorted(seen, key=lambda s: sorted(s)):
            if not _reserve_edges_completable(X, A_edges, need, q):
                continue
            got = _try_absorber(X, A_edges, leaves, q, budget)
            if got is not None:
                A, qmap = got
                family = sorted({c for v in qmap.values() for c in v})
                log.info("absorber found with %d edges after scanning size %d", len(A_edges), t)
                return OmniAbsorber(q, X, A, family, qmap, meta={"candidates_tried": len(seen)})
    raise NotFound(f"no omni-absorber with at most {max_edges} edges in K_{host_n}")


def _reserve_edges_completable(X, A_edges, need, q) -> bool:
    if not need:
        return True
    G = Graph(X.n, set(A_edges) | {e for e in need})
    for u, v in need:
        common = G.adj[u] & G.adj[v]
        ok = any(
            all(edge(a, b) in A_edges for a, b in combinations((u, v, *rest), 2) if {a, b} != {u, v})
            for rest in combinations(sorted(common), q - 2)
        )
        if not ok:
            return False
    return True


def embed_booster(rb: RootedBooster, root: Clique, extension: Iterable[int], n: int,
                  rng: random.Random | None = None) -> RootedBooster:
    """Copy ``rb`` into host coordinates: its root onto ``root``, the rest onto ``extension``."""
    inner = sorted(set().union(*map(set, rb.on + rb.off)) - set(rb.root))
    ext = sorted(extension)
    if len(ext) != len(inner):
        raise PreconditionViolation(f"booster needs {len(inner)} extension vertices, got {len(ext)}")
    if rng is not None:
        rng.shuffle(ext)
    mapping = dict(zip(sorted(rb.root), sorted(root)))
    mapping.update(zip(inner, ext))
    relabel = lambda c: clique(mapping[v] for v in c)  # noqa: E731
    graph = Graph(n, ((mapping[u], mapping[v]) for u, v in rb.graph.edges))
    return RootedBooster(rb.q, graph, [relabel(c) for c in rb.on], [relabel(c) for c in rb.off],
                         root=clique(root))


def boost_absorber(base: OmniAbsorber, boosters: Mapping[Clique, RootedBooster]) -> OmniAbsorber:
    """Replace each family clique H by its rooted booster B_H.

    For every leave L, H in Q(L) contributes the on-decomposition of B_H and
    H outside Q(L) the off-decomposition.
    """
    family = set(base.family)
    owner: dict[Edge, str] = {e: "X" for e in base.X.edges}
    owner.update({e: "A" for e in base.A.edges})
    n = base.n
    for H, rb in boosters.items():
        H = tuple(H)
        if H not in family:
            raise PreconditionViolation(f"{H} is not in the decomposition family")
        if tuple(rb.root) != H:
            raise PreconditionViolation(f"booster for {H} is rooted at {rb.root}")
        for e in rb.graph.sorted_edges():
            if e in owner:
                raise PreconditionViolation(f"edge {e} of booster at {H} overlaps {owner[e]}")
            owner[e] = f"booster at {H}"
        n = max(n, rb.graph.n)
    if not boosters:
        return base
    A = Graph(n, base.A.edges | {e for rb in boosters.values() for e in rb.graph.edges})
    new_family = set()
    for H in base.family:
        if H in boosters:
            new_family |= set(boosters[H].on) | set(boosters[H].off)
        else:
            new_family.add(H)
    qmap = {}
    for key, Q in base.qmap.items():
        chosen = set(Q)
        out = []
        for H in base.family:
            if H in boosters:
                out += boosters[H].on if H in chosen else boosters[H].off
            elif H in chosen:
                out.append(H)
        for H in boosters:
            assert tuple(H) not in out, f"root {H} leaked into Q'({key})"
        qmap[key] = sorted(out)
    return OmniAbsorber(base.q, base.X.with_n(n), A, sorted(new_family), qmap,
                        meta={"boosted": len(boosters)})


def refinement_constant(oa: OmniAbsorber) -> int:
    load: dict[Edge, int] = {}
    for c in oa.family:
        for e in combinations(c, 2):
            load[e] = load.get(e, 0) + 1
    universe = oa.X.edges | oa.A.edges
    return max((load.get(e, 0) for e in universe), default=0)


def verify_omni_absorber(oa: OmniAbsorber, cap: int = DEFAULT_RESERVE_CAP) -> Report:
    rep = Report()
    q = oa.q
    overlap = oa.X.edges & oa.A.edges
    rep.add("X and A edge-disjoint", not overlap, f"shared {sorted(overlap)[:3]}" if overlap else "")
    bad = [c for c in oa.family if x_edge_count(c, oa.X) > 1]
    rep.add("family cliques use <= 1 X-edge", not bad, f"e.g. {bad[0]}" if bad else "")
    universe = oa.X.edges | oa.A.edges
    outside = [c for c in oa.family if not set(combinations(c, 2)) <= universe]
    rep.add("family cliques inside X + A", not outside, f"e.g. {outside[0]}" if outside else "")
    family = set(oa.family)
    leaves = divisible_subgraphs(oa.X, q, cap)
    for L in leaves:
        key = leave_key(L)
        name = f"Q(L) decomposes L + A for L={list(key)}"
        if key not in oa.qmap:
            rep.add(name, False, "no entry in decomposition table")
            continue
        Q = oa.qmap[key]
        foreign = [c for c in Q if tuple(c) not in family]
        seen, dup = set(), set()
        for c in Q:
            for e in combinations(c, 2):
                (dup if e in seen else seen).add(e)
        target = L.edges | oa.A.edges
        uncovered = sorted(target - seen)
        extra = sorted(seen - target)
        ok = not foreign and not dup and not uncovered and not extra
        detail = []
        if foreign:
            detail.append(f"cliques outside family {foreign[:3]}")
        if dup:
            detail.append(f"edges covered twice {sorted(dup)[:3]}")
        if uncovered:
            detail.append(f"uncovered edges {uncovered}")
        if extra:
            detail.append(f"edges outside L+A {extra[:3]}")
        rep.add(name, ok, "; ".join(detail))
    rep.values.update(C_observed=refinement_constant(oa), leaves=len(leaves),
                      max_degree_A=oa.A.max_degree(), A_edges=len(oa.A.edges))
    return rep
