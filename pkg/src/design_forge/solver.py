"""Exact K_q-decomposition search by exact cover (Algorithm X on dict-of-sets).

The universe is the edge set of the host; each allowed clique is a row
covering its C(q,2) edges. Branching always takes the uncovered edge with the
fewest live candidates, ties broken by smallest edge id.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable

from .graph import Clique, Graph, is_kq_divisible, list_cliques, packing_edges, verify_packing
from .errors import InvalidParameter

FOUND = "found"
INFEASIBLE = "infeasible"
BUDGET = "budget-exhausted"


@dataclass
class CoverInstance:
    host: Graph
    q: int
    candidates: list[Clique] = None

    def __post_init__(self):
        if self.candidates is None:
            self.candidates = list_cliques(self.host, self.q)
        else:
            cands = sorted({tuple(sorted(c)) for c in self.candidates})
            for c in cands:
                if len(c) != self.q or not self.host.is_clique(c):
                    raise InvalidParameter(f"candidate {c} is not a {self.q}-clique of the host")
            self.candidates = cands

    @property
    def universe(self):
        return self.host.edges


@dataclass
class SolveResult:
    status: str
    packing: list[Clique] | None = None
    nodes: int = 0
    elapsed_ms: float = 0.0

    @property
    def found(self) -> bool:
        return self.status == FOUND

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "count": 1 if self.found else 0,
            "nodes": self.nodes,
            "elapsed_ms": round(self.elapsed_ms, 3),
        }


@dataclass
class Enumeration:
    packings: list[list[Clique]] = field(default_factory=list)
    truncated: bool = False
    nodes: int = 0

    def __len__(self):
        return len(self.packings)


class _BudgetExhausted(Exception):
    pass


class _Search:
    """One exact-cover search over a fixed instance, with optional forced rows."""

    def __init__(self, inst: CoverInstance, seed: int | None = None):
        self.inst = inst
        edges = sorted(inst.universe)
        self.eid = {e: i for i, e in enumerate(edges)}
        rows = list(inst.candidates)
        if seed is not None:
            random.Random(seed).shuffle(rows)
        self.rows = rows
        self.Y = [[self.eid[e] for e in combinations(c, 2)] for c in rows]
        self.X: dict[int, set[int]] = {i: set() for i in range(len(edges))}
        for r, cols in enumerate(self.Y):
            for c in cols:
                self.X[c].add(r)
        self.nodes = 0
        self.budget = None

    def select(self, r):
        removed = []
        for j in self.Y[r]:
            for i in self.X[j]:
                for k in self.Y[i]:
                    if k != j:
                        self.X[k].discard(i)
            removed.append(self.X.pop(j))
        return removed

    def deselect(self, r, removed):
        for j in reversed(self.Y[r]):
            self.X[j] = removed.pop()
            for i in self.X[j]:
                for k in self.Y[i]:
                    if k != j:
                        self.X[k].add(i)

    def force(self, partial: Iterable[Clique]) -> bool:
        """Commit the given cliques before searching; False if they cannot all be placed."""
        index = {c: r for r, c in enumerate(self.rows)}
        for c in partial:
            r = index.get(tuple(c))
            if r is None or any(j not in self.X for j in self.Y[r]):
                return False
            self.select(r)
        return True

    def solutions(self, chosen: list[int]):
        if not self.X:
            yield list(chosen)
            return
        col = min(self.X, key=lambda c: (len(self.X[c]), c))
        if not self.X[col]:
            return
        for r in sorted(self.X[col]):
            self.nodes += 1
            if self.budget is not None and self.nodes > self.budget:
                raise _BudgetExhausted
            chosen.append(r)
            removed = self.select(r)
            yield from self.solutions(chosen)
            self.deselect(r, removed)
            chosen.pop()

    def to_packing(self, rows: list[int]) -> list[Clique]:
        return sorted(self.rows[r] for r in rows)


def _divisible_or_none(inst: CoverInstance) -> bool:
    return inst.q < 3 or is_kq_divisible(inst.host, inst.q)


def find_decomposition(inst: CoverInstance, budget: int | None = None,
                       seed: int | None = None) -> SolveResult:
    """Search for one exact cover. ``seed`` permutes candidate order (randomized restarts)."""
    t0 = time.perf_counter()
    if not _divisible_or_none(inst):
        return SolveResult(INFEASIBLE, elapsed_ms=(time.perf_counter() - t0) * 1e3)
    search = _Search(inst, seed)
    search.budget = budget
    try:
        sol = next(search.solutions([]), None)
    except _BudgetExhausted:
        return SolveResult(BUDGET, nodes=search.nodes, elapsed_ms=(time.perf_counter() - t0) * 1e3)
    ms = (time.perf_counter() - t0) * 1e3
    if sol is None:
        return SolveResult(INFEASIBLE, nodes=search.nodes, elapsed_ms=ms)
    return SolveResult(FOUND, search.to_packing(sol), nodes=search.nodes, elapsed_ms=ms)


def enumerate_decompositions(inst: CoverInstance, limit: int | None = None) -> Enumeration:
    out = Enumeration()
    if not _divisible_or_none(inst):
        return out
    search = _Search(inst)
    seen = set()
    for sol in search.solutions([]):
        key = frozenset(search.rows[r] for r in sol)
        if key in seen:
            continue
        if limit is not None and len(out.packings) >= limit:
            out.truncated = True
            break
        seen.add(key)
        out.packings.append(sorted(key))
    out.nodes = search.nodes
    return out


def count_extensions(inst: CoverInstance, partial: Iterable[Clique]) -> int:
    """Number of exact covers of ``inst`` that contain every clique of ``partial``."""
    partial = [tuple(sorted(c)) for c in partial]
    if not verify_packing(inst.host, partial, inst.q):
        return 0
    if not _divisible_or_none(inst):
        return 0
    search = _Search(inst)
    if not search.force(partial):
        return 0
    return sum(1 for _ in search.solutions([]))


def covers(inst: CoverInstance, packing: Iterable[Clique]) -> bool:
    packing = list(packing)
    return verify_packing(inst.host, packing, inst.q) and packing_edges(packing) == set(inst.universe)
