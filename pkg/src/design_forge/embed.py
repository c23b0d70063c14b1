"""Edge-disjoint embedding of rooted partial cliques by resampling, and an
exhaustive checker for the conditional local-lemma inflation bound.

Each root hyperedge ``e`` owns two random variables: an extension ``T_e`` (a
b-clique in the common neighbourhood of ``V(e)``, uniform) and a slot
``i_e`` in ``range(D)``. Two kinds of bad event couple pairs of roots:
a shared extension vertex with equal slots (keeps degrees bounded) and a
shared edge (keeps the partial cliques edge-disjoint). While any bad event
holds, the variables of the lowest-indexed one are redrawn.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Callable, Iterable, Sequence

from statsmodels.stats.proportion import proportion_confint

from .errors import InvalidParameter, NonTermination, PreconditionViolation, ResourceLimit
from .graph import Clique, Edge, Graph, clique

DEFAULT_RESAMPLE_CAP = 100_000
DEFAULT_REJECTION_CAP = 10_000


def partial_clique_edges(root: Iterable[int], ext: Iterable[int]) -> set[Edge]:
    root, ext = sorted(root), sorted(ext)
    allv = sorted(set(root) | set(ext))
    inside = set(combinations(root, 2))
    return {e for e in combinations(allv, 2) if e not in inside}


@dataclass
class PartialClique:
    root: Clique
    ext: tuple[int, ...]

    @property
    def vertices(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.root) | set(self.ext)))

    @property
    def edges(self) -> set[Edge]:
        return partial_clique_edges(self.root, self.ext)

    def graph(self, n: int) -> Graph:
        return Graph(n, self.edges)


@dataclass
class EmbeddingProblem:
    host: Graph
    roots: list[Clique]
    b: int
    C: float

    def __post_init__(self):
        self.roots = [clique(r) for r in self.roots]
        if len(set(self.roots)) != len(self.roots):
            raise InvalidParameter("duplicate root hyperedges")
        sizes = {len(r) for r in self.roots}
        if len(sizes) > 1:
            raise InvalidParameter("roots must be uniform")
        if self.b < 1:
            raise InvalidParameter("extension size b must be >= 1")

    @property
    def q(self) -> int:
        return len(self.roots[0]) if self.roots else 0

    @property
    def delta1(self) -> int:
        deg: dict[int, int] = {}
        for r in self.roots:
            for v in r:
                deg[v] = deg.get(v, 0) + 1
        return max(deg.values(), default=0)

    @property
    def slots(self) -> int:
        """D = floor(C * Delta / (2(q + b))), floored at 1."""
        return max(1, math.floor(self.C * self.delta1 / (2 * (self.q + self.b))))

    def degree_guarantee(self) -> float:
        """Largest degree the bad-event structure permits in the union."""
        return self.delta1 * self.b + self.slots * (self.q + self.b - 1)

    def candidates(self, r: Clique) -> list[int]:
        return sorted(self.host.common_neighbors(r) - set(r))

    def validate(self):
        n, delta = self.host.n, self.delta1
        if self.roots and delta > n / self.C:
            raise PreconditionViolation(f"Delta1(roots) = {delta} exceeds n/C = {n / self.C:.3g}")
        if self.roots and self.degree_guarantee() > self.C * delta:
            raise PreconditionViolation(
                f"C = {self.C} too small: slot structure only guarantees degree "
                f"{self.degree_guarantee()} > C*Delta1 = {self.C * delta}")
        for r in self.roots:
            if len(self.candidates(r)) < self.b:
                raise PreconditionViolation(f"root {r} has fewer than b = {self.b} common neighbours")


@dataclass
class Embedding:
    parts: dict[Clique, PartialClique]
    slots: dict[Clique, int]
    resamples: int
    max_degree: int
    disjoint: bool
    bound: float

    def to_json(self) -> dict:
        return {
            "resamples": self.resamples,
            "max_degree": self.max_degree,
            "disjoint": self.disjoint,
            "degree_bound": self.bound,
            "parts": [{"root": list(r), "ext": list(t.ext), "slot": self.slots[r]}
                      for r, t in sorted(self.parts.items())],
        }


def _draw_extension(problem, r, cands, rng, cap=DEFAULT_REJECTION_CAP):
    host = problem.host
    for _ in range(cap):
        ext = tuple(sorted(rng.sample(cands, problem.b)))
        if host.is_clique(ext):
            return ext
    raise PreconditionViolation(f"no {problem.b}-clique found near root {r} after {cap} draws")


def _pair_violated(ext1, edges1, s1, ext2, edges2, s2) -> str | None:
    if s1 == s2 and set(ext1) & set(ext2):
        return "J1"
    if edges1 & edges2:
        return "J2"
    return None


def violated_events(problem, state) -> list[tuple[int, int, str]]:
    """All (i, j, kind) with i < j whose bad event currently holds."""
    out = []
    for i, j in combinations(range(len(problem.roots)), 2):
        (x1, e1, s1), (x2, e2, s2) = state[i], state[j]
        kind = _pair_violated(x1, e1, s1, x2, e2, s2)
        if kind:
            out.append((i, j, kind))
    return out


def union_degrees(parts: Iterable[PartialClique], n: int) -> list[int]:
    deg = [0] * n
    for t in parts:
        for u, v in t.edges:
            deg[u] += 1
            deg[v] += 1
    return deg


def sample_embedding(problem: EmbeddingProblem, seed=None,
                     resample_cap: int = DEFAULT_RESAMPLE_CAP) -> Embedding:
    problem.validate()
    rng = random.Random(seed)
    roots, D = problem.roots, problem.slots
    cands = [problem.candidates(r) for r in roots]

    def draw(k):
        ext = _draw_extension(problem, roots[k], cands[k], rng)
        return ext, partial_clique_edges(roots[k], ext), rng.randrange(D)

    state = [draw(k) for k in range(len(roots))]
    resamples = 0
    while True:
        bad = next(iter(violated_events(problem, state)), None)
        if bad is None:
            break
        resamples += 1
        if resamples > resample_cap:
            raise NonTermination(f"embedding still violated after {resample_cap} resamples")
        i, j, _ = bad
        state[i] = draw(i)
        state[j] = draw(j)
    parts = {r: PartialClique(r, state[k][0]) for k, r in enumerate(roots)}
    slots = {r: state[k][2] for k, r in enumerate(roots)}
    all_edges = [e for t in parts.values() for e in t.edges]
    disjoint = len(all_edges) == len(set(all_edges))
    max_deg = max(union_degrees(parts.values(), problem.host.n), default=0)
    bound = problem.C * problem.delta1
    assert disjoint, "partial cliques overlap"
    assert max_deg <= bound, f"degree {max_deg} exceeds C*Delta1 = {bound}"
    for t in parts.values():
        assert set(t.ext) <= problem.host.common_neighbors(t.root)
    return Embedding(parts, slots, resamples, max_deg, disjoint, bound)


def enumerate_outcomes(problem: EmbeddingProblem, cap: int = 10**5):
    """Every joint (extensions, slots) outcome with a flag for 'no bad event'."""
    problem.validate()
    per_root = []
    for r in problem.roots:
        cs = problem.candidates(r)
        exts = [x for x in combinations(cs, problem.b) if problem.host.is_clique(x)]
        per_root.append([(x, s) for x in exts for s in range(problem.slots)])
    total = math.prod(len(p) for p in per_root)
    if total > cap:
        raise ResourceLimit(f"{total} outcomes exceed cap {cap}")
    for combo in product(*per_root):
        state = [(x, partial_clique_edges(r, x), s) for r, (x, s) in zip(problem.roots, combo)]
        yield combo, not violated_events(problem, state)


def wilson_interval(successes: int, trials: int, alpha: float = 0.05) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    lo, hi = proportion_confint(successes, trials, alpha=alpha, method="wilson")
    return float(lo), float(hi)


def embedding_spread_report(problem: EmbeddingProblem, targets: dict, trials: int, seed=0) -> dict:
    """Monte-Carlo estimate of P(S_e inside the extension of T_e for every root e)."""
    targets = {clique(r): set(s) for r, s in targets.items()}
    total = sum(len(s) for s in targets.values())
    n, b = problem.host.n, problem.b
    bound = ((3 * b) ** b / n) ** total
    for r, s in targets.items():
        if s & set(r) or len(s) > b:
            return {"spread_estimate": 0.0, "exact": True, "ci": [0.0, 0.0], "bound": bound,
                    "trials": 0, "resamples": 0, "max_degree": 0, "disjoint": True}
    rng = random.Random(seed)
    hits = resamples = max_deg = 0
    disjoint = True
    for _ in range(trials):
        emb = sample_embedding(problem, rng.getrandbits(64))
        resamples += emb.resamples
        max_deg = max(max_deg, emb.max_degree)
        disjoint &= emb.disjoint
        if all(s <= set(emb.parts[r].ext) for r, s in targets.items()):
            hits += 1
    lo, hi = wilson_interval(hits, trials)
    return {"spread_estimate": hits / trials if trials else 0.0, "exact": False, "ci": [lo, hi],
            "bound": bound, "trials": trials, "resamples": resamples / max(trials, 1),
            "max_degree": max_deg, "disjoint": disjoint}


# -- conditional local lemma ---------------------------------------------------

@dataclass
class Event:
    """An event on the variables listed in ``support``.

    ``predicate`` receives the values of those variables, in support order.
    """

    support: tuple[int, ...]
    predicate: Callable[[tuple], bool]

    @classmethod
    def of_outcomes(cls, support: Sequence[int], outcomes: Iterable[tuple]) -> "Event":
        allowed = frozenset(tuple(o) for o in outcomes)
        return cls(tuple(support), lambda vals: tuple(vals) in allowed)

    @classmethod
    def never(cls) -> "Event":
        return cls((), lambda vals: False)


@dataclass
class LLLReport:
    conditional: Fraction | None
    prob_target: Fraction
    p: Fraction
    N: int
    max_dependency_degree: int
    hypothesis_ok: bool
    bound: float
    holds: bool | None
    extra: dict = field(default_factory=dict)


def conditional_lll_check(variables: Sequence[dict], events: Sequence[Event], target: Event,
                          cap: int = 10**7) -> LLLReport:
    """Exact P(target | no bad event) against P(target) * exp(6pN).

    ``variables`` are finite distributions ``{value: probability}``; exact
    probabilities (Fractions) give exact answers.
    """
    domains = [list(d.items()) for d in variables]
    for i, d in enumerate(variables):
        if sum(d.values()) != 1:
            raise InvalidParameter(f"variable {i} probabilities sum to {sum(d.values())}")
    size = math.prod(len(d) for d in domains)
    if size > cap:
        raise ResourceLimit(f"outcome space {size} exceeds cap {cap}")
    zero = Fraction(0) if all(isinstance(p, (int, Fraction)) for d in variables for p in d.values()) else 0.0
    p_event = [zero] * len(events)
    p_target = p_good = p_both = zero
    for combo in product(*domains):
        vals = tuple(v for v, _ in combo)
        w = math.prod((pr for _, pr in combo), start=zero + 1)
        hit = [ev.predicate(tuple(vals[i] for i in ev.support)) for ev in events]
        for k, h in enumerate(hit):
            if h:
                p_event[k] += w
        t = target.predicate(tuple(vals[i] for i in target.support))
        if t:
            p_target += w
        if not any(hit):
            p_good += w
            if t:
                p_both += w
    supports = [set(ev.support) for ev in events]
    degree = [sum(1 for k, s2 in enumerate(supports) if k != j and s & s2) for j, s in enumerate(supports)]
    max_deg = max(degree, default=0)
    p = max(p_event, default=zero)
    N = sum(1 for s in supports if s & set(target.support))
    hypothesis = 4 * p * max_deg <= 1
    bound = float(p_target) * math.exp(6 * float(p) * N)
    conditional = p_both / p_good if p_good else None
    holds = None
    if hypothesis and conditional is not None:
        holds = float(conditional) <= bound * (1 + 1e-12)
    return LLLReport(conditional, p_target, p, N, max_deg, hypothesis, bound, holds,
                     extra={"p_good": p_good})


def random_lll_fixture(seed: int, max_vars: int = 5):
    """A small random (variables, events, target) instance satisfying 4p*Delta <= 1."""
    rng = random.Random(seed)
    while True:
        k = rng.randint(2, max_vars)
        variables = []
        for _ in range(k):
            m = rng.randint(2, 3)
            weights = [rng.randint(1, 4) for _ in range(m)]
            total = sum(weights)
            variables.append({v: Fraction(w, total) for v, w in enumerate(weights)})
        events = []
        for _ in range(rng.randint(1, 4)):
            sup = tuple(sorted(rng.sample(range(k), rng.randint(1, min(2, k)))))
            space = list(product(*(list(variables[i]) for i in sup)))
            events.append(Event.of_outcomes(sup, rng.sample(space, 1)))
        tsup = tuple(sorted(rng.sample(range(k), rng.randint(1, min(2, k)))))
        tspace = list(product(*(list(variables[i]) for i in tsup)))
        target = Event.of_outcomes(tsup, rng.sample(tspace, rng.randint(1, len(tspace))))
        rep = conditional_lll_check(variables, events, target)
        if rep.hypothesis_ok and rep.conditional is not None:
            return variables, events, target
