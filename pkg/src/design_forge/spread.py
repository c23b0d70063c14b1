"""Exact and Monte-Carlo spread of distributions over K_q-decompositions.

``P(S)`` below is the probability that a random decomposition contains every
clique of the packing ``S``; a distribution is sigma-spread when
``P(S) <= sigma**|S|`` for all packings.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Callable, Iterable, Sequence

from .embed import wilson_interval
from .errors import InvalidParameter, ResourceLimit
from .graph import Clique, Graph, check_packing, clique, iter_cliques, verify_decomposition

Packing = tuple[Clique, ...]
DEFAULT_PROBES_PER_SIZE = 200
DEFAULT_EXACT_CAP = 10**6


def _as_packing(S: Iterable[Iterable[int]]) -> Packing:
    return tuple(sorted(clique(c) for c in S))


@dataclass
class ExplicitDistribution:
    support: list[Packing]
    weights: list[Fraction]
    host: Graph | None = None
    q: int | None = None

    def __post_init__(self):
        self.support = [_as_packing(S) for S in self.support]
        self.weights = [Fraction(w) for w in self.weights]
        if len(self.support) != len(self.weights):
            raise InvalidParameter("support and weights differ in length")
        if any(w < 0 for w in self.weights):
            raise InvalidParameter("negative weight")
        if sum(self.weights) != 1:
            raise InvalidParameter(f"weights sum to {sum(self.weights)}, not 1")
        if self.host is not None:
            q = self.q or len(self.support[0][0])
            for S in self.support:
                if not verify_decomposition(self.host, S, q):
                    raise InvalidParameter(f"support member is not a K_{q}-decomposition of the host")

    @classmethod
    def uniform(cls, support: Sequence[Iterable[Clique]], host: Graph | None = None, q: int | None = None):
        if not support:
            raise InvalidParameter("uniform distribution over an empty support")
        w = Fraction(1, len(support))
        return cls(list(support), [w] * len(support), host, q)

    @classmethod
    def point_mass(cls, S: Iterable[Clique], host: Graph | None = None, q: int | None = None):
        return cls([S], [Fraction(1)], host, q)

    def prob(self, S: Iterable[Clique]) -> Fraction:
        S = set(clique(c) for c in S)
        return sum((w for T, w in zip(self.support, self.weights) if S <= set(T)), Fraction(0))

    def expected_size(self) -> Fraction:
        return sum((w * len(T) for T, w in zip(self.support, self.weights)), Fraction(0))


@dataclass
class SizeStat:
    size: int
    worst_prob: Fraction | float
    ratio: float
    probe: Packing
    ci: tuple[float, float] | None = None
    probes: int = 0

    def to_json(self) -> dict:
        out = {"size": self.size, "worst_prob": str(self.worst_prob), "ratio": self.ratio,
               "probe": [list(c) for c in self.probe], "probes": self.probes}
        if self.ci is not None:
            out["ci"] = list(self.ci)
        return out


@dataclass
class SpreadReport:
    mode: str  # "exact" or "empirical"
    per_size: dict[int, SizeStat]
    sigma_singleton: Fraction | float
    trials: int | None = None
    # for empirical mode: every probe with (estimate, lo, hi); exact mode: probe -> P
    probes: list[tuple[Packing, object, tuple[float, float] | None]] = field(default_factory=list)
    checks: dict[str, bool] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "sigma_singleton": str(self.sigma_singleton),
            "sigma_singleton_float": float(self.sigma_singleton),
            "trials": self.trials,
            "per_size": [st.to_json() for _, st in sorted(self.per_size.items())],
            "checks": self.checks,
        }


def _ratio(p, s: int) -> float:
    return float(p) ** (1.0 / s) if p > 0 else 0.0


def _subpackings(T: Packing, s_max: int):
    for s in range(1, min(s_max, len(T)) + 1):
        yield from combinations(T, s)


def exact_spread(dist: ExplicitDistribution, s_max: int = 1, cap: int = DEFAULT_EXACT_CAP) -> SpreadReport:
    """Exact worst ``P(S)`` for every packing of size at most ``s_max``.

    Packings not contained in any support member have probability zero, so it
    suffices to scan sub-packings of support members.
    """
    if s_max < 1:
        raise InvalidParameter("s_max must be >= 1")
    probs: dict[Packing, Fraction] = {}
    for T, w in zip(dist.support, dist.weights):
        if w == 0:
            continue
        for S in _subpackings(T, s_max):
            probs[S] = probs.get(S, Fraction(0)) + w
            if len(probs) > cap:
                raise ResourceLimit(f"more than {cap} distinct packings of size <= {s_max}")
    per_size: dict[int, SizeStat] = {}
    counts: dict[int, int] = {}
    for S, p in sorted(probs.items()):
        s = len(S)
        counts[s] = counts.get(s, 0) + 1
        if s not in per_size or p > per_size[s].worst_prob:
            per_size[s] = SizeStat(s, p, _ratio(p, s), S)
    for s, st in per_size.items():
        st.probes = counts[s]
    singles = {S[0]: p for S, p in probs.items() if len(S) == 1}
    checks = {
        "linearity": sum(singles.values(), Fraction(0)) == dist.expected_size(),
        "monotone": all(probs[S] <= probs[S[:i] + S[i + 1:]]
                        for S in probs if len(S) > 1 for i in range(len(S))),
        "probabilities in [0,1]": all(0 <= p <= 1 for p in probs.values()),
    }
    return SpreadReport("exact", per_size, per_size[1].worst_prob if 1 in per_size else Fraction(0),
                        probes=[(S, p, None) for S, p in sorted(probs.items())], checks=checks)


def default_probes(host: Graph, q: int, s_max: int = 1, per_size: int = DEFAULT_PROBES_PER_SIZE,
                   seed=0) -> list[Packing]:
    """All singleton cliques plus up to ``per_size`` random packings for each larger size."""
    cliques = sorted(iter_cliques(host, q))
    probes: list[Packing] = [(c,) for c in cliques]
    rng = random.Random(seed)
    for s in range(2, s_max + 1):
        found: set[Packing] = set()
        for _ in range(per_size * 20):
            if len(found) >= per_size:
                break
            order = cliques[:]
            rng.shuffle(order)
            used: set = set()
            pick = []
            for c in order:
                es = set(combinations(c, 2))
                if not es & used:
                    pick.append(c)
                    used |= es
                    if len(pick) == s:
                        break
            if len(pick) == s:
                found.add(_as_packing(pick))
        probes += sorted(found)
    return probes


Sampler = Callable[[random.Random], Iterable[Clique]]


def empirical_spread(sampler: Sampler, trials: int, probes: Sequence[Iterable[Clique]], seed=0,
                     host: Graph | None = None, q: int | None = None) -> SpreadReport:
    """Estimate ``P(S)`` for each probe from ``trials`` sampler draws, with Wilson 95% intervals."""
    if trials < 1:
        raise InvalidParameter("trials must be >= 1")
    probes = [_as_packing(S) for S in probes]
    if not probes:
        raise InvalidParameter("no probes given")
    if host is not None:
        qq = q or len(probes[0][0])
        for S in probes:
            problems = check_packing(host, S, qq)
            if problems:
                raise InvalidParameter(f"probe {list(S)} is not a packing: {problems[0]}")
    rng = random.Random(seed)
    hits = [0] * len(probes)
    probe_sets = [set(S) for S in probes]
    for _ in range(trials):
        drawn = set(clique(c) for c in sampler(rng))
        for i, S in enumerate(probe_sets):
            if S <= drawn:
                hits[i] += 1
    rows = []
    per_size: dict[int, SizeStat] = {}
    for S, h in zip(probes, hits):
        est = h / trials
        ci = wilson_interval(h, trials)
        rows.append((S, est, ci))
        s = len(S)
        if s not in per_size or est > per_size[s].worst_prob:
            per_size[s] = SizeStat(s, est, _ratio(est, s), S, ci)
        per_size[s].probes += 1
    return SpreadReport("empirical", per_size, per_size[1].worst_prob if 1 in per_size else 0.0,
                        trials=trials, probes=rows)


def check_sigma_spread(report: SpreadReport, sigma) -> bool:
    """Exact mode compares every ``P(S)``; empirical mode every upper confidence bound."""
    if report.mode == "exact":
        sig = Fraction(sigma)
        return all(p <= sig ** len(S) for S, p, _ in report.probes)
    return all(ci[1] <= float(sigma) ** len(S) for S, _, ci in report.probes)


def uniform_sampler(decompositions: Sequence[Iterable[Clique]]) -> Sampler:
    pool = [list(d) for d in decompositions]
    return lambda rng: pool[rng.randrange(len(pool))]


