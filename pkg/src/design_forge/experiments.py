"""Random-model sampling, threshold experiments and the end-to-end
decomposition pipeline at desk scale."""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import math
import os
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from itertools import combinations
from math import comb
from typing import Callable, Iterable, Sequence

import numpy as np

from .absorber import (DEFAULT_MAX_ABSORBER_EDGES, DEFAULT_RESERVE_CAP, OmniAbsorber, boost_absorber,
                       brute_force_absorber, embed_booster)
from .booster import layer_boosters
from .embed import EmbeddingProblem, sample_embedding, wilson_interval
from .errors import (DesignForgeError, InvalidParameter, PreconditionViolation, RetryExhausted,
                     StageFailure)
from .graph import (Clique, Graph, complete_graph_divisible, design_hypergraph, is_kq_divisible,
                    packing_edges, verify_decomposition)
from .nibble import NibbleParams, matching_to_packing, regularize_design, reserve_hypergraph, \
    select_reservoir, spread_nibble
from .solver import FOUND, CoverInstance, enumerate_decompositions, find_decomposition
from .spread import ExplicitDistribution, SpreadReport, empirical_spread, exact_spread

log = logging.getLogger(__name__)

THREADS_ENV = "DESIGN_FORGE_THREADS"
CSV_COLUMNS = ["n", "q", "p", "trials", "successes", "rate", "ci_lo", "ci_hi"]


def derive_seed(master, *parts) -> int:
    """Stable 63-bit seed from the master seed and a stage/trial label."""
    text = "/".join(str(x) for x in (master, *parts))
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "big") >> 1


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise InvalidParameter(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def parallel_map(fn: Callable, items: Sequence) -> list:
    """Order-preserving map, parallel over processes when the env var allows it."""
    k = min(worker_count(), len(items))
    if k <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=k) as pool:
        return list(pool.map(fn, items))


# -- random model ------------------------------------------------------------------

@dataclass(frozen=True)
class RandomModel:
    n: int
    q: int
    p: float
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise InvalidParameter(f"p must lie in [0, 1], got {self.p}")
        if self.q < 2 or self.n < 0:
            raise InvalidParameter("need q >= 2 and n >= 0")


def sample_random_hypergraph(model: RandomModel) -> set[Clique]:
    """Each q-subset of range(n) is kept when its uniform draw is below p.

    The draws depend only on (n, q, seed), so for a fixed seed the sample is
    monotone in p.
    """
    sets = list(combinations(range(model.n), model.q))
    u = np.random.default_rng(model.seed).random(len(sets))
    return {s for s, x in zip(sets, u) if x < model.p}


# -- threshold experiment -----------------------------------------------------------

@dataclass
class TrialRecord:
    n: int
    q: int
    p: float
    trial: int
    seed: int
    status: str
    elapsed_ms: float
    stats: dict = field(default_factory=dict)


@dataclass
class ExperimentResult:
    records: list[TrialRecord]
    rows: list[dict]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS + ["note"], extrasaction="ignore",
                           lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow(r)
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"rows": self.rows, "records": [asdict(r) for r in self.records]}

    def rate(self, n: int, p: float) -> float | None:
        for r in self.rows:
            if r["n"] == n and math.isclose(r["p"], p):
                return r["rate"]
        return None


def _threshold_trial(args):
    n, q, p, trial, seed, budget = args
    t0 = time.perf_counter()
    chosen = sample_random_hypergraph(RandomModel(n, q, p, seed))
    res = find_decomposition(CoverInstance(Graph.complete(n), q, sorted(chosen)), budget=budget)
    return TrialRecord(n, q, p, trial, seed, res.status, (time.perf_counter() - t0) * 1e3,
                       {"hyperedges": len(chosen), "nodes": res.nodes})


def run_threshold_experiment(q: int, n_list: Iterable[int], p_grid: Iterable[float], trials: int,
                             budget: int | None = None, seed=0) -> ExperimentResult:
    """Success rate of finding a Steiner system inside a random q-uniform hypergraph.

    The per-trial seed ignores p, so every p sees the same coupled draws.
    """
    p_grid = list(p_grid)
    jobs, rows_order = [], []
    skipped = []
    for n in n_list:
        if not complete_graph_divisible(n, q):
            log.warning("K_%d is not K_%d-divisible; skipping", n, q)
            skipped.append(n)
            rows_order.append((n, None))
            continue
        for p in p_grid:
            rows_order.append((n, p))
            for t in range(trials):
                jobs.append((n, q, p, t, derive_seed(seed, "threshold", n, t), budget))
    records = parallel_map(_threshold_trial, jobs)
    rows = []
    for n, p in rows_order:
        if p is None:
            rows.append({"n": n, "q": q, "p": "", "trials": 0, "successes": 0, "rate": "",
                         "ci_lo": "", "ci_hi": "", "note": "skipped: K_n not divisible"})
            continue
        recs = [r for r in records if r.n == n and r.p == p]
        succ = sum(r.status == FOUND for r in recs)
        budget_hits = sum(r.status not in (FOUND, "infeasible") for r in recs)
        lo, hi = wilson_interval(succ, len(recs))
        rows.append({"n": n, "q": q, "p": p, "trials": len(recs), "successes": succ,
                     "rate": succ / len(recs), "ci_lo": lo, "ci_hi": hi,
                     "note": f"{budget_hits} budget-exhausted" if budget_hits else ""})
    return ExperimentResult(records, rows)


def monotone_within_ci(result: ExperimentResult, n: int) -> bool:
    """Rates never drop by more than the confidence intervals allow as p grows."""
    rows = sorted((r for r in result.rows if r["n"] == n and r["p"] != ""), key=lambda r: r["p"])
    return all(b["ci_hi"] >= a["ci_lo"] for a, b in zip(rows, rows[1:]))


# -- pipeline ------------------------------------------------------------------------

@dataclass
class PipelineConfig:
    """Pipeline parameters.

    ``None`` for ``C``, ``p`` or ``tol`` means the asymptotic formula from ``beta``:
    ``C = n**(8*beta)``, ``p = C**-2 / 2`` and ``tol = n**(-(q-2)/3)``.
    """

    n: int
    q: int = 3
    beta: float = 0.01
    p: float | None = None
    eps: float = 0.05
    booster: str = "layered"  # or "none"
    C: float | None = None
    b: int | None = None
    tol: float | None = None
    thin_keep: float = 0.5
    nibble: NibbleParams = field(default_factory=NibbleParams)
    reservoir_retries: int = 2000
    absorber_retries: int = 5
    regularize_retries: int = 20
    nibble_retries: int = 20
    restarts: int = 1
    embed_resample_cap: int = 100_000
    reserve_cap: int = DEFAULT_RESERVE_CAP
    max_absorber_edges: int = DEFAULT_MAX_ABSORBER_EDGES
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.nibble, dict):
            self.nibble = NibbleParams(**self.nibble)
        if self.booster not in ("layered", "none"):
            raise InvalidParameter(f"unknown booster choice {self.booster!r}")
        if self.p is not None and not 0 <= self.p <= 1:
            raise InvalidParameter("reservoir p must lie in [0, 1]")

    def resolved(self) -> dict:
        C = self.C if self.C is not None else self.n ** (8 * self.beta)
        return {
            "C": C,
            "p": self.p if self.p is not None else C ** -2 / 2,
            "tol": self.tol if self.tol is not None else self.n ** (-(self.q - 2) / 3),
        }

    def to_json(self) -> dict:
        d = asdict(self)
        d["resolved"] = self.resolved()
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise InvalidParameter(f"unknown config keys {sorted(extra)}")
        return cls(**data)


def desk_profile(n: int = 9, q: int = 3, seed: int = 0) -> PipelineConfig:
    """Calibrated small-scale overrides; the asymptotic defaults are degenerate here.

    Boosters do not fit inside K_9, the design is kept whole (thinning by half
    kills nearly every completion at this size) and failed attempts restart
    from a fresh reservoir.
    """
    return PipelineConfig(
        n=n, q=q, p=0.2, eps=0.0, booster="none", tol=1.0, thin_keep=1.0,
        nibble=NibbleParams(gamma=0.6, bite=0.25, floor=1.0),
        nibble_retries=500, restarts=30, absorber_retries=20, seed=seed,
    )


@dataclass
class PipelineResult:
    packing: list[Clique]
    stats: dict

    def to_json(self) -> dict:
        return {"packing": [list(c) for c in self.packing], "stats": self.stats}


def boost_with_embedding(oa: OmniAbsorber, n: int, C: float, seed=None, host: Graph | None = None,
                         resample_cap: int = 100_000):
    """Attach one layered booster per family clique, placed by the local-lemma embedding.

    ``host`` defaults to K_n minus X and A. Returns the boosted absorber and the embedding.
    """
    rb = layer_boosters(oa.q)
    if host is None:
        host = Graph.complete(n).minus(oa.X.edges).minus(oa.A.edges)
    problem = EmbeddingProblem(host, list(oa.family), rb.extension_size, C)
    emb = sample_embedding(problem, seed, resample_cap)
    boosters = {r: embed_booster(rb, r, emb.parts[r].ext, n) for r in oa.family}
    return boost_absorber(oa, boosters), emb


def _boost(cfg, K, X, oa: OmniAbsorber, seed, stats):
    if cfg.b is not None and cfg.b != layer_boosters(cfg.q).extension_size:
        raise StageFailure("embed", f"b = {cfg.b} does not match the layered booster", seed=seed)
    try:
        boosted, emb = boost_with_embedding(oa, cfg.n, cfg.resolved()["C"], seed,
                                            K.minus(X.edges).minus(oa.A.edges), cfg.embed_resample_cap)
    except DesignForgeError as exc:
        raise StageFailure("embed", str(exc), seed=seed) from exc
    stats["embed_resamples"] = emb.resamples
    return boosted


def end_to_end_pipeline(config: PipelineConfig, trial: int = 0) -> PipelineResult:
    """Decompose K_n: reservoir, absorber, optional boosters, nibble, absorb the leave.

    A failed stage restarts the whole attempt from a fresh reservoir, up to
    ``config.restarts`` attempts; the last failure is re-raised.
    """
    cfg = config
    if not complete_graph_divisible(cfg.n, cfg.q):
        raise PreconditionViolation(f"K_{cfg.n} is not K_{cfg.q}-divisible")
    failures: dict[str, int] = {}
    for attempt in range(max(1, cfg.restarts)):
        try:
            result = _attempt(cfg, trial, attempt)
        except StageFailure as exc:
            failures[exc.stage] = failures.get(exc.stage, 0) + 1
            last = exc
            continue
        result.stats.update(attempts=attempt + 1, failures=failures)
        return result
    last.retries = cfg.restarts
    last.failures = failures
    raise last


def _attempt(cfg: PipelineConfig, trial: int, attempt: int) -> PipelineResult:
    n, q = cfg.n, cfg.q
    res = cfg.resolved()
    seed = lambda stage, k=0: derive_seed(cfg.seed, stage, trial, attempt, k)  # noqa: E731
    K = Graph.complete(n)
    stats: dict = {"trial": trial, "resolved": res}
    t0 = time.perf_counter()

    oa = None
    for k in range(cfg.absorber_retries):
        try:
            X = select_reservoir(K, q, res["p"], seed("reservoir", k), cfg.eps, cfg.reservoir_retries)
        except RetryExhausted as exc:
            raise StageFailure("reservoir", str(exc), seed=seed("reservoir", k),
                               retries=cfg.reservoir_retries) from exc
        try:
            oa = brute_force_absorber(X, q, n, max_edges=cfg.max_absorber_edges,
                                      reserve_cap=cfg.reserve_cap)
            break
        except DesignForgeError as exc:
            log.debug("absorber attempt %d failed: %s", k, exc)
    if oa is None:
        raise StageFailure("absorber", "no absorber for any sampled reservoir",
                           seed=seed("reservoir", 0), retries=cfg.absorber_retries)
    stats.update(reservoir_attempts=k + 1, X_edges=len(X.edges), A_edges=len(oa.A.edges),
                 family=len(oa.family))

    if cfg.booster == "layered" and oa.family:
        oa = _boost(cfg, K, X, oa, seed("embed"), stats)
    J = K.minus(X.edges).minus(oa.A.edges)
    D = design_hypergraph(J, q)
    G2, table = reserve_hypergraph(J, X, q)
    last = None
    for k in range(cfg.nibble_retries):
        try:
            D1 = regularize_design(D, res["tol"], seed("regularize", k), cfg.regularize_retries,
                                   keep=cfg.thin_keep)
        except RetryExhausted as exc:
            raise StageFailure("regularize", str(exc), seed=seed("regularize", k),
                               retries=cfg.regularize_retries) from exc
        last = spread_nibble(D1, G2, cfg.nibble, seed("nibble", k))
        if last.ok:
            break
    else:
        detail = f"status {last.status}, uncovered {last.uncovered_A[:5]}" if last else "no runs"
        raise StageFailure("nibble", detail, seed=seed("nibble", 0), retries=cfg.nibble_retries)
    M = matching_to_packing(last.matching, table)
    covered = packing_edges(M)
    assert J.edges <= covered, "nibble reported success but left J-edges uncovered"
    L = Graph(n, X.edges - covered)
    if not is_kq_divisible(L, q):
        raise AssertionError(f"leave {L.sorted_edges()} is not K_{q}-divisible")
    out = sorted(M + oa.decompose(L))
    if not verify_decomposition(K, out, q):
        raise AssertionError("pipeline output is not a decomposition of K_n")
    stats.update(nibble_attempts=k + 1, leave_edges=len(L.edges), rounds=last.rounds,
                 reserve_used=last.reserve_used, elapsed_ms=(time.perf_counter() - t0) * 1e3)
    return PipelineResult(out, stats)


def _pipeline_trial(args):
    cfg, trial = args
    try:
        return trial, end_to_end_pipeline(cfg, trial), None
    except StageFailure as exc:
        return trial, None, {"stage": exc.stage, "message": str(exc)}


def run_pipeline_trials(config: PipelineConfig, trials: int) -> list[tuple[int, PipelineResult | None, dict | None]]:
    return parallel_map(_pipeline_trial, [(config, t) for t in range(trials)])


class InsufficientSample(DesignForgeError):
    pass


@dataclass
class PipelineSpread:
    pipeline: SpreadReport
    baseline: SpreadReport | None
    successes: int
    trials: int

    def to_json(self) -> dict:
        return {
            "successes": self.successes,
            "trials": self.trials,
            "pipeline": self.pipeline.to_json(),
            "baseline": self.baseline.to_json() if self.baseline else None,
        }


def pipeline_spread_report(config: PipelineConfig, trials: int, probes: Sequence | None = None,
                           seed: int | None = None, min_successes: int = 5,
                           baseline_cap: int = 10**5) -> PipelineSpread:
    """Empirical singleton spread of pipeline outputs next to the uniform baseline."""
    cfg = config if seed is None else PipelineConfig(**{**asdict(config), "nibble": config.nibble,
                                                        "seed": seed})
    outs = [r.packing for _, r, _ in run_pipeline_trials(cfg, trials) if r is not None]
    if len(outs) < min_successes:
        raise InsufficientSample(f"only {len(outs)} of {trials} pipeline runs succeeded")
    K = Graph.complete(cfg.n)
    if probes is None:
        probes = [(c,) for c in combinations(range(cfg.n), cfg.q)]
    it = iter(outs)
    rep = empirical_spread(lambda _rng: next(it), len(outs), probes, cfg.seed, K, cfg.q)
    baseline = None
    enum = enumerate_decompositions(CoverInstance(K, cfg.q), limit=baseline_cap)
    if not enum.truncated and enum.packings:
        baseline = exact_spread(ExplicitDistribution.uniform(enum.packings), 1)
    return PipelineSpread(rep, baseline, len(outs), trials)
