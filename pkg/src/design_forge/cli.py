"""Command-line entry point: ``design-forge <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import shlex
import subprocess
import sys
from fractions import Fraction
from pathlib import Path

from .absorber import OmniAbsorber, boost_absorber, brute_force_absorber, verify_omni_absorber
from .booster import RootedBooster, layer_boosters, verify_rooted_booster
from .embed import EmbeddingProblem, embedding_spread_report, sample_embedding
from .errors import DesignForgeError
from .experiments import (PipelineConfig, desk_profile, end_to_end_pipeline, pipeline_spread_report,
                          run_pipeline_trials, run_threshold_experiment)
from .graph import format_edgelist, format_packing, parse_edgelist, parse_packing
from .nibble import NibbleParams, nibble_with_reserves, parse_hypergraph
from .solver import CoverInstance, enumerate_decompositions, find_decomposition
from .spread import (ExplicitDistribution, default_probes, empirical_spread, exact_spread,
                     uniform_sampler)

log = logging.getLogger("design_forge")


class CliError(Exception):
    pass


def _read(path: str) -> str:
    return Path(path).read_text()


def _json_default(o):
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, (set, frozenset, tuple)):
        return list(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, default=_json_default) + "\n"


def _rows_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _emit(args, name: str, payload, csv_rows: list[dict] | None = None, text: str | None = None):
    if args.format == "csv":
        if csv_rows is None:
            raise CliError(f"'{name}' has no CSV output; use --format json")
        body, ext = _rows_csv(csv_rows), "csv"
    elif text is not None:
        body, ext = text, "txt"
    else:
        body, ext = _dump_json(payload), "json"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        target = out / f"{name}.{ext}"
        target.write_text(body)
        log.info("wrote %s", target)
    else:
        sys.stdout.write(body)


# -- subcommands ----------------------------------------------------------------------

def cmd_booster(args) -> int:
    if args.action == "build":
        rb = layer_boosters(args.q, check=args.check)
        if args.emit == "edgelist":
            _emit(args, "booster", None, text=format_edgelist(rb.graph))
        else:
            _emit(args, "booster", rb.to_json())
        return 0
    rb = RootedBooster.from_json(json.loads(_read(args.file)))
    rep = verify_rooted_booster(rb)
    _emit(args, "booster-verify", rep.to_json())
    return 0 if rep.passed else 1


def cmd_solve(args) -> int:
    host = parse_edgelist(_read(args.host))
    cands = parse_packing(_read(args.candidates)) if args.candidates else None
    inst = CoverInstance(host, args.q, cands)
    if args.enumerate:
        en = enumerate_decompositions(inst, limit=args.limit)
        payload = {"status": "found" if en.packings else "infeasible", "count": len(en),
                   "truncated": en.truncated, "nodes": en.nodes, "elapsed_ms": None,
                   "packings": [[list(c) for c in p] for p in en.packings]}
        _emit(args, "solve", payload)
        return 0
    res = find_decomposition(inst, budget=args.budget, seed=args.seed)
    if args.packing and res.found:
        _emit(args, "solve", None, text=format_packing(res.packing))
    else:
        payload = res.to_json()
        if res.found:
            payload["packing"] = [list(c) for c in res.packing]
        _emit(args, "solve", payload)
    return 0 if res.found else 1


def cmd_absorber(args) -> int:
    if args.action == "build":
        X = parse_edgelist(_read(args.reserve))
        oa = brute_force_absorber(X, args.q, args.host_n)
        _emit(args, "absorber", oa.to_json())
        return 0
    if args.action == "boost":
        base = OmniAbsorber.from_json(json.loads(_read(args.base)))
        boosters = {}
        for f in sorted(Path(args.boosters).glob("*.json")):
            rb = RootedBooster.from_json(json.loads(f.read_text()))
            boosters[rb.root] = rb
        oa = boost_absorber(base, boosters)
        _emit(args, "absorber-boosted", oa.to_json())
        return 0
    oa = OmniAbsorber.from_json(json.loads(_read(args.file)))
    rep = verify_omni_absorber(oa)
    _emit(args, "absorber-verify", rep.to_json())
    return 0 if rep.passed else 1


def cmd_embed(args) -> int:
    host = parse_edgelist(_read(args.host))
    roots = parse_packing(_read(args.roots))
    problem = EmbeddingProblem(host, roots, args.b, args.C)
    emb = sample_embedding(problem, args.seed)
    payload = emb.to_json()
    if args.targets:
        raw = json.loads(_read(args.targets))
        targets = {tuple(item["root"]): item["S"] for item in raw}
        rep = embedding_spread_report(problem, targets, args.trials, args.seed)
        payload.update(spread_estimate=rep["spread_estimate"], ci=rep["ci"], bound=rep["bound"])
    else:
        payload.update(spread_estimate=None, bound=None)
    _emit(args, "embed", payload)
    return 0


def cmd_nibble(args) -> int:
    G1 = parse_hypergraph(_read(args.g1))
    G2 = parse_hypergraph(_read(args.g2))
    if not hasattr(G2, "A"):
        raise CliError("the --g2 file needs an 'A ...' line naming the A-vertices")
    params = NibbleParams(**json.loads(_read(args.params))) if args.params else NibbleParams()
    res = nibble_with_reserves(G1, G2, params, args.seed)
    _emit(args, "nibble", res.to_json())
    return 0 if res.ok else 1


def _external_sampler(template: str):
    def sample(rng):
        cmd = template.replace("{seed}", str(rng.getrandbits(63)))
        out = subprocess.run(shlex.split(cmd), capture_output=True, text=True, check=True).stdout
        return parse_packing(out)
    return sample


def cmd_spread(args) -> int:
    host = parse_edgelist(_read(args.host)) if args.host else None
    if args.action == "exact":
        if host is None:
            raise CliError("spread exact needs --host")
        en = enumerate_decompositions(CoverInstance(host, args.q), limit=args.limit)
        if en.truncated:
            raise CliError(f"more than {args.limit} decompositions; raise --limit")
        if not en.packings:
            raise CliError("host has no decomposition")
        rep = exact_spread(ExplicitDistribution.uniform(en.packings), args.smax)
    else:
        if args.sampler == "uniform":
            if host is None:
                raise CliError("the uniform sampler needs --host")
            sampler = uniform_sampler(enumerate_decompositions(CoverInstance(host, args.q)).packings)
        elif args.sampler == "pipeline":
            cfg = _load_config(args)
            outs = [r.packing for _, r, _ in run_pipeline_trials(cfg, args.trials) if r is not None]
            if not outs:
                raise CliError("no pipeline run succeeded")
            pool = iter(outs)
            sampler = lambda _rng: next(pool)  # noqa: E731
            args.trials = len(outs)
        else:
            sampler = _external_sampler(args.sampler)
        if host is None:
            raise CliError("spread empirical needs --host to choose probes")
        probes = default_probes(host, args.q, args.smax, seed=args.seed)
        rep = empirical_spread(sampler, args.trials, probes, args.seed, host, args.q)
    rows = [st.to_json() for _, st in sorted(rep.per_size.items())]
    _emit(args, f"spread-{args.action}", rep.to_json(),
          csv_rows=[{k: v for k, v in r.items() if k != "probe"} for r in rows])
    return 0


def cmd_threshold(args) -> int:
    res = run_threshold_experiment(args.q, args.n, args.p, args.trials, args.budget, args.seed)
    _emit(args, "threshold", res.to_json(), csv_rows=[
        {k: r.get(k, "") for k in ("n", "q", "p", "trials", "successes", "rate", "ci_lo", "ci_hi")}
        for r in res.rows])
    return 0


def _load_config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        cfg = PipelineConfig.from_dict(json.loads(_read(args.config)))
    else:
        cfg = desk_profile(args.n, args.q)
    cfg.seed = args.seed
    return cfg


def cmd_pipeline(args) -> int:
    cfg = _load_config(args)
    if args.spread:
        rep = pipeline_spread_report(cfg, args.trials)
        _emit(args, "pipeline-spread", rep.to_json())
        return 0
    if args.trials == 1:
        res = end_to_end_pipeline(cfg)
        if args.packing:
            _emit(args, "pipeline", None, text=format_packing(res.packing))
        else:
            _emit(args, "pipeline", {"config": cfg.to_json(), **res.to_json()})
        return 0
    runs = run_pipeline_trials(cfg, args.trials)
    rows = [{"trial": t, "status": "ok" if r else "failed",
             "stage": (err or {}).get("stage", ""),
             "attempts": r.stats.get("attempts") if r else "",
             "elapsed_ms": round(r.stats.get("elapsed_ms", 0), 1) if r else ""} for t, r, err in runs]
    ok = sum(r is not None for _, r, _ in runs)
    _emit(args, "pipeline", {"config": cfg.to_json(), "successes": ok, "trials": args.trials,
                             "runs": rows}, csv_rows=rows)
    return 0


# -- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", metavar="DIR", help="write output into DIR instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="design-forge", parents=[common],
                                description="Clique decompositions, absorbers and spread experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("booster", parents=[common], help="build or verify rooted boosters")
    bsub = b.add_subparsers(dest="action", required=True)
    bb = bsub.add_parser("build", parents=[common])
    bb.add_argument("--q", type=int, required=True)
    bb.add_argument("--emit", choices=("json", "edgelist"), default="json")
    bb.add_argument("--check", action="store_true", help="assert bounds after every glue step")
    bv = bsub.add_parser("verify", parents=[common])
    bv.add_argument("--file", required=True)
    b.set_defaults(func=cmd_booster)

    a = sub.add_parser("absorber", parents=[common], help="build, boost or verify omni-absorbers")
    asub = a.add_subparsers(dest="action", required=True)
    ab = asub.add_parser("build", parents=[common])
    ab.add_argument("--reserve", required=True, help="edge-list file of the reserve X")
    ab.add_argument("--q", type=int, required=True)
    ab.add_argument("--host-n", type=int, required=True)
    ao = asub.add_parser("boost", parents=[common])
    ao.add_argument("--base", required=True)
    ao.add_argument("--boosters", required=True, help="directory of embedded booster JSON files")
    av = asub.add_parser("verify", parents=[common])
    av.add_argument("--file", required=True)
    a.set_defaults(func=cmd_absorber)

    s = sub.add_parser("solve", parents=[common], help="exact K_q-decomposition search")
    s.add_argument("--host", required=True)
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--candidates", help="packing-format file restricting the usable cliques")
    s.add_argument("--enumerate", action="store_true")
    s.add_argument("--limit", type=int)
    s.add_argument("--budget", type=int)
    s.add_argument("--packing", action="store_true", help="print the packing text format")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("embed", parents=[common], help="sample a partial-clique embedding")
    e.add_argument("--host", required=True)
    e.add_argument("--roots", required=True, help="packing-format file of root cliques")
    e.add_argument("--b", type=int, required=True)
    e.add_argument("--C", type=float, required=True)
    e.add_argument("--trials", type=int, default=1000)
    e.add_argument("--targets", help='JSON list of {"root": [...], "S": [...]}')
    e.set_defaults(func=cmd_embed)

    n = sub.add_parser("nibble", parents=[common], help="nibble with reserves")
    nsub = n.add_subparsers(dest="action", required=True)
    nr = nsub.add_parser("run", parents=[common])
    nr.add_argument("--g1", required=True)
    nr.add_argument("--g2", required=True)
    nr.add_argument("--params", help="JSON file of nibble parameters")
    n.set_defaults(func=cmd_nibble)

    sp = sub.add_parser("spread", parents=[common], help="exact or empirical spread")
    ssub = sp.add_subparsers(dest="action", required=True)
    se = ssub.add_parser("exact", parents=[common])
    se.add_argument("--host", required=True)
    se.add_argument("--q", type=int, required=True)
    se.add_argument("--smax", type=int, default=1)
    se.add_argument("--limit", type=int, default=10**5)
    sm = ssub.add_parser("empirical", parents=[common])
    sm.add_argument("--sampler", required=True,
                    help="'uniform', 'pipeline', or a shell command printing a packing ({seed} is substituted)")
    sm.add_argument("--trials", type=int, required=True)
    sm.add_argument("--host")
    sm.add_argument("--q", type=int, default=3)
    sm.add_argument("--smax", type=int, default=1)
    sm.add_argument("--config")
    sm.add_argument("--n", type=int, default=9)
    sp.set_defaults(func=cmd_spread)

    t = sub.add_parser("threshold", parents=[common], help="random-hypergraph threshold experiment")
    t.add_argument("--q", type=int, default=3)
    t.add_argument("--n", type=int, nargs="+", required=True)
    t.add_argument("--p", type=float, nargs="+", required=True)
    t.add_argument("--trials", type=int, default=100)
    t.add_argument("--budget", type=int)
    t.set_defaults(func=cmd_threshold)

    pl = sub.add_parser("pipeline", parents=[common], help="end-to-end decomposition pipeline")
    pl.add_argument("--config", help="JSON file with PipelineConfig fields")
    pl.add_argument("--n", type=int, default=9)
    pl.add_argument("--q", type=int, default=3)
    pl.add_argument("--trials", type=int, default=1)
    pl.add_argument("--spread", action="store_true", help="report singleton spread of the outputs")
    pl.add_argument("--packing", action="store_true")
    pl.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, DesignForgeError, OSError, json.JSONDecodeError, subprocess.CalledProcessError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
