"""Command line entry point: ``mechlab {run,validate,sweep,audit,oracle}``.

Exit status is 0 on success, 1 on errors (including invalid configs) and 2
when ``--fail-on-violation`` is set and some audit certified a violation.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bic import VIOLATION, audit_extremization, check_condition_u, search_deviation
from .config import ConfigError, Experiment, build_experiment, load_config, validate_config
from .core import MechlabError
from .distributions import FiniteSupport
from .mechanisms import Dictatorial, WeightedUtilitarian
from .montecarlo import SeedSpec
from .oracle import exact_ex_ante, exact_interim
from .pareto import sweep_simplex
from .payoff import InterimQuery, ex_ante_payoffs, paired_interim

log = logging.getLogger("mechlab")

_JOB_STRIDE = 1 << 48
SUBCOMMAND_JOBS = {"sweep": "sweep", "audit": "audit", "oracle": "oracle-crosscheck"}


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def fmt_vector(v) -> str:
    return ";".join(fmt(float(x)) for x in v)


def write_csv(path: Path, header, rows, config_hash: str):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(header) + ["config_hash"])
        for row in rows:
            writer.writerow([fmt(x) for x in row] + [config_hash])


def job_seed(exp: Experiment, index: int) -> SeedSpec:
    return exp.seed.derive((index + 1) * _JOB_STRIDE)


def run_ex_ante(exp, job, seed, threads):
    n = exp.job_samples(job)
    est = ex_ante_payoffs(exp.mechanism(job), exp.model, seed, n, threads)
    rows = [(i, e.mean, e.std_error, e.n_samples) for i, e in enumerate(est)]
    return ["agent", "mean", "se", "n"], rows, {"payoffs": [e.mean for e in est]}


def run_interim(exp, job, seed, threads):
    n = exp.job_samples(job)
    report = job.get("report", job["true_type"])
    res = paired_interim(exp.mechanism(job), exp.model, job["agent"], job["true_type"], [report],
                         seed, n, threads)
    rows = [("probability", x, e.mean, e.std_error, e.n_samples) for x, e in enumerate(res.probabilities[0])]
    pay = res.payoffs[0]
    rows.append(("payoff", "", pay.mean, pay.std_error, pay.n_samples))
    return ["quantity", "alternative", "mean", "se", "n"], rows, {"payoff": pay.mean}


def _dictatorial_weights(mech: Dictatorial, n_agents: int) -> np.ndarray:
    w = np.zeros(n_agents)
    w[mech.dictator] = 1.0
    return w


AUDIT_HEADER = ["agent", "gain", "se", "p_value", "verdict", "deviation",
                "truthful_payoff", "deviant_payoff", "n", "assumption_1_violated"]


def run_audit(exp, job, seed, threads):
    audit = job["audit"]
    mech = exp.mechanism(job)
    agent = audit["agent"]
    u = audit["true_type"]
    n = exp.job_samples(job, audit)
    flag = not exp.model.satisfies_full_support
    if audit.get("mode", "extremization") == "grid":
        grid = tuple(audit.get("grid", (0.0, 0.5, 1.0)))
        rep = search_deviation(mech, exp.model, agent, u, seed, n, grid, threads=threads)
    else:
        if isinstance(mech, WeightedUtilitarian):
            weights = mech.weights_
        elif isinstance(mech, Dictatorial):
            weights = _dictatorial_weights(mech, exp.dims.n_agents)
        else:
            raise MechlabError("extremization audits need a weighted utilitarian or dictatorial mechanism")
        case = check_condition_u(weights, agent, u) if weights[agent] > 0 else None
        if case is None:
            row = (agent, "", "", "", "not-applicable", "", "", "", 0, flag)
            return AUDIT_HEADER, [row], {"verdict": "not-applicable"}
        rep = audit_extremization(weights, exp.model, case, seed, n,
                                  escalate=bool(audit.get("escalate", False)), threads=threads)
    g = rep.paired_gain
    row = (agent, g.mean, g.std_error, float(rep.p_value), rep.verdict, fmt_vector(rep.deviation_used),
           rep.truthful_payoff.mean, rep.deviant_payoff.mean, g.n_samples, rep.assumption_1_violated)
    return AUDIT_HEADER, [row], {"verdict": rep.verdict, "gain": g.mean}


def run_sweep(exp, job, seed, threads):
    sweep = job["sweep"]
    n = exp.job_samples(job, sweep)
    frontier = sweep_simplex(exp.model, sweep["resolution"], seed, n, threads=threads)
    k = exp.dims.n_agents
    header = ([f"lambda_{i + 1}" for i in range(k)] + [f"payoff_{i + 1}" for i in range(k)]
              + [f"se_{i + 1}" for i in range(k)])
    rows = [tuple(float(w) for w in p.weights) + tuple(p.means) + tuple(p.std_errors)
            for p in frontier.points]
    return header, rows, {"points": len(rows)}


def run_oracle(exp, job, seed, threads, tolerance_se: float = 4.0):
    mech = exp.mechanism(job)
    fm = (FiniteSupport.from_config(job["finite_model"], exp.dims) if "finite_model" in job
          else exp.model)
    n = exp.job_samples(job)
    rows = []
    exact = exact_ex_ante(mech, fm)
    mc = ex_ante_payoffs(mech, fm, seed, n, threads)
    for i, (e, est) in enumerate(zip(exact, mc)):
        rows.append(("ex-ante", i, e.value, est.mean, est.std_error, est.n_samples))
    agent = job.get("agent", 0)
    u = job.get("true_type", fm.atoms[0, agent].tolist())
    report = job.get("report", u)
    res = paired_interim(mech, fm, agent, u, [u, report], seed.derive(1 << 32), n, threads)
    truth = exact_interim(mech, fm, InterimQuery.truthful(agent, u)).value
    dev = exact_interim(mech, fm, InterimQuery(agent, u, report)).value
    rows.append(("interim", agent, truth, res.payoffs[0].mean, res.payoffs[0].std_error, n))
    rows.append(("deviation-gain", agent, dev - truth, res.gains[1].mean, res.gains[1].std_error, n))
    out = []
    ok = True
    for est_name, i, ex, mean, se, cnt in rows:
        within = abs(mean - ex) <= tolerance_se * se + 1e-12
        ok &= within
        out.append((est_name, i, ex, mean, se, cnt, within))
    return (["estimand", "agent", "exact", "mc_mean", "mc_se", "n", "within_4se"], out,
            {"all_within": bool(ok)})


RUNNERS = {"ex-ante": run_ex_ante, "interim": run_interim, "audit": run_audit,
           "sweep": run_sweep, "oracle-crosscheck": run_oracle}


def execute(exp: Experiment, job_types=None, threads: int | None = None) -> dict:
    """Run the experiment's jobs in order; returns the manifest."""
    exp.output_dir.mkdir(parents=True, exist_ok=True)
    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    entries = []
    for index, job in enumerate(exp.jobs):
        if job_types is not None and job["type"] not in job_types:
            continue
        seed = job_seed(exp, index)
        log.info("job %d (%s) starting", index, job["type"])
        t0 = time.perf_counter()
        header, rows, summary = RUNNERS[job["type"]](exp, job, seed, threads)
        name = f"job{index:02d}_{job['type']}.csv"
        write_csv(exp.output_dir / name, header, rows, exp.hash)
        entries.append({"index": index, "type": job["type"], "output": name,
                        "seed": {"master_seed": seed.master_seed, "stream_id": seed.stream_id},
                        "seconds": round(time.perf_counter() - t0, 3), "summary": summary})
    violations = sum(1 for e in entries if e["summary"].get("verdict") == VIOLATION)
    manifest = {
        "config_hash": exp.hash,
        "artifact_version": __version__,
        "started": started,
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "seed": {"master_seed": exp.seed.master_seed, "stream_id": exp.seed.stream_id},
        "jobs": entries,
        "outcome": {"jobs_run": len(entries), "violations_certified": violations},
    }
    with open(exp.output_dir / "manifest.json", "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def apply_overrides(cfg: dict, args) -> dict:
    cfg = dict(cfg)
    if args.seed is not None:
        seed = cfg.get("seed", {})
        seed = dict(seed) if isinstance(seed, dict) else {"master_seed": seed}
        seed["master_seed"] = args.seed
        cfg["seed"] = seed
    if args.samples is not None:
        cfg["samples"] = args.samples
    if args.out is not None:
        cfg["output_dir"] = args.out
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mechlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"run": "run every job in the config",
             "validate": "check the config without running anything",
             "sweep": "run only the sweep jobs",
             "audit": "run only the audit jobs",
             "oracle": "run only the oracle cross-check jobs"}
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, metavar="PATH")
        if name == "validate":
            continue
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--samples", type=int, help="override the default sample count")
        p.add_argument("--threads", type=int, help="worker threads (default: $MECHLAB_THREADS or 1)")
        p.add_argument("--out", metavar="DIR", help="override the output directory")
        p.add_argument("--fail-on-violation", action="store_true",
                       help="exit with status 2 if any audit certifies a violation")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            diags = validate_config(cfg)
            for line in diags:
                print(line)
            if diags:
                return 1
            print("ok")
            return 0
        exp = build_experiment(apply_overrides(cfg, args))
        job_types = None
        if args.command in SUBCOMMAND_JOBS:
            job_types = {SUBCOMMAND_JOBS[args.command]}
            if not any(j["type"] in job_types for j in exp.jobs):
                print(f"config has no {SUBCOMMAND_JOBS[args.command]} jobs", file=sys.stderr)
                return 1
        manifest = execute(exp, job_types, args.threads)
    except ConfigError as exc:
        for line in exc.diagnostics:
            print(line, file=sys.stderr)
        return 1
    except MechlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.fail_on_violation and manifest["outcome"]["violations_certified"]:
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
