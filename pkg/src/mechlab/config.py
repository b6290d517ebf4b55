"""Experiment configuration: loading, validation and construction.

A config is a single JSON object::

    {
      "dims": {"n_agents": 2, "n_alternatives": 2},
      "distribution": {"kind": "independent-marginals", "marginals": {"family": "uniform"}},
      "mechanisms": {"util": {"kind": "weighted-utilitarian", "weights": [0.5, 0.5]}},
      "jobs": [{"type": "ex-ante", "mechanism": "util"}],
      "seed": {"master_seed": 1, "stream_id": 0},
      "samples": 100000,
      "output_dir": "results"
    }

A lone ``"mechanism"`` block is accepted in place of ``"mechanisms"`` and is
registered under the name ``"default"``.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import MechlabError, ModelDims
from .distributions import DistributionModel, FiniteSupport, distribution_from_config
from .mechanisms import SocialChoiceFunction, mechanism_from_config
from .montecarlo import SeedSpec

JOB_TYPES = ("ex-ante", "interim", "audit", "sweep", "oracle-crosscheck")
AUDIT_MODES = ("extremization", "grid")
WEIGHT_SUM_TOL = 1e-9
# keys that never influence results and so stay out of the config hash
_UNHASHED = ("output_dir", "threads")


class ConfigError(MechlabError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError([f"cannot read config: {exc}"]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config is not valid JSON: {exc}"]) from exc
    if not isinstance(cfg, dict):
        raise ConfigError(["config must be a single JSON object"])
    return cfg


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical JSON form, stable under key reordering."""
    body = {k: v for k, v in cfg.items() if k not in _UNHASHED}
    text = json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(text.encode()).hexdigest()


def mechanism_blocks(cfg: dict) -> dict:
    if "mechanisms" in cfg:
        return cfg["mechanisms"] if isinstance(cfg["mechanisms"], dict) else {}
    if "mechanism" in cfg:
        return {"default": cfg["mechanism"]}
    return {}


def _is_count(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool) and x > 0


def _check_type(diags, where, value, m):
    try:
        v = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        diags.append(f"{where}: must be a list of numbers")
        return
    if v.shape != (m,):
        diags.append(f"{where}: must have {m} entries")
    elif np.any(v < 0) or np.any(v > 1):
        diags.append(f"{where}: entries must lie in [0, 1]")


def validate_config(cfg: dict) -> list[str]:
    """Every structural problem with ``cfg``, as human-readable lines (empty if valid)."""
    diags: list[str] = []
    dims = None
    try:
        d = cfg["dims"]
        dims = ModelDims(d["n_agents"], d["n_alternatives"])
    except (KeyError, TypeError):
        diags.append("dims: needs n_agents and n_alternatives")
    except MechlabError as exc:
        diags.append(f"dims: {exc}")

    dist_block = cfg.get("distribution")
    if not isinstance(dist_block, dict):
        diags.append("distribution: missing block")
    elif dims is not None:
        flagged = False
        if dist_block.get("kind") == "gaussian-copula" and "correlation" in dist_block:
            try:
                corr = np.asarray(dist_block["correlation"], dtype=float)
                if corr.ndim == 2 and corr.shape[0] == corr.shape[1]:
                    low = np.linalg.eigvalsh((corr + corr.T) / 2)[0]
                    if low < -1e-10:
                        diags.append(f"distribution.correlation: matrix is not positive semidefinite "
                                     f"(min eigenvalue {low:.6g})")
                        flagged = True
            except (TypeError, ValueError, np.linalg.LinAlgError):
                pass
        if not flagged:
            try:
                distribution_from_config(dist_block, dims)
            except (MechlabError, KeyError, TypeError, ValueError) as exc:
                diags.append(f"distribution: {exc}")

    mechs = mechanism_blocks(cfg)
    if not mechs:
        diags.append("mechanisms: at least one mechanism must be defined")
    for name, block in mechs.items():
        if not isinstance(block, dict):
            diags.append(f"mechanisms.{name}: must be an object")
            continue
        if "weights" in block:
            try:
                w = np.asarray(block["weights"], dtype=float)
                if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
                    diags.append(f"mechanisms.{name}.weights: weights must sum to 1 (got {w.sum():.6g})")
                if np.any(w < 0):
                    diags.append(f"mechanisms.{name}.weights: weights must be nonnegative")
            except (TypeError, ValueError):
                diags.append(f"mechanisms.{name}.weights: must be a list of numbers")
                continue
        try:
            mechanism_from_config(block, dims.n_agents if dims else None)
        except MechlabError as exc:
            if "weights must" not in str(exc):
                diags.append(f"mechanisms.{name}: {exc}")

    seed = cfg.get("seed", {"master_seed": 0})
    try:
        SeedSpec(**seed) if isinstance(seed, dict) else SeedSpec(seed)
    except (MechlabError, TypeError) as exc:
        diags.append(f"seed: {exc}")
    if "samples" in cfg and not _is_count(cfg["samples"]):
        diags.append("samples: must be a positive integer")

    jobs = cfg.get("jobs")
    if not isinstance(jobs, list) or not jobs:
        diags.append("jobs: at least one job is required")
        jobs = []
    m = dims.n_alternatives if dims else None
    n = dims.n_agents if dims else None
    for k, job in enumerate(jobs):
        where = f"jobs[{k}]"
        if not isinstance(job, dict):
            diags.append(f"{where}: must be an object")
            continue
        jt = job.get("type")
        if jt not in JOB_TYPES:
            diags.append(f"{where}.type: must be one of {', '.join(JOB_TYPES)}")
            continue
        if "samples" in job and not _is_count(job["samples"]):
            diags.append(f"{where}.samples: must be a positive integer")
        if jt in ("ex-ante", "interim", "audit", "oracle-crosscheck"):
            ref = job.get("mechanism", "default" if len(mechs) == 1 and "default" in mechs else None)
            if ref not in mechs:
                diags.append(f"{where}.mechanism: undefined mechanism {ref!r}")
        if jt == "interim" and m is not None:
            _check_agent(diags, where, job.get("agent"), n)
            _check_type(diags, f"{where}.true_type", job.get("true_type"), m)
            _check_type(diags, f"{where}.report", job.get("report", job.get("true_type")), m)
        if jt == "audit":
            audit = job.get("audit")
            if not isinstance(audit, dict):
                diags.append(f"{where}.audit: missing block")
            elif m is not None:
                _check_agent(diags, f"{where}.audit", audit.get("agent"), n)
                _check_type(diags, f"{where}.audit.true_type", audit.get("true_type"), m)
                if audit.get("mode", "extremization") not in AUDIT_MODES:
                    diags.append(f"{where}.audit.mode: must be one of {', '.join(AUDIT_MODES)}")
                if "samples" in audit and not _is_count(audit["samples"]):
                    diags.append(f"{where}.audit.samples: must be a positive integer")
        if jt == "sweep":
            sweep = job.get("sweep")
            if not isinstance(sweep, dict) or not _is_count(sweep.get("resolution")):
                diags.append(f"{where}.sweep.resolution: must be a positive integer")
            elif "samples" in sweep and not _is_count(sweep["samples"]):
                diags.append(f"{where}.sweep.samples: must be a positive integer")
        if jt == "oracle-crosscheck" and dims is not None:
            block = job.get("finite_model")
            if block is None and (dist_block or {}).get("kind") != "finite-support":
                diags.append(f"{where}.finite_model: required unless the distribution is finite-support")
            elif block is not None:
                try:
                    FiniteSupport.from_config(block, dims)
                except (MechlabError, KeyError, TypeError, ValueError) as exc:
                    diags.append(f"{where}.finite_model: {exc}")
    return diags


def _check_agent(diags, where, agent, n):
    if not (isinstance(agent, int) and not isinstance(agent, bool) and 0 <= agent < n):
        diags.append(f"{where}.agent: must be an agent index in [0, {n})")


@dataclass
class Experiment:
    config: dict
    dims: ModelDims
    model: DistributionModel
    mechanisms: dict
    jobs: list
    seed: SeedSpec
    samples: int
    output_dir: Path
    hash: str

    def mechanism(self, job: dict) -> SocialChoiceFunction:
        return self.mechanisms[job.get("mechanism", "default")]

    def job_samples(self, job: dict, *blocks) -> int:
        for block in (*blocks, job):
            if isinstance(block, dict) and "samples" in block:
                return int(block["samples"])
        return self.samples


def build_experiment(cfg: dict) -> Experiment:
    diags = validate_config(cfg)
    if diags:
        raise ConfigError(diags)
    dims = ModelDims(cfg["dims"]["n_agents"], cfg["dims"]["n_alternatives"])
    seed = cfg.get("seed", {"master_seed": 0})
    seed = SeedSpec(**seed) if isinstance(seed, dict) else SeedSpec(seed)
    return Experiment(
        config=cfg,
        dims=dims,
        model=distribution_from_config(cfg["distribution"], dims),
        mechanisms={name: mechanism_from_config(b, dims.n_agents) for name, b in mechanism_blocks(cfg).items()},
        jobs=list(cfg["jobs"]),
        seed=seed,
        samples=int(cfg.get("samples", 100_000)),
        output_dir=Path(cfg.get("output_dir", "results")),
        hash=config_hash(cfg),
    )
