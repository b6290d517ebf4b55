"""Tracing the ex ante payoff frontier by sweeping utilitarian weights.

For every weight vector on a simplex grid the weighted utilitarian rule
maximizes the weighted sum of expected payoffs, so its payoff profile is a
frontier point.  Comparators are checked against those points by paired
welfare margins and by componentwise dominance.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from .core import DimensionError, ParameterError, WeightVector
from .distributions import DistributionModel
from .mechanisms import SocialChoiceFunction, WeightedUtilitarian
from .montecarlo import as_seed, run_chunked
from .payoff import EstimateWithCI, ex_ante_payoffs

__all__ = [
    "FrontierPoint", "Frontier", "ScalarizationResult", "simplex_grid", "sweep_simplex",
    "scalarization_check", "dominance_test", "DOMINATED", "NOT_DOMINATED",
]

DOMINATED = "dominated"
NOT_DOMINATED = "not-dominated-by-frontier"
MAX_GRID_POINTS = 10_000
_GRID_STREAM_STRIDE = 1 << 32


@dataclass(frozen=True)
class FrontierPoint:
    weights: tuple
    payoffs: tuple

    @property
    def means(self) -> np.ndarray:
        return np.array([p.mean for p in self.payoffs])

    @property
    def std_errors(self) -> np.ndarray:
        return np.array([p.std_error for p in self.payoffs])


@dataclass(frozen=True)
class Frontier:
    points: tuple
    model: str
    n_samples: int

    def point(self, weights, atol: float = 1e-12) -> FrontierPoint:
        w = np.asarray(weights, dtype=float)
        for p in self.points:
            if np.allclose(p.weights, w, atol=atol, rtol=0):
                return p
        raise KeyError(f"no frontier point with weights {w.tolist()}")


def simplex_grid(n_agents: int, resolution: int) -> list[tuple]:
    """All weight vectors ``a / resolution`` with nonnegative integer ``a`` summing to ``resolution``."""
    if resolution < 1:
        raise ParameterError(f"resolution must be >= 1, got {resolution}")
    out = []
    # bars-and-stars enumeration, lexicographically descending in the first weight
    for bars in itertools.combinations(range(resolution + n_agents - 1), n_agents - 1):
        edges = (-1,) + bars + (resolution + n_agents - 1,)
        counts = [edges[k + 1] - edges[k] - 1 for k in range(n_agents)]
        out.append(tuple(c / resolution for c in counts))
    return out[::-1]


def sweep_simplex(model: DistributionModel, resolution: int, seed, n_samples: int,
                  max_points: int = MAX_GRID_POINTS, threads: int | None = None) -> Frontier:
    """Ex ante payoffs of the weighted utilitarian rule at every grid weight.

    Grid point ``g`` samples from seed stream ``stream_id + g * 2**32``.
    """
    n = model.dims.n_agents
    size = comb(resolution + n - 1, n - 1) if resolution >= 1 else 0
    if size > max_points:
        raise ParameterError(f"simplex grid has {size} points, cap is {max_points}")
    seed = as_seed(seed)
    points = []
    for g, w in enumerate(simplex_grid(n, resolution)):
        est = ex_ante_payoffs(WeightedUtilitarian(w), model, seed.derive(g * _GRID_STREAM_STRIDE),
                              n_samples, threads)
        points.append(FrontierPoint(w, tuple(est)))
    return Frontier(tuple(points), repr(model), n_samples)


@dataclass(frozen=True)
class ScalarizationResult:
    weights: tuple
    margin: EstimateWithCI
    ok: bool


def scalarization_check(frontier: Frontier, candidate: SocialChoiceFunction, model: DistributionModel,
                        seed, n_samples: int, slack: float = 3.0,
                        threads: int | None = None) -> list[ScalarizationResult]:
    """Weighted welfare margin of each frontier rule over ``candidate``.

    The margin ``w . payoff(f_w) - w . payoff(candidate)`` is estimated from
    per-draw differences on common profiles; it must not fall below
    ``-slack`` standard errors.
    """
    seed = as_seed(seed)
    results = []
    for g, point in enumerate(frontier.points):
        w = WeightVector(point.weights).weights
        if w.size != model.dims.n_agents:
            raise DimensionError("frontier and model disagree on the number of agents")
        rule = WeightedUtilitarian(point.weights)

        def kernel(rng, size, w=w, rule=rule):
            X = model._sample(rng, size)
            welfare = np.einsum("i,nix->nx", w, X)
            diff = rule.predict_proba(X) - candidate.predict_proba(X)
            return np.einsum("nx,nx->n", welfare, diff)

        mom = run_chunked(kernel, n_samples, seed.derive(g * _GRID_STREAM_STRIDE), threads)
        margin = EstimateWithCI(float(mom.mean[0]), float(mom.std_error[0]), mom.n)
        results.append(ScalarizationResult(point.weights, margin,
                                           margin.mean >= -slack * margin.std_error))
    return results


def _as_estimates(payoffs) -> list[EstimateWithCI]:
    return [p if isinstance(p, EstimateWithCI) else EstimateWithCI(float(p), 0.0, 1) for p in payoffs]


def dominance_test(payoffs, frontier: Frontier, slack: float = 3.0) -> tuple[str, tuple | None]:
    """Whether some frontier point Pareto-dominates ``payoffs``.

    A point dominates when it is at least as good in every coordinate up to
    ``slack`` combined standard errors and better by more than ``slack``
    combined standard errors in some coordinate.  Returns the verdict and the
    weights of the first dominating point.
    """
    g = _as_estimates(payoffs)
    g_mean = np.array([e.mean for e in g])
    g_se = np.array([e.std_error for e in g])
    for point in frontier.points:
        if len(point.payoffs) != g_mean.size:
            raise DimensionError("payoff profile and frontier have different numbers of agents")
        tol = slack * np.sqrt(point.std_errors**2 + g_se**2)
        diff = point.means - g_mean
        if np.all(diff >= -tol) and np.any(diff > tol):
            return DOMINATED, point.weights
    return NOT_DOMINATED, None
