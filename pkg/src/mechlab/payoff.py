"""Monte Carlo estimators of ex ante payoffs, interim payoffs and interim
choice probabilities.

The mechanism's own randomization is integrated out exactly: every draw
contributes the full output lottery, never a sampled alternative.  Comparisons
between reports are paired on common random numbers, i.e. the same
conditional draws of the other agents' types serve every report.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .core import DimensionError, check_type_vector
from .distributions import DistributionModel
from .mechanisms import SocialChoiceFunction
from .montecarlo import Moments, as_seed, run_chunked

__all__ = [
    "EstimateWithCI", "InterimQuery", "PairedInterim", "ex_ante_payoffs",
    "interim_choice_probabilities", "interim_payoff", "paired_deviation_gain",
    "paired_interim", "one_sided_p_value",
]


@dataclass(frozen=True)
class EstimateWithCI:
    """Monte Carlo mean with its standard error (sample sd / sqrt(n))."""

    mean: float
    std_error: float
    n_samples: int

    def interval(self, z: float = 1.96) -> tuple[float, float]:
        return (self.mean - z * self.std_error, self.mean + z * self.std_error)

    def __float__(self):
        return float(self.mean)


def _estimates(mom: Moments, cols=None) -> list[EstimateWithCI]:
    mean, se = mom.mean, mom.std_error
    idx = range(mean.size) if cols is None else cols
    return [EstimateWithCI(float(mean[k]), float(se[k]), mom.n) for k in idx]


def one_sided_p_value(est: EstimateWithCI) -> float:
    """p-value of the normal test of ``mean <= 0`` against ``mean > 0``."""
    if est.std_error == 0.0:
        return 0.0 if est.mean > 0.0 else 1.0
    return float(norm.sf(est.mean / est.std_error))


@dataclass(frozen=True)
class InterimQuery:
    agent: int
    true_type: tuple
    reported_type: tuple

    def __post_init__(self):
        u = check_type_vector(self.true_type)
        v = check_type_vector(self.reported_type, u.size)
        object.__setattr__(self, "true_type", tuple(u.tolist()))
        object.__setattr__(self, "reported_type", tuple(v.tolist()))

    @classmethod
    def truthful(cls, agent: int, true_type) -> "InterimQuery":
        return cls(agent, true_type, true_type)


def ex_ante_payoffs(mechanism: SocialChoiceFunction, model: DistributionModel, seed,
                    n_samples: int, threads: int | None = None) -> list[EstimateWithCI]:
    """Estimates of every agent's expected payoff ``E[U_i(f(U))]``."""
    def kernel(rng, size):
        X = model._sample(rng, size)
        return np.einsum("nix,nx->ni", X, mechanism.predict_proba(X))

    return _estimates(run_chunked(kernel, n_samples, as_seed(seed), threads))


@dataclass(frozen=True)
class PairedInterim:
    """Interim quantities for several reports evaluated on the same draws.

    ``payoffs[k]`` and ``probabilities[k]`` belong to ``reports[k]``;
    ``gains[k]`` is the paired estimate of ``payoffs[k] - payoffs[0]``.
    """

    agent: int
    true_type: tuple
    reports: tuple
    payoffs: tuple
    probabilities: tuple
    gains: tuple
    assumption_1_violated: bool


def _report_matrix(true_type: np.ndarray, reports) -> np.ndarray:
    V = np.asarray([check_type_vector(v) for v in reports], dtype=float)
    if V.ndim != 2 or V.shape[1] != true_type.size:
        raise DimensionError("reports must be type vectors of the same length as the true type")
    return V


def paired_interim(mechanism: SocialChoiceFunction, model: DistributionModel, agent: int,
                   true_type, reports, seed, n_samples: int,
                   threads: int | None = None) -> PairedInterim:
    """Interim payoffs and choice probabilities of ``reports`` for an agent whose
    true type is ``true_type``, all on common draws of the others' types."""
    u = model.check_own_type(agent, true_type)
    V = _report_matrix(u, reports)
    k, m = V.shape

    def kernel(rng, size):
        X = model.conditional_profiles(agent, u, rng, size)
        cols = []
        pays = []
        for v in V:
            X[:, agent, :] = v
            L = mechanism.predict_proba(X)
            cols.append(L)
            pays.append(L @ u)
        pays = np.column_stack(pays)
        return np.hstack(cols + [pays, pays[:, 1:] - pays[:, :1]])

    mom = run_chunked(kernel, n_samples, as_seed(seed), threads)
    est = _estimates(mom)
    probs = tuple(tuple(est[r * m:(r + 1) * m]) for r in range(k))
    payoffs = tuple(est[k * m:k * m + k])
    zero = EstimateWithCI(0.0, 0.0, n_samples)
    gains = (zero,) + tuple(est[k * m + k:])
    return PairedInterim(agent, tuple(u.tolist()), tuple(map(tuple, V.tolist())), payoffs,
                         probs, gains, not model.satisfies_full_support)


def interim_choice_probabilities(mechanism, model, query: InterimQuery, seed, n_samples: int,
                                 threads: int | None = None) -> list[EstimateWithCI]:
    """Estimates of ``P(f selects x | U_i = u_i)`` when agent ``i`` reports ``v_i``."""
    res = paired_interim(mechanism, model, query.agent, query.true_type, [query.reported_type],
                         seed, n_samples, threads)
    return list(res.probabilities[0])


def interim_payoff(mechanism, model, query: InterimQuery, seed, n_samples: int,
                   threads: int | None = None) -> EstimateWithCI:
    """Estimate of the interim payoff, evaluated with the true type."""
    res = paired_interim(mechanism, model, query.agent, query.true_type, [query.reported_type],
                         seed, n_samples, threads)
    return res.payoffs[0]


def paired_deviation_gain(mechanism, model, agent: int, true_type, report, seed, n_samples: int,
                          threads: int | None = None) -> EstimateWithCI:
    """Common-random-numbers estimate of the interim gain from reporting ``report``."""
    res = paired_interim(mechanism, model, agent, true_type, [true_type, report],
                         seed, n_samples, threads)
    return res.gains[1]
