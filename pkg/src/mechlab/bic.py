"""Auditing weighted utilitarian rules for profitable misreports.

The central deviation is *extremization*: an agent whose favourite
alternative ``b`` pays less than 1 reports ``b``'s payoff as exactly 1 and
everything else truthfully.  For a nondictatorial weighted utilitarian rule
and a type whose runner-up ``a`` is close enough to ``b`` (see
:func:`check_condition_u`), this strictly raises the agent's interim payoff.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import (ParameterError, PreconditionError, WeightVector, argmax_with_tiebreak,
                   check_type_vector)
from .distributions import DistributionModel
from .mechanisms import SocialChoiceFunction, WeightedUtilitarian
from .montecarlo import Moments, as_seed, map_chunks, run_chunked, run_chunked_moments
from .payoff import EstimateWithCI, one_sided_p_value, paired_interim

__all__ = [
    "SIGNIFICANCE", "VIOLATION", "NO_VIOLATION", "INCONCLUSIVE", "ExtremizationCase",
    "DeviationReport", "EventDecomposition", "check_condition_u", "extremize",
    "audit_extremization", "event_E_decomposition", "search_deviation", "selection_trace",
    "default_grid",
]

SIGNIFICANCE = 0.01
VIOLATION = "violation-certified"
NO_VIOLATION = "no-violation-detected"
INCONCLUSIVE = "inconclusive"
MAX_GRID_CANDIDATES = 729


@dataclass(frozen=True)
class ExtremizationCase:
    agent: int
    true_type: tuple
    best_alternative: int
    runner_up: int
    weight_bound: float

    @property
    def gap(self) -> float:
        return self.true_type[self.best_alternative] - self.true_type[self.runner_up]

    def truthful_margin(self, weights) -> float:
        """Weighted payoff difference ``w_i (u(a) - u(b))`` under a truthful report.

        It lies strictly inside ``(-W, W)`` where ``W`` is the other agents' total
        weight, so the others' reports can tip the comparison either way.
        """
        w = WeightVector(weights)
        return float(w[self.agent] * (self.true_type[self.runner_up] - self.true_type[self.best_alternative]))


@dataclass(frozen=True)
class DeviationReport:
    truthful_payoff: EstimateWithCI
    deviant_payoff: EstimateWithCI
    paired_gain: EstimateWithCI
    p_value: float
    verdict: str
    deviation_used: tuple
    significance: float = SIGNIFICANCE
    assumption_1_violated: bool = False
    runner_up_probability: tuple | None = None
    n_candidates: int = 1


def check_condition_u(weights, agent: int, true_type) -> ExtremizationCase | None:
    """Return the extremization case for ``true_type`` if the runner-up gap qualifies.

    Requires ``max u < 1`` and some ``a != b`` with
    ``0 < u(b) - u(a) < (sum of other weights) / own weight``.  Among
    qualifying alternatives the one with the smallest gap is used.
    """
    w = WeightVector(weights)
    if w[agent] <= 0.0:
        raise PreconditionError(f"agent {agent} must have positive weight")
    u = check_type_vector(true_type)
    bound = w.others_to_own_ratio(agent)
    b = argmax_with_tiebreak(u)
    if u[b] >= 1.0:
        return None
    gaps = u[b] - u
    ok = (gaps > 0.0) & (gaps < bound)
    ok[b] = False
    if not ok.any():
        return None
    candidates = np.flatnonzero(ok)
    a = int(candidates[np.argmax(u[candidates])])
    return ExtremizationCase(agent, tuple(u.tolist()), b, a, bound)


def extremize(true_type, best: int) -> np.ndarray:
    u = check_type_vector(true_type)
    if u[best] != u.max():
        raise PreconditionError(f"alternative {best} is not the agent's favourite")
    if u[best] >= 1.0:
        raise PreconditionError("the favourite alternative already pays 1")
    v = u.copy()
    v[best] = 1.0
    return v


def _verdict(gain: EstimateWithCI, p_value: float, significance: float) -> str:
    if p_value < significance and gain.mean > 0.0:
        return VIOLATION
    if gain.mean <= 0.0:
        return NO_VIOLATION
    return INCONCLUSIVE


def _sample_levels(n_samples: int, escalate: bool, max_samples: int) -> list[int]:
    if not escalate:
        return [n_samples]
    levels = [n_samples]
    while levels[-1] * 10 <= max_samples:
        levels.append(levels[-1] * 10)
    return levels


def _check_case(weights, case: ExtremizationCase) -> None:
    w = WeightVector(weights)
    u = np.asarray(case.true_type, dtype=float)
    a, b = case.runner_up, case.best_alternative
    bound = w.others_to_own_ratio(case.agent)
    if not (a != b and u[b] == u.max() and u[b] < 1.0 and 0.0 < u[b] - u[a] < bound):
        raise PreconditionError("extremization case does not satisfy the runner-up condition for these weights")


def audit_extremization(weights, model: DistributionModel, case: ExtremizationCase, seed,
                        n_samples: int = 100_000, significance: float = SIGNIFICANCE,
                        escalate: bool = True, max_samples: int = 10_000_000,
                        threads: int | None = None) -> DeviationReport:
    """Test whether extremizing ``case.true_type`` is profitable under the
    ``weights``-weighted utilitarian rule.

    An insignificant positive gain triggers a tenfold larger sample, up to
    ``max_samples``, before the verdict becomes inconclusive.
    """
    _check_case(weights, case)
    rule = WeightedUtilitarian(tuple(WeightVector(weights).weights.tolist()))
    report = extremize(case.true_type, case.best_alternative)
    levels = _sample_levels(n_samples, escalate, max_samples)
    for n in levels:
        res = paired_interim(rule, model, case.agent, case.true_type, [case.true_type, report],
                             seed, n, threads)
        gain = res.gains[1]
        p = one_sided_p_value(gain)
        verdict = _verdict(gain, p, significance)
        if verdict != INCONCLUSIVE:
            break
    a = case.runner_up
    return DeviationReport(res.payoffs[0], res.payoffs[1], gain, p, verdict, tuple(report.tolist()),
                           significance, res.assumption_1_violated,
                           (res.probabilities[0][a], res.probabilities[1][a]))


@dataclass(frozen=True)
class EventDecomposition:
    """``f(a | report) = P(S(a) > S(b) | E) * P(E)``, estimated on common draws.

    ``E`` is the event that ``a``'s weighted score beats every alternative
    other than ``a`` and ``b``.
    """

    event: EstimateWithCI
    a_beats_b_given_event: EstimateWithCI | None
    direct: EstimateWithCI
    inconclusive: bool

    @property
    def product(self) -> float:
        if self.a_beats_b_given_event is None:
            return 0.0
        return self.event.mean * self.a_beats_b_given_event.mean


def event_E_decomposition(weights, model: DistributionModel, case: ExtremizationCase,
                          reported_best: float, seed, n_samples: int,
                          threads: int | None = None) -> EventDecomposition:
    w = WeightVector(weights).weights
    a, b, i = case.runner_up, case.best_alternative, case.agent
    u = np.asarray(case.true_type)
    v = u.copy()
    v[b] = reported_best
    v = check_type_vector(v)
    m = u.size
    rest = [x for x in range(m) if x not in (a, b)]

    def kernel(rng, size):
        X = model.conditional_profiles(i, u, rng, size)
        X[:, i, :] = v
        S = np.einsum("i,nix->nx", w, X)
        if rest:
            in_e = np.all(S[:, [a]] > S[:, rest], axis=1)
        else:
            in_e = np.ones(size, dtype=bool)
        beats = in_e & (S[:, a] > S[:, b])
        chosen = np.argmax(S, axis=1) == a
        return np.column_stack([in_e, beats, chosen]).astype(float)

    mom = run_chunked(kernel, n_samples, as_seed(seed), threads)
    n = mom.n
    p_e = EstimateWithCI(float(mom.mean[0]), float(mom.std_error[0]), n)
    direct = EstimateWithCI(float(mom.mean[2]), float(mom.std_error[2]), n)
    n_e = int(round(mom.total[0]))
    if n_e == 0:
        return EventDecomposition(p_e, None, direct, True)
    q = float(mom.total[1] / mom.total[0])
    cond = EstimateWithCI(q, float(np.sqrt(q * (1 - q) / n_e)), n_e)
    return EventDecomposition(p_e, cond, direct, False)


def default_grid(n_alternatives: int, values=(0.0, 0.5, 1.0)) -> list[tuple]:
    return list(itertools.product(values, repeat=n_alternatives))


def search_deviation(mechanism: SocialChoiceFunction, model: DistributionModel, agent: int,
                     true_type, seed, n_samples: int = 100_000, grid_values=(0.0, 0.5, 1.0),
                     significance: float = SIGNIFICANCE, max_candidates: int = MAX_GRID_CANDIDATES,
                     threads: int | None = None) -> DeviationReport:
    """Grid search for the most profitable misreport.

    Candidates are all reports with coordinates in ``grid_values``, plus the
    extremization when ``mechanism`` is weighted utilitarian and the runner-up
    condition holds.  All candidates share one set of conditional draws.
    p-values are Bonferroni-adjusted for the number of candidates.
    """
    u = model.check_own_type(agent, true_type)
    m = u.size
    if len(grid_values) == 0:
        raise ParameterError("deviation grid is empty")
    n_grid = len(grid_values) ** m
    if n_grid > max_candidates:
        raise ParameterError(f"deviation grid has {n_grid} candidates, cap is {max_candidates}")
    candidates = [tuple(float(x) for x in c) for c in itertools.product(grid_values, repeat=m)]
    if isinstance(mechanism, WeightedUtilitarian) and mechanism.weights_[agent] > 0:
        case = check_condition_u(mechanism.weights_, agent, u)
        if case is not None:
            candidates.append(tuple(extremize(u, case.best_alternative).tolist()))
    truth = tuple(u.tolist())
    candidates = [truth] + list(dict.fromkeys(c for c in candidates if c != truth))
    V = np.asarray(candidates)
    k = V.shape[0]

    def kernel(rng, size):
        X = model.conditional_profiles(agent, u, rng, size)
        pays = np.empty((size, k))
        for r, v in enumerate(V):
            X[:, agent, :] = v
            pays[:, r] = mechanism.predict_proba(X) @ u
        return Moments.from_samples(np.hstack([pays, pays[:, 1:] - pays[:, :1]]))

    mom = run_chunked_moments(kernel, n_samples, as_seed(seed), threads)
    mean, se = mom.mean, mom.std_error
    n_dev = k - 1
    if n_dev == 0:
        zero = EstimateWithCI(0.0, 0.0, mom.n)
        pay = EstimateWithCI(float(mean[0]), float(se[0]), mom.n)
        return DeviationReport(pay, pay, zero, 1.0, NO_VIOLATION, truth, significance,
                               not model.satisfies_full_support, None, 0)
    gains = [EstimateWithCI(float(mean[k + r]), float(se[k + r]), mom.n) for r in range(n_dev)]
    p_values = [min(1.0, one_sided_p_value(g) * n_dev) for g in gains]
    significant = [r for r in range(n_dev) if p_values[r] < significance and gains[r].mean > 0]
    pool = significant if significant else range(n_dev)
    best = max(pool, key=lambda r: (gains[r].mean, -r))
    verdict = VIOLATION if significant else NO_VIOLATION
    return DeviationReport(
        EstimateWithCI(float(mean[0]), float(se[0]), mom.n),
        EstimateWithCI(float(mean[best + 1]), float(se[best + 1]), mom.n),
        gains[best], p_values[best], verdict, candidates[best + 1], significance,
        not model.satisfies_full_support, None, n_dev)


def selection_trace(weights, model: DistributionModel, agent: int, true_type, best: int,
                    reported_levels, seed, n_samples: int,
                    threads: int | None = None) -> np.ndarray:
    """Selected alternative per draw for each reported payoff of ``best``.

    Returns an integer array ``(n_samples, len(reported_levels))``; every
    column uses the same conditional draws of the other agents.
    """
    rule = WeightedUtilitarian(tuple(WeightVector(weights).weights.tolist()))
    u = model.check_own_type(agent, true_type)
    levels = np.asarray(reported_levels, dtype=float)

    def kernel(rng, size):
        X = model.conditional_profiles(agent, u, rng, size)
        out = np.empty((size, levels.size), dtype=np.int64)
        for c, level in enumerate(levels):
            X[:, agent, best] = level
            out[:, c] = rule.predict(X)
        return out

    return np.concatenate(map_chunks(kernel, n_samples, as_seed(seed), threads), axis=0)
