"""Exact payoffs on finite-support models by enumerating atoms.

Serves as the brute-force reference for the Monte Carlo estimators.  Finite
models have atoms, so ties between alternatives can carry positive
probability; every result is flagged accordingly.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import DomainError, ParameterError, check_type_vector
from .distributions import FiniteSupport
from .mechanisms import SocialChoiceFunction
from .payoff import InterimQuery

__all__ = ["FiniteModel", "ExactResult", "exact_ex_ante", "exact_interim",
           "exact_best_response", "load_finite_model"]

FiniteModel = FiniteSupport


@dataclass(frozen=True)
class ExactResult:
    value: float
    derivation: dict = field(default_factory=dict)
    assumption_1_violated: bool = True

    def __float__(self):
        return self.value


def load_finite_model(path_or_block) -> FiniteModel:
    """Read ``{"atoms": [{"profile": [[...], ...], "prob": p}, ...]}``."""
    if isinstance(path_or_block, dict):
        block = path_or_block
    else:
        with open(path_or_block) as fh:
            block = json.load(fh)
    if not block.get("atoms"):
        raise ParameterError("finite model has no atoms")
    return FiniteSupport.from_config(block)


def exact_ex_ante(mechanism: SocialChoiceFunction, fm: FiniteModel) -> list[ExactResult]:
    lotteries = mechanism.predict_proba(fm.atoms)
    payoffs = np.einsum("kix,kx->ki", fm.atoms, lotteries)
    trace = {"atoms": int(fm.atoms.shape[0])}
    return [ExactResult(math.fsum(fm.probs * payoffs[:, i]), trace)
            for i in range(fm.dims.n_agents)]


def exact_interim(mechanism: SocialChoiceFunction, fm: FiniteModel, query: InterimQuery) -> ExactResult:
    i = query.agent
    u = check_type_vector(query.true_type, fm.dims.n_alternatives)
    hits = fm.matching_atoms(i, u)
    if hits.size == 0:
        raise DomainError(f"no atom gives agent {i} the type {list(query.true_type)}")
    cond = fm.probs[hits] / math.fsum(fm.probs[hits])
    profiles = fm.atoms[hits].copy()
    profiles[:, i, :] = query.reported_type
    payoffs = mechanism.predict_proba(profiles) @ u
    return ExactResult(math.fsum(cond * payoffs),
                       {"atoms": int(fm.atoms.shape[0]), "conditioning_set": int(hits.size)})


def exact_best_response(mechanism: SocialChoiceFunction, fm: FiniteModel, agent: int, true_type,
                        candidates) -> tuple[tuple, float]:
    """Best report among ``candidates`` and its exact gain over truth-telling.

    Ties go to the truthful report, then to the earlier candidate.
    """
    truth = tuple(check_type_vector(true_type, fm.dims.n_alternatives).tolist())
    candidates = [tuple(float(x) for x in c) for c in candidates]
    if truth not in candidates:
        raise ParameterError("candidate set must include the truthful report")
    values = {c: exact_interim(mechanism, fm, InterimQuery(agent, truth, c)).value for c in candidates}
    best = truth
    for c in candidates:
        if values[c] > values[best]:
            best = c
    return best, values[best] - values[truth]
