"""Social choice functions as scikit-learn style estimators.

A mechanism maps a batch of reported profiles ``X`` of shape
``(n_samples, n_agents, n_alternatives)`` to lotteries over alternatives:
``predict_proba(X)`` returns shape ``(n_samples, n_alternatives)``.  Rules
have no learnable state, so they count as fitted from construction; ``fit``
only records the input dimensions, which lets flattened ``(n_samples,
n_agents * n_alternatives)`` tables be accepted afterwards.

Ties, wherever a rule takes an argmax, go to the smallest index.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .core import (DimensionError, Lottery, ParameterError, WeightVector,
                   check_profiles)

__all__ = [
    "SocialChoiceFunction", "WeightedUtilitarian", "Dictatorial", "RandomDictatorship",
    "UniformRandom", "Plurality", "Borda", "weighted_utilitarian_choose",
    "dictatorial_choose", "baseline_choose", "mechanism_from_config",
]


def _one_hot(index: np.ndarray, m: int) -> np.ndarray:
    out = np.zeros((index.size, m))
    out[np.arange(index.size), index] = 1.0
    return out


def _top_choices(X: np.ndarray) -> np.ndarray:
    """Each agent's favourite alternative, shape ``(N, n)``."""
    return np.argmax(X, axis=2)


class SocialChoiceFunction(BaseEstimator):
    """Base class: subclasses implement ``_lotteries`` on validated 3-D input."""

    def __sklearn_is_fitted__(self):
        return True

    @property
    def _n_agents_hint(self) -> int | None:
        return getattr(self, "n_agents_", None)

    def _validate(self, X) -> np.ndarray:
        return check_profiles(X, self._n_agents_hint, getattr(self, "n_alternatives_", None))

    def fit(self, X, y=None):
        X = self._validate(X)
        self.n_agents_, self.n_alternatives_ = X.shape[1], X.shape[2]
        self.n_features_in_ = X.shape[1] * X.shape[2]
        return self

    def predict_proba(self, X) -> np.ndarray:
        return self._lotteries(self._validate(X))

    def predict(self, X) -> np.ndarray:
        """Most likely alternative per profile (the chosen one for deterministic rules)."""
        return np.argmax(self.predict_proba(X), axis=1)

    def sample_alternatives(self, X, rng: np.random.Generator) -> np.ndarray:
        """Realized alternatives drawn from each profile's lottery."""
        p = self.predict_proba(X)
        cum = np.cumsum(p, axis=1)
        draws = rng.random(p.shape[0])[:, np.newaxis]
        return np.minimum((draws >= cum).sum(axis=1), p.shape[1] - 1)

    def evaluate(self, profile) -> Lottery:
        """Lottery for a single reported profile of shape ``(n, m)``."""
        profile = np.asarray(profile, dtype=float)
        if profile.ndim != 2:
            raise DimensionError(f"a single profile must be 2-D, got shape {profile.shape}")
        return Lottery(self._lotteries(check_profiles(profile[np.newaxis]))[0])

    def _lotteries(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def is_deterministic(self) -> bool:
        """Whether every output lottery is degenerate."""
        return True

    @property
    def descriptor(self) -> str:
        return repr(self)

    def to_config(self) -> dict:
        raise NotImplementedError


class WeightedUtilitarian(SocialChoiceFunction):
    """Choose the alternative with the largest weighted sum of reported payoffs."""

    def __init__(self, weights=(0.5, 0.5)):
        self.weights = weights
        WeightVector(weights)

    @property
    def weights_(self) -> np.ndarray:
        return WeightVector(self.weights).weights

    @property
    def weight_vector(self) -> WeightVector:
        return WeightVector(self.weights)

    @property
    def _n_agents_hint(self):
        return len(self.weights_)

    def scores(self, X) -> np.ndarray:
        """Weighted score of every alternative, shape ``(N, m)``."""
        X = self._validate(X)
        return np.einsum("i,nix->nx", self.weights_, X)

    def _lotteries(self, X):
        if X.shape[1] != len(self.weights_):
            raise DimensionError(f"rule has {len(self.weights_)} weights but profiles have {X.shape[1]} agents")
        s = np.einsum("i,nix->nx", self.weights_, X)
        return _one_hot(np.argmax(s, axis=1), X.shape[2])

    @property
    def is_dictatorial(self) -> bool:
        return self.weight_vector.dictator is not None

    @property
    def descriptor(self):
        return "weighted-utilitarian(" + ",".join(f"{w:.6g}" for w in self.weights_) + ")"

    def to_config(self):
        return {"kind": "weighted-utilitarian", "weights": [float(w) for w in self.weights_]}


class Dictatorial(SocialChoiceFunction):
    """Always pick the dictator's favourite alternative."""

    def __init__(self, dictator=0):
        if int(dictator) != dictator or dictator < 0:
            raise ParameterError(f"dictator must be a nonnegative agent index, got {dictator!r}")
        self.dictator = dictator

    def _lotteries(self, X):
        if self.dictator >= X.shape[1]:
            raise DimensionError(f"dictator {self.dictator} out of range for {X.shape[1]} agents")
        return _one_hot(np.argmax(X[:, self.dictator, :], axis=1), X.shape[2])

    @property
    def descriptor(self):
        return f"dictatorial({self.dictator})"

    def to_config(self):
        return {"kind": "dictatorial", "dictator": int(self.dictator)}


class RandomDictatorship(SocialChoiceFunction):
    """Agent ``i`` is the dictator with probability ``weights[i]``."""

    def __init__(self, weights=(0.5, 0.5)):
        self.weights = weights
        WeightVector(weights)

    @property
    def weights_(self):
        return WeightVector(self.weights).weights

    @property
    def _n_agents_hint(self):
        return len(self.weights_)

    @property
    def is_deterministic(self):
        return np.count_nonzero(self.weights_) == 1

    def _lotteries(self, X):
        w = self.weights_
        if X.shape[1] != w.size:
            raise DimensionError(f"rule has {w.size} weights but profiles have {X.shape[1]} agents")
        out = np.zeros((X.shape[0], X.shape[2]))
        top = _top_choices(X)
        rows = np.arange(X.shape[0])
        for i in range(w.size):
            np.add.at(out, (rows, top[:, i]), w[i])
        return out

    @property
    def descriptor(self):
        return "random-dictatorship(" + ",".join(f"{w:.6g}" for w in self.weights_) + ")"

    def to_config(self):
        return {"kind": "random-dictatorship", "weights": [float(w) for w in self.weights_]}


class UniformRandom(SocialChoiceFunction):
    """Ignore the reports; every alternative has probability ``1 / m``."""

    def _lotteries(self, X):
        return np.full((X.shape[0], X.shape[2]), 1.0 / X.shape[2])

    @property
    def is_deterministic(self):
        return False

    @property
    def descriptor(self):
        return "uniform-random"

    def to_config(self):
        return {"kind": "uniform-random"}


class Plurality(SocialChoiceFunction):
    """Each agent votes for its favourite; most votes wins."""

    def _lotteries(self, X):
        m = X.shape[2]
        counts = _one_hot(_top_choices(X).ravel(), m).reshape(X.shape[0], X.shape[1], m).sum(axis=1)
        return _one_hot(np.argmax(counts, axis=1), m)

    @property
    def descriptor(self):
        return "plurality"

    def to_config(self):
        return {"kind": "plurality"}


class Borda(SocialChoiceFunction):
    """Rank-based scores: ``m - 1`` for an agent's best alternative down to 0."""

    def _lotteries(self, X):
        m = X.shape[2]
        # stable sort on -u breaks ties within a ranking by smallest index
        order = np.argsort(-X, axis=2, kind="stable")
        points = np.empty_like(order, dtype=float)
        np.put_along_axis(points, order, np.arange(m - 1, -1, -1, dtype=float)[np.newaxis, np.newaxis, :], axis=2)
        return _one_hot(np.argmax(points.sum(axis=1), axis=1), m)

    @property
    def descriptor(self):
        return "borda"

    def to_config(self):
        return {"kind": "borda"}


def weighted_utilitarian_choose(weights, u) -> Lottery:
    return WeightedUtilitarian(np.asarray(weights, dtype=float)).evaluate(u)


def dictatorial_choose(dictator: int, u) -> Lottery:
    return Dictatorial(dictator).evaluate(u)


def baseline_choose(rule: SocialChoiceFunction, u) -> Lottery:
    if not isinstance(rule, (RandomDictatorship, UniformRandom, Plurality, Borda)):
        raise ParameterError(f"{rule!r} is not a baseline rule")
    return rule.evaluate(u)


def mechanism_from_config(block: dict, n_agents: int | None = None) -> SocialChoiceFunction:
    """Build a rule from a ``{"kind": ..., "weights": [...], "dictator": k}`` block."""
    kind = block.get("kind")
    if kind in ("weighted-utilitarian", "random-dictatorship"):
        if "weights" not in block:
            raise ParameterError(f"{kind} needs weights")
        weights = np.asarray(block["weights"], dtype=float)
        if n_agents is not None and weights.size != n_agents:
            raise DimensionError(f"{kind} has {weights.size} weights for {n_agents} agents")
        cls = WeightedUtilitarian if kind == "weighted-utilitarian" else RandomDictatorship
        return cls(tuple(weights.tolist()))
    if kind == "dictatorial":
        k = block.get("dictator", 0)
        if n_agents is not None and not 0 <= k < n_agents:
            raise DimensionError(f"dictator {k} out of range for {n_agents} agents")
        return Dictatorial(k)
    simple = {"uniform-random": UniformRandom, "plurality": Plurality, "borda": Borda}
    if kind in simple:
        return simple[kind]()
    raise ParameterError(f"unknown mechanism kind {kind!r}")
