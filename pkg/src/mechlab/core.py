"""Primitive objects of the cardinal social choice model.

Profiles are numpy arrays of shape ``(n_agents, n_alternatives)``: row ``i``
is agent ``i``'s type, i.e. its payoff for every alternative.  Batches of
profiles carry a leading sample axis, ``(n_samples, n_agents, n_alternatives)``.
Agents and alternatives are 0-based indices everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOTTERY_ATOL = 1e-12


class MechlabError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(MechlabError, ValueError):
    pass


class ParameterError(MechlabError, ValueError):
    pass


class DomainError(MechlabError, ValueError):
    """Raised when an input lies outside the domain an operation is defined on."""


class PreconditionError(MechlabError, ValueError):
    pass


class UnsupportedOperationError(MechlabError, NotImplementedError):
    pass


@dataclass(frozen=True)
class ModelDims:
    n_agents: int
    n_alternatives: int

    def __post_init__(self):
        for name in ("n_agents", "n_alternatives"):
            value = getattr(self, name)
            if int(value) != value or value < 2:
                raise ParameterError(f"{name} must be an integer >= 2, got {value!r}")
            object.__setattr__(self, name, int(value))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_agents, self.n_alternatives)

    @property
    def n_coordinates(self) -> int:
        return self.n_agents * self.n_alternatives


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


def check_type_vector(u, n_alternatives: int | None = None) -> np.ndarray:
    """Validate one agent's payoff vector and return it as a float array."""
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or u.size == 0:
        raise DimensionError(f"type vector must be 1-D and nonempty, got shape {u.shape}")
    if n_alternatives is not None and u.size != n_alternatives:
        raise DimensionError(f"type vector has {u.size} entries, expected {n_alternatives}")
    if not np.all(np.isfinite(u)) or np.any(u < 0.0) or np.any(u > 1.0):
        raise DomainError("type vector entries must lie in [0, 1]")
    return u


def _is_flat_batch(shape, n_agents, n_alternatives) -> bool:
    rows, cols = shape
    if n_alternatives is not None:
        return cols == n_agents * n_alternatives and cols != n_alternatives
    return rows != n_agents and cols % n_agents == 0


def check_profiles(X, n_agents: int | None = None, n_alternatives: int | None = None) -> np.ndarray:
    """Validate a profile or batch of profiles, returning a 3-D float array.

    Accepts a single profile ``(n, m)``, a batch ``(N, n, m)``, or, when
    ``n_agents`` is known, a flattened agent-major batch ``(N, n * m)`` as
    produced by tabular tooling.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        if n_agents is not None and _is_flat_batch(X.shape, n_agents, n_alternatives):
            X = X.reshape(X.shape[0], n_agents, -1)
        else:
            X = X[np.newaxis]
    if X.ndim != 3:
        raise DimensionError(f"profiles must be 2-D or 3-D, got shape {X.shape}")
    if n_agents is not None and X.shape[1] != n_agents:
        raise DimensionError(f"profiles have {X.shape[1]} agents, expected {n_agents}")
    if n_alternatives is not None and X.shape[2] != n_alternatives:
        raise DimensionError(f"profiles have {X.shape[2]} alternatives, expected {n_alternatives}")
    if X.shape[1] < 1 or X.shape[2] < 1:
        raise DimensionError("profiles must have at least one agent and one alternative")
    if not np.all(np.isfinite(X)) or np.any(X < 0.0) or np.any(X > 1.0):
        raise DomainError("profile entries must lie in [0, 1]")
    return X


class Lottery:
    """A probability distribution over alternatives (an element of the simplex)."""

    __slots__ = ("_p",)

    def __init__(self, probabilities):
        p = np.asarray(probabilities, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise DimensionError(f"lottery must be 1-D and nonempty, got shape {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p < 0.0):
            raise ParameterError("lottery probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > LOTTERY_ATOL:
            raise ParameterError(f"lottery probabilities must sum to 1, got {p.sum()!r}")
        self._p = _readonly(p)

    @classmethod
    def degenerate(cls, index: int, n_alternatives: int) -> "Lottery":
        p = np.zeros(n_alternatives)
        p[index] = 1.0
        return cls(p)

    @property
    def probabilities(self) -> np.ndarray:
        return self._p

    def __len__(self):
        return self._p.size

    def __array__(self, dtype=None, copy=None):
        return self._p.astype(dtype) if dtype is not None else self._p.copy()

    def __eq__(self, other):
        if not isinstance(other, Lottery):
            return NotImplemented
        return np.array_equal(self._p, other._p)

    def __hash__(self):
        return hash(self._p.tobytes())

    def __repr__(self):
        return f"Lottery({self._p.tolist()})"

    def sample(self, rng: np.random.Generator) -> int:
        """Draw a realized alternative."""
        return int(rng.choice(self._p.size, p=self._p))


class WeightVector:
    """Nonnegative agent weights, normalized to sum to one on construction."""

    __slots__ = ("_w",)

    def __init__(self, weights):
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise DimensionError(f"weights must be 1-D and nonempty, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w < 0.0):
            raise ParameterError("weights must be nonnegative")
        total = w.sum()
        if total <= 0.0:
            raise ParameterError("weights must not all be zero")
        self._w = _readonly(w / total)

    @classmethod
    def unit(cls, agent: int, n_agents: int) -> "WeightVector":
        w = np.zeros(n_agents)
        w[agent] = 1.0
        return cls(w)

    @property
    def weights(self) -> np.ndarray:
        return self._w

    def __len__(self):
        return self._w.size

    def __getitem__(self, i):
        return self._w[i]

    def __array__(self, dtype=None, copy=None):
        return self._w.astype(dtype) if dtype is not None else self._w.copy()

    def __eq__(self, other):
        if not isinstance(other, WeightVector):
            return NotImplemented
        return np.array_equal(self._w, other._w)

    def __hash__(self):
        return hash(self._w.tobytes())

    def __repr__(self):
        return f"WeightVector({self._w.tolist()})"

    @property
    def dictator(self) -> int | None:
        """Index of the agent holding all the weight, if any."""
        hits = np.flatnonzero(self._w == 1.0)
        return int(hits[0]) if hits.size else None

    def others_to_own_ratio(self, agent: int) -> float:
        """Total weight of the other agents divided by ``agent``'s weight."""
        own = self._w[agent]
        if own <= 0.0:
            raise PreconditionError(f"agent {agent} has zero weight")
        return float(np.delete(self._w, agent).sum() / own)


def argmax_with_tiebreak(values) -> int:
    """Index of the maximum, ties going to the smallest index (exact comparison)."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise DimensionError("argmax_with_tiebreak needs a nonempty 1-D sequence")
    # np.argmax returns the first occurrence of the maximum.
    return int(np.argmax(values))


def expected_payoff_under_lottery(u, p) -> float:
    """Expected payoff ``sum_x u(x) p(x)`` of type ``u`` facing lottery ``p``."""
    u = np.asarray(u, dtype=float)
    p = p.probabilities if isinstance(p, Lottery) else np.asarray(p, dtype=float)
    if u.shape != p.shape or u.ndim != 1:
        raise DimensionError(f"type of shape {u.shape} does not match lottery of shape {p.shape}")
    return float(u @ p)
