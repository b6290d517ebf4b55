"""Joint laws of the type profile.

Continuous kinds (``independent-marginals``, ``gaussian-copula``,
``finite-mixture``) have a density that is strictly positive on the open cube,
so ties between alternatives have probability zero.  ``finite-support`` and
``vnm-restricted`` deliberately break that and report
``satisfies_full_support = False``.

Coordinates of the flattened profile are agent-major: coordinate ``i * m + x``
is agent ``i``'s payoff for alternative ``x``.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .core import (DimensionError, DomainError, ModelDims, ParameterError,
                   UnsupportedOperationError, check_profiles, check_type_vector)
from .montecarlo import SeedSpec, as_seed, map_chunks

__all__ = [
    "MarginalSpec", "DistributionModel", "IndependentMarginals", "GaussianCopula",
    "FiniteMixture", "FiniteSupport", "VNMRestricted", "SeedSpec",
    "cross_agent_correlation", "sample_profile", "density", "sample_conditional_others",
    "sample_vnm_profile", "distribution_from_config",
]

_TINY = 2.0**-60
_ONE_MINUS = np.nextafter(1.0, 0.0)
_SYM_TOL = 1e-10
_EIG_TOL = 1e-10


def _open_uniform(rng: np.random.Generator, shape) -> np.ndarray:
    q = rng.random(shape)
    q[q == 0.0] = _TINY
    return q


@dataclass(frozen=True)
class MarginalSpec:
    """A marginal law on [0, 1]: ``uniform`` or ``beta(a, b)``."""

    family: str = "uniform"
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.family not in ("uniform", "beta"):
            raise ParameterError(f"unknown marginal family {self.family!r}")
        if not (self.a > 0 and self.b > 0):
            raise ParameterError("beta shape parameters must be strictly positive")
        if self.family == "uniform" and (self.a, self.b) != (1.0, 1.0):
            raise ParameterError("uniform marginals take no shape parameters")

    @classmethod
    def from_config(cls, block) -> "MarginalSpec":
        if isinstance(block, str):
            return cls(block)
        family = block.get("family", "uniform")
        if family == "uniform":
            return cls("uniform")
        return cls(family, float(block.get("alpha", block.get("a"))), float(block.get("beta", block.get("b"))))

    def to_config(self) -> dict:
        if self.family == "uniform":
            return {"family": "uniform"}
        return {"family": "beta", "alpha": self.a, "beta": self.b}

    @property
    def _dist(self):
        return stats.beta(self.a, self.b)

    def ppf(self, q):
        if self.family == "uniform":
            return np.asarray(q, dtype=float)
        return np.clip(self._dist.ppf(q), _TINY, _ONE_MINUS)

    def cdf(self, x):
        if self.family == "uniform":
            return np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return self._dist.cdf(x)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "uniform":
            return np.where((x >= 0) & (x <= 1), 1.0, 0.0)
        return self._dist.pdf(x)

    @property
    def mean(self) -> float:
        return self.a / (self.a + self.b)

    @property
    def var(self) -> float:
        s = self.a + self.b
        return self.a * self.b / (s * s * (s + 1))


def _coerce_marginals(marginals, n_coords: int) -> tuple[MarginalSpec, ...]:
    if marginals is None:
        marginals = MarginalSpec()
    if isinstance(marginals, MarginalSpec):
        return (marginals,) * n_coords
    marginals = tuple(marginals)
    if len(marginals) != n_coords:
        raise DimensionError(f"expected 1 or {n_coords} marginal specs, got {len(marginals)}")
    return marginals


class DistributionModel(ABC):
    """Joint law of the type profile with sampling and conditional sampling."""

    kind: str = ""
    satisfies_full_support: bool = True

    def __init__(self, dims: ModelDims):
        self.dims = dims

    @abstractmethod
    def _sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` profiles, shape ``(size, n, m)``."""

    @abstractmethod
    def _conditional(self, agent: int, own: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Full profiles with row ``agent`` fixed to ``own`` (shape ``(size, m)``)
        and the other rows drawn from the conditional law."""

    def density(self, u) -> np.ndarray | float:
        raise UnsupportedOperationError(f"{self.kind} distributions have no Lebesgue density")

    @abstractmethod
    def to_config(self) -> dict:
        ...

    # public, chunked entry points

    def sample(self, seed, count: int, threads: int | None = None) -> np.ndarray:
        parts = map_chunks(self._sample, count, as_seed(seed), threads)
        return np.concatenate(parts, axis=0)

    def check_own_type(self, agent: int, own_type) -> np.ndarray:
        if not 0 <= agent < self.dims.n_agents:
            raise DimensionError(f"agent index {agent} out of range")
        return check_type_vector(own_type, self.dims.n_alternatives)

    def conditional_profiles(self, agent: int, own_type, rng: np.random.Generator, size: int) -> np.ndarray:
        """``size`` full profiles: row ``agent`` is ``own_type``, the rest conditional draws."""
        own = self.check_own_type(agent, own_type)
        return self._conditional(agent, np.broadcast_to(own, (size, own.size)).copy(), rng)

    def sample_conditional_others(self, agent: int, own_type, seed, count: int,
                                  threads: int | None = None) -> np.ndarray:
        own = self.check_own_type(agent, own_type)
        parts = map_chunks(lambda rng, size: self.conditional_profiles(agent, own, rng, size),
                           count, as_seed(seed), threads)
        return np.delete(np.concatenate(parts, axis=0), agent, axis=1)

    def __repr__(self):
        return f"{type(self).__name__}(n_agents={self.dims.n_agents}, n_alternatives={self.dims.n_alternatives})"


class IndependentMarginals(DistributionModel):
    """All ``n * m`` coordinates independent with the given marginals."""

    kind = "independent-marginals"

    def __init__(self, dims: ModelDims, marginals=None):
        super().__init__(dims)
        self.marginals = _coerce_marginals(marginals, dims.n_coordinates)
        self._shared = len(set(self.marginals)) == 1

    def _transform(self, q: np.ndarray) -> np.ndarray:
        flat = q.reshape(q.shape[0], -1)
        if self._shared:
            out = self.marginals[0].ppf(flat)
        else:
            out = np.column_stack([spec.ppf(flat[:, k]) for k, spec in enumerate(self.marginals)])
        return np.asarray(out, dtype=float).reshape(q.shape)

    def _sample(self, rng, size):
        return self._transform(_open_uniform(rng, (size, *self.dims.shape)))

    def _conditional(self, agent, own, rng):
        out = self._sample(rng, own.shape[0])
        out[:, agent, :] = own
        return out

    def _coord_pdf(self, flat: np.ndarray, coords) -> np.ndarray:
        return np.stack([self.marginals[k].pdf(flat[..., j]) for j, k in enumerate(coords)], axis=-1)

    def density(self, u):
        u = np.asarray(u, dtype=float)
        single = u.ndim == 2
        u = check_profiles(u, *self.dims.shape)
        flat = u.reshape(u.shape[0], -1)
        d = self._coord_pdf(flat, range(flat.shape[1])).prod(axis=-1)
        return float(d[0]) if single else d

    def agent_density(self, agent: int, own: np.ndarray) -> np.ndarray:
        """Marginal density of agent ``agent``'s type at each row of ``own``."""
        m = self.dims.n_alternatives
        coords = range(agent * m, (agent + 1) * m)
        return self._coord_pdf(np.atleast_2d(own), coords).prod(axis=-1)

    def to_config(self):
        marg = (self.marginals[0].to_config() if self._shared
                else [spec.to_config() for spec in self.marginals])
        return {"kind": self.kind, "marginals": marg}


def cross_agent_correlation(dims: ModelDims, rho: float) -> np.ndarray:
    """Correlation ``rho`` between different agents' payoffs for the same
    alternative, zero otherwise."""
    n, m = dims.shape
    same_alt = np.tile(np.eye(m), (n, n))
    corr = rho * same_alt
    np.fill_diagonal(corr, 1.0)
    return corr


class GaussianCopula(DistributionModel):
    """Gaussian copula over all ``n * m`` coordinates with arbitrary marginals.

    The correlation matrix may be singular (e.g. exact comonotone pairs) for
    sampling; the density is only defined for positive-definite matrices.
    Coordinates linked by correlation exactly 1 are sampled from one shared
    latent draw, so with equal marginals they coincide bit for bit.
    """

    kind = "gaussian-copula"

    def __init__(self, dims: ModelDims, correlation, marginals=None):
        super().__init__(dims)
        k = dims.n_coordinates
        corr = np.asarray(correlation, dtype=float)
        if corr.ndim == 1 and corr.size == k * k:
            corr = corr.reshape(k, k)
        if corr.shape != (k, k):
            raise DimensionError(f"correlation must be {k}x{k}, got shape {corr.shape}")
        if not np.all(np.isfinite(corr)):
            raise ParameterError("correlation matrix has non-finite entries")
        if np.max(np.abs(corr - corr.T)) > _SYM_TOL:
            raise ParameterError("correlation matrix is not symmetric")
        if np.any(np.diag(corr) != 1.0):
            raise ParameterError("correlation matrix must have unit diagonal")
        corr = (corr + corr.T) / 2
        eig = np.linalg.eigvalsh(corr)
        if eig[0] < -_EIG_TOL:
            raise ParameterError(f"correlation matrix is not positive semidefinite "
                                 f"(min eigenvalue {eig[0]:.6g})")
        self.correlation = corr
        self.correlation.flags.writeable = False
        self.marginals = _coerce_marginals(marginals, k)
        self.positive_definite = eig[0] > _EIG_TOL
        self._rep = self._comonotone_representatives(corr)
        reps = np.unique(self._rep)
        self._factor = _sqrt_psd(corr[np.ix_(reps, reps)])
        self._rep_pos = np.searchsorted(reps, self._rep)

    @staticmethod
    def _comonotone_representatives(corr: np.ndarray) -> np.ndarray:
        rep = np.arange(corr.shape[0])
        for k in range(corr.shape[0]):
            hits = np.flatnonzero(corr[k, :k] == 1.0)
            if hits.size:
                rep[k] = rep[hits[0]]
        return rep

    def _to_unit(self, z: np.ndarray, coords) -> np.ndarray:
        q = np.clip(special.ndtr(z), _TINY, _ONE_MINUS)
        return np.column_stack([self.marginals[c].ppf(q[:, j]) for j, c in enumerate(coords)])

    def _latent_to_profile(self, z: np.ndarray) -> np.ndarray:
        out = self._to_unit(z, range(z.shape[1]))
        return out.reshape(z.shape[0], *self.dims.shape)

    def _sample(self, rng, size):
        g = rng.standard_normal((size, self._factor.shape[0]))
        z = (g @ self._factor.T)[:, self._rep_pos]
        return self._latent_to_profile(z)

    def _own_latent(self, agent: int, own: np.ndarray) -> np.ndarray:
        m = self.dims.n_alternatives
        coords = range(agent * m, (agent + 1) * m)
        q = np.column_stack([self.marginals[c].cdf(own[:, j]) for j, c in enumerate(coords)])
        if np.any(q <= 0.0) or np.any(q >= 1.0):
            raise DomainError("conditioning on a boundary type is undefined under a Gaussian copula")
        return special.ndtri(q)

    def _conditional(self, agent, own, rng):
        n, m = self.dims.shape
        given = np.arange(agent * m, (agent + 1) * m)
        rest = np.setdiff1d(np.arange(n * m), given)
        r = self.correlation
        r_gg_inv = np.linalg.pinv(r[np.ix_(given, given)], hermitian=True)
        gain = r[np.ix_(rest, given)] @ r_gg_inv
        cov = r[np.ix_(rest, rest)] - gain @ r[np.ix_(given, rest)]
        z_given = self._own_latent(agent, own)
        g = rng.standard_normal((own.shape[0], rest.size))
        z_rest = z_given @ gain.T + g @ _sqrt_psd((cov + cov.T) / 2).T

        out = np.empty((own.shape[0], n * m))
        out[:, given] = own
        out[:, rest] = self._to_unit(z_rest, rest)
        # exact copies for coordinates comonotone with a conditioning coordinate
        for j, c in enumerate(rest):
            linked = given[self._rep[given] == self._rep[c]]
            if linked.size and self.marginals[linked[0]] == self.marginals[c]:
                out[:, c] = out[:, linked[0]]
        return out.reshape(own.shape[0], n, m)

    def _copula_log_density(self, z: np.ndarray, corr: np.ndarray) -> np.ndarray:
        sign, logdet = np.linalg.slogdet(corr)
        if sign <= 0 or np.linalg.eigvalsh(corr)[0] <= _EIG_TOL:
            raise DomainError("a singular correlation matrix has no density")
        prec = np.linalg.inv(corr) - np.eye(corr.shape[0])
        return -0.5 * np.einsum("ij,jk,ik->i", z, prec, z) - 0.5 * logdet

    def _block_density(self, flat: np.ndarray, coords) -> np.ndarray:
        coords = list(coords)
        q = np.column_stack([self.marginals[c].cdf(flat[:, j]) for j, c in enumerate(coords)])
        pdf = np.column_stack([self.marginals[c].pdf(flat[:, j]) for j, c in enumerate(coords)])
        with np.errstate(divide="ignore", invalid="ignore"):
            z = special.ndtri(q)
            log_c = self._copula_log_density(z, self.correlation[np.ix_(coords, coords)])
            d = np.exp(log_c) * pdf.prod(axis=1)
        interior = np.all((q > 0) & (q < 1), axis=1)
        return np.where(interior, d, 0.0)

    def density(self, u):
        u = np.asarray(u, dtype=float)
        single = u.ndim == 2
        u = check_profiles(u, *self.dims.shape)
        d = self._block_density(u.reshape(u.shape[0], -1), range(self.dims.n_coordinates))
        return float(d[0]) if single else d

    def agent_density(self, agent: int, own: np.ndarray) -> np.ndarray:
        m = self.dims.n_alternatives
        return self._block_density(np.atleast_2d(own), range(agent * m, (agent + 1) * m))

    def to_config(self):
        shared = len(set(self.marginals)) == 1
        return {"kind": self.kind,
                "marginals": (self.marginals[0].to_config() if shared
                              else [s.to_config() for s in self.marginals]),
                "correlation": self.correlation.tolist()}


def _sqrt_psd(a: np.ndarray) -> np.ndarray:
    """A matrix ``L`` with ``L @ L.T == a`` (Cholesky when possible)."""
    if a.size == 0:
        return a
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(a)
        w = np.where(w > 1e-12, w, 0.0)
        return v * np.sqrt(w)


class FiniteMixture(DistributionModel):
    """Mixture of continuous component models with fixed mixing weights."""

    kind = "finite-mixture"

    def __init__(self, dims: ModelDims, components):
        super().__init__(dims)
        components = list(components)
        if not components:
            raise ParameterError("a mixture needs at least one component")
        weights = np.array([w for w, _ in components], dtype=float)
        if np.any(weights <= 0):
            raise ParameterError("mixture weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ParameterError("mixture weights must sum to 1")
        self.weights = weights
        self.components = [c for _, c in components]
        for comp in self.components:
            if not isinstance(comp, (IndependentMarginals, GaussianCopula)):
                raise ParameterError("mixture components must be independent-marginals or gaussian-copula")
            if comp.dims != dims:
                raise DimensionError("mixture component dimensions do not match")

    def _sample(self, rng, size):
        labels = rng.choice(len(self.components), size=size, p=self.weights)
        out = np.empty((size, *self.dims.shape))
        for k, comp in enumerate(self.components):
            idx = np.flatnonzero(labels == k)
            if idx.size:
                out[idx] = comp._sample(rng, idx.size)
        return out

    def _posterior(self, agent: int, own: np.ndarray) -> np.ndarray:
        joint = np.column_stack([w * comp.agent_density(agent, own)
                                 for w, comp in zip(self.weights, self.components)])
        total = joint.sum(axis=1, keepdims=True)
        if np.any(total <= 0):
            raise DomainError("own type has zero density under every mixture component")
        return joint / total

    def posterior_weights(self, agent: int, own_type) -> np.ndarray:
        """Posterior component probabilities given agent ``agent``'s type."""
        own = self.check_own_type(agent, own_type)
        return self._posterior(agent, own[np.newaxis])[0]

    def _conditional(self, agent, own, rng):
        post = self._posterior(agent, own)
        cum = np.cumsum(post, axis=1)
        draws = rng.random(own.shape[0])[:, np.newaxis]
        labels = np.minimum((draws >= cum).sum(axis=1), len(self.components) - 1)
        out = np.empty((own.shape[0], *self.dims.shape))
        for k, comp in enumerate(self.components):
            idx = np.flatnonzero(labels == k)
            if idx.size:
                out[idx] = comp._conditional(agent, own[idx], rng)
        return out

    def density(self, u):
        parts = [w * np.asarray(comp.density(u)) for w, comp in zip(self.weights, self.components)]
        total = np.sum(parts, axis=0)
        return float(total) if np.ndim(total) == 0 else total

    def to_config(self):
        return {"kind": self.kind,
                "components": [{"weight": float(w), "distribution": c.to_config()}
                               for w, c in zip(self.weights, self.components)]}


class FiniteSupport(DistributionModel):
    """Finitely many profile atoms with positive probabilities.

    Conditioning on an agent's type matches atoms by exact equality of that
    agent's whole row.
    """

    kind = "finite-support"
    satisfies_full_support = False

    def __init__(self, atoms, probs, dims: ModelDims | None = None):
        atoms = np.asarray(atoms, dtype=float)
        if atoms.ndim != 3 or atoms.shape[0] == 0:
            raise ParameterError("finite support needs a nonempty (K, n, m) array of atoms")
        if dims is None:
            dims = ModelDims(atoms.shape[1], atoms.shape[2])
        super().__init__(dims)
        atoms = check_profiles(atoms, *dims.shape)
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (atoms.shape[0],):
            raise DimensionError("one probability per atom is required")
        if np.any(probs <= 0):
            raise ParameterError("atom probabilities must be positive")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ParameterError(f"atom probabilities must sum to 1, got {probs.sum()!r}")
        if np.unique(atoms.reshape(atoms.shape[0], -1), axis=0).shape[0] != atoms.shape[0]:
            raise ParameterError("atoms must be distinct")
        self.atoms = atoms
        self.probs = probs
        self.atoms.flags.writeable = False
        self.probs.flags.writeable = False

    @classmethod
    def from_weights(cls, atoms, weights, dims: ModelDims | None = None) -> "FiniteSupport":
        w = np.asarray(weights, dtype=float)
        return cls(atoms, w / w.sum(), dims)

    @classmethod
    def from_config(cls, block, dims: ModelDims | None = None) -> "FiniteSupport":
        atoms = block.get("atoms") or []
        return cls([a["profile"] for a in atoms], [a["prob"] for a in atoms], dims)

    def _sample(self, rng, size):
        return self.atoms[rng.choice(self.atoms.shape[0], size=size, p=self.probs)]

    def matching_atoms(self, agent: int, own_type) -> np.ndarray:
        """Indices of atoms whose row ``agent`` equals ``own_type`` exactly."""
        own = np.asarray(own_type, dtype=float)
        return np.flatnonzero(np.all(self.atoms[:, agent, :] == own, axis=1))

    def _conditional(self, agent, own, rng):
        out = np.empty((own.shape[0], *self.dims.shape))
        keys, inverse = np.unique(own, axis=0, return_inverse=True)
        draws = rng.random(own.shape[0])
        for k, key in enumerate(keys):
            hits = self.matching_atoms(agent, key)
            if hits.size == 0:
                raise DomainError(f"no atom gives agent {agent} the type {key.tolist()}")
            p = self.probs[hits] / self.probs[hits].sum()
            idx = np.flatnonzero(inverse.ravel() == k)
            pick = np.minimum(np.searchsorted(np.cumsum(p), draws[idx], side="right"), hits.size - 1)
            out[idx] = self.atoms[hits[pick]]
        out[:, agent, :] = own
        return out

    def to_config(self):
        return {"kind": self.kind,
                "atoms": [{"profile": a.tolist(), "prob": float(p)} for a, p in zip(self.atoms, self.probs)]}


class VNMRestricted(DistributionModel):
    """Types with one payoff exactly 1 and one exactly 0, agents independent.

    The (best, worst) pair is uniform over ordered pairs of distinct
    alternatives; the remaining ``m - 2`` payoffs are i.i.d. uniform on (0, 1).
    """

    kind = "vnm-restricted"
    satisfies_full_support = False

    def _sample(self, rng, size):
        n, m = self.dims.shape
        out = _open_uniform(rng, (size, n, m))
        best = rng.integers(m, size=(size, n))
        worst = (best + 1 + rng.integers(m - 1, size=(size, n))) % m
        s, i = np.indices((size, n))
        out[s, i, best] = 1.0
        out[s, i, worst] = 0.0
        return out

    def _conditional(self, agent, own, rng):
        out = self._sample(rng, own.shape[0])
        out[:, agent, :] = own
        return out

    def to_config(self):
        return {"kind": self.kind}


def sample_profile(model: DistributionModel, seed, count: int, threads: int | None = None) -> np.ndarray:
    """``count`` i.i.d. profiles, shape ``(count, n, m)``, reproducible from ``seed``."""
    return model.sample(seed, count, threads)


def density(model: DistributionModel, u) -> float:
    return model.density(u)


def sample_conditional_others(model: DistributionModel, agent: int, own_type, seed, count: int,
                              threads: int | None = None) -> np.ndarray:
    """Draws of the other agents' types given ``U_agent = own_type``.

    Returns shape ``(count, n - 1, m)``; the agent's own row is removed.
    """
    return model.sample_conditional_others(agent, own_type, seed, count, threads)


def sample_vnm_profile(dims: ModelDims, seed, count: int, threads: int | None = None) -> np.ndarray:
    return VNMRestricted(dims).sample(seed, count, threads)


def distribution_from_config(block: dict, dims: ModelDims) -> DistributionModel:
    """Build a model from the ``"distribution"`` block of an experiment config."""
    kind = block.get("kind")
    marg = block.get("marginals")
    if isinstance(marg, list):
        marginals = [MarginalSpec.from_config(b) for b in marg]
    elif marg is not None:
        marginals = MarginalSpec.from_config(marg)
    else:
        marginals = None
    if kind == "independent-marginals":
        return IndependentMarginals(dims, marginals)
    if kind == "gaussian-copula":
        if "correlation" not in block:
            raise ParameterError("gaussian-copula needs a correlation matrix")
        return GaussianCopula(dims, block["correlation"], marginals)
    if kind == "finite-mixture":
        comps = [(float(c["weight"]), distribution_from_config(c["distribution"], dims))
                 for c in block.get("components", [])]
        return FiniteMixture(dims, comps)
    if kind == "finite-support":
        return FiniteSupport.from_config(block, dims)
    if kind == "vnm-restricted":
        return VNMRestricted(dims)
    raise ParameterError(f"unknown distribution kind {kind!r}")
