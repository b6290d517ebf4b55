"""Numerical laboratory for cardinal social choice without transfers.

Weighted utilitarian rules, correlated type distributions, Monte Carlo
estimators of ex ante and interim payoffs, incentive audits and exact
enumeration on finite models.
"""
from .bic import (DeviationReport, ExtremizationCase, audit_extremization, check_condition_u,
                  event_E_decomposition, extremize, search_deviation)
from .core import (DimensionError, DomainError, Lottery, MechlabError, ModelDims, ParameterError,
                   PreconditionError, UnsupportedOperationError, WeightVector,
                   argmax_with_tiebreak, expected_payoff_under_lottery)
from .distributions import (FiniteMixture, FiniteSupport, GaussianCopula, IndependentMarginals,
                            MarginalSpec, VNMRestricted, cross_agent_correlation)
from .mechanisms import (Borda, Dictatorial, Plurality, RandomDictatorship, UniformRandom,
                         WeightedUtilitarian)
from .montecarlo import SeedSpec
from .payoff import (EstimateWithCI, InterimQuery, ex_ante_payoffs, interim_choice_probabilities,
                     interim_payoff, paired_deviation_gain)

__version__ = "0.1.0"
