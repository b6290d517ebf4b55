import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from conftest import assert_close
from mechlab import (Dictatorial, IndependentMarginals, ModelDims, ParameterError,
                     PreconditionError, UniformRandom, WeightedUtilitarian, WeightVector)
from mechlab.bic import (INCONCLUSIVE, NO_VIOLATION, VIOLATION, ExtremizationCase,
                         _sample_levels, _verdict, audit_extremization, check_condition_u,
                         default_grid, event_E_decomposition, extremize, search_deviation,
                         selection_trace)
from mechlab.payoff import EstimateWithCI

U = (0.6, 0.7)


def test_condition_accepts_running_example():
    case = check_condition_u((0.5, 0.5), 0, U)
    assert case == ExtremizationCase(0, U, 1, 0, 1.0)
    assert case.gap == pytest.approx(0.1)


@pytest.mark.parametrize("weights, u", [((0.5, 0.5), (0.2, 1.0)), ((0.9, 0.1), (0.5, 0.8)),
                                        ((0.5, 0.5), (0.5, 0.5))])
def test_condition_rejects(weights, u):
    assert check_condition_u(weights, 0, u) is None


def test_condition_needs_positive_weight():
    with pytest.raises(PreconditionError):
        check_condition_u((1.0, 0.0), 1, U)


def test_condition_prefers_smallest_gap():
    case = check_condition_u((0.5, 0.3, 0.2), 0, (0.5, 0.9, 0.8))
    assert (case.best_alternative, case.runner_up) == (1, 2)


def test_dictator_never_qualifies():
    rng = np.random.default_rng(0)
    for u in rng.random((200, 3)):
        assert check_condition_u((1.0, 0.0), 0, u) is None


@pytest.mark.parametrize("u, b, expected", [((0.6, 0.7), 1, (0.6, 1.0)),
                                            ((0.7, 0.6, 0.5), 0, (1.0, 0.6, 0.5))])
def test_extremize(u, b, expected):
    np.testing.assert_array_equal(extremize(u, b), expected)


@pytest.mark.parametrize("u, b", [((0.2, 1.0), 1), ((0.6, 0.7), 0)])
def test_extremize_errors(u, b):
    with pytest.raises(PreconditionError):
        extremize(u, b)


@settings(max_examples=200, deadline=None)
@given(w=st.lists(st.floats(0.01, 1.0), min_size=2, max_size=4),
       u=st.lists(st.floats(0.0, 1.0), min_size=2, max_size=4))
def test_truthful_margin_is_interior(w, u):
    case = check_condition_u(w, 0, u)
    if case is None:
        return
    lam = WeightVector(w)
    others = 1.0 - lam[0]
    margin = case.truthful_margin(w)
    assert -others < margin < others
    assert case.true_type[case.best_alternative] < 1.0


def test_verdict_rule():
    pos = EstimateWithCI(0.01, 0.001, 100)
    assert _verdict(pos, 0.001, 0.01) == VIOLATION
    assert _verdict(pos, 0.2, 0.01) == INCONCLUSIVE
    assert _verdict(EstimateWithCI(0.0, 0.0, 100), 1.0, 0.01) == NO_VIOLATION
    assert _verdict(EstimateWithCI(-0.01, 0.001, 100), 1.0, 0.01) == NO_VIOLATION


def test_escalation_levels():
    assert _sample_levels(100_000, True, 10_000_000) == [100_000, 1_000_000, 10_000_000]
    assert _sample_levels(100_000, False, 10_000_000) == [100_000]
    assert _sample_levels(100_000, True, 500_000) == [100_000]


def test_audit_running_example(uniform22):
    case = check_condition_u((0.5, 0.5), 0, U)
    rep = audit_extremization((0.5, 0.5), uniform22, case, 1, 400_000, escalate=False)
    assert rep.verdict == VIOLATION and rep.p_value < 0.01
    assert rep.deviation_used == (0.6, 1.0)
    assert_close(rep.paired_gain, oracles.RUNNING_GAIN)
    truthful_a, extreme_a = rep.runner_up_probability
    assert_close(truthful_a, 1 - oracles.TRUTHFUL_P_B)
    assert_close(extreme_a, 1 - oracles.EXTREME_P_B)
    assert not rep.assumption_1_violated


def test_audit_rejects_invalid_case(uniform22):
    case = ExtremizationCase(0, (0.5, 0.8), 1, 0, 1 / 9)
    with pytest.raises(PreconditionError):
        audit_extremization((0.9, 0.1), uniform22, case, 1, 1_000)


def test_audit_escalates_on_tiny_effect():
    # a large gap makes the gain tiny, so the first level should not settle it
    model = IndependentMarginals(ModelDims(2, 2))
    case = check_condition_u((0.5, 0.5), 0, (0.02, 0.99))
    small = audit_extremization((0.5, 0.5), model, case, 2, 2_000, escalate=False)
    big = audit_extremization((0.5, 0.5), model, case, 2, 2_000, escalate=True, max_samples=200_000)
    assert big.paired_gain.n_samples >= small.paired_gain.n_samples
    assert big.verdict in (VIOLATION, INCONCLUSIVE)


def test_event_e_is_everything_for_two_alternatives(uniform22):
    case = check_condition_u((0.5, 0.5), 0, U)
    for level, expected in ((0.7, 1 - oracles.TRUTHFUL_P_B), (1.0, 1 - oracles.EXTREME_P_B)):
        dec = event_E_decomposition((0.5, 0.5), uniform22, case, level, 3, 300_000)
        assert dec.event.mean == 1.0 and dec.event.std_error == 0.0
        assert dec.a_beats_b_given_event.mean == dec.direct.mean
        assert_close(dec.a_beats_b_given_event, expected)


def test_event_e_factorization_three_alternatives():
    model = IndependentMarginals(ModelDims(2, 3))
    case = check_condition_u((0.5, 0.5), 0, (0.55, 0.7, 0.2))
    assert (case.best_alternative, case.runner_up) == (1, 0)
    decs = [event_E_decomposition((0.5, 0.5), model, case, lv, 4, 300_000) for lv in (0.7, 0.85, 1.0)]
    for dec in decs:
        se = np.hypot(dec.direct.std_error, dec.a_beats_b_given_event.std_error)
        assert abs(dec.product - dec.direct.mean) <= 3 * se
        assert decs[0].event == dec.event
    assert decs[-1].direct.mean < decs[0].direct.mean


def test_selection_trace_moves_only_toward_best():
    model = IndependentMarginals(ModelDims(3, 4))
    u = (0.5, 0.7, 0.65, 0.1)
    levels = np.linspace(0.7, 1.0, 7)
    trace = selection_trace((0.4, 0.3, 0.3), model, 0, u, 1, levels, 5, 50_000)
    assert trace.shape == (50_000, 7)
    moved = trace[:, 1:] != trace[:, :-1]
    assert np.all(trace[:, 1:][moved] == 1)
    assert moved.any()


def test_search_finds_extremization(uniform22):
    rep = search_deviation(WeightedUtilitarian((0.5, 0.5)), uniform22, 0, U, 6, 200_000)
    assert rep.verdict == VIOLATION
    assert rep.deviation_used[1] == 1.0
    assert rep.paired_gain.mean >= oracles.RUNNING_GAIN - 3 * rep.paired_gain.std_error
    # nine grid points plus the extremization; the truthful report is not on the grid
    assert rep.n_candidates == 10


@pytest.mark.parametrize("rule", [Dictatorial(0), Dictatorial(1), UniformRandom()])
def test_search_on_bic_rules(uniform22, rule):
    rep = search_deviation(rule, uniform22, 0, U, 7, 50_000)
    assert rep.verdict == NO_VIOLATION


def test_search_grid_cap():
    model = IndependentMarginals(ModelDims(2, 7))
    with pytest.raises(ParameterError, match="729"):
        search_deviation(UniformRandom(), model, 0, (0.5,) * 7, 1, 100)
    with pytest.raises(ParameterError):
        search_deviation(UniformRandom(), IndependentMarginals(ModelDims(2, 2)), 0, U, 1, 100, grid_values=())


def test_default_grid():
    assert len(default_grid(3)) == 27
    assert default_grid(2)[0] == (0.0, 0.0)


def test_dictatorial_audits_do_not_flag(uniform22):
    rng = np.random.default_rng(8)
    flagged = 0
    for k in range(20):
        u = tuple(rng.uniform(0.05, 0.95, 2))
        rep = search_deviation(Dictatorial(int(rng.integers(2))), uniform22, int(rng.integers(2)), u,
                               100 + k, 5_000)
        flagged += rep.verdict == VIOLATION
    assert flagged == 0
