import itertools
import json

import numpy as np
import pytest

from mechlab import (Borda, Dictatorial, FiniteSupport, InterimQuery, ModelDims, Plurality,
                     RandomDictatorship, UniformRandom, WeightedUtilitarian, ex_ante_payoffs)
from mechlab.core import DomainError, ParameterError
from mechlab.oracle import (exact_best_response, exact_ex_ante, exact_interim, load_finite_model)
from mechlab.payoff import paired_interim

EQUAL = WeightedUtilitarian((0.5, 0.5))


def values(results):
    return [r.value for r in results]


@pytest.mark.parametrize("rule, expected", [(EQUAL, (0.75, 0.75)), (Dictatorial(0), (1.0, 0.5)),
                                            (UniformRandom(), (0.5, 0.5))])
def test_four_profile_ex_ante(opposed_model, rule, expected):
    res = exact_ex_ante(rule, opposed_model)
    assert values(res) == list(expected)
    assert all(r.assumption_1_violated for r in res)
    assert res[0].derivation["atoms"] == 4


def test_four_profile_interim(opposed_model):
    res = exact_interim(EQUAL, opposed_model, InterimQuery(0, (1, 0), (0, 1)))
    assert res.value == 0.5
    assert res.derivation == {"atoms": 4, "conditioning_set": 2}


def test_dictator_interim_is_max(opposed_model):
    for t in ((1.0, 0.0), (0.0, 1.0)):
        assert exact_interim(Dictatorial(0), opposed_model, InterimQuery.truthful(0, t)).value == 1.0


def test_interim_unknown_type(opposed_model):
    with pytest.raises(DomainError):
        exact_interim(EQUAL, opposed_model, InterimQuery.truthful(0, (0.5, 0.5)))


def test_best_response_four_profile(opposed_model):
    # truthful (1,0) gives 1 when the other agrees and alternative 0 by tie-break
    # otherwise; the swap never helps
    best, gain = exact_best_response(EQUAL, opposed_model, 0, (1, 0), [(1, 0), (0, 1)])
    assert best == (1.0, 0.0) and gain == 0.0
    # type (0,1) loses ties; reporting (0,1) is still best among these candidates
    best, gain = exact_best_response(EQUAL, opposed_model, 0, (0, 1), [(0, 1), (1, 0)])
    assert best == (0.0, 1.0) and gain == 0.0


def test_best_response_needs_truth(opposed_model):
    with pytest.raises(ParameterError):
        exact_best_response(EQUAL, opposed_model, 0, (1, 0), [(0, 1)])


def _random_finite(rng, n, m, k, grid=(0.0, 0.25, 0.5, 0.75, 1.0)):
    atoms = set()
    while len(atoms) < k:
        atoms.add(tuple(rng.choice(grid, n * m)))
    atoms = sorted(atoms)
    return FiniteSupport.from_weights(np.array(atoms).reshape(k, n, m), rng.random(k) + 0.1)


def test_dictator_best_response_gain_is_zero():
    rng = np.random.default_rng(0)
    for trial in range(20):
        fm = _random_finite(rng, 2, 3, 8)
        for agent in range(2):
            u = fm.atoms[trial % 8, agent]
            cands = [tuple(u)] + list(itertools.product((0.0, 0.5, 1.0), repeat=3))
            for rule in (Dictatorial(0), Dictatorial(1), UniformRandom()):
                assert exact_best_response(rule, fm, agent, u, cands)[1] == 0.0


def _permute(fm, perm):
    return FiniteSupport(fm.atoms[:, :, perm], fm.probs, fm.dims)


@pytest.mark.parametrize("rule", [WeightedUtilitarian((0.4, 0.6)), RandomDictatorship((0.3, 0.7)),
                                  UniformRandom(), Dictatorial(1)])
def test_permutation_covariance(rule):
    # continuous atoms rule out ties, so the index tie-break never fires
    rng = np.random.default_rng(2)
    fm = FiniteSupport.from_weights(rng.random((6, 2, 3)), rng.random(6) + 0.1)
    u = fm.atoms[0, 0]
    v = u[::-1].copy()
    base = exact_interim(rule, fm, InterimQuery(0, u, v)).value
    for perm in map(list, itertools.permutations(range(3))):
        fp = _permute(fm, perm)
        assert values(exact_ex_ante(rule, fp)) == pytest.approx(values(exact_ex_ante(rule, fm)), abs=1e-15)
        assert exact_interim(rule, fp, InterimQuery(0, u[perm], v[perm])).value == pytest.approx(base, abs=1e-15)


@pytest.mark.parametrize("c", [0.1, 3.0, 1e6])
def test_probability_rescaling(opposed_model, c):
    scaled = FiniteSupport.from_weights(opposed_model.atoms, opposed_model.probs * c)
    for rule in (EQUAL, Plurality(), Borda()):
        assert values(exact_ex_ante(rule, scaled)) == pytest.approx(values(exact_ex_ante(rule, opposed_model)),
                                                                    abs=1e-15)
        q = InterimQuery(1, (0, 1), (1, 0))
        assert exact_interim(rule, scaled, q).value == pytest.approx(exact_interim(rule, opposed_model, q).value,
                                                                     abs=1e-15)


def test_monte_carlo_agreement(opposed_model):
    exact = values(exact_ex_ante(EQUAL, opposed_model))
    for e, est in zip(exact, ex_ante_payoffs(EQUAL, opposed_model, 3, 100_000)):
        assert abs(est.mean - e) <= 4 * est.std_error
    res = paired_interim(EQUAL, opposed_model, 0, (0, 1), [(0, 1), (1, 0)], 4, 100_000)
    truth = exact_interim(EQUAL, opposed_model, InterimQuery.truthful(0, (0, 1))).value
    dev = exact_interim(EQUAL, opposed_model, InterimQuery(0, (0, 1), (1, 0))).value
    assert abs(res.payoffs[0].mean - truth) <= 4 * res.payoffs[0].std_error
    assert abs(res.gains[1].mean - (dev - truth)) <= 4 * res.gains[1].std_error + 1e-12
    assert res.assumption_1_violated


def test_load_finite_model(tmp_path, opposed_model):
    block = {"atoms": [{"profile": a.tolist(), "prob": 0.25} for a in opposed_model.atoms]}
    path = tmp_path / "fm.json"
    path.write_text(json.dumps(block))
    fm = load_finite_model(path)
    assert fm.dims == ModelDims(2, 2)
    np.testing.assert_array_equal(fm.atoms, opposed_model.atoms)
    with pytest.raises(ParameterError):
        load_finite_model({"atoms": []})
