import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qstchain.dynamics import CouplingProfile, TransferTask, transmission_probability
from qstchain.fitness import (
    FitnessFunction,
    FitnessSpec,
    fit1,
    fit2,
    smoothness_factor,
    smoothness_sum,
)


def test_spec_defaults_and_validation():
    spec = FitnessSpec()
    assert spec.kind == "fit1" and spec.beta == 0.9
    assert spec.gamma + spec.beta == 1.0
    with pytest.raises(ValueError):
        FitnessSpec("fit3")
    with pytest.raises(ValueError):
        FitnessSpec("fit2", beta=1.5)


def test_fit1_closed_forms():
    assert fit1(CouplingProfile([1.0]), TransferTask(math.pi / 4)) == pytest.approx(1, abs=1e-14)
    assert fit1(CouplingProfile([]), TransferTask(2.0)) == 1.0
    profile = CouplingProfile([1.0, 3.0, 1.0])
    assert fit1(profile, TransferTask(1e-300)) == pytest.approx(0, abs=1e-14)


def test_fit1_agrees_with_spectral_route():
    rng = np.random.default_rng(0)
    for n in [3, 8, 21]:
        profile = CouplingProfile(rng.uniform(0, n, n - 1))
        task = TransferTask(2 * n)
        assert fit1(profile, task) == pytest.approx(transmission_probability(profile, task),
                                                    abs=1e-10)


def test_smoothness_sum_index_range():
    # differences over J_1..J_{N-1}: N-2 terms
    assert smoothness_sum(np.array([1.0, 3.0, 6.0])) == 4.0 + 9.0
    assert smoothness_sum(np.array([2.0])) == 0.0
    np.testing.assert_array_equal(smoothness_sum(np.array([[1.0, 2.0], [0.0, 0.0]])), [1.0, 0.0])


def test_fit2_uniform_couplings_equals_fit1():
    profile = CouplingProfile([2.5] * 10)
    task = TransferTask(22.0)
    assert fit2(profile, task, FitnessSpec("fit2", 0.9)) == fit1(profile, task)


def test_fit2_beta_zero_equals_fit1():
    profile = CouplingProfile(np.random.default_rng(1).uniform(0, 9, 8))
    task = TransferTask(18.0)
    assert fit2(profile, task, FitnessSpec("fit2", 0.0)) == fit1(profile, task)


def test_fit2_rough_limit_tends_to_gamma():
    profile = CouplingProfile([0.0, 1e4, 0.0, 1e4])
    spec = FitnessSpec("fit2", 0.9)
    assert smoothness_factor(profile.couplings, 5, spec) == pytest.approx(0.1, abs=1e-15)


def test_fitness_function_batch_matches_scalar():
    rng = np.random.default_rng(2)
    n = 11
    J = rng.uniform(0, n, (6, n - 1))
    for spec in [FitnessSpec("fit1"), FitnessSpec("fit2", 0.7)]:
        ev = FitnessFunction(spec, n, 2 * n)
        fit, prob = ev(J)
        for row, f, p in zip(J, fit, prob):
            profile = CouplingProfile(row)
            scalar = fit1 if spec.kind == "fit1" else (lambda pr, t: fit2(pr, t, spec))
            assert scalar(profile, TransferTask(2 * n)) == f
            assert fit1(profile, TransferTask(2 * n)) == p


couplings = st.integers(2, 14).flatmap(
    lambda n: st.lists(st.floats(0, 30), min_size=n - 1, max_size=n - 1))


@settings(max_examples=80, deadline=None)
@given(couplings, st.floats(0, 1), st.floats(0.5, 40))
def test_fit2_bounded_by_fit1(J, beta, T):
    profile = CouplingProfile(J)
    task = TransferTask(T)
    f1 = fit1(profile, task)
    f2 = fit2(profile, task, FitnessSpec("fit2", beta))
    assert 0.0 <= f2 <= f1 <= 1.0


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1e3), st.floats(0, 1e3), st.integers(2, 50))
def test_factor_monotone_in_roughness(beta, s1, s2, n):
    spec = FitnessSpec("fit2", beta)
    lo, hi = sorted([s1, s2])
    f = lambda s: spec.gamma + spec.beta * math.exp(-s / n ** 2)
    assert f(hi) <= f(lo)


def test_determinism():
    profile = CouplingProfile(np.random.default_rng(3).uniform(0, 15, 14))
    task = TransferTask(30.0)
    spec = FitnessSpec("fit2")
    assert fit2(profile, task, spec) == fit2(profile, task, spec)
