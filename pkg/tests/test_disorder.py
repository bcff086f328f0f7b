import numpy as np
import pytest

from qstchain.disorder import (
    DecayFit,
    DisorderConfig,
    DisorderCurve,
    FitConvergenceError,
    decay_model,
    disorder_sweep,
    draw_xi,
    fit_decay_curve,
    mean_transmission,
    perturb_profile,
    realization_couplings,
)
from qstchain.dynamics import CouplingProfile, TransferTask, transmission_probability


@pytest.fixture
def chain():
    rng = np.random.default_rng(4)
    half = rng.uniform(1, 9, 5)
    return CouplingProfile(np.concatenate([half, half[::-1]]))


def test_config_validation():
    with pytest.raises(ValueError):
        DisorderConfig(sigma=-0.1)
    with pytest.raises(ValueError):
        DisorderConfig(sigma=0.1, n_realizations=0)
    assert DisorderConfig().n_realizations == 1000


def test_zero_sigma_is_identity(chain):
    out = perturb_profile(chain, 0.0, np.random.default_rng(0))
    assert out == chain


def test_perturbation_breaks_symmetry_on_every_bond(chain):
    out = perturb_profile(chain, 0.1, np.random.default_rng(0))
    assert not out.is_centrosymmetric()
    assert np.all(out.couplings != chain.couplings)


def test_xi_moments():
    sigma = 0.2
    xi = draw_xi(sigma, 100_000, np.random.default_rng(42))
    assert abs(xi.mean()) < 4 * sigma / np.sqrt(1e5)
    assert abs(xi.std() / sigma - 1) < 0.02


def test_multiplicative_model(chain):
    cfg = DisorderConfig(0.05, 200, rng_seed=1)
    J = realization_couplings(chain, cfg)
    xi = J / chain.couplings - 1
    assert abs(xi.std() / 0.05 - 1) < 0.05
    # bonds are uncorrelated
    corr = np.corrcoef(xi.T)
    assert np.abs(corr - np.eye(corr.shape[0])).max() < 0.3


def test_mean_transmission_zero_sigma(chain):
    task = TransferTask(22.0)
    mean, std = mean_transmission(chain, task, DisorderConfig(0.0, 50))
    assert mean == pytest.approx(transmission_probability(chain, task), abs=1e-10)
    assert std == pytest.approx(0.0, abs=1e-12)


def test_mean_and_std_definitions(chain):
    task = TransferTask(22.0)
    cfg = DisorderConfig(0.1, 64, rng_seed=3)
    mean, std = mean_transmission(chain, task, cfg)
    samples = [transmission_probability(CouplingProfile(row, allow_negative=True), task)
               for row in realization_couplings(chain, cfg)]
    assert mean == pytest.approx(np.mean(samples), abs=1e-10)
    # population form: divisor N_xi
    assert std == pytest.approx(np.sqrt(np.mean((np.array(samples) - mean) ** 2)), abs=1e-10)


def test_sweep_single_point(chain):
    task = TransferTask(22.0)
    curve = disorder_sweep(chain, task, [0.0], DisorderConfig(n_realizations=10))
    assert curve.sigmas.tolist() == [0.0]
    assert curve.means[0] == pytest.approx(transmission_probability(chain, task), abs=1e-10)
    with pytest.raises(ValueError):
        disorder_sweep(chain, task, [])


def test_sweep_deterministic_and_seed_consistent(chain):
    task = TransferTask(22.0)
    grid = [0.0, 0.05, 0.1, 0.2, 0.3]
    n = 400
    a = disorder_sweep(chain, task, grid, DisorderConfig(n_realizations=n, rng_seed=1))
    again = disorder_sweep(chain, task, grid, DisorderConfig(n_realizations=n, rng_seed=1))
    b = disorder_sweep(chain, task, grid, DisorderConfig(n_realizations=n, rng_seed=2))
    np.testing.assert_array_equal(a.means, again.means)
    np.testing.assert_array_equal(a.stds, again.stds)
    assert np.all(np.abs(a.means - b.means) <= 4 * np.maximum(a.stds, 1e-15) / np.sqrt(n))
    assert np.all((a.means >= 0) & (a.means <= 1)) and np.all(a.stds <= 0.5)


# --- decay fit ----------------------------------------------------------------------

SIGMAS = np.linspace(0, 0.5, 11)


def synthetic(params, sigmas=SIGMAS):
    y = decay_model(sigmas, *params)
    return DisorderCurve(sigmas, y, np.zeros_like(y))


@pytest.mark.parametrize("params", [(0.95, 3.0, 2.0, 0.04), (0.9, 8.0, 1.7, 0.02),
                                    (0.99, 15.0, 2.2, 0.01)])
def test_fit_round_trip(params):
    fit = fit_decay_curve(synthetic(params), n_sites=30)
    got = np.array([fit.a, fit.b, fit.c, fit.d])
    np.testing.assert_allclose(got, params, rtol=0.01)
    assert not fit.failed and fit.identifiable
    assert fit(0.0) == pytest.approx(fit.a + fit.d)


def test_fit_constant_curve_is_flagged():
    curve = DisorderCurve(SIGMAS, np.full(11, 0.6), np.zeros(11))
    fit = fit_decay_curve(curve, n_sites=21)
    assert abs(fit.a) < 1e-6
    assert fit.d == pytest.approx(0.6, abs=1e-6)
    assert fit.residual_norm < 1e-8
    assert not fit.identifiable


def test_fit_reports_poor_fit():
    y = np.where(np.arange(11) % 2 == 0, 0.9, 0.1)
    fit = fit_decay_curve(DisorderCurve(SIGMAS, y, np.zeros(11)), n_sites=21)
    assert fit.failed


def test_fit_requires_six_points():
    with pytest.raises(ValueError):
        fit_decay_curve(synthetic((0.9, 3, 2, 0.05), SIGMAS[:5]))


def test_fit_iteration_cap_is_distinct_error():
    with pytest.raises(FitConvergenceError):
        fit_decay_curve(synthetic((0.95, 3.0, 2.0, 0.04)), n_sites=30, max_iter=5)


def test_fit_exponent_bounded():
    # data steeper than any admissible exponent
    y = np.where(SIGMAS < 0.25, 0.95, 0.05)
    fit = fit_decay_curve(DisorderCurve(SIGMAS, y, np.zeros(11)), n_sites=21)
    assert 0 < fit.c <= 4.0


def test_decay_fit_serializes():
    d = DecayFit(1.0, 2.0, 2.0, 0.0, 0.0).to_dict()
    assert set(["a", "b", "c", "d", "residual_norm"]) <= set(d)
