"""End-to-end acceptance suite.

Each test checks one numbered criterion at its stated tolerance; the
conftest prints a PASS/FAIL line per criterion at the end of the session.
Design campaigns are cached per session: the N = 21 fit1 campaign serves
criteria 2, 3, 6 and 10.  Expect several minutes on one core.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from qstchain.campaign import CampaignConfig, mean_wall_time, run_campaign
from qstchain.cli import main
from qstchain.disorder import DisorderConfig, disorder_sweep, fit_decay_curve, decay_model, DisorderCurve
from qstchain.dynamics import (
    CouplingProfile,
    TransferTask,
    average_fidelity,
    full_space_propagator_oracle,
    transmission_probability,
)
from qstchain.fitness import FitnessSpec
from qstchain.ga import GaHyperparameters
from qstchain.spectral import (
    POISSON_MEAN_RATIO,
    gap_ratios,
    histogram_ratios,
    mirror_residuals,
    poisson_ratio_pdf,
    sector_gap_ratio_histogram,
)

MASTER_SEED = 0


def campaign(n, kind, runs):
    cfg = CampaignConfig(chain_lengths=[n], fitness=FitnessSpec(kind),
                         hyperparameters=GaHyperparameters(), n_runs=runs,
                         master_seed=MASTER_SEED)
    return run_campaign(cfg)


@pytest.fixture(scope="session")
def fit1_n21():
    return campaign(21, "fit1", 10)


@pytest.fixture(scope="session")
def fit2_n21():
    return campaign(21, "fit2", 10)


@pytest.fixture(scope="session")
def fit2_n15():
    return campaign(15, "fit2", 3)


def mean_abs_step(profile):
    return float(np.mean(np.abs(np.diff(profile.couplings))))


@pytest.mark.acceptance(1)
def test_oracle_equivalence(record_property):
    rng = np.random.default_rng(101)
    worst = 0.0
    for n in range(2, 9):
        for _ in range(200):
            profile = CouplingProfile(rng.uniform(0, n, n - 1))
            t = rng.uniform(0.01, 4 * n)
            p = transmission_probability(profile, TransferTask(t))
            worst = max(worst, abs(p - full_space_propagator_oracle(profile, t, 1, n)))
    record_property("measured", f"max deviation {worst:.2e}")
    assert worst < 1e-10


@pytest.mark.acceptance(2)
def test_design_success_n21(fit1_n21, record_property):
    recs = fit1_n21.records[21]
    good = sum(r.best_fitness >= 0.97 for r in recs)
    p_max = fit1_n21.summaries[21].p_max
    record_property("measured", f"{good}/10 runs >= 0.97, P_M={p_max:.5f}")
    assert good >= 9
    assert p_max >= 0.99


@pytest.mark.acceptance(3)
def test_smoothness_effect(fit1_n21, fit2_n21, record_property):
    best1 = fit1_n21.best_record(21)
    best2 = fit2_n21.best_record(21)
    d1, d2 = mean_abs_step(best1.best_profile), mean_abs_step(best2.best_profile)
    record_property("measured", f"mean|dJ| fit1={d1:.3f} fit2={d2:.3f}; "
                                f"P fit1={best1.best_probability:.4f} fit2={best2.best_probability:.4f}")
    assert d2 < d1
    assert best1.best_probability >= 0.97 and best2.best_probability >= 0.97


@pytest.mark.acceptance(4)
def test_mirror_symmetry(record_property):
    rng = np.random.default_rng(404)
    worst, checked = 0.0, 0
    for _ in range(1000):
        n = int(rng.integers(3, 32))
        m = n - 1
        half = rng.uniform(0, n, (m + 1) // 2)
        profile = CouplingProfile(np.concatenate([half, half[:m // 2][::-1]]))
        assert profile.is_centrosymmetric()
        res = mirror_residuals(profile)
        ok = ~np.isnan(res)
        checked += int(ok.sum())
        worst = max(worst, float(res[ok].max(initial=0.0)))
    record_property("measured", f"max residual {worst:.2e} over {checked} eigenvectors")
    assert worst < 1e-8


@pytest.mark.acceptance(5)
def test_fidelity_endpoints(record_property):
    lo, hi = average_fidelity(0.0), average_fidelity(1.0)
    record_property("measured", f"f(0)={lo!r} f(1)={hi!r}")
    assert abs(lo - 0.5) <= 1e-15
    assert abs(hi - 1.0) <= 1e-15


@pytest.mark.acceptance(6)
def test_disorder_robustness(fit1_n21, record_property):
    best = fit1_n21.best_record(21).best_profile
    task = TransferTask.for_chain(21)
    p0 = transmission_probability(best, task)
    grid = [round(0.05 * i, 2) for i in range(11)]
    curve = disorder_sweep(best, task, grid, DisorderConfig(n_realizations=1000, rng_seed=6))
    at5 = float(curve.means[grid.index(0.05)])
    fit = fit_decay_curve(curve, n_sites=21)
    record_property("measured", f"P(0)={p0:.4f} <P>(0.05)={at5:.4f} ratio={at5 / p0:.4f}; "
                                f"fit c={fit.c:.3f} b={fit.b:.3g} rms={fit.residual_norm:.2e}")
    assert at5 >= 0.95 * p0
    assert fit.c <= 2.2


@pytest.mark.acceptance(7)
@pytest.mark.parametrize("params", [(0.95, 3.0, 2.0, 0.04), (0.9, 10.0, 1.6, 0.02),
                                    (0.98, 25.0, 2.1, 0.005)])
def test_decay_fit_round_trip(params, record_property):
    sigmas = np.linspace(0, 0.5, 11)
    y = decay_model(sigmas, *params)
    fit = fit_decay_curve(DisorderCurve(sigmas, y, np.zeros_like(y)), n_sites=21)
    got = np.array([fit.a, fit.b, fit.c, fit.d])
    rel = np.abs(got / np.array(params) - 1)
    record_property("measured", f"{params}: max rel err {rel.max():.1e}")
    assert np.all(rel <= 0.01)


@pytest.mark.acceptance(8)
def test_poisson_ratio_statistics(fit2_n15, record_property):
    best = fit2_n15.best_record(15).best_profile
    hist = sector_gap_ratio_histogram(best, 3)
    total, _ = quad(poisson_ratio_pdf, 0, 1, epsabs=1e-13, epsrel=1e-13)
    record_property("measured", f"<r>={hist.mean_ratio():.4f} over {hist.n_ratios} ratios "
                                f"(target {POISSON_MEAN_RATIO:.4f}); int p={total!r}")
    assert abs(hist.mean_ratio() - POISSON_MEAN_RATIO) <= 0.05
    assert abs(total - 1) < 1e-10


@pytest.mark.acceptance(8)
def test_designed_histogram_closer_to_poisson_than_goe(fit2_n15, record_property):
    best = fit2_n15.best_record(15).best_profile
    hist = sector_gap_ratio_histogram(best, 3)
    # GOE surrogate with the same sector dimensions
    rng = np.random.default_rng(8)
    ratios = []
    for dim in (15, 105, 455):
        A = rng.normal(size=(dim, dim))
        ratios.append(gap_ratios(np.linalg.eigvalsh((A + A.T) / 2)))
    goe = histogram_ratios(np.concatenate(ratios))
    record_property("measured", f"chi2 designed={hist.chi_square():.3f} GOE={goe.chi_square():.3f}")
    assert hist.chi_square() < goe.chi_square()


def _files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file() and p.name != "timings.csv"}


@pytest.mark.acceptance(9)
def test_determinism(tmp_path, record_property):
    design = ["design", "--n", "9", "13", "--runs", "3", "--seed", "77", "--max-generations", "40"]
    outs = []
    for w in (1, 2, 3):
        out = tmp_path / f"design_w{w}"
        assert main([*design, "--workers", str(w), "--out", str(out)]) == 0
        outs.append(_files(out))
    assert outs[0] == outs[1] == outs[2]

    profile = tmp_path / "design_w1" / "best_N13.json"
    for cmd, extra in [("disorder", ["--realizations", "200"]), ("spectra", ["--k-max", "2"])]:
        got = []
        for w in (1, 2):
            out = tmp_path / f"{cmd}_w{w}"
            assert main([cmd, str(profile), "--seed", "77", "--workers", str(w),
                         "--out", str(out), *extra]) in (0, 2)
            got.append(_files(out))
        assert got[0] == got[1] and got[0]
    n_files = len(outs[0])
    record_property("measured", f"{n_files} design files identical across workers 1/2/3; "
                                f"disorder and spectra identical across workers 1/2")


@pytest.mark.acceptance(10)
def test_scaling_envelope(fit1_n21, record_property):
    t21 = mean_wall_time(fit1_n21.records[21])
    big = campaign(41, "fit1", 10)
    t41 = mean_wall_time(big.records[41])
    bound = (41 / 21) ** 3
    record_property("measured", f"mean run time N=21 {t21:.2f}s, N=41 {t41:.2f}s, "
                                f"ratio {t41 / t21:.2f} (bound {bound:.2f})")
    assert t41 / t21 <= bound
