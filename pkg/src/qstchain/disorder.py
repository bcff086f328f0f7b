"""Static multiplicative disorder: J_i -> J_i (1 + xi_i), xi_i ~ N(0, sigma^2).

Every bond is perturbed independently, so realizations are in general no
longer centrosymmetric.  Realization ``r`` at grid point ``s`` draws from a
generator seeded by ``(rng_seed, s, r)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from qstchain.dynamics import CouplingProfile, TransferTask, batch_transmission

FIT_FAILURE_RMS = 0.05
C_BOUNDS = (1e-6, 4.0)


class FitConvergenceError(RuntimeError):
    """The decay-curve minimizer hit its iteration cap."""


@dataclass(frozen=True)
class DisorderConfig:
    sigma: float = 0.0
    n_realizations: int = 1000
    rng_seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma!r}")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")


@dataclass
class DisorderCurve:
    sigmas: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    n_sites: int | None = None
    n_realizations: int | None = None


@dataclass
class DecayFit:
    """P(sigma) = a * exp(-b * sigma**c) + d."""

    a: float
    b: float
    c: float
    d: float
    residual_norm: float
    failed: bool = False
    identifiable: bool = True
    iterations: int = 0
    notes: list[str] = field(default_factory=list)

    def __call__(self, sigma):
        return decay_model(np.asarray(sigma, dtype=float), self.a, self.b, self.c, self.d)

    def to_dict(self) -> dict:
        return asdict(self)


def decay_model(sigma, a, b, c, d):
    return a * np.exp(-b * np.power(sigma, c)) + d


def draw_xi(sigma: float, n_bonds: int, rng: np.random.Generator) -> np.ndarray:
    return rng.normal(0.0, sigma, size=n_bonds)


def perturb_profile(profile: CouplingProfile, sigma: float,
                    rng: np.random.Generator) -> CouplingProfile:
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma!r}")
    xi = draw_xi(sigma, profile.n_sites - 1, rng)
    return CouplingProfile(profile.couplings * (1.0 + xi), profile.n_sites,
                           meta=dict(profile.meta), allow_negative=True)


def realization_couplings(profile: CouplingProfile, cfg: DisorderConfig,
                          sigma_index: int = 0) -> np.ndarray:
    """All disordered coupling sets for one sigma, shape (n_realizations, N-1)."""
    n_bonds = profile.n_sites - 1
    xi = np.empty((cfg.n_realizations, n_bonds))
    for r in range(cfg.n_realizations):
        rng = np.random.default_rng([int(cfg.rng_seed), int(sigma_index), r])
        xi[r] = draw_xi(cfg.sigma, n_bonds, rng)
    return profile.couplings[None, :] * (1.0 + xi)


def transmission_samples(profile: CouplingProfile, task: TransferTask,
                         cfg: DisorderConfig, sigma_index: int = 0) -> np.ndarray:
    return batch_transmission(realization_couplings(profile, cfg, sigma_index),
                              task.arrival_time)


def mean_transmission(profile: CouplingProfile, task: TransferTask, cfg: DisorderConfig,
                      sigma_index: int = 0) -> tuple[float, float]:
    """Disorder-averaged P_{1,N}(T) and its standard deviation (divisor N_xi)."""
    p = transmission_samples(profile, task, cfg, sigma_index)
    return float(p.mean()), float(p.std())


def disorder_sweep(profile: CouplingProfile, task: TransferTask, sigma_grid,
                   cfg: DisorderConfig | None = None) -> DisorderCurve:
    sigmas = np.asarray(sigma_grid, dtype=float).reshape(-1)
    if sigmas.size == 0:
        raise ValueError("sigma grid is empty")
    cfg = cfg or DisorderConfig()
    means = np.empty(sigmas.size)
    stds = np.empty(sigmas.size)
    for s, sigma in enumerate(sigmas):
        point = DisorderConfig(float(sigma), cfg.n_realizations, cfg.rng_seed)
        means[s], stds[s] = mean_transmission(profile, task, point, sigma_index=s)
    return DisorderCurve(sigmas, means, stds, n_sites=profile.n_sites,
                         n_realizations=cfg.n_realizations)


def fit_decay_curve(curve: DisorderCurve, n_sites: int | None = None,
                    max_iter: int = 20_000) -> DecayFit:
    """Least-squares fit of a stretched exponential to the mean curve.

    Nelder-Mead on the summed squared residuals, restarted from its own
    optimum until the objective stops improving.  The exponent is bounded
    to (0, 4].
    """
    sigma = np.asarray(curve.sigmas, dtype=float)
    y = np.asarray(curve.means, dtype=float)
    if sigma.size < 6:
        raise ValueError(f"need at least 6 grid points, got {sigma.size}")
    n = n_sites or curve.n_sites or 10
    order = np.argsort(sigma)
    y0, y_end = y[order[0]], y[order[-1]]
    x0 = np.array([y0 - y_end, n / 10.0, 2.0, y_end])

    def sse(theta):
        a, b, c, d = theta
        with np.errstate(over="ignore", invalid="ignore"):
            r = decay_model(sigma, a, b, c, d) - y
        val = float(r @ r)
        return val if np.isfinite(val) else 1e300

    bounds = [(None, None), (None, None), C_BOUNDS, (None, None)]
    opts = dict(maxiter=max_iter, maxfev=2 * max_iter, xatol=1e-13, fatol=1e-20,
                adaptive=True)
    res = minimize(sse, x0, method="Nelder-Mead", bounds=bounds, options=opts)
    iterations = int(res.nit)
    for _ in range(20):
        if res.status == 2:
            break
        again = minimize(sse, res.x, method="Nelder-Mead", bounds=bounds, options=opts)
        iterations += int(again.nit)
        improved = again.fun < res.fun * (1 - 1e-10)
        res = again if again.fun <= res.fun else res
        if not improved:
            break
    if res.status == 2 or iterations >= max_iter:
        raise FitConvergenceError(f"Nelder-Mead hit its iteration cap ({max_iter})")
    a, b, c, d = (float(v) for v in res.x)
    rms = float(np.sqrt(res.fun / sigma.size))
    fit = DecayFit(a, b, c, d, residual_norm=rms, iterations=iterations)
    scale = max(np.ptp(y), abs(y0), 1e-300)
    if abs(a) < 1e-6 * scale or np.ptp(y) < 1e-12 * max(abs(y0), 1.0):
        fit.identifiable = False
        fit.notes.append("curve is flat: b and c are unidentifiable")
    if rms > FIT_FAILURE_RMS:
        fit.failed = True
        fit.notes.append(f"residual norm {rms:.3g} exceeds {FIT_FAILURE_RMS}")
    return fit
