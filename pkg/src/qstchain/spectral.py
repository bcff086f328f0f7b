"""Spectral diagnostics for designed chains.

* Kay constructive-interference report: how close successive one-excitation
  gaps are to odd multiples of pi/T, and which levels carry the initial state.
* Consecutive gap ratios r_n = min(s_n, s_{n-1}) / max(s_n, s_{n-1}) pooled
  over excitation sectors, compared with the Poisson law p(r) = 2/(1+r)^2.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from qstchain.dynamics import (
    DEFAULT_SECTOR_CAP,
    CouplingProfile,
    SectorTooLargeError,
    TransferTask,
    build_k_excitation_block,
    build_one_excitation_block,
    eigendecompose,
)

N_BINS = 200
POISSON_MEAN_RATIO = 2 * math.log(2) - 1
DEGENERACY_RTOL = 1e-12
MIRROR_DEGENERACY_RTOL = 1e-10


def gap_ratios(eigenvalues) -> np.ndarray:
    """Consecutive gap ratios of an ascending spectrum.

    Pairs whose larger spacing is below 1e-12 of the spectral width are
    dropped as degenerate.
    """
    E = np.asarray(eigenvalues, dtype=float)
    if E.size < 3:
        raise ValueError(f"need at least 3 levels, got {E.size}")
    if np.any(np.diff(E) < 0):
        raise ValueError("eigenvalues must be ascending")
    s = np.diff(E)
    lo = np.minimum(s[1:], s[:-1])
    hi = np.maximum(s[1:], s[:-1])
    keep = hi >= DEGENERACY_RTOL * (E[-1] - E[0])
    keep &= hi > 0
    return lo[keep] / hi[keep]


def poisson_ratio_pdf(r):
    r_arr = np.asarray(r, dtype=float)
    if np.any((r_arr < 0) | (r_arr > 1)) or np.any(np.isnan(r_arr)):
        raise ValueError("gap ratio outside [0, 1]")
    out = 2.0 / (1.0 + r_arr) ** 2
    return float(out) if out.ndim == 0 else out


@dataclass
class GapRatioHistogram:
    edges: np.ndarray
    masses: np.ndarray
    n_ratios: int
    ratios: np.ndarray = field(repr=False)

    @property
    def bin_width(self) -> float:
        return float(self.edges[1] - self.edges[0])

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def poisson_reference(self) -> np.ndarray:
        """Expected count-normalized mass per bin, p(r) * bin width."""
        return poisson_ratio_pdf(self.centers) * self.bin_width

    def mean_ratio(self) -> float:
        return float(self.ratios.mean())

    def chi_square(self) -> float:
        """Pearson distance between the masses and the Poisson reference."""
        ref = self.poisson_reference()
        return float(np.sum((self.masses - ref) ** 2 / ref))


def histogram_ratios(ratios, n_bins: int = N_BINS) -> GapRatioHistogram:
    ratios = np.asarray(ratios, dtype=float)
    if ratios.size == 0:
        raise ValueError("no gap ratios to histogram")
    counts, edges = np.histogram(ratios, bins=n_bins, range=(0.0, 1.0))
    return GapRatioHistogram(edges, counts / ratios.size, int(ratios.size), ratios)


def sector_spectra(profile: CouplingProfile, k_max: int,
                   cap: int = DEFAULT_SECTOR_CAP) -> list[np.ndarray]:
    """Ascending spectra of the k = 1..k_max excitation sectors."""
    n = profile.n_sites
    if k_max < 1 or k_max > n:
        raise ValueError(f"k_max must lie in [1, {n}], got {k_max}")
    for k in range(1, k_max + 1):
        dim = math.comb(n, k)
        if dim > cap:
            raise SectorTooLargeError(
                f"sector k={k} of an N={n} chain has dimension C({n},{k})={dim}, "
                f"above the cap of {cap}")
    spectra = []
    for k in range(1, k_max + 1):
        if k == 1:
            block = build_one_excitation_block(profile)
            spectra.append(eigendecompose(block).eigenvalues)
        else:
            H = build_k_excitation_block(profile, k, cap=cap).matrix
            spectra.append(np.linalg.eigvalsh(H))
    return spectra


def sector_gap_ratio_histogram(profile: CouplingProfile, k_max: int, pool: str = "within",
                               cap: int = DEFAULT_SECTOR_CAP,
                               n_bins: int = N_BINS) -> GapRatioHistogram:
    """Histogram of gap ratios from the k = 1..k_max excitation sectors.

    ``pool="within"`` computes ratios inside each sector then pools them
    (ascending k, ascending level).  ``pool="across"`` merges every
    sector's levels into one spectrum first.
    """
    spectra = sector_spectra(profile, k_max, cap)
    if pool == "within":
        parts = [gap_ratios(E) for E in spectra if E.size >= 3]
        ratios = np.concatenate(parts) if parts else np.empty(0)
    elif pool == "across":
        ratios = gap_ratios(np.sort(np.concatenate(spectra)))
    else:
        raise ValueError(f"pool must be 'within' or 'across', got {pool!r}")
    return histogram_ratios(ratios, n_bins)


def nearest_odd(x):
    return 2.0 * np.round((np.asarray(x, dtype=float) - 1.0) / 2.0) + 1.0


@dataclass
class KayReport:
    """Per-level Kay diagnostics.

    Arrays are indexed by ascending level; gap quantities have one entry
    fewer (gap i is E_{i+1} - E_i).
    """

    alpha: float
    energies: np.ndarray
    weights: np.ndarray
    mirror_residuals: np.ndarray
    gaps: np.ndarray
    gap_ratios: np.ndarray
    odd_multiples: np.ndarray
    residuals: np.ndarray
    threshold: float
    degenerate: np.ndarray

    @property
    def active(self) -> np.ndarray:
        return self.weights > self.threshold

    @property
    def active_weight(self) -> float:
        return float(self.weights[self.active].sum())

    def active_gap_mask(self) -> np.ndarray:
        """Gaps whose both end levels are Kay-active."""
        act = self.active
        return act[:-1] & act[1:]

    def levels(self) -> list[dict]:
        rows = []
        for i in range(self.energies.size):
            row = {
                "index": i,
                "energy": float(self.energies[i]),
                "weight": float(self.weights[i]),
                "mirror_residual": float(self.mirror_residuals[i]),
                "kay_active": bool(self.active[i]),
                "gap": None, "gap_over_alpha": None, "odd_multiple": None, "residual": None,
            }
            if i < self.gaps.size:
                row.update(gap=float(self.gaps[i]), gap_over_alpha=float(self.gap_ratios[i]),
                           odd_multiple=int(self.odd_multiples[i]),
                           residual=float(self.residuals[i]))
            rows.append(row)
        return rows

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "threshold": self.threshold,
                "active_weight": self.active_weight, "levels": self.levels()}


def kay_report_from_spectrum(energies, weights, arrival_time: float,
                             mirror_residuals=None, threshold: float = 0.01) -> KayReport:
    E = np.asarray(energies, dtype=float)
    w = np.asarray(weights, dtype=float)
    alpha = math.pi / arrival_time
    gaps = np.diff(E)
    ratio = gaps / alpha
    q = nearest_odd(ratio)
    width = E[-1] - E[0] if E.size > 1 else 0.0
    deg = np.zeros(E.size, dtype=bool)
    tight = gaps < MIRROR_DEGENERACY_RTOL * width
    deg[:-1] |= tight
    deg[1:] |= tight
    if mirror_residuals is None:
        mirror_residuals = np.zeros(E.size)
    return KayReport(alpha=alpha, energies=E, weights=w,
                     mirror_residuals=np.asarray(mirror_residuals, dtype=float),
                     gaps=gaps, gap_ratios=ratio, odd_multiples=q.astype(int),
                     residuals=np.abs(ratio - q), threshold=threshold, degenerate=deg)


def kay_report(profile: CouplingProfile, task: TransferTask,
               threshold: float = 0.01) -> KayReport:
    spec = eigendecompose(build_one_excitation_block(profile))
    V = spec.eigenvectors
    mirror = np.abs(np.abs(V[0, :]) - np.abs(V[-1, :]))
    return kay_report_from_spectrum(spec.eigenvalues, spec.weights, task.arrival_time,
                                    mirror_residuals=mirror, threshold=threshold)


def mirror_residuals(profile: CouplingProfile, skip_degenerate: bool = True) -> np.ndarray:
    """||v_i(1)| - |v_i(N)|| per eigenvector; NaN for degenerate clusters if skipped."""
    spec = eigendecompose(build_one_excitation_block(profile))
    V = spec.eigenvectors
    res = np.abs(np.abs(V[0, :]) - np.abs(V[-1, :]))
    if skip_degenerate and res.size > 1:
        E = spec.eigenvalues
        width = E[-1] - E[0]
        tight = np.diff(E) < MIRROR_DEGENERACY_RTOL * width
        deg = np.zeros(E.size, dtype=bool)
        deg[:-1] |= tight
        deg[1:] |= tight
        res = np.where(deg, np.nan, res)
    return res
