"""Fitness functions scoring coupling profiles.

``fit1`` is the transfer probability itself.  ``fit2`` multiplies it by
``gamma + beta * exp(-S / N**2)`` where ``S`` is the sum of squared
differences between successive couplings, which rewards smooth profiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from qstchain._tridiag import batch_roughness
from qstchain.dynamics import CouplingProfile, TransferTask, batch_transmission

FITNESS_KINDS = ("fit1", "fit2")


@dataclass(frozen=True)
class FitnessSpec:
    kind: str = "fit1"
    beta: float = 0.9

    def __post_init__(self):
        if self.kind not in FITNESS_KINDS:
            raise ValueError(f"fitness kind must be one of {FITNESS_KINDS}, got {self.kind!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta!r}")

    @property
    def gamma(self) -> float:
        return 1.0 - self.beta

    def to_dict(self):
        return {"kind": self.kind, "beta": self.beta}


def smoothness_sum(couplings: np.ndarray):
    """Sum over i = 2..N-1 of (J_i - J_{i-1})**2 for one profile or a batch."""
    J = np.asarray(couplings, dtype=float)
    out = batch_roughness(np.ascontiguousarray(np.atleast_2d(J)))
    return float(out[0]) if J.ndim == 1 else out


def smoothness_factor(couplings: np.ndarray, n_sites: int, spec: FitnessSpec):
    s = np.atleast_1d(smoothness_sum(couplings))
    # elementwise math.exp: a row's value must not depend on the batch shape
    factor = np.array([spec.gamma + spec.beta * math.exp(-x / n_sites ** 2) for x in s])
    return float(factor[0]) if np.ndim(couplings) == 1 else factor


def fit1(profile: CouplingProfile, task: TransferTask) -> float:
    return float(batch_transmission(profile.couplings[None, :], task.arrival_time)[0])


def fit2(profile: CouplingProfile, task: TransferTask, spec: FitnessSpec | None = None) -> float:
    spec = spec or FitnessSpec("fit2")
    p = fit1(profile, task)
    return float(p * smoothness_factor(profile.couplings, profile.n_sites, spec))


class FitnessFunction:
    """Batched fitness evaluator for a fixed chain length and arrival time.

    Calling it on a ``(B, N-1)`` coupling array returns ``(fitness,
    probability)`` arrays; for ``fit1`` the two are identical.
    """

    def __init__(self, spec: FitnessSpec, n_sites: int, arrival_time: float):
        self.spec = spec
        self.n_sites = n_sites
        self.arrival_time = float(arrival_time)

    def __call__(self, couplings: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        couplings = np.atleast_2d(couplings)
        prob = batch_transmission(couplings, self.arrival_time)
        if self.spec.kind == "fit1":
            return prob, prob
        return prob * smoothness_factor(couplings, self.n_sites, self.spec), prob

    def score(self, profile: CouplingProfile) -> float:
        return float(self(profile.couplings[None, :])[0][0])
