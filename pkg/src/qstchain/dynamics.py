"""Heisenberg chain dynamics in fixed-magnetization sectors.

The chain Hamiltonian is

    H = -sum_i J_i (X_i X_{i+1} + Y_i Y_{i+1} + Z_i Z_{i+1})

with Pauli matrices (not spin-1/2 operators) and hbar = 1.  In the
one-excitation sector this gives a tridiagonal block with off-diagonal
entries -2 J_j and diagonal entries -sum(J) + 2 (J_{j-1} + J_j), where
J_0 = J_N = 0.

Site indices in the public API are 1-based, like the physics.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Union

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal

from qstchain._tridiag import batch_transfer

DEFAULT_SECTOR_CAP = 20_000
ORACLE_MAX_SITES = 12


class ProfileError(ValueError):
    """Invalid coupling profile."""


class ConvergenceError(RuntimeError):
    """An eigensolver exceeded its iteration cap."""


class SectorTooLargeError(ValueError):
    """A k-excitation sector is larger than the dense diagonalization cap."""


class SectorSizeWarning(UserWarning):
    pass


class CouplingProfile:
    """Exchange couplings J_1..J_{N-1} of an N-site chain.

    Couplings must be finite and, unless ``allow_negative`` is set,
    nonnegative.  Disordered realizations are the only place negative
    values legitimately appear.
    """

    def __init__(self, couplings, n_sites: int | None = None,
                 meta: dict | None = None, allow_negative: bool = False):
        arr = np.array(couplings, dtype=float).reshape(-1)
        if n_sites is None:
            n_sites = arr.size + 1
        if int(n_sites) != n_sites or n_sites < 1:
            raise ProfileError(f"n_sites must be a positive integer, got {n_sites!r}")
        n_sites = int(n_sites)
        if arr.size != n_sites - 1:
            raise ProfileError(
                f"couplings: expected {n_sites - 1} values for n={n_sites}, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            raise ProfileError("couplings: all values must be finite")
        if not allow_negative and np.any(arr < 0):
            raise ProfileError("couplings: values must be nonnegative")
        arr.setflags(write=False)
        self.n_sites = n_sites
        self.couplings = arr
        self.meta = dict(meta or {})

    def is_centrosymmetric(self) -> bool:
        return bool(np.array_equal(self.couplings, self.couplings[::-1]))

    def __eq__(self, other):
        if not isinstance(other, CouplingProfile):
            return NotImplemented
        return (self.n_sites == other.n_sites
                and np.array_equal(self.couplings, other.couplings))

    def __repr__(self):
        return f"CouplingProfile(n_sites={self.n_sites}, couplings={self.couplings.tolist()!r})"

    def to_dict(self) -> dict[str, Any]:
        return {"n": self.n_sites, "couplings": [float(x) for x in self.couplings],
                "meta": dict(self.meta)}


@dataclass(frozen=True)
class TransferTask:
    """Transfer from site 1 to site N at ``arrival_time``."""

    arrival_time: float

    def __post_init__(self):
        if not (math.isfinite(self.arrival_time) and self.arrival_time > 0):
            raise ValueError(f"arrival_time must be positive, got {self.arrival_time!r}")

    @classmethod
    def for_chain(cls, n_sites: int, multiple: float = 2) -> "TransferTask":
        return cls(float(multiple) * n_sites)


@dataclass(frozen=True)
class OneExcitationBlock:
    diag: np.ndarray
    offdiag: np.ndarray

    @property
    def size(self) -> int:
        return self.diag.size

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)


@dataclass(frozen=True)
class KExcitationBlock:
    """Dense block of the k-excitation sector.

    ``basis`` lists the excited sites (1-based, ascending) of each basis
    state, in lexicographic order.
    """

    k: int
    basis: list[tuple[int, ...]]
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return len(self.basis)

    def dense(self) -> np.ndarray:
        return self.matrix


@dataclass(frozen=True)
class SpectralDecomposition:
    """Ascending eigenvalues with eigenvectors stored as columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    overlaps: np.ndarray = field(init=False)
    weights: np.ndarray = field(init=False)

    def __post_init__(self):
        # chi_i = <v_i|1>, c_i = |chi_i|^2
        chi = self.eigenvectors[0, :].copy()
        object.__setattr__(self, "overlaps", chi)
        object.__setattr__(self, "weights", chi * chi)


Block = Union[OneExcitationBlock, KExcitationBlock]


def one_excitation_entries(couplings: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the one-excitation block.

    Works on a single profile ``(N-1,)`` or a batch ``(B, N-1)``.
    """
    J = np.asarray(couplings, dtype=float)
    pad = [(0, 0)] * (J.ndim - 1) + [(1, 1)]
    Jp = np.pad(J, pad)  # J_0 = J_N = 0
    total = J.sum(axis=-1, keepdims=True)
    diag = -total + 2.0 * (Jp[..., :-1] + Jp[..., 1:])
    return diag, -2.0 * J


def build_one_excitation_block(profile: CouplingProfile) -> OneExcitationBlock:
    diag, offdiag = one_excitation_entries(profile.couplings)
    return OneExcitationBlock(diag=diag, offdiag=offdiag)


def sector_basis(n_sites: int, k: int) -> list[tuple[int, ...]]:
    return list(combinations(range(1, n_sites + 1), k))


def build_k_excitation_block(profile: CouplingProfile, k: int,
                             cap: int = DEFAULT_SECTOR_CAP) -> KExcitationBlock:
    """Dense block of H restricted to states with ``k`` flipped spins."""
    n = profile.n_sites
    if not 0 <= k <= n:
        raise ValueError(f"excitation number k={k} outside [0, {n}]")
    dim = math.comb(n, k)
    if dim > cap:
        warnings.warn(f"sector k={k} of an N={n} chain has dimension C({n},{k})={dim} "
                      f"> cap {cap}", SectorSizeWarning, stacklevel=2)
    basis = sector_basis(n, k)
    index = {state: a for a, state in enumerate(basis)}
    J = profile.couplings
    total = J.sum()
    H = np.zeros((dim, dim))
    for a, state in enumerate(basis):
        occ = np.zeros(n + 2, dtype=bool)
        occ[list(state)] = True
        # -sum_i J_i z_i = -sum(J) + 2 * (sum of J over anti-aligned bonds)
        anti = 0.0
        for i in range(1, n):
            if occ[i] != occ[i + 1]:
                anti += J[i - 1]
                # hop the excitation across bond (i, i+1)
                moved = set(state)
                if occ[i]:
                    moved.remove(i)
                    moved.add(i + 1)
                else:
                    moved.remove(i + 1)
                    moved.add(i)
                H[a, index[tuple(sorted(moved))]] = -2.0 * J[i - 1]
        H[a, a] = -total + 2.0 * anti
    return KExcitationBlock(k=k, basis=basis, matrix=H)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # largest-magnitude component of each column made positive
    rows = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[rows, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _is_mirror_block(block: OneExcitationBlock) -> bool:
    return (block.size >= 2 and np.array_equal(block.diag, block.diag[::-1])
            and np.array_equal(block.offdiag, block.offdiag[::-1]))


def _parity_eigh(d: np.ndarray, e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigensystem of a mirror-symmetric tridiagonal matrix via its parity blocks.

    The reflection i -> N+1-i commutes with the matrix, so the even and odd
    subspaces decouple into two smaller tridiagonal problems.  Eigenvectors
    come out exactly even or odd, which keeps nearly degenerate parity
    doublets (edge states of strongly modulated chains) from mixing.
    """
    n = d.size
    m = n // 2
    s2 = math.sqrt(2.0)
    if n % 2 == 0:
        de, ee = d[:m].copy(), e[:m - 1].copy()
        do, eo = d[:m].copy(), e[:m - 1].copy()
        de[-1] += e[m - 1]
        do[-1] -= e[m - 1]
    else:
        de, ee = d[:m + 1].copy(), e[:m].copy()
        ee[-1] *= s2
        do, eo = d[:m].copy(), e[:m - 1].copy()
    blocks = []
    for dd, ee_ in ((de, ee), (do, eo)):
        if dd.size == 0:
            blocks.append((np.empty(0), np.empty((0, 0))))
        elif dd.size == 1:
            blocks.append((dd.copy(), np.ones((1, 1))))
        else:
            blocks.append(eigh_tridiagonal(dd, ee_, lapack_driver="stev"))
    (we, ue), (wo, uo) = blocks
    ve = np.zeros((n, we.size))
    ve[:m] = ue[:m] / s2
    ve[n - m:] = ue[:m][::-1] / s2
    if n % 2:
        ve[m] = ue[m]
    vo = np.zeros((n, wo.size))
    vo[:m] = uo / s2
    vo[n - m:] = -uo[::-1] / s2
    w = np.concatenate([we, wo])
    v = np.concatenate([ve, vo], axis=1)
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def eigendecompose(block: Block, use_parity: bool = True) -> SpectralDecomposition:
    """Full eigensystem of a sector block, ascending, with fixed sign convention.

    Tridiagonal blocks go through LAPACK's implicit-shift QL/QR driver
    (``stev``); mirror-symmetric ones are first split into parity blocks
    unless ``use_parity`` is False.  Dense k-excitation blocks use ``eigh``.
    """
    try:
        if isinstance(block, OneExcitationBlock):
            if block.size == 1:
                w, v = block.diag.astype(float).copy(), np.ones((1, 1))
            elif use_parity and _is_mirror_block(block):
                w, v = _parity_eigh(block.diag, block.offdiag)
            else:
                w, v = eigh_tridiagonal(block.diag, block.offdiag, lapack_driver="stev")
        else:
            w, v = np.linalg.eigh(block.matrix)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigensolver did not converge: {exc}") from exc
    return SpectralDecomposition(eigenvalues=w, eigenvectors=_fix_signs(v))


def arrival_distribution(profile: CouplingProfile, t: float,
                         spectrum: SpectralDecomposition | None = None) -> np.ndarray:
    """P_{1,j}(t) for every site j, as an array indexed j-1."""
    if spectrum is None:
        spectrum = eigendecompose(build_one_excitation_block(profile))
    V = spectrum.eigenvectors
    phases = np.exp(-1j * spectrum.eigenvalues * t)
    amp = V @ (phases * V[0, :])
    return np.abs(amp) ** 2


def transmission_probability(profile: CouplingProfile, task: TransferTask) -> float:
    """P_{1,N}(T) from the spectral decomposition of the one-excitation block."""
    return float(arrival_distribution(profile, task.arrival_time)[-1])


def batch_transmission(couplings: np.ndarray, arrival_time: float,
                       max_iter: int | None = None) -> np.ndarray:
    """P_{1,N}(T) for every row of a ``(B, N-1)`` coupling array.

    Uses the endpoint-only QL kernel; this is the hot path of the genetic
    algorithm and of disorder averaging.
    """
    J = np.ascontiguousarray(np.atleast_2d(np.asarray(couplings, dtype=float)))
    n = J.shape[1] + 1
    if n == 1:
        return np.ones(J.shape[0])
    if max_iter is None:
        max_iter = 50 * n
    prob, status = batch_transfer(J, float(arrival_time), max_iter)
    if status.any():
        bad = int(np.flatnonzero(status)[0])
        raise ConvergenceError(f"tridiagonal QL exceeded {max_iter} sweeps (row {bad})")
    return prob


def average_fidelity(p: float) -> float:
    """Bloch-sphere averaged fidelity for excitation transfer probability ``p``."""
    if not (-1e-12 <= p <= 1 + 1e-12):
        raise ValueError(f"probability {p!r} outside [0, 1]")
    p = min(max(p, 0.0), 1.0)
    # 1/2 + sqrt(p)/3 + p/6 over a common denominator: exact at both endpoints
    return (3.0 + 2.0 * math.sqrt(p) + p) / 6.0


# --- brute-force full Hilbert space oracle -------------------------------------

_PAULI = {
    "x": sp.csr_matrix(np.array([[0, 1], [1, 0]], dtype=complex)),
    "y": sp.csr_matrix(np.array([[0, -1j], [1j, 0]], dtype=complex)),
    "z": sp.csr_matrix(np.array([[1, 0], [0, -1]], dtype=complex)),
}


def _bond_operator(n: int, i: int, pauli) -> sp.csr_matrix:
    # sigma_i sigma_{i+1} on 0-based sites i, i+1; site 0 is the leftmost factor
    ops = [sp.identity(2 ** i, format="csr", dtype=complex), pauli, pauli,
           sp.identity(2 ** (n - i - 2), format="csr", dtype=complex)]
    out = ops[0]
    for op in ops[1:]:
        out = sp.kron(out, op, format="csr")
    return out


def full_space_hamiltonian(profile: CouplingProfile) -> np.ndarray:
    """Dense 2^N x 2^N Hamiltonian built from Kronecker products of Pauli matrices.

    Qubit 1 is the most significant bit; ``|1>`` (index 1) is the excited
    state of a site.
    """
    n = profile.n_sites
    if n > ORACLE_MAX_SITES:
        raise ValueError(f"full-space oracle limited to N <= {ORACLE_MAX_SITES}, got {n}")
    H = sp.csr_matrix((2 ** n, 2 ** n), dtype=complex)
    for i, J in enumerate(profile.couplings):
        for pauli in _PAULI.values():
            H = H - J * _bond_operator(n, i, pauli)
    dense = H.toarray()
    assert np.allclose(dense.imag, 0.0)
    return dense.real


def single_excitation_index(n_sites: int, site: int) -> int:
    return 1 << (n_sites - site)


def full_space_propagator_oracle(profile: CouplingProfile, t: float, i: int, j: int) -> float:
    """|<i|exp(-itH)|j>|^2 in the full Hilbert space (test oracle)."""
    n = profile.n_sites
    H = full_space_hamiltonian(profile)
    w, V = np.linalg.eigh(H)
    a = single_excitation_index(n, i)
    b = single_excitation_index(n, j)
    amp = np.sum(V[a, :] * V[b, :] * np.exp(-1j * w * t))
    return float(abs(amp) ** 2)
