"""Implicit-shift QL kernels for real symmetric tridiagonal matrices.

Only the first and last rows of the eigenvector matrix are accumulated,
which is all an end-to-end transfer amplitude needs.  Cost is O(n^2) per
matrix instead of O(n^3) for a full eigendecomposition.
"""

import math

import numpy as np
from numba import njit

_EPS = np.finfo(np.float64).eps


@njit(cache=True, nogil=True)
def _ql_endpoints(d, e, z_first, z_last, max_iter):
    # d: diagonal (n,), overwritten with eigenvalues (unsorted).
    # e: offdiag padded to length n, e[n-1] = 0; destroyed.
    # z_first/z_last: rows 0 and n-1 of the accumulated rotation matrix.
    # Returns 0 on success, 1 if some eigenvalue exceeded max_iter sweeps.
    n = d.shape[0]
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= _EPS * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_iter:
                return 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.sqrt(g * g + 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            i = m - 1
            deflated = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.sqrt(f * f + g * g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                f = z_first[i + 1]
                z_first[i + 1] = s * z_first[i] + c * f
                z_first[i] = c * z_first[i] - s * f
                f = z_last[i + 1]
                z_last[i + 1] = s * z_last[i] + c * f
                z_last[i] = c * z_last[i] - s * f
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return 0


@njit(cache=True, nogil=True)
def batch_transfer(couplings, t, max_iter):
    """P_{1,N}(t) for each row of a ``(B, N-1)`` coupling array.

    Each row is processed with sequential scalar arithmetic, so a row's
    result does not depend on the batch it is evaluated in.
    """
    batch, n_bonds = couplings.shape
    n = n_bonds + 1
    prob = np.empty(batch)
    status = np.zeros(batch, dtype=np.int64)
    d = np.empty(n)
    e = np.empty(n)
    z_first = np.empty(n)
    z_last = np.empty(n)
    for b in range(batch):
        total = 0.0
        for j in range(n_bonds):
            total += couplings[b, j]
        for j in range(n):
            left = couplings[b, j - 1] if j > 0 else 0.0
            right = couplings[b, j] if j < n_bonds else 0.0
            d[j] = -total + 2.0 * (left + right)
            e[j] = -2.0 * right
            z_first[j] = 0.0
            z_last[j] = 0.0
        z_first[0] = 1.0
        z_last[n - 1] = 1.0
        status[b] = _ql_endpoints(d, e, z_first, z_last, max_iter)
        re = 0.0
        im = 0.0
        for i in range(n):
            w = z_first[i] * z_last[i]
            phase = d[i] * t
            re += w * math.cos(phase)
            im -= w * math.sin(phase)
        p = re * re + im * im
        prob[b] = p if p < 1.0 else 1.0
    return prob, status


@njit(cache=True, nogil=True)
def batch_roughness(couplings):
    """Sum of squared successive differences for each row."""
    batch, n_bonds = couplings.shape
    out = np.zeros(batch)
    for b in range(batch):
        s = 0.0
        for j in range(1, n_bonds):
            diff = couplings[b, j] - couplings[b, j - 1]
            s += diff * diff
        out[b] = s
    return out
