"""Loop kernels compiled with numba; same signatures as the numpy versions."""

import numpy as np
from numba import njit


@njit(cache=True)
def neg_lap_1d(u, inv_h2):
    n = u.shape[0]
    out = np.empty(n)
    for i in range(n):
        s = 2.0 * u[i]
        if i > 0:
            s -= u[i - 1]
        if i < n - 1:
            s -= u[i + 1]
        out[i] = s * inv_h2
    return out


@njit(cache=True)
def neg_lap_2d(u, inv_hx2, inv_hy2):
    nx, ny = u.shape
    out = np.empty((nx, ny))
    dc = 2.0 * inv_hx2 + 2.0 * inv_hy2
    for i in range(nx):
        for j in range(ny):
            s = dc * u[i, j]
            if i > 0:
                s -= inv_hx2 * u[i - 1, j]
            if i < nx - 1:
                s -= inv_hx2 * u[i + 1, j]
            if j > 0:
                s -= inv_hy2 * u[i, j - 1]
            if j < ny - 1:
                s -= inv_hy2 * u[i, j + 1]
            out[i, j] = s
    return out


@njit(cache=True)
def neg_lap_polar(u, diag, a_in, a_out, b):
    nr, nt = u.shape
    out = np.empty((nr, nt))
    for j in range(nr):
        for m in range(nt):
            mp = m + 1 if m < nt - 1 else 0
            mm = m - 1 if m > 0 else nt - 1
            s = diag[j] * u[j, m] - b[j] * (u[j, mp] + u[j, mm])
            if j > 0:
                s -= a_in[j] * u[j - 1, m]
            if j < nr - 1:
                s -= a_out[j] * u[j + 1, m]
            out[j, m] = s
    return out


@njit(cache=True)
def thomas_batched(lower, diag, upper, rhs):
    nb, n = rhs.shape
    x = np.empty((nb, n))
    c = np.empty(n)
    d = np.empty(n)
    for k in range(nb):
        c[0] = upper[k, 0] / diag[k, 0]
        d[0] = rhs[k, 0] / diag[k, 0]
        for i in range(1, n):
            m = diag[k, i] - lower[k, i] * c[i - 1]
            c[i] = upper[k, i] / m
            d[i] = (rhs[k, i] - lower[k, i] * d[i - 1]) / m
        x[k, n - 1] = d[n - 1]
        for i in range(n - 2, -1, -1):
            x[k, i] = d[i] - c[i] * x[k, i + 1]
    return x


@njit(cache=True)
def two_point_max_violation(table):
    n = table.shape[0]
    worst = -np.inf
    for a in range(n):
        for b in range(n):
            hi = a if a > b else b
            lo = b if a > b else a
            for c in range(n):
                for d in range(n):
                    cmax = c if c > d else d
                    cmin = d if c > d else c
                    v = table[a, c] + table[b, d] - table[hi, cmin] - table[lo, cmax]
                    if v > worst:
                        worst = v
    return worst
