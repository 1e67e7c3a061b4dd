"""Vectorized numpy implementations of the hot kernels."""

import numpy as np


def neg_lap_1d(u, inv_h2):
    out = 2.0 * u
    out[1:] -= u[:-1]
    out[:-1] -= u[1:]
    return out * inv_h2


def neg_lap_2d(u, inv_hx2, inv_hy2):
    out = (2.0 * inv_hx2 + 2.0 * inv_hy2) * u
    out[1:, :] -= inv_hx2 * u[:-1, :]
    out[:-1, :] -= inv_hx2 * u[1:, :]
    out[:, 1:] -= inv_hy2 * u[:, :-1]
    out[:, :-1] -= inv_hy2 * u[:, 1:]
    return out


def neg_lap_polar(u, diag, a_in, a_out, b):
    # u has shape (nr, ntheta); coefficient arrays have shape (nr,)
    out = diag[:, None] * u
    out[1:, :] -= a_in[1:, None] * u[:-1, :]
    out[:-1, :] -= a_out[:-1, None] * u[1:, :]
    out -= b[:, None] * (np.roll(u, 1, axis=1) + np.roll(u, -1, axis=1))
    return out


def thomas_batched(lower, diag, upper, rhs):
    """Solve independent tridiagonal systems stored row-wise.

    ``lower[:, 0]`` and ``upper[:, -1]`` are ignored.
    """
    nb, n = rhs.shape
    c = np.empty((nb, n))
    d = np.empty((nb, n))
    c[:, 0] = upper[:, 0] / diag[:, 0]
    d[:, 0] = rhs[:, 0] / diag[:, 0]
    for i in range(1, n):
        m = diag[:, i] - lower[:, i] * c[:, i - 1]
        c[:, i] = upper[:, i] / m
        d[:, i] = (rhs[:, i] - lower[:, i] * d[:, i - 1]) / m
    x = np.empty((nb, n))
    x[:, -1] = d[:, -1]
    for i in range(n - 2, -1, -1):
        x[:, i] = d[:, i] - c[:, i] * x[:, i + 1]
    return x


def two_point_max_violation(table):
    """Largest value of T[a,c] + T[b,d] - T[max(a,b),min(c,d)] - T[min(a,b),max(c,d)].

    ``table[a, c]`` holds P(s_a, s_c) for an increasing value list s.
    """
    n = table.shape[0]
    idx = np.arange(n)
    a = idx[:, None, None, None]
    b = idx[None, :, None, None]
    c = idx[None, None, :, None]
    d = idx[None, None, None, :]
    lhs = table[a, c] + table[b, d]
    rhs = table[np.maximum(a, b), np.minimum(c, d)] + table[np.minimum(a, b), np.maximum(c, d)]
    return float(np.max(lhs - rhs))
