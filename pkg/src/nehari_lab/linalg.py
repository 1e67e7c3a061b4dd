"""Matrix-free conjugate gradients and the principal Dirichlet eigenvalue."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ConvergenceError, IndefiniteOperatorError
from .grid import Grid


def pcg(
    grid: Grid,
    apply_op: Callable[[np.ndarray], np.ndarray],
    rhs: np.ndarray,
    precond: Callable[[np.ndarray], np.ndarray] | None = None,
    tol: float = 1e-10,
    maxiter: int | None = None,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, int, float]:
    """Preconditioned CG in the w-weighted inner product.

    Returns ``(x, iterations, relative_residual)``.  A non-positive curvature
    ``<p, A p>_w <= 0`` raises :class:`IndefiniteOperatorError`.
    """
    w = grid.weights
    rhs = grid.check_field(rhs)
    bnorm = np.sqrt(np.dot(w, rhs * rhs))
    if bnorm == 0.0:
        return np.zeros_like(rhs), 0, 0.0
    maxiter = 10 * grid.size if maxiter is None else maxiter
    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=float)
    r = rhs - apply_op(x) if x0 is not None else rhs.copy()
    z = precond(r) if precond is not None else r
    p = z.copy()
    rz = np.dot(w, r * z)
    res = np.sqrt(np.dot(w, r * r)) / bnorm
    for it in range(1, maxiter + 1):
        if res <= tol:
            return x, it - 1, res
        ap = apply_op(p)
        curv = np.dot(w, p * ap)
        if not curv > 0.0:
            raise IndefiniteOperatorError(
                f"CG breakdown at iteration {it}: <p, A p>_w = {curv:.3e} (operator not positive definite)",
                curvature=curv,
                iteration=it,
            )
        alpha = rz / curv
        x += alpha * p
        r -= alpha * ap
        res = np.sqrt(np.dot(w, r * r)) / bnorm
        z = precond(r) if precond is not None else r
        rz_new = np.dot(w, r * z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    if res <= tol:
        return x, maxiter, res
    raise ConvergenceError(f"CG did not converge in {maxiter} iterations (residual {res:.3e})", residual=res,
                           iterations=maxiter)


def shifted_operator(grid: Grid, c: float, V: np.ndarray | float, sigma: float):
    V = np.broadcast_to(np.asarray(V, dtype=float), (grid.size,))

    def apply(x):
        return c * grid.neg_laplacian(x) + (V + sigma) * x

    return apply


def shifted_preconditioner(grid: Grid, c: float, V: np.ndarray | float, sigma: float):
    """Exact inverse of the separable part of ``c(-Δ_h) + V + sigma``."""
    V = np.broadcast_to(np.asarray(V, dtype=float), (grid.size,))
    shift = np.maximum(np.asarray(grid.separable_part(np.ascontiguousarray(V))) + sigma, 0.0)

    def apply(r):
        return grid.solve_separable(c, shift, r)

    return apply


def shifted_poisson_solve(
    grid: Grid,
    c: float,
    V: np.ndarray | float,
    sigma: float,
    rhs: np.ndarray,
    tol: float = 1e-10,
    maxiter: int | None = None,
) -> np.ndarray:
    """Solve ``(c(-Δ_h) + V + sigma) x = rhs`` by preconditioned CG.

    The preconditioner inverts the separable part of the operator exactly
    (FFT in angle plus tridiagonal radial solves on polar grids, sine
    transforms on rectangles), so radial potentials converge in one sweep.
    """
    if not c > 0:
        raise ValueError(f"diffusion constant must be positive, got {c}")
    if not sigma > 0:
        raise ValueError(f"shift sigma must be positive, got {sigma}")
    x, _, _ = pcg(
        grid,
        shifted_operator(grid, c, V, sigma),
        rhs,
        precond=shifted_preconditioner(grid, c, V, sigma),
        tol=tol,
        maxiter=maxiter,
    )
    return x


def lambda1_estimate(grid: Grid, tol: float = 1e-9, maxiter: int = 500) -> float:
    """Smallest eigenvalue of -Δ_h by inverse power iteration.

    Each step is a CG solve with the Laplacian; stops once the relative
    eigen-residual ``||A x - λ x||_w / (λ ||x||_w)`` falls below ``tol``.
    Cached per grid.
    """
    key = ("lambda1", tol)
    if key in grid._cache:
        return grid._cache[key]
    apply = shifted_operator(grid, 1.0, 0.0, 0.0)
    precond = shifted_preconditioner(grid, 1.0, 0.0, 0.0)
    x = np.ones(grid.size)
    x /= grid.norm(x)
    res = np.inf
    lam = np.nan
    for it in range(maxiter):
        y, _, _ = pcg(grid, apply, x, precond=precond, tol=1e-12)
        x = y / grid.norm(y)
        ax = apply(x)
        lam = grid.inner(ax, x)
        res = grid.norm(ax - lam * x) / lam
        if res < tol:
            grid._cache[key] = float(lam)
            return float(lam)
    raise ConvergenceError(
        f"inverse iteration did not converge in {maxiter} steps (eigen-residual {res:.3e}, estimate {lam:.8g})",
        residual=res,
        iterations=maxiter,
    )
