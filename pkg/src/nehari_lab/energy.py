"""Discrete energy, Nehari residuals, the scaling map and its projection.

With ``n_i = c_i <-Δ_h u_i, u_i>_w + <V_i u_i, u_i>_w`` (the squared component
norm ``||u_i||_i^2``) the discrete energy is ``E(u) = ½ Σ n_i − ∫ P(u)``.  All
integrals use the grid quadrature, so every identity below holds exactly for
the discrete functional, not just up to discretization error.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .assumptions import realize_potentials
from .errors import DegenerateStateError, GridMismatchError, NehariProjectionError, OffManifoldError
from .grid import Grid
from .model import ModelP, PowerCouplingModel, ScaledModel

NORM_FLOOR = 1e-12
NEHARI_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Problem:
    grid: Grid
    model: ModelP
    V: np.ndarray  # (k, n)
    c: np.ndarray  # (k,)

    def __post_init__(self):
        V = np.array(self.V, dtype=float)
        c = np.array(self.c, dtype=float).reshape(-1)
        if V.shape != (self.model.k, self.grid.size):
            raise GridMismatchError(f"potentials have shape {V.shape}, expected ({self.model.k}, {self.grid.size})")
        if c.shape != (self.model.k,) or not np.all(c > 0):
            raise ValueError(f"diffusion constants must be {self.model.k} positive reals, got {c}")
        V.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "c", c)

    @classmethod
    def build(cls, grid: Grid, model: ModelP, potentials=None, c: Sequence[float] | None = None) -> Problem:
        """Problem from Potential objects / arrays / scalars; defaults V = 0, c = 1."""
        k = model.k
        potentials = [0.0] * k if potentials is None else potentials
        c = np.ones(k) if c is None else c
        return cls(grid, model, realize_potentials(grid, potentials, k), np.asarray(c, dtype=float))

    @property
    def k(self) -> int:
        return self.model.k

    def check_state(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.ndim == 1 and self.k == 1:
            u = u[None, :]
        if u.shape != (self.k, self.grid.size):
            raise GridMismatchError(f"state has shape {u.shape}, expected ({self.k}, {self.grid.size})")
        return u

    def operator(self, u: np.ndarray) -> np.ndarray:
        """Componentwise c_i(−Δ_h) u_i + V_i u_i."""
        return self.c[:, None] * self.grid.neg_laplacian_state(u) + self.V * u


def quad_norms(problem: Problem, u: np.ndarray) -> np.ndarray:
    """n_i = ||u_i||_i^2 for each component."""
    u = problem.check_state(u)
    return problem.grid.weights @ (problem.operator(u) * u).T


def nonlinear_integral(problem: Problem, u: np.ndarray) -> float:
    return problem.grid.integrate(problem.model.value_field(u))


def energy(problem: Problem, u: np.ndarray) -> float:
    u = problem.check_state(u)
    return 0.5 * float(np.sum(quad_norms(problem, u))) - nonlinear_integral(problem, u)


def odd_gradient(model: ModelP, u: np.ndarray) -> np.ndarray:
    """Gradient of the even extension: sign(u_i) P_i(|u|)."""
    return np.sign(u) * model.grad_field(u)


def energy_gradient(problem: Problem, u: np.ndarray) -> np.ndarray:
    """w-weighted gradient c_i(−Δ_h u_i) + V_i u_i − P_{u_i}(u)."""
    u = problem.check_state(u)
    return problem.operator(u) - odd_gradient(problem.model, u)


def _checked_norms(problem: Problem, u: np.ndarray) -> np.ndarray:
    n = quad_norms(problem, u)
    bad = np.flatnonzero(~(np.sqrt(np.maximum(n, 0.0)) >= NORM_FLOOR))
    if bad.size:
        raise DegenerateStateError(f"component {int(bad[0]) + 1} vanishes: ||u_i||_i^2 = {n[bad[0]]:.3e}")
    return n


def nehari_residuals(problem: Problem, u: np.ndarray) -> np.ndarray:
    """F_i(u) = ||u_i||_i^2 − ∫ P_{u_i}(u) u_i."""
    u = problem.check_state(u)
    n = _checked_norms(problem, u)
    return n - problem.grid.weights @ (odd_gradient(problem.model, u) * u).T


def on_manifold(problem: Problem, u: np.ndarray, tol: float = NEHARI_TOL) -> bool:
    u = problem.check_state(u)
    n = _checked_norms(problem, u)
    return bool(np.all(np.abs(nehari_residuals(problem, u)) <= tol * n))


def phi_bundle(problem: Problem, u: np.ndarray, t: Sequence[float], norms: np.ndarray | None = None):
    """Value, gradient and Hessian of φ_u(t) = E(t_1 u_1, …, t_k u_k)."""
    u = problem.check_state(u)
    t = np.asarray(t, dtype=float)
    n = _checked_norms(problem, u) if norms is None else norms
    m = problem.model
    w = problem.grid.weights
    tu = t[:, None] * u
    val = 0.5 * float(np.sum(t**2 * n)) - problem.grid.integrate(m.value_field(tu))
    sg = np.sign(tu)
    grad = t * n - w @ (sg * m.grad_field(tu) * u).T
    hf = m.hess_field(tu) * (sg[:, None] * sg[None, :])
    hess = np.diag(n) - np.einsum("ijn,in,jn,n->ij", hf, u, u, w)
    return val, grad, 0.5 * (hess + hess.T)


@dataclass
class NehariDiagnostics:
    t: np.ndarray
    energy: float
    residuals: np.ndarray
    norms: np.ndarray
    hessian_max_eig: float
    lower_bound_slack: float | None
    iterations: int
    trajectory: list = field(default_factory=list, repr=False)

    @property
    def hessian_negative(self) -> bool:
        return self.hessian_max_eig < 0.0

    def to_dict(self) -> dict:
        return {
            "energy": float(self.energy),
            "residuals": [float(x) for x in self.residuals],
            "norms": [float(x) for x in self.norms],
            "hessian_max_eig": float(self.hessian_max_eig),
            "lower_bound_slack": None if self.lower_bound_slack is None else float(self.lower_bound_slack),
            "t": [float(x) for x in self.t],
            "iterations": int(self.iterations),
        }


def project_to_nehari(
    problem: Problem,
    u: np.ndarray,
    t0: Sequence[float] | None = None,
    tol: float = 1e-10,
    max_iter: int = 100,
    max_halvings: int = 30,
) -> tuple[np.ndarray, np.ndarray, NehariDiagnostics]:
    """Find the positive critical point t* of φ_u and return (t*, t*∘u, diagnostics).

    Newton runs in s = log t, which keeps every iterate strictly positive.
    Where the s-Hessian is not negative definite it is shifted down (in the
    metric diag(t_i^2 ||u_i||^2)) before solving, so every step is an ascent
    direction.  Steps are halved until φ
    increases, or, for an unshifted Newton step, until ||∇φ|| decreases.
    Converged when ||∇φ(t)|| <= tol·Σ t_i ||u_i||_i^2.
    """
    u = problem.check_state(u)
    n = _checked_norms(problem, u)
    k = problem.k
    t = np.ones(k) if t0 is None else np.array(t0, dtype=float)
    if not np.all(t > 0):
        raise ValueError("initial scaling must be positive")
    traj = [t.copy()]
    val, g, H = phi_bundle(problem, u, t, n)
    polished = False
    for it in range(1, max_iter + 1):
        gnorm = np.linalg.norm(g)
        converged = gnorm <= tol * float(np.sum(t * n))
        if converged and polished:
            break
        # s-Hessian in the metric D = diag(t_i^2 ||u_i||^2), so components of very
        # different size get comparable regularization
        d = 1.0 / np.sqrt(t**2 * n)
        gs = d * t * g
        Hs = d[:, None] * (np.outer(t, t) * H + np.diag(t * g)) * d[None, :]
        lmax = np.linalg.eigvalsh(Hs)[-1]
        newton = lmax < 0
        if not newton:
            Hs = Hs - (lmax + 1.0) * np.eye(k)
        try:
            ds = -d * np.linalg.solve(Hs, gs)
        except np.linalg.LinAlgError:
            raise NehariProjectionError(f"singular scaling Hessian at iteration {it}", trajectory=traj) from None
        if not np.all(np.isfinite(ds)):
            raise NehariProjectionError(f"non-finite Newton step at iteration {it}", trajectory=traj)
        big = np.max(np.abs(ds))
        if big > 1.0:
            ds /= big
            newton = False
        step = 1.0
        for _ in range(max_halvings + 1):
            tn = t * np.exp(step * ds)
            vn, gn, Hn = phi_bundle(problem, u, tn, n)
            if vn > val or (newton and np.linalg.norm(gn) < gnorm):
                break
            step *= 0.5
        else:
            if converged:
                break
            raise NehariProjectionError(
                f"step halving exhausted at iteration {it} (||grad phi|| = {gnorm:.3e})", trajectory=traj
            )
        t, val, g, H = tn, vn, gn, Hn
        traj.append(t.copy())
        if np.any(t > 1e12) or np.any(t < 1e-12):
            raise NehariProjectionError(f"scaling escaped to the cone boundary or infinity: t = {t}", trajectory=traj)
        if converged:
            polished = True
    else:
        if not np.linalg.norm(g) <= tol * float(np.sum(t * n)):
            raise NehariProjectionError(
                f"no convergence in {max_iter} iterations (||grad phi|| = {np.linalg.norm(g):.3e})", trajectory=traj
            )
    w = t[:, None] * u
    diag = nehari_diagnostics(problem, w, t=t, iterations=len(traj) - 1, trajectory=traj)
    return t, w, diag


def scaling_hessian(problem: Problem, u: np.ndarray) -> np.ndarray:
    """Hessian of φ_u at t = (1, …, 1)."""
    return phi_bundle(problem, u, np.ones(problem.k))[2]


def nehari_diagnostics(problem: Problem, w: np.ndarray, t=None, iterations: int = 0, trajectory=None,
                       alpha: float | None = None) -> NehariDiagnostics:
    w = problem.check_state(w)
    n = _checked_norms(problem, w)
    H = scaling_hessian(problem, w)
    res = nehari_residuals(problem, w)
    e = energy(problem, w)
    alpha = problem.model.default_alpha if alpha is None else alpha
    slack = None
    if np.all(np.abs(res) <= NEHARI_TOL * n):
        slack = _slack(problem, w, n, alpha)
    return NehariDiagnostics(
        t=np.ones(problem.k) if t is None else np.asarray(t),
        energy=e,
        residuals=res,
        norms=np.sqrt(n),
        hessian_max_eig=float(np.linalg.eigvalsh(H)[-1]),
        lower_bound_slack=slack,
        iterations=iterations,
        trajectory=[] if trajectory is None else trajectory,
    )


def scalar_nehari_scaling(problem: Problem, u: np.ndarray) -> float:
    """Closed form t = (||u||^2 / (λ ∫|u|^p))^(1/(p−2)) for a single power component."""
    m = problem.model
    if not isinstance(m, PowerCouplingModel) or m.k != 1:
        raise ValueError("closed-form scaling needs a one-component power model")
    u = problem.check_state(u)
    n = _checked_norms(problem, u)[0]
    a = m.lam[0] * problem.grid.integrate(np.abs(u[0]) ** m.p)
    return float((n / a) ** (1.0 / (m.p - 2.0)))


def lower_bound_check(problem: Problem, u: np.ndarray, alpha: float | None = None,
                      tol: float = NEHARI_TOL) -> float:
    """E(u) − (½ − 1/(2+α)) Σ ||u_i||_i^2 at a Nehari point."""
    u = problem.check_state(u)
    n = _checked_norms(problem, u)
    res = nehari_residuals(problem, u)
    if not np.all(np.abs(res) <= tol * n):
        raise OffManifoldError(f"state is not on the Nehari set: residuals {res} vs norms^2 {n}")
    alpha = problem.model.default_alpha if alpha is None else float(alpha)
    return _slack(problem, u, n, alpha)


def _slack(problem: Problem, u: np.ndarray, n: np.ndarray, alpha: float) -> float:
    # E − (½ − 1/(2+α))Σn rewritten as Σn/(2+α) − ∫P to avoid cancelling ½Σn twice
    return float(np.sum(n)) / (2.0 + alpha) - nonlinear_integral(problem, u)


class Membership(str, enum.Enum):
    ANALYTIC_YES = "analytic_yes"
    SAMPLED_YES = "sampled_yes"
    SAMPLED_NO = "sampled_no"


RAY_RADII = (10.0, 100.0, 1000.0)


RAY_LEVELS = (0.0, 0.05, 0.1, 0.25, 0.5, 1.0)


def ray_directions(k: int) -> np.ndarray:
    """Unit directions through the lattice RAY_LEVELS^k minus the origin, duplicates removed."""
    pts = np.array(list(itertools.product(RAY_LEVELS, repeat=k)))[1:]
    dirs = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    _, first = np.unique(np.round(dirs, 12), axis=0, return_index=True)
    return dirs[np.sort(first)]


def membership_in_M(problem: Problem, u: np.ndarray) -> tuple[Membership, dict]:
    """Decide whether φ_u → −∞ along every scaling ray.

    Power-family states on the Nehari set are certified analytically; the
    rest are probed along rays t = R·d, R in {10, 100, 1000}, d from ray_directions.  A ray passes
    when the values decrease monotonically and end below −1.
    """
    u = problem.check_state(u)
    m = problem.model
    if isinstance(m, PowerCouplingModel) and m.satisfies_parameter_rules() and on_manifold(problem, u):
        return Membership.ANALYTIC_YES, {}
    n = _checked_norms(problem, u)
    failed = []
    for d in ray_directions(problem.k):
        vals = [phi_bundle(problem, u, R * d, n)[0] for R in RAY_RADII]
        if not (vals[0] > vals[1] > vals[2] and vals[2] < -1.0):
            failed.append({"direction": [float(x) for x in d], "values": [float(v) for v in vals]})
    info = {"failed_rays": failed}
    return (Membership.SAMPLED_NO if failed else Membership.SAMPLED_YES), info


def rescale_unit_diffusion(problem: Problem) -> tuple[Problem, Callable, Callable]:
    """Equivalent problem with unit diffusions, ũ_i = √c_i u_i, Ṽ_i = V_i / c_i."""
    c = problem.c
    s = np.sqrt(c)
    m = problem.model
    if np.all(c == 1.0):
        model = m
    elif isinstance(m, PowerCouplingModel):
        model = m.scaled(c)
    else:
        model = ScaledModel(m, tuple(float(x) for x in c))
    new = Problem(problem.grid, model, problem.V / c[:, None], np.ones(problem.k))

    def forward(u):
        return s[:, None] * problem.check_state(u)

    def backward(v):
        return problem.check_state(v) / s[:, None]

    return new, forward, backward


@dataclass
class MinimaxReport:
    lattice_max: float
    argmax_t: np.ndarray
    energy: float
    gap: float
    contains_ones: bool
    spacing: np.ndarray

    def to_dict(self) -> dict:
        return {"lattice_max": self.lattice_max, "argmax_t": [float(x) for x in self.argmax_t],
                "energy": self.energy, "gap": self.gap, "contains_ones": self.contains_ones}


def minimax_lattice_check(problem: Problem, u: np.ndarray, t_star: Sequence[float] | None = None,
                          points: int = 60, span: float = 3.0) -> MinimaxReport:
    """Maximize φ_u over the lattice t_i = span·t*_i·a/points, a = 1..points.

    With the defaults t* itself is a lattice point (a = 20), so the lattice
    maximum can only exceed E(t*∘u).  ``contains_ones`` reports whether the
    maximizing node lies within one lattice spacing of t*.
    """
    u = problem.check_state(u)
    k = problem.k
    t_star = np.ones(k) if t_star is None else np.asarray(t_star, dtype=float)
    if points**k > 1_000_000:
        raise ValueError("lattice too large; reduce points for this component count")
    n = _checked_norms(problem, u)
    m = problem.model
    w = problem.grid.weights
    axes = [span * t_star[i] * np.arange(1, points + 1) / points for i in range(k)]
    best, best_t = -np.inf, None
    # last axis vectorized, the rest looped
    last = axes[-1]
    for head in itertools.product(*axes[:-1]):
        head = np.array(head)
        tu = np.empty((k, last.size, u.shape[1]))
        tu[:-1] = head[:, None, None] * u[:-1, None, :]
        tu[-1] = last[:, None] * u[-1][None, :]
        pv = m.value_field(tu.reshape(k, -1)).reshape(last.size, -1) @ w
        quad = 0.5 * (float(np.sum(head**2 * n[:-1])) + last**2 * n[-1])
        vals = quad - pv
        j = int(np.argmax(vals))
        if vals[j] > best:
            best, best_t = float(vals[j]), np.append(head, last[j])
    spacing = span * t_star / points
    e = energy(problem, t_star[:, None] * u)
    contains = bool(np.all(np.abs(best_t - t_star) <= spacing * (1 + 1e-12)))
    return MinimaxReport(best, best_t, e, best - e, contains, spacing)
