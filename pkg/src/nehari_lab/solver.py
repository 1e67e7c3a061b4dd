"""Multi-start projected descent for ground states on the discrete Nehari set."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .assumptions import check_assumptions
from .energy import (
    Membership,
    NehariDiagnostics,
    Problem,
    energy,
    energy_gradient,
    lower_bound_check,
    membership_in_M,
    nehari_diagnostics,
    project_to_nehari,
    quad_norms,
)
from .errors import AssumptionError, NehariLabError, NehariProjectionError, RankDeficiencyError, SolverError
from .linalg import shifted_poisson_solve

log = logging.getLogger(__name__)

NORM_FLOOR_GAMMA = 1e-6


@dataclass(frozen=True)
class SolverOptions:
    start_count: int = 4
    max_outer_iterations: int = 5000
    tol: float = 1e-9
    initial_step: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    max_backtracks: int = 40
    seed: int = 0
    precondition: bool = True
    waive_assumptions: bool = False
    memory: int = 5

    def __post_init__(self):
        if self.memory < 0:
            raise ValueError("memory must be >= 0")
        if self.start_count < 1:
            raise ValueError("start_count must be >= 1")
        if not (self.tol > 0 and self.initial_step > 0 and self.armijo > 0):
            raise ValueError("tolerances and step parameters must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class StartTrace:
    index: int
    kind: str
    converged: bool
    energy: float | None
    iterations: int
    residual: float | None
    energies: list[float] = field(default_factory=list, repr=False)
    error: str | None = None

    def to_dict(self, history: bool = False) -> dict:
        d = {"index": self.index, "kind": self.kind, "converged": self.converged, "energy": self.energy,
             "iterations": self.iterations, "residual": self.residual, "error": self.error}
        if history:
            d["energies"] = self.energies
        return d


@dataclass
class Solution:
    state: np.ndarray
    energy: float
    nehari: NehariDiagnostics
    multipliers: np.ndarray
    multiplier_fit: float
    pde_residual: np.ndarray
    start_index: int
    iterations: int
    converged: bool
    traces: list[StartTrace]
    assumptions_waived: bool = False

    def to_dict(self) -> dict:
        return {
            "energy": float(self.energy),
            "nehari": self.nehari.to_dict(),
            "multipliers": [float(x) for x in self.multipliers],
            "multiplier_fit": float(self.multiplier_fit),
            "pde_residual": [float(x) for x in self.pde_residual],
            "start_index": self.start_index,
            "iterations": self.iterations,
            "converged": self.converged,
            "assumptions_waived": self.assumptions_waived,
            "start_histories": [t.to_dict() for t in self.traces],
            "start_energies": [t.energy for t in self.traces],
        }


def _jitter(e: float) -> float:
    return min(1e-12, 64 * np.finfo(float).eps * max(1.0, abs(e)))


def discrete_pde_residual(problem: Problem, u: np.ndarray) -> np.ndarray:
    """||c_i(−Δ_h u_i) + V_i u_i − P_{u_i}(u)||_w / max(1, ||u_i||_w) per component."""
    u = problem.check_state(u)
    g = energy_gradient(problem, u)
    w = problem.grid.weights
    return np.sqrt(w @ (g * g).T) / np.maximum(1.0, np.sqrt(w @ (u * u).T))


def nehari_constraint_gradients(problem: Problem, u: np.ndarray) -> np.ndarray:
    """∇F_i as states, shape (k, k, n): entry [i, j] is ∂F_i/∂u_j."""
    u = problem.check_state(u)
    m = problem.model
    k = problem.k
    sg = np.sign(u)
    P1 = sg * m.grad_field(u)
    P2 = m.hess_field(u) * (sg[:, None] * sg[None, :])
    op = problem.operator(u)
    out = -P2 * u[:, None, :]
    for i in range(k):
        out[i, i] += 2.0 * op[i] - P1[i]
    return out


def multiplier_residual(problem: Problem, u: np.ndarray, cond_max: float = 1e12) -> tuple[np.ndarray, float]:
    """Least-squares fit ∇E ≈ Σ λ_i ∇F_i in the w inner product.

    Returns (λ, ||residual||_w / max(1, ||u||_w)).
    """
    u = problem.check_state(u)
    g = energy_gradient(problem, u)
    D = nehari_constraint_gradients(problem, u)
    w = problem.grid.weights
    k = problem.k
    G = np.einsum("ajn,bjn,n->ab", D, D, w)
    rhs = np.einsum("ajn,jn,n->a", D, g, w)
    cond = np.linalg.cond(G)
    if not cond < cond_max:
        raise RankDeficiencyError(f"constraint-gradient Gram matrix is rank deficient (cond {cond:.3e})")
    lam = np.linalg.solve(G, rhs)
    r = g - np.einsum("a,ajn->jn", lam, D)
    scale = max(1.0, float(np.sqrt(np.sum(w * u * u))))
    return lam, float(np.sqrt(np.sum(w * r * r))) / scale


# ---------------------------------------------------------------- starts


def _boundary_cutoff(grid) -> np.ndarray:
    """Smooth factor vanishing on the boundary, 1 deep inside."""
    kind = grid.kind
    if kind == "interval":
        x = grid.coords[:, 0] / grid.spec.geometry[0]
        return np.sin(np.pi * x)
    if kind == "rectangle":
        lx, ly = grid.spec.geometry
        return np.sin(np.pi * grid.coords[:, 0] / lx) * np.sin(np.pi * grid.coords[:, 1] / ly)
    r = grid.radius
    if kind == "disk":
        R = grid.spec.geometry[0]
        return np.cos(0.5 * np.pi * r / R)
    r0, r1 = grid.spec.geometry
    return np.sin(np.pi * (r - r0) / (r1 - r0))


def _centered(grid) -> np.ndarray:
    """Coordinates relative to the domain centre, shape (n, dim)."""
    if grid.is_polar:
        return grid.coords
    return grid.coords - 0.5 * np.asarray(grid.spec.geometry)[None, :]


def initial_states(grid, k: int, count: int, seed: int) -> list[tuple[str, np.ndarray]]:
    """Deterministic starts: coexisting profile, segregated sectors, then random smooth bumps."""
    cut = _boundary_cutoff(grid)
    xc = _centered(grid)
    starts: list[tuple[str, np.ndarray]] = [("coexisting", np.tile(cut, (k, 1)))]
    if k > 1:
        if grid.is_polar:
            th = grid.node_theta
            seg = np.stack([cut * np.maximum(np.cos(th - 2 * np.pi * i / k), 0.0) ** 2 for i in range(k)])
        else:
            x = xc[:, 0]
            span = np.max(np.abs(x))
            edges = np.linspace(-span, span, k + 1)
            seg = np.stack([cut * np.clip(np.sin(np.pi * (x - edges[i]) / (edges[i + 1] - edges[i])), 0, None)
                            * ((x >= edges[i]) & (x <= edges[i + 1])) for i in range(k)])
        starts.append(("segregated", seg))
    scale = float(np.max(np.abs(xc)))
    idx = 0
    while len(starts) < count:
        rng = np.random.default_rng([seed, idx])
        comps = []
        for _ in range(k):
            centre = rng.uniform(-0.6, 0.6, size=xc.shape[1]) * scale
            width = rng.uniform(0.15, 0.4) * scale
            d2 = np.sum((xc - centre) ** 2, axis=1)
            comps.append(cut * np.exp(-d2 / (2 * width**2)))
        starts.append((f"random_bumps_{idx}", np.stack(comps)))
        idx += 1
    return starts[:count]


# ---------------------------------------------------------------- descent


def _preconditioner(problem: Problem, enabled: bool):
    if not enabled:
        return lambda g: g, lambda s: s
    grid = problem.grid
    Vp = np.maximum(problem.V, 0.0)

    def apply(g):
        return np.stack([shifted_poisson_solve(grid, problem.c[i], Vp[i], 1.0, g[i], tol=1e-12)
                         for i in range(problem.k)])

    def inverse(s):
        return problem.c[:, None] * grid.neg_laplacian_state(s) + (Vp + 1.0) * s

    return apply, inverse


def _two_loop(g, pairs, prec, w):
    """L-BFGS direction −H g with H0 = γ·prec, all inner products w-weighted."""
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * float(np.sum(w * s * q))
        alphas.append(a)
        q -= a * y
    s, y, _ = pairs[-1]
    pq = prec(q)
    gamma = float(np.sum(w * s * y)) / float(np.sum(w * y * prec(y)))
    r = gamma * pq
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * float(np.sum(w * y * r))
        r += (a - b) * s
    return -r


def descend(problem: Problem, u0: np.ndarray, opts: SolverOptions, kind: str = "given", index: int = 0):
    """Projected descent from one start; returns (state, diagnostics, trace).

    Directions come from limited-memory BFGS in the preconditioned metric
    (plain preconditioned gradient with a Barzilai-Borwein step when the
    memory is 0 or the quasi-Newton direction is not a descent direction).
    Each trial point is |u + τd| projected back to the Nehari set.
    """
    w = problem.grid.weights
    prec, prec_inv = _preconditioner(problem, opts.precondition)
    _, u, diag = project_to_nehari(problem, np.abs(u0))
    e = diag.energy
    g = energy_gradient(problem, u)
    res = float(np.max(discrete_pde_residual(problem, u)))
    energies = [e]
    step = opts.initial_step
    pairs: list = []
    it = 0
    while res >= opts.tol and it < opts.max_outer_iterations:
        it += 1
        d = None
        if pairs and opts.memory > 0:
            d = _two_loop(g, pairs, prec, w)
            slope = float(np.sum(w * g * d))
            tau = 1.0
            if not slope < 0:
                d = None
        if d is None:
            d = -prec(g)
            slope = float(np.sum(w * g * d))
            tau = step
        accepted = False
        for _ in range(opts.max_backtracks):
            try:
                _, un, dn = project_to_nehari(problem, np.abs(u + tau * d))
            except NehariLabError:
                tau *= opts.backtrack
                continue
            if dn.energy <= e + opts.armijo * tau * slope + _jitter(e):
                accepted = True
                break
            tau *= opts.backtrack
        if not accepted:
            break
        gn = energy_gradient(problem, un)
        sv, yv = un - u, gn - g
        sy = float(np.sum(w * sv * yv))
        if sy > 0:
            step = float(np.sum(w * sv * prec_inv(sv))) / sy
            if opts.memory > 0:
                pairs.append((sv, yv, 1.0 / sy))
                del pairs[:-opts.memory]
        u, e, diag, g = un, dn.energy, dn, gn
        res = float(np.max(discrete_pde_residual(problem, u)))
        energies.append(e)
    converged = res < opts.tol
    trace = StartTrace(index, kind, converged, float(e), it, res, energies)
    return u, diag, trace


def solve_ground_state(problem: Problem, opts: SolverOptions | None = None,
                       initial: np.ndarray | None = None) -> Solution:
    """Minimize E over the discrete Nehari set from several starts; keep the lowest converged run.

    Ties in energy are broken by start index.  ``initial`` replaces the
    generated starts by a single given state.
    """
    opts = SolverOptions() if opts is None else opts
    waived = False
    report = check_assumptions(problem.model, problem.grid, problem.V, problem.c)
    if not report.existence_ok():
        if not opts.waive_assumptions:
            raise AssumptionError(f"assumptions fail: {report.failures}", report=report)
        waived = True
    if initial is not None:
        starts = [("given", problem.check_state(initial))]
    else:
        starts = initial_states(problem.grid, problem.k, opts.start_count, opts.seed)
    traces: list[StartTrace] = []
    results = []
    for idx, (kind, u0) in enumerate(starts):
        try:
            u, diag, trace = descend(problem, u0, opts, kind, idx)
        except NehariLabError as exc:
            traces.append(StartTrace(idx, kind, False, None, 0, None, error=f"{type(exc).__name__}: {exc}"))
            log.info("start %d (%s) failed: %s", idx, kind, exc)
            continue
        traces.append(trace)
        if trace.converged:
            results.append((trace.energy, idx, u, diag, trace))
    if not results:
        raise SolverError("no start converged", traces=traces)
    results.sort(key=lambda r: (r[0], r[1]))
    e, idx, u, diag, trace = results[0]
    lam, fit = multiplier_residual(problem, u)
    return Solution(
        state=u,
        energy=e,
        nehari=diag,
        multipliers=lam,
        multiplier_fit=fit,
        pde_residual=discrete_pde_residual(problem, u),
        start_index=idx,
        iterations=trace.iterations,
        converged=True,
        traces=traces,
        assumptions_waived=waived,
    )


def diagnostics_bundle(problem: Problem, sol: Solution, alpha: float | None = None) -> dict:
    """Positivity, norm floors, lower-bound slack, scaling-Hessian certificate and ℳ verdict."""
    u = sol.state
    n = quad_norms(problem, u)
    mins = np.min(u, axis=1)
    try:
        slack = lower_bound_check(problem, u, alpha)
    except NehariLabError:
        slack = None
    try:
        diag = nehari_diagnostics(problem, u, alpha=alpha)
        hmax = diag.hessian_max_eig
        verdict = membership_in_M(problem, u)[0].value
    except NehariLabError:
        hmax, verdict = None, None
    thresh = -1e-10 * float(np.min(n)) if np.all(n > 0) else 0.0
    return {
        "interior_min": [float(x) for x in mins],
        "positive": [bool(x > 0) for x in mins],
        "positivity_flag": bool(np.any(mins <= 0)),
        "lower_bound_slack": slack,
        "norms": [float(x) for x in np.sqrt(np.maximum(n, 0))],
        "norm_floor_ok": bool(np.all(np.sqrt(np.maximum(n, 0)) >= NORM_FLOOR_GAMMA)),
        "hessian_max_eig": hmax,
        "hessian_negative": None if hmax is None else bool(hmax < thresh),
        "membership": verdict,
    }


def resolve(problem: Problem, sol: Solution, opts: SolverOptions | None = None) -> Solution:
    """Restart the solver from a converged state (idempotence probe)."""
    opts = SolverOptions() if opts is None else opts
    return solve_ground_state(problem, replace(opts, start_count=1), initial=sol.state)

