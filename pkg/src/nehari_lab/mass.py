"""Two-component cubic system with unit masses.

Minimizes I(u, v) = ½∫(|∇u|² + |∇v|²) + ¼∫(u⁴ + v⁴) + (β/2)∫u²v² over
S = {∫u² = ∫v² = 1} by a preconditioned normalized gradient flow.  The
multipliers of −Δu = λu − u³ − βuv² (and the same for v with μ) are read off
the converged state, never carried through the flow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DegenerateStateError
from .grid import Grid
from .linalg import shifted_poisson_solve
from .solver import initial_states
from .symmetry import HalfSpace, polarize_pair


@dataclass(frozen=True)
class MassOptions:
    tau: float = 0.1
    tol: float = 1e-9
    max_iter: int = 20000
    start_count: int = 3
    seed: int = 0
    min_tau: float = 1e-12


@dataclass
class MultiplierPair:
    lam: float
    mu: float

    def to_dict(self) -> dict:
        return {"lambda": float(self.lam), "mu": float(self.mu)}


@dataclass
class MassResult:
    state: np.ndarray
    multipliers: MultiplierPair
    energy: float
    masses: np.ndarray
    stationarity: np.ndarray
    iterations: int
    start_index: int
    coupling: float = 0.0
    energies: list = field(default_factory=list, repr=False)
    start_energies: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "I_energy": float(self.energy),
            **self.multipliers.to_dict(),
            "masses": [float(x) for x in self.masses],
            "stationarity": [float(x) for x in self.stationarity],
            "coupling_integral": float(self.coupling),
            "iterations": self.iterations,
            "start_index": self.start_index,
            "start_energies": self.start_energies,
        }


def I_energy(grid: Grid, state: np.ndarray, beta: float) -> float:
    u, v = grid.check_state(state)
    grad = grid.dirichlet_form(u) + grid.dirichlet_form(v)
    return 0.5 * grad + 0.25 * grid.integrate(u**4 + v**4) + 0.5 * beta * grid.integrate(u**2 * v**2)


def I_gradient(grid: Grid, state: np.ndarray, beta: float) -> np.ndarray:
    u, v = grid.check_state(state)
    lap = grid.neg_laplacian_state(state)
    return lap + np.stack([u**3 + beta * u * v**2, v**3 + beta * v * u**2])


def masses(grid: Grid, state: np.ndarray) -> np.ndarray:
    s = grid.check_state(state)
    return (s * s) @ grid.weights


def project_mass(grid: Grid, state: np.ndarray) -> np.ndarray:
    """Divide each component by its w-weighted L² norm."""
    s = grid.check_state(state)
    m = np.sqrt(masses(grid, s))
    if np.any(m == 0) or not np.all(np.isfinite(m)):
        raise DegenerateStateError("cannot normalize a vanishing component")
    return s / m[:, None]


def multipliers(grid: Grid, state: np.ndarray, beta: float) -> MultiplierPair:
    """λ = ∫(|∇u|² + u⁴ + βu²v²) / ∫u², and μ likewise."""
    u, v = grid.check_state(state)
    m = masses(grid, state)
    lam = (grid.dirichlet_form(u) + grid.integrate(u**4 + beta * u**2 * v**2)) / m[0]
    mu = (grid.dirichlet_form(v) + grid.integrate(v**4 + beta * u**2 * v**2)) / m[1]
    return MultiplierPair(float(lam), float(mu))


def stationarity_residual(grid: Grid, state: np.ndarray, beta: float, mult: MultiplierPair | None = None) -> np.ndarray:
    """||−Δ_h u − λu + u³ + βuv²||_w / ||u||_w and the same for v."""
    s = grid.check_state(state)
    mult = multipliers(grid, s, beta) if mult is None else mult
    g = I_gradient(grid, s, beta) - np.array([mult.lam, mult.mu])[:, None] * s
    return np.sqrt((g * g) @ grid.weights) / np.sqrt(masses(grid, s))


def _flow(grid: Grid, u0: np.ndarray, beta: float, opts: MassOptions):
    """Normalized gradient flow from one start: step, |·|, renormalize."""

    def prec(r):
        return np.stack([shifted_poisson_solve(grid, 1.0, 0.0, 1.0, ri, tol=1e-12) for ri in r])

    w = grid.weights
    u = project_mass(grid, np.abs(u0))
    e = I_energy(grid, u, beta)
    tau = opts.tau
    energies = [e]
    res = np.inf
    it = 0
    for it in range(1, opts.max_iter + 1):
        g = I_gradient(grid, u, beta)
        lam = (g * u) @ w  # masses are 1
        res = float(np.max(np.sqrt(((g - lam[:, None] * u) ** 2) @ w)))
        if res < opts.tol:
            it -= 1
            break
        pg = prec(g)
        pu = prec(u)
        # tangent direction in the preconditioned metric
        d = -(pg - (((pg * u) @ w) / ((pu * u) @ w))[:, None] * pu)
        while True:
            un = project_mass(grid, np.abs(u + tau * d))
            en = I_energy(grid, un, beta)
            if en <= e + min(1e-12, 64 * np.finfo(float).eps * max(1.0, abs(e))):
                break
            tau *= 0.5
            if tau < opts.min_tau:
                raise ConvergenceError(f"step size collapsed at iteration {it} (residual {res:.3e})",
                                       residual=res, iterations=it, trace=energies)
        u, e = un, en
        energies.append(e)
    else:
        raise ConvergenceError(f"normalized gradient flow did not converge in {opts.max_iter} iterations "
                               f"(residual {res:.3e})", residual=res, iterations=opts.max_iter, trace=energies)
    return u, e, it, energies


def solve_mass_ground_state(grid: Grid, beta: float, opts: MassOptions | None = None,
                            initial: np.ndarray | None = None) -> MassResult:
    """Lowest-I state over several starts (or from ``initial``); ties go to the lower start index."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    opts = MassOptions() if opts is None else opts
    starts = [("given", grid.check_state(initial))] if initial is not None else \
        initial_states(grid, 2, opts.start_count, opts.seed)
    best = None
    errors = []
    start_energies = []
    for idx, (kind, u0) in enumerate(starts):
        try:
            u, e, it, hist = _flow(grid, u0, beta, opts)
        except ConvergenceError as exc:
            errors.append(f"start {idx} ({kind}): {exc}")
            start_energies.append(None)
            continue
        start_energies.append(float(e))
        if best is None or e < best[1]:
            best = (u, e, it, hist, idx)
    if best is None:
        raise ConvergenceError("no start of the normalized gradient flow converged: " + "; ".join(errors))
    u, e, it, hist, idx = best
    mult = multipliers(grid, u, beta)
    return MassResult(u, mult, e, masses(grid, u), stationarity_residual(grid, u, beta, mult), it, idx,
                      coupling_integral(grid, u), hist, start_energies)


@dataclass
class MassPolarizationReport:
    masses_polarized: np.ndarray
    I_polarized: float
    I_original: float
    coupling_polarized: float
    coupling_original: float

    @property
    def mass_error(self) -> float:
        return float(np.max(np.abs(self.masses_polarized - 1.0)))

    @property
    def coupling_gap(self) -> float:
        return abs(self.coupling_polarized - self.coupling_original)

    @property
    def energy_ok(self) -> bool:
        return self.I_polarized <= self.I_original + 1e-12

    def to_dict(self) -> dict:
        return {"mass_error": self.mass_error, "I_polarized": self.I_polarized, "I_original": self.I_original,
                "energy_ok": self.energy_ok, "coupling_gap": self.coupling_gap}


def mass_polarization_check(grid: Grid, state: np.ndarray, beta: float, H: HalfSpace) -> MassPolarizationReport:
    """Masses, energy and coupling integral of (u_H, v_Ĥ) against (u, v)."""
    s = grid.check_state(state)
    p = polarize_pair(s, H)
    cp = grid.integrate(p[0] ** 2 * p[1] ** 2)
    co = grid.integrate(s[0] ** 2 * s[1] ** 2)
    return MassPolarizationReport(masses(grid, p), I_energy(grid, p, beta), I_energy(grid, s, beta), cp, co)


def coupling_integral(grid: Grid, state: np.ndarray) -> float:
    s = grid.check_state(state)
    return grid.integrate(s[0] ** 2 * s[1] ** 2)
