"""Polarization, dominance and foliated Schwarz symmetry on reflection-exact grids.

On a polar grid with Nθ angular cells the admissible half-spaces are
``H_m = {x : x·ν_m >= 0}`` with inward normal ``ν_m`` at angle ``2πm/Nθ``.
Their boundary lines sit at ``2πm/Nθ + π/2``, so the reflection is the index
map ``θ_j -> θ_{(2m + Nθ/2 - j) mod Nθ}`` on every ring, with no interpolation.
Cartesian grids only admit the mid-lines (and the diagonals of a square).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .energy import Problem, nonlinear_integral, quad_norms
from .errors import GridMismatchError
from .grid import Grid
from .model import ModelP

IN_H, ON_BOUNDARY, IN_COMPLEMENT = 1, 0, -1


@dataclass(frozen=True, eq=False)
class HalfSpace:
    grid: Grid
    normal_angle: float
    perm: np.ndarray  # σ_H as an index permutation
    side: np.ndarray  # +1 in H, 0 on ∂H, -1 in the complement
    label: str = ""

    def complement(self) -> HalfSpace:
        """Closure of the complementary half-space; same reflection."""
        ang = (self.normal_angle + np.pi) % (2 * np.pi)
        return HalfSpace(self.grid, ang, self.perm, -self.side, self.label + "^c")

    def reflect(self, f: np.ndarray) -> np.ndarray:
        return np.asarray(f)[..., self.perm]

    @property
    def normal(self) -> np.ndarray:
        return np.array([np.cos(self.normal_angle), np.sin(self.normal_angle)])

    def contains_direction(self, angle: float) -> bool:
        """True when the unit vector at ``angle`` lies in the interior of H."""
        return bool(np.cos(angle - self.normal_angle) > 1e-12)


def _polar_half_space(grid: Grid, m: int) -> HalfSpace:
    nr, nt = grid.shape
    j = np.arange(nt)
    jr = (2 * m + nt // 2 - j) % nt
    d = (j - m) % nt
    side_ring = np.where((4 * d < nt) | (4 * d > 3 * nt), IN_H, np.where((4 * d == nt) | (4 * d == 3 * nt),
                                                                        ON_BOUNDARY, IN_COMPLEMENT))
    base = np.arange(nr)[:, None] * nt
    perm = (base + jr[None, :]).reshape(-1)
    side = np.tile(side_ring, nr).astype(np.int8)
    perm.setflags(write=False)
    side.setflags(write=False)
    return HalfSpace(grid, 2 * np.pi * m / nt, perm, side, f"polar_{m}")


def _cartesian_half_spaces(grid: Grid) -> list[HalfSpace]:
    out = []
    if grid.kind == "interval":
        n = grid.size
        idx = np.arange(n)
        perm = n - 1 - idx
        side = np.sign(idx - (n - 1) / 2.0).astype(np.int8)  # H = right half
        maps = [(0.0, perm, side, "x_mid")]
    else:
        nx, ny = grid.shape
        I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        flat = lambda a, b: (a * ny + b).reshape(-1)  # noqa: E731
        maps = [
            (0.0, flat(nx - 1 - I, J), np.sign(I - (nx - 1) / 2.0), "x_mid"),
            (np.pi / 2, flat(I, ny - 1 - J), np.sign(J - (ny - 1) / 2.0), "y_mid"),
        ]
        lx, ly = grid.spec.geometry
        if nx == ny and lx == ly:
            # diagonal through the centre: (i, j) -> (j, i); anti-diagonal: (i, j) -> (n-1-j, n-1-i)
            maps.append((-np.pi / 4, flat(J, I), np.sign(I - J), "diag"))
            maps.append((np.pi / 4, flat(nx - 1 - J, nx - 1 - I), np.sign(I + J - (nx - 1)), "antidiag"))
    for ang, perm, side, name in maps:
        perm = np.asarray(perm).reshape(-1)
        side = np.asarray(side).reshape(-1).astype(np.int8)
        perm.setflags(write=False)
        side.setflags(write=False)
        h = HalfSpace(grid, ang, perm, side, name)
        out.extend([h, h.complement()])
    return out


def half_space_family(grid: Grid) -> list[HalfSpace]:
    """All grid-exact half-spaces whose boundary passes through the domain centre."""
    if grid.is_polar:
        nt = grid.shape[1]
        fam = [_polar_half_space(grid, m) for m in range(nt)]
    else:
        fam = _cartesian_half_spaces(grid)
    for h in fam:
        if not np.array_equal(h.perm[h.perm], np.arange(grid.size)):
            raise AssertionError(f"reflection {h.label} is not an involution")
    return fam


def half_space_at(grid: Grid, m: int) -> HalfSpace:
    if not grid.is_polar:
        raise GridMismatchError("indexed half-spaces exist on polar grids only")
    return _polar_half_space(grid, m % grid.shape[1])


def polarize(field: np.ndarray, H: HalfSpace) -> np.ndarray:
    """u_H = max(u, u∘σ_H) on H, min(u, u∘σ_H) off H."""
    u = H.grid.check_field(field)
    ur = u[H.perm]
    return np.where(H.side >= 0, np.maximum(u, ur), np.minimum(u, ur))


def two_point_table(model: ModelP, values) -> np.ndarray:
    s = np.sort(np.asarray(values, dtype=float))
    A, C = np.meshgrid(s, s, indexing="ij")
    return model.value_field(np.stack([A.ravel(), C.ravel()])).reshape(A.shape)


def two_point_inequality_scan(model: ModelP, values) -> float:
    """max over (a,b,c,d) of P(a,c)+P(b,d) − P(max(a,b),min(c,d)) − P(min(a,b),max(c,d))."""
    if model.k != 2:
        raise ValueError("the two-point inequality concerns two-component models")
    table = np.ascontiguousarray(two_point_table(model, values))
    return float(kernels.two_point_max_violation(table))


@dataclass
class PolarizationComparison:
    e_polarized: float
    e_original: float
    quad_polarized: np.ndarray
    quad_original: np.ndarray
    p_polarized: float
    p_original: float

    @property
    def difference(self) -> float:
        return self.e_polarized - self.e_original

    def to_dict(self) -> dict:
        return {
            "e_polarized": self.e_polarized,
            "e_original": self.e_original,
            "difference": self.difference,
            "quad_polarized": [float(x) for x in self.quad_polarized],
            "quad_original": [float(x) for x in self.quad_original],
            "p_polarized": self.p_polarized,
            "p_original": self.p_original,
        }


def polarize_pair(state: np.ndarray, H: HalfSpace) -> np.ndarray:
    """(u_H, v_Ĥ)."""
    return np.stack([polarize(state[0], H), polarize(state[1], H.complement())])


def polarized_energy_compare(problem: Problem, state: np.ndarray, H: HalfSpace) -> PolarizationComparison:
    if problem.k != 2:
        raise ValueError("polarized energy comparison is defined for two components")
    u = problem.check_state(state)
    up = polarize_pair(u, H)
    qo, qp = quad_norms(problem, u), quad_norms(problem, up)
    po, pp = nonlinear_integral(problem, u), nonlinear_integral(problem, up)
    return PolarizationComparison(0.5 * float(np.sum(qp)) - pp, 0.5 * float(np.sum(qo)) - po, qp, qo, pp, po)


def dominance_status(field: np.ndarray, H: HalfSpace, tol: float = 0.0) -> tuple[str, bool]:
    """('dominant' | 'subordinate' | 'neither', degenerate) on H ∩ Ω."""
    u = H.grid.check_field(field)
    ins = H.side > 0
    diff = u[ins] - u[H.perm][ins]
    dom = bool(np.all(diff >= -tol))
    sub = bool(np.all(diff <= tol))
    if dom:
        return "dominant", sub
    if sub:
        return "subordinate", False
    return "neither", False


def radial_deviation(grid: Grid, field: np.ndarray) -> float:
    """||u − angular average||_w / ||u||_w."""
    if not grid.is_polar:
        raise GridMismatchError("radial deviation needs a polar grid")
    u = grid.check_field(field)
    nrm = grid.norm(u)
    return 0.0 if nrm == 0 else grid.norm(u - grid.ring_average(u)) / nrm


@dataclass
class SymmetryReport:
    axis_angle: float
    degenerate: bool
    axial_asymmetry: float
    monotonicity_violation: float
    dominant_fraction: float
    radial_deviation: float
    ring_radii: np.ndarray = field(repr=False)
    profiles: np.ndarray = field(repr=False)  # (nr, Nθ) ring values ordered by angle from the nearest grid axis
    profile_angles: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "axis_angle": float(self.axis_angle),
            "degenerate": bool(self.degenerate),
            "axial_asymmetry": float(self.axial_asymmetry),
            "monotonicity_violation": float(self.monotonicity_violation),
            "dominant_fraction": float(self.dominant_fraction),
            "radial_deviation": float(self.radial_deviation),
        }

    def profiles_csv(self) -> str:
        head = "r," + ",".join(f"{a:.12g}" for a in self.profile_angles)
        rows = [f"{r!r}," + ",".join(repr(float(x)) for x in row) for r, row in zip(self.ring_radii, self.profiles)]
        return "\n".join([head, *rows]) + "\n"


def _ring_spectrum(grid: Grid, u: np.ndarray):
    nr, nt = grid.shape
    U = u.reshape(nr, nt)
    a = np.fft.rfft(U, axis=1) / nt  # a_k for k = 0..nt/2
    mult = np.full(a.shape[1], 2.0)
    mult[0] = 1.0
    mult[-1] = 1.0  # Nyquist (nt even)
    return U, a, mult


def _trig_eval(a: np.ndarray, mult: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Real trigonometric interpolant Σ mult_k Re(a_k e^{ikθ}); the Nyquist mode uses cos only."""
    k = np.arange(a.shape[-1])
    ph = np.exp(1j * np.outer(k, angles))
    return np.real((a * mult) @ ph)


def foliated_schwarz_metrics(grid: Grid, field: np.ndarray, n_side: int | None = None,
                             dominance_tol: float | None = None) -> SymmetryReport:
    """Axis, axial asymmetry and angular monotonicity of a field on a polar grid.

    Ring values between nodes come from the trigonometric interpolant of each
    ring.  The axis maximizes Σ_rings w_r ũ(r, θ): best grid angle, parabola
    through its neighbours, then Newton on the interpolant.  Monotonicity
    counts positive increments of ũ moving away from the axis on both sides,
    normalized by the total ring oscillation.
    """
    if not grid.is_polar:
        raise GridMismatchError("foliated Schwarz metrics need a polar grid")
    u = grid.check_field(field)
    nr, nt = grid.shape
    U, a, mult = _ring_spectrum(grid, u)
    wr = grid.weights.reshape(nr, nt).sum(axis=1)
    A = wr @ a  # weighted spectrum of the axis objective
    k = np.arange(a.shape[1])
    unorm = grid.norm(u)
    rad = radial_deviation(grid, u)
    modes = np.abs(A[1:]) * mult[1:]
    degenerate = unorm == 0 or rad <= 1e-10 or not np.any(modes > 1e-12 * (abs(A[0]) + np.max(modes)))

    def obj(th):
        return _trig_eval(A[None, :], mult, np.atleast_1d(th))[0]

    if degenerate:
        alpha = 0.0
    else:
        vals = obj(grid.thetas)
        j = int(np.argmax(vals))
        f0, fm, fp = vals[j], vals[(j - 1) % nt], vals[(j + 1) % nt]
        den = fm - 2 * f0 + fp
        alpha = grid.thetas[j] + (0.5 * (fm - fp) / den * grid.dtheta if den < 0 else 0.0)
        for _ in range(20):
            e = np.exp(1j * k * alpha)
            d1 = np.real(np.sum(A * mult * 1j * k * e))
            d2 = np.real(np.sum(A * mult * -(k**2) * e))
            if not d2 < 0:
                break
            step = -d1 / d2
            alpha += step
            if abs(step) < 1e-15:
                break
        alpha = float(alpha % (2 * np.pi))
        if 2 * np.pi - alpha < 1e-12:
            alpha = 0.0

    # axial asymmetry through the reflected spectrum b_k = conj(a_k) e^{-2ikα}
    b = np.conj(a) * np.exp(-2j * k * alpha)[None, :]
    diff2 = nt * np.sum(mult * np.abs(a - b) ** 2, axis=1)  # Σ_j |u - Ru|^2 per ring
    w_node = grid.weights.reshape(nr, nt)[:, 0]
    asym = float(np.sqrt(np.sum(w_node * diff2))) / unorm if unorm > 0 else 0.0

    # monotonicity along both half-circles from the axis
    n_side = nt if n_side is None else n_side
    phi = np.linspace(0.0, np.pi, n_side + 1)
    plus = _trig_eval(a, mult, alpha + phi)
    minus = _trig_eval(a, mult, alpha - phi)
    inc = np.sum(np.maximum(np.diff(plus, axis=1), 0), axis=1) + np.sum(np.maximum(np.diff(minus, axis=1), 0), axis=1)
    osc = U.max(axis=1) - U.min(axis=1)
    denom = float(np.sum(wr * 2 * osc))
    mono = float(np.sum(wr * inc)) / denom if denom > 0 else 0.0

    # dominance across the family members containing the axis
    tol = 1e-9 * float(np.max(np.abs(u))) if dominance_tol is None else dominance_tol
    fam = half_space_family(grid)
    members = [h for h in fam if h.contains_direction(alpha)]
    dom = [dominance_status(u, h, tol)[0] == "dominant" for h in members]
    frac = float(np.mean(dom)) if dom else 1.0

    j0 = int(np.round(alpha / grid.dtheta)) % nt
    order = (j0 + np.concatenate([np.arange(0, nt // 2 + 1), -np.arange(1, nt // 2)])) % nt
    ang = np.concatenate([np.arange(0, nt // 2 + 1), -np.arange(1, nt // 2)]) * grid.dtheta
    return SymmetryReport(alpha, bool(degenerate), asym, mono, frac, rad, grid.radii.copy(), U[:, order], ang)


def antipodality_check(report_u: SymmetryReport, report_v: SymmetryReport) -> float | None:
    """|angle(p_u) − angle(−p_v)| folded to [0, π]; None when an axis is degenerate."""
    if report_u.degenerate or report_v.degenerate:
        return None
    d = (report_u.axis_angle - (report_v.axis_angle + np.pi)) % (2 * np.pi)
    return float(min(d, 2 * np.pi - d))


def gradient_energy(grid: Grid, field: np.ndarray) -> float:
    """Stencil form of ∫|∇u|², i.e. <−Δ_h u, u>_w."""
    return grid.dirichlet_form(field)


def lemma_invariance_errors(grid: Grid, field: np.ndarray, H: HalfSpace, radial_g=None) -> dict:
    """Relative changes of the gradient energy and of radial integrals under polarization."""
    u = grid.check_field(field)
    uh = polarize(u, H)
    ge, geh = gradient_energy(grid, u), gradient_energy(grid, uh)
    if radial_g is None:
        radial_g = [lambda r, s: s**2, lambda r, s: np.abs(s) ** 4 * (1 + r**2), lambda r, s: np.exp(-r) * s]
    rad = []
    for G in radial_g:
        i0 = grid.integrate(G(grid.radius, u))
        i1 = grid.integrate(G(grid.radius, uh))
        rad.append(abs(i1 - i0) / max(abs(i0), 1e-300))
    return {"gradient": (geh - ge) / ge if ge else 0.0, "radial": max(rad), "gradient_before": ge,
            "gradient_after": geh}
