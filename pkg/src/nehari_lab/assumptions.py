"""Verdicts on the structural hypotheses (P0)-(P6), (a1)-(a3), (H1)-(H5).

Power-family models are decided by parameter inequalities (``closed_form``).
Every other model is probed on a log-spaced lattice of the positive cone and
its verdicts are labeled ``sampled``; a failed verdict always carries the
lattice point where the check broke.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .grid import Grid
from .linalg import lambda1_estimate
from .model import ModelP, Potential, PowerCouplingModel, SeparatedModel, gershgorin_nsd

SAMPLE_MAGNITUDES = np.logspace(-3, 3, 17)
MAX_SAMPLES = 100_000
# relative slack for sampled sign checks
SAMPLE_RTOL = 1e-10


@dataclass
class Verdict:
    passed: bool | None  # None: not applicable to this model
    method: str  # closed_form | sampled
    witness: list[float] | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {"passed": self.passed, "method": self.method, "witness": self.witness, "detail": self.detail}


@dataclass
class AssumptionReport:
    verdicts: dict[str, Verdict]
    alpha: float
    gamma: float | None = None
    lambda1: float | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Verdict:
        return self.verdicts[name]

    @property
    def failures(self) -> list[str]:
        return [k for k, v in self.verdicts.items() if v.passed is False]

    @property
    def all_passed(self) -> bool:
        return not self.failures

    def existence_ok(self) -> bool:
        """(P0)-(P4), the hypotheses of the existence result."""
        return all(self.verdicts[n].passed is not False for n in ("P0", "P1", "P2", "P3", "P4"))

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "gamma": self.gamma,
            "lambda1": self.lambda1,
            "all_passed": self.all_passed,
            "failures": self.failures,
            "verdicts": {k: v.to_dict() for k, v in self.verdicts.items()},
            **self.extra,
        }


def sample_lattice(k: int, include_zero: bool = False) -> np.ndarray:
    """Cone points on a tensor lattice of log-spaced magnitudes, shape (k, m).

    The per-axis resolution drops below 17 when 17^k would exceed the cap.
    """
    mags = SAMPLE_MAGNITUDES
    per_axis = len(mags) + int(include_zero)
    while per_axis**k > MAX_SAMPLES:
        per_axis -= 1
    axis = np.geomspace(mags[0], mags[-1], per_axis - int(include_zero))
    if include_zero:
        axis = np.concatenate([[0.0], axis])
    pts = np.array(list(itertools.product(axis, repeat=k))).T
    return pts


def _first_bad(pts: np.ndarray, bad: np.ndarray) -> list[float] | None:
    idx = np.flatnonzero(bad)
    return None if idx.size == 0 else [float(x) for x in pts[:, idx[0]]]


def _p0(grid: Grid, potentials: np.ndarray, c: np.ndarray) -> tuple[Verdict, float]:
    lam1 = lambda1_estimate(grid)
    worst = None
    for i in range(len(c)):
        vmin = float(np.min(potentials[i]))
        if not np.all(np.isfinite(potentials[i])):
            return Verdict(False, "closed_form", None, f"V_{i + 1} is not finite"), lam1
        if not vmin > -c[i] * lam1:
            worst = worst or Verdict(False, "closed_form", [float(i), vmin],
                                     f"inf V_{i + 1} = {vmin:.6g} <= -c_{i + 1} lambda1 = {-c[i] * lam1:.6g}")
    if worst:
        return worst, lam1
    return Verdict(True, "closed_form", None, f"lambda1(grid) = {lam1:.8g}"), lam1


def _power_verdicts(m: PowerCouplingModel, alpha: float) -> dict[str, Verdict]:
    k, p = m.k, m.p
    q, lam, B = np.array(m.q), np.array(m.lam), m.beta_matrix
    cf = "closed_form"
    out: dict[str, Verdict] = {}

    def pair_witness(i, j):
        u = np.zeros(k)
        u[i] = u[j] = 1.0
        return [float(x) for x in u]

    viol = m.parameter_violations()
    out["parameters"] = Verdict(not viol, cf, None, "; ".join(str(v) for v in viol) or "parameter inequalities hold")
    if viol:
        out["parameters"].witness = [float(x) for x in viol[0].get("pair", [viol[0].get("i", 0)])]

    growth_bad = [(i, j) for i in range(k) for j in range(k) if i != j and B[i, j] != 0 and q[i] + q[j] > p]
    ok = p > 2 and bool(np.all(q >= 2)) and not growth_bad
    out["P1"] = Verdict(ok, cf, pair_witness(*growth_bad[0]) if growth_bad else None,
                        "Hessian growth exponents q_i+q_j-2 <= p-2" if ok else "Hessian grows faster than |u|^(p-2)")
    out["P2"] = Verdict(bool(np.all(q > 1)) and p > 1, cf, None, "q_i > 1 and p > 1")
    neg = [(i, j) for i in range(k) for j in range(k) if i != j and B[i, j] < 0]
    nonpos_lam = [i for i in range(k) if not lam[i] > 0]
    out["P3"] = Verdict(not neg and not nonpos_lam, cf,
                        pair_witness(*neg[0]) if neg else ([1.0 if t == nonpos_lam[0] else 0.0 for t in range(k)]
                                                            if nonpos_lam else None),
                        "beta_ij >= 0 and lambda_i > 0")

    # M = diag((alpha-(p-2)) lam_i u_i^p) - h with h the interaction matrix.
    if alpha > p - 2 and np.any(lam > 0):
        i = int(np.argmax(lam > 0))
        out["P4"] = Verdict(False, cf, [1.0 if t == i else 0.0 for t in range(k)],
                            f"alpha = {alpha} exceeds p-2 = {p - 2}: M_ii > 0 on the axis")
    else:
        bad = neg + [(i, j) for i in range(k) for j in range(k) if i != j and B[i, j] > 0 and p < q[i] + q[j]]
        out["P4"] = Verdict(not bad, cf, pair_witness(*bad[0]) if bad else None,
                            "Gershgorin discs of -h lie in (-inf, 0] since p >= q_i+q_j"
                            if not bad else "Gershgorin bound fails; witness has a positive M eigenvalue")
    out["P5"] = Verdict(not neg, cf, pair_witness(*neg[0]) if neg else None, "P_ii on {u_i=0} is -q_i(q_i-1)0^(q_i-2)S_i <= 0")
    if k == 2:
        out["P6"] = Verdict(bool(B[0, 1] > 0), cf, None if B[0, 1] > 0 else [1.0, 1.0],
                            f"P_uv = -q1 q2 beta u^(q1-1) v^(q2-1), beta_12 = {B[0, 1]:.6g}")
        out["H5"] = Verdict(bool(B[0, 1] > 0), cf, None if B[0, 1] > 0 else [1.0, 1.0], "H_uv > 0 iff beta_12 > 0")
    else:
        out["P6"] = Verdict(None, cf, None, "only defined for two components")
        out["H5"] = Verdict(None, cf, None, "only defined for two components")

    gamma = p - 2
    out["a1"] = Verdict(p > 2, cf, None, "f_i' = lambda_i (p-1) s^(p-2)")
    out["a2"] = Verdict(p > 2, cf, None, "f_i(s)/s = lambda_i s^(p-2) -> 0")
    out["a3"] = Verdict(bool(np.all(lam > 0)) and gamma > 0, cf, None,
                        f"gamma = p-2 = {gamma:g}, equality (1+gamma) f s = f' s^2 for s > 0")
    out["H1"] = Verdict(not growth_bad and 0 < alpha <= gamma and bool(np.all(q >= 2)), cf,
                        pair_witness(*growth_bad[0]) if growth_bad else None, f"alpha = {alpha:g} <= gamma = {gamma:g}")
    out["H2"] = Verdict(bool(np.all(q > 1)), cf, None, "q_i > 1")
    out["H3"] = Verdict(not neg, cf, pair_witness(*neg[0]) if neg else None, "beta_ij >= 0")
    bad_h4 = neg + [(i, j) for i in range(k) for j in range(k) if i != j and B[i, j] > 0 and p < q[i] + q[j]]
    out["H4"] = Verdict(not bad_h4 and alpha <= gamma, cf, pair_witness(*bad_h4[0]) if bad_h4 else None,
                        "h_ii - sum |h_ij| = sum_j beta_ij q_i (p-q_i-q_j) u_i^q_i u_j^q_j >= 0")
    return out


def _growth_verdict(values: np.ndarray, pts: np.ndarray, p: float) -> Verdict:
    """|values| <= C(1 + sum |u|^(p-2)): C fitted on the inner lattice, checked on the outer shell."""
    scale = 1.0 + np.sum(np.abs(pts) ** (p - 2), axis=0)
    ratio = np.max(np.abs(values).reshape(-1, pts.shape[1]), axis=0) / scale
    top = np.max(pts, axis=0)
    inner = top <= 0.1 * np.max(top)
    C = float(np.max(ratio[inner])) if np.any(inner) else float(np.max(ratio))
    bad = ratio > 2.0 * C + 1e-300
    if not np.all(np.isfinite(values)):
        bad = bad | ~np.all(np.isfinite(values.reshape(-1, pts.shape[1])), axis=0)
    return Verdict(not np.any(bad), "sampled", _first_bad(pts, bad), f"fitted C = {C:.4g}")


def _sampled_verdicts(m: ModelP, alpha: float) -> dict[str, Verdict]:
    k = m.k
    sm = "sampled"
    out: dict[str, Verdict] = {}
    pts = sample_lattice(k)
    g = m.grad_field(pts)
    h = m.hess_field(pts)
    p = getattr(m, "p", None)
    if p is None:
        p = 2.0 + alpha

    out["parameters"] = Verdict(None, sm, None, "parameter inequalities apply to the power family only")
    out["P1"] = _growth_verdict(h.reshape(k * k, -1), pts, p)

    face = sample_lattice(k, include_zero=True)
    gf = m.grad_field(face)
    vals0 = m.value_field(np.zeros((k, 1)))
    bad = np.zeros(face.shape[1], dtype=bool)
    for i in range(k):
        on = face[i] == 0.0
        bad |= on & (np.abs(gf[i]) > SAMPLE_RTOL * (1.0 + np.max(np.abs(gf), axis=0)))
    if abs(vals0[0]) > 0:
        bad[0] = True
    out["P2"] = Verdict(not np.any(bad), sm, _first_bad(face, bad), "P(0)=0 and P_i vanishes on {u_i = 0}")

    bad = np.zeros(pts.shape[1], dtype=bool)
    for i in range(k):
        axis_pt = np.zeros_like(pts)
        axis_pt[i] = pts[i]
        ga = m.grad_field(axis_pt)[i] * pts[i]
        lhs = g[i] * pts[i]
        bad |= (lhs > ga + SAMPLE_RTOL * np.abs(ga)) | (ga == 0)
    out["P3"] = Verdict(not np.any(bad), sm, _first_bad(pts, bad), "P_i(u)u_i <= P_i(u_i e_i)u_i != 0")

    M = (1.0 + alpha) * np.einsum("ij,in->ijn", np.eye(k), g * pts) - h * pts[:, None] * pts[None, :]
    eig = np.linalg.eigvalsh(np.moveaxis(M, -1, 0))
    # cancellation scale: size of the two terms before subtraction
    terms = (1.0 + alpha) * np.abs(g * pts)[:, None, :] * np.eye(k)[:, :, None] + np.abs(h * pts[:, None] * pts[None, :])
    scale = np.max(terms, axis=(0, 1)) + 1e-300
    bad = eig[:, -1] > SAMPLE_RTOL * scale
    out["P4"] = Verdict(not np.any(bad), sm, _first_bad(pts, bad),
                        f"max eigenvalue of M over lattice = {float(np.max(eig[:, -1])):.3e}")

    hf = m.hess_field(face)
    bad = np.zeros(face.shape[1], dtype=bool)
    for i in range(k):
        bad |= (face[i] == 0.0) & (hf[i, i] > SAMPLE_RTOL * (1.0 + np.abs(hf[i, i])))
    out["P5"] = Verdict(not np.any(bad), sm, _first_bad(face, bad), "P_ii <= 0 on {u_i = 0}")

    if k == 2:
        bad = ~(h[0, 1] < 0)
        out["P6"] = Verdict(not np.any(bad), sm, _first_bad(pts, bad), "P_uv < 0 for s, t > 0")
    else:
        out["P6"] = Verdict(None, sm, None, "only defined for two components")

    if isinstance(m, SeparatedModel):
        out.update(_separated_verdicts(m, alpha, pts, face))
    else:
        for name in ("a1", "a2", "a3", "H1", "H2", "H3", "H4"):
            out[name] = Verdict(None, sm, None, "model is not of the separated form F_i - H")
        out["H5"] = Verdict(None, sm, None, "model is not of the separated form F_i - H")
    return out


def _separated_verdicts(m: SeparatedModel, alpha: float, pts: np.ndarray, face: np.ndarray) -> dict[str, Verdict]:
    k, p, gamma = m.k, m.p, m.default_gamma
    sm = "sampled"
    out: dict[str, Verdict] = {}
    s = SAMPLE_MAGNITUDES
    fs = np.stack([m.f[i](s) for i in range(k)])
    fps = np.stack([m.fprime[i](s) for i in range(k)])
    out["a1"] = _growth_verdict(fps, s[None, :], p)
    tiny = np.array([1e-3, 1e-4, 1e-5, 1e-6])
    r = np.abs(np.stack([m.f[i](tiny) for i in range(k)])) / tiny
    ok = bool(np.all(np.diff(r, axis=1) <= 1e-14 * (1 + r[:, :-1])) and np.all(r[:, -1] <= 1e-2 * (1 + r[:, 0])))
    out["a2"] = Verdict(ok, sm, None if ok else [float(tiny[-1])], "f_i(s)/s decreasing toward 0 as s -> 0")
    lhs = (1.0 + gamma) * fs * s
    rhs = fps * s**2
    bad = np.any(~(lhs > 0) | (lhs > rhs + SAMPLE_RTOL * np.abs(rhs)), axis=0)
    out["a3"] = Verdict(gamma > 0 and 2 + gamma <= p and not np.any(bad), sm,
                        _first_bad(s[None, :], bad), f"gamma = {gamma:g}")

    Hg = np.asarray(m.H_grad(pts), dtype=float)
    Hh = np.asarray(m.H_hess(pts), dtype=float)
    v = _growth_verdict(Hh.reshape(k * k, -1), pts, 2.0 + alpha)
    v.passed = bool(v.passed) and 0 < alpha <= gamma
    v.detail += f"; alpha = {alpha:g}, gamma = {gamma:g}"
    out["H1"] = v

    Hgf = np.asarray(m.H_grad(face), dtype=float)
    bad = np.zeros(face.shape[1], dtype=bool)
    for i in range(k):
        bad |= (face[i] == 0.0) & (np.abs(Hgf[i]) > SAMPLE_RTOL * (1.0 + np.max(np.abs(Hgf), axis=0)))
    if abs(float(np.asarray(m.H(np.zeros((k, 1))))[0])) > 0:
        bad[0] = True
    out["H2"] = Verdict(not np.any(bad), sm, _first_bad(face, bad), "H(0)=0 and H_i vanishes on {u_i = 0}")
    bad = np.any(Hg < 0, axis=0)
    out["H3"] = Verdict(not np.any(bad), sm, _first_bad(pts, bad), "H_i >= 0")
    hmat = (1.0 + alpha) * np.einsum("ij,in->ijn", np.eye(k), Hg * pts) - Hh * pts[:, None] * pts[None, :]
    hm = np.moveaxis(hmat, -1, 0)
    eig = np.linalg.eigvalsh(hm)
    terms = (1.0 + alpha) * np.abs(Hg * pts)[:, None, :] * np.eye(k)[:, :, None] + np.abs(Hh * pts[:, None] * pts[None, :])
    scale = np.max(terms, axis=(0, 1)) + 1e-300
    bad = eig[:, 0] < -SAMPLE_RTOL * scale
    out["H4"] = Verdict(not np.any(bad), sm, _first_bad(pts, bad), "h positive semidefinite")
    if k == 2:
        bad = ~(Hh[0, 1] > 0)
        out["H5"] = Verdict(not np.any(bad), sm, _first_bad(pts, bad), "H_uv > 0 for s, t > 0")
    else:
        out["H5"] = Verdict(None, sm, None, "only defined for two components")
    return out


def check_assumptions(
    model: ModelP,
    grid: Grid,
    potentials: Sequence[Potential] | np.ndarray,
    c: Sequence[float],
    alpha: float | None = None,
) -> AssumptionReport:
    """Decide every hypothesis for ``model`` on ``grid`` with potentials V_i and diffusions c_i."""
    c = np.asarray(c, dtype=float)
    if c.shape != (model.k,) or not np.all(c > 0):
        raise ValueError(f"diffusion constants must be {model.k} positive reals")
    V = realize_potentials(grid, potentials, model.k)
    alpha = model.default_alpha if alpha is None else float(alpha)
    p0, lam1 = _p0(grid, V, c)
    if isinstance(model, PowerCouplingModel):
        verdicts = _power_verdicts(model, alpha)
        gamma = model.p - 2
        # the Gershgorin certificate, evaluated once at a concrete point as a cross-check
        M = -_interaction_matrix(model, np.ones(model.k)) if alpha == model.p - 2 else None
        extra = {"gershgorin_at_ones": gershgorin_nsd(M) if M is not None else None}
    else:
        verdicts = _sampled_verdicts(model, alpha)
        gamma = getattr(model, "default_gamma", None)
        extra = {}
    verdicts = {"P0": p0, **verdicts}
    order = ["P0", "P1", "P2", "P3", "P4", "P5", "P6", "a1", "a2", "a3", "H1", "H2", "H3", "H4", "H5", "parameters"]
    return AssumptionReport({n: verdicts[n] for n in order}, alpha, gamma, lam1, extra)


def _interaction_matrix(m: PowerCouplingModel, u: np.ndarray) -> np.ndarray:
    """h_ij = δ_ij (1+α) H_i u_i − H_ij u_i u_j at α = p−2 for the power family."""
    q, B = np.array(m.q), m.beta_matrix
    a = u**q
    S = B @ a
    h = -np.outer(q, q) * B * np.outer(a, a)
    np.fill_diagonal(h, q * (m.p - q) * a * S)
    return h


def realize_potentials(grid: Grid, potentials, k: int) -> np.ndarray:
    """Stack potentials (Potential objects, arrays or scalars) into a (k, n) array."""
    if isinstance(potentials, np.ndarray) and potentials.ndim == 2:
        V = np.asarray(potentials, dtype=float)
    else:
        rows = []
        for pot in potentials:
            if isinstance(pot, Potential):
                rows.append(pot.realize(grid))
            else:
                rows.append(np.broadcast_to(np.asarray(pot, dtype=float), (grid.size,)))
        V = np.array(rows, dtype=float)
    if V.shape != (k, grid.size):
        raise ValueError(f"potentials must have shape ({k}, {grid.size}), got {V.shape}")
    return V
