"""Nonlinearities P on the positive cone and potentials.

Every model is evaluated through its even extension: inputs are replaced by
their absolute values before evaluation, so ``value``, ``gradient`` and
``hessian`` always report the cone data at ``|u|``.  Callers that need the
derivative of the even extension itself (odd in each coordinate) multiply by
``sign(u_i)``.

Field evaluations take a state array of shape ``(k, n)`` and return arrays of
shape ``(n,)``, ``(k, n)`` and ``(k, k, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import Grid


class ModelP:
    """Interface for a nonlinearity P with exact first and second derivatives."""

    k: int

    def value_field(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad_field(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess_field(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def default_alpha(self) -> float:
        raise NotImplementedError

    def _as_points(self, u):
        u = np.asarray(u, dtype=float)
        if not np.all(np.isfinite(u)):
            raise ValueError("non-finite input to the nonlinearity")
        if u.shape[0] != self.k:
            raise ValueError(f"expected {self.k} components, got leading dimension {u.shape[0]}")
        return np.abs(u)


def eval_P(model: ModelP, u_point: Sequence[float]) -> tuple[float, np.ndarray, np.ndarray]:
    """Value, gradient and Hessian of P at a single point of R^k."""
    pt = np.asarray(u_point, dtype=float).reshape(model.k, 1)
    return (
        float(model.value_field(pt)[0]),
        model.grad_field(pt)[:, 0],
        model.hess_field(pt)[:, :, 0],
    )


@dataclass(frozen=True)
class PowerCouplingModel(ModelP):
    """P(u) = Σ λ_i/p |u_i|^p − ½ Σ_{i≠j} β_ij |u_i|^{q_i} |u_j|^{q_j}.

    The ½ makes the gradient match the PDE right-hand side
    λ_i u_i^{p−1} − q_i u_i^{q_i−1} Σ_{j≠i} β_ij u_j^{q_j} term by term.
    """

    p: float
    lam: tuple[float, ...]
    q: tuple[float, ...]
    beta: tuple[tuple[float, ...], ...]
    k: int = field(init=False)

    def __post_init__(self):
        lam = tuple(float(x) for x in np.atleast_1d(self.lam))
        k = len(lam)
        q = tuple(float(x) for x in np.broadcast_to(np.asarray(self.q, dtype=float), (k,)))
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim == 0:
            beta = float(beta) * (np.ones((k, k)) - np.eye(k))
        if beta.shape != (k, k):
            raise ValueError(f"beta must be {k}x{k}, got shape {beta.shape}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "beta", tuple(tuple(float(x) for x in row) for row in beta))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "_lam", np.array(lam))
        object.__setattr__(self, "_q", np.array(q))
        object.__setattr__(self, "_beta", beta.copy())

    @property
    def beta_matrix(self) -> np.ndarray:
        return self._beta.copy()

    @property
    def default_alpha(self) -> float:
        return self.p - 2.0

    def parameter_violations(self) -> list[dict]:
        """Parameter inequalities λ_i > 0, β symmetric ≥ 0, q_i ≥ 2, p ≥ q_i + q_j."""
        out = []
        for i, li in enumerate(self.lam):
            if not li > 0:
                out.append({"rule": "lambda_i > 0", "i": i, "lambda_i": li})
            if not self.q[i] >= 2:
                out.append({"rule": "q_i >= 2", "i": i, "q_i": self.q[i]})
        B = self._beta
        for i in range(self.k):
            if B[i, i] != 0:
                out.append({"rule": "beta_ii = 0", "i": i, "beta_ii": B[i, i]})
            for j in range(self.k):
                if i == j:
                    continue
                if B[i, j] != B[j, i]:
                    out.append({"rule": "beta_ij = beta_ji", "pair": [i, j]})
                if not B[i, j] >= 0:
                    out.append({"rule": "beta_ij >= 0", "pair": [i, j], "beta_ij": B[i, j]})
                if i < j and not self.p >= self.q[i] + self.q[j]:
                    out.append({"rule": "p >= q_i + q_j", "pair": [i, j], "p": self.p,
                                "q_i+q_j": self.q[i] + self.q[j]})
        if not self.p > 2:
            out.append({"rule": "p > 2", "p": self.p})
        return out

    def satisfies_parameter_rules(self) -> bool:
        return not self.parameter_violations()

    def _pieces(self, u):
        a = self._as_points(u)
        shape = (self.k,) + (1,) * (a.ndim - 1)
        qv = self._q.reshape(shape)
        aq = a**qv
        coupling = np.tensordot(self._beta, aq, axes=(1, 0))  # S_i = Σ_j β_ij a_j^{q_j}
        return a, qv, aq, coupling

    def value_field(self, u):
        a, qv, aq, s = self._pieces(u)
        lam = self._lam.reshape(qv.shape)
        return np.sum(lam / self.p * a**self.p, axis=0) - 0.5 * np.sum(aq * s, axis=0)

    def grad_field(self, u):
        a, qv, aq, s = self._pieces(u)
        lam = self._lam.reshape(qv.shape)
        return lam * a ** (self.p - 1) - qv * a ** (qv - 1) * s

    def hess_field(self, u):
        a, qv, aq, s = self._pieces(u)
        lam = self._lam.reshape(qv.shape)
        d1 = qv * a ** (qv - 1)  # d/da_j of a_j^{q_j}
        h = -self._beta.reshape(self._beta.shape + (1,) * (a.ndim - 1)) * d1[:, None] * d1[None, :]
        diag = lam * (self.p - 1) * a ** (self.p - 2) - qv * (qv - 1) * a ** (qv - 2) * s
        idx = np.arange(self.k)
        h[idx, idx] = diag
        return h

    def scaled(self, c: Sequence[float]) -> PowerCouplingModel:
        """The model P̃(v) = P(v_1/√c_1, …, v_k/√c_k), again a power family."""
        c = np.asarray(c, dtype=float)
        lam = self._lam * c ** (-self.p / 2)
        cq = c ** (-self._q / 2)
        beta = self._beta * cq[:, None] * cq[None, :]
        return PowerCouplingModel(self.p, tuple(lam), self.q, beta)

    def to_dict(self) -> dict:
        return {"family": "power", "k": self.k, "p": self.p, "lambda": list(self.lam), "q": list(self.q),
                "beta": [list(r) for r in self.beta]}


def cubic_preset(beta: float = 1.0, k: int = 2, lam: float | Sequence[float] = 1.0) -> PowerCouplingModel:
    """Cubic BEC-type system as the power family with p=4, q_i=2.

    The PDE reads ``-Δu_i + V_i u_i = λ_i u_i³ − β u_i Σ_{j≠i} u_j²``, the same
    normalization as the mass-constrained system; each pair contributes
    ``+(β/2) ∫ u_i² u_j²`` to the energy, i.e. coupling β/2 in the power family.
    """
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (k,))
    return PowerCouplingModel(4.0, tuple(lam), (2.0,) * k, 0.5 * float(beta))


def quartic_pair_model(beta: float) -> PowerCouplingModel:
    """Energy Σ ∫ (½|∇u_i|² − ¼u_i⁴) + (β/2) ∫ u_1² u_2²: coupling β/2 in the power family."""
    return PowerCouplingModel(4.0, (1.0, 1.0), (2.0, 2.0), 0.5 * float(beta))


@dataclass(frozen=True)
class SeparatedModel(ModelP):
    """P(u) = Σ F_i(u_i) − H(u) from user callables.

    ``F``, ``f``, ``fprime`` are per-component callables acting elementwise on
    arrays (F_i' = f_i).  ``H``, ``H_grad`` and ``H_hess`` take a ``(k, ...)``
    array and return arrays of shape ``(...)``, ``(k, ...)`` and ``(k, k, ...)``.
    ``p`` is the growth exponent, ``alpha`` the constant used for the matrix
    condition and ``gamma`` the one of the superlinearity condition on f_i.
    """

    F: tuple[Callable, ...]
    f: tuple[Callable, ...]
    fprime: tuple[Callable, ...]
    H: Callable
    H_grad: Callable
    H_hess: Callable
    p: float
    alpha: float | None = None
    gamma: float | None = None
    k: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "k", len(self.F))
        if not (len(self.f) == len(self.fprime) == self.k):
            raise ValueError("F, f and fprime must have one callable per component")

    @property
    def default_alpha(self) -> float:
        return self.p - 2.0 if self.alpha is None else float(self.alpha)

    @property
    def default_gamma(self) -> float:
        return self.p - 2.0 if self.gamma is None else float(self.gamma)

    def value_field(self, u):
        a = self._as_points(u)
        return sum(self.F[i](a[i]) for i in range(self.k)) - self.H(a)

    def grad_field(self, u):
        a = self._as_points(u)
        return np.stack([self.f[i](a[i]) for i in range(self.k)]) - self.H_grad(a)

    def hess_field(self, u):
        a = self._as_points(u)
        h = -np.array(self.H_hess(a), dtype=float)
        for i in range(self.k):
            h[i, i] = h[i, i] + self.fprime[i](a[i])
        return h


@dataclass(frozen=True)
class ScaledModel(ModelP):
    """P̃(v) = P(v / √c) for an arbitrary base model."""

    base: ModelP
    c: tuple[float, ...]
    k: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "k", self.base.k)
        object.__setattr__(self, "_s", 1.0 / np.sqrt(np.asarray(self.c, dtype=float)))

    @property
    def default_alpha(self) -> float:
        return self.base.default_alpha

    def _scale(self, u):
        a = self._as_points(u)
        return a * self._s.reshape((self.k,) + (1,) * (a.ndim - 1))

    def value_field(self, u):
        return self.base.value_field(self._scale(u))

    def grad_field(self, u):
        v = self._scale(u)
        return self.base.grad_field(v) * self._s.reshape((self.k,) + (1,) * (v.ndim - 1))

    def hess_field(self, u):
        v = self._scale(u)
        s = self._s.reshape((self.k,) + (1,) * (v.ndim - 1))
        return self.base.hess_field(v) * s[:, None] * s[None, :]


def matrix_M_alpha(model: ModelP, u_point: Sequence[float], alpha: float) -> np.ndarray:
    """M_ij = δ_ij (1+α) P_{u_i} u_i − P_{u_i u_j} u_i u_j at a cone point."""
    u = np.abs(np.asarray(u_point, dtype=float))
    _, g, h = eval_P(model, u)
    return np.diag((1.0 + alpha) * g * u) - h * np.outer(u, u)


def gershgorin_nsd(h: np.ndarray) -> bool:
    """Sufficient test for negative semidefiniteness: h_ii + Σ_{j≠i}|h_ij| ≤ 0 for every row."""
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    if not np.array_equal(h, h.T):
        raise ValueError("gershgorin_nsd expects a symmetric matrix")
    off = np.sum(np.abs(h), axis=1) - np.abs(np.diag(h))
    return bool(np.all(np.diag(h) + off <= 0.0))


POTENTIAL_KINDS = ("constant", "radial_quadratic", "tabulated_radial")


@dataclass(frozen=True)
class Potential:
    """Radial potential: ``constant`` (value), ``radial_quadratic`` (a + b r²) or
    ``tabulated_radial`` (linear interpolation of (r, V) samples).  r is the
    distance to the domain centre."""

    kind: str = "constant"
    value: float = 0.0
    a: float = 0.0
    b: float = 0.0
    r: tuple[float, ...] = ()
    v: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "tabulated_radial":
            r = np.asarray(self.r, dtype=float)
            if r.size < 2 or r.size != len(self.v) or np.any(np.diff(r) <= 0):
                raise ValueError("tabulated_radial needs >= 2 increasing radii with matching values")
        vals = [self.value, self.a, self.b, *self.r, *self.v]
        if not np.all(np.isfinite(vals)):
            raise ValueError("potential parameters must be finite")

    def realize(self, grid: Grid) -> np.ndarray:
        r = grid.radius
        if self.kind == "constant":
            return np.full(grid.size, float(self.value))
        if self.kind == "radial_quadratic":
            return self.a + self.b * r**2
        return np.interp(r, np.asarray(self.r, dtype=float), np.asarray(self.v, dtype=float))

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "radial_quadratic":
            return {"kind": "radial_quadratic", "a": self.a, "b": self.b}
        return {"kind": "tabulated_radial", "r": list(self.r), "v": list(self.v)}

    @classmethod
    def from_dict(cls, d: dict) -> Potential:
        d = dict(d)
        if "r" in d:
            d["r"] = tuple(d["r"])
        if "v" in d:
            d["v"] = tuple(d["v"])
        return cls(**d)
