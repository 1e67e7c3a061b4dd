"""Finite-difference grids for intervals, rectangles, disks and annuli.

Fields live on interior nodes only (homogeneous Dirichlet data is implicit)
and are stored as flat float arrays.  Polar grids use offset radii
``r_j = r_in + (j + 1/2) dr`` so there is no node at the origin, and the node
index of ring ``j``, angle ``m`` is ``j * ntheta + m``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.fft

from . import kernels
from .errors import GridMismatchError, InvalidGeometryError

KINDS = ("interval", "rectangle", "disk", "annulus")


@dataclass(frozen=True)
class DomainSpec:
    """Domain kind plus geometry and resolution tuples.

    geometry: interval ``(length,)``, rectangle ``(lx, ly)``, disk ``(R,)``,
    annulus ``(r_in, r_out)``.  resolution: interval ``(n,)``, rectangle
    ``(nx, ny)``, polar ``(nr, ntheta)``.
    """

    kind: str
    geometry: tuple[float, ...]
    resolution: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "geometry", tuple(float(g) for g in self.geometry))
        object.__setattr__(self, "resolution", tuple(int(r) for r in self.resolution))
        self.validate()

    @classmethod
    def interval(cls, length: float, n: int) -> DomainSpec:
        return cls("interval", (length,), (n,))

    @classmethod
    def rectangle(cls, lx: float, ly: float, nx: int, ny: int) -> DomainSpec:
        return cls("rectangle", (lx, ly), (nx, ny))

    @classmethod
    def disk(cls, radius: float, nr: int, ntheta: int) -> DomainSpec:
        return cls("disk", (radius,), (nr, ntheta))

    @classmethod
    def annulus(cls, r_in: float, r_out: float, nr: int, ntheta: int) -> DomainSpec:
        return cls("annulus", (r_in, r_out), (nr, ntheta))

    @property
    def is_polar(self) -> bool:
        return self.kind in ("disk", "annulus")

    def validate(self) -> None:
        ngeo = {"interval": 1, "rectangle": 2, "disk": 1, "annulus": 2}
        nres = {"interval": 1, "rectangle": 2, "disk": 2, "annulus": 2}
        if self.kind not in KINDS:
            raise InvalidGeometryError(f"invalid geometry: unknown domain kind {self.kind!r}")
        if len(self.geometry) != ngeo[self.kind] or len(self.resolution) != nres[self.kind]:
            raise InvalidGeometryError(
                f"invalid geometry: {self.kind} needs {ngeo[self.kind]} lengths and "
                f"{nres[self.kind]} resolutions, got {self.geometry} / {self.resolution}"
            )
        if not all(np.isfinite(g) and g > 0 for g in self.geometry):
            raise InvalidGeometryError(f"invalid geometry: lengths must be positive, got {self.geometry}")
        if self.kind == "annulus" and not self.geometry[0] < self.geometry[1]:
            raise InvalidGeometryError(
                f"invalid geometry: annulus needs 0 < r_in < r_out, got r_in={self.geometry[0]}, "
                f"r_out={self.geometry[1]}"
            )
        if any(r < 4 for r in self.resolution):
            raise InvalidGeometryError(f"invalid geometry: all resolutions must be >= 4, got {self.resolution}")
        if self.is_polar and (self.resolution[1] % 2 or self.resolution[1] < 8):
            raise InvalidGeometryError(
                f"invalid geometry: ntheta must be even and >= 8, got {self.resolution[1]}"
            )

    def to_dict(self) -> dict[str, Any]:
        g, r = self.geometry, self.resolution
        if self.kind == "interval":
            return {"kind": "interval", "length": g[0], "n": r[0]}
        if self.kind == "rectangle":
            return {"kind": "rectangle", "lx": g[0], "ly": g[1], "nx": r[0], "ny": r[1]}
        if self.kind == "disk":
            return {"kind": "disk", "radius": g[0], "nr": r[0], "ntheta": r[1]}
        return {"kind": "annulus", "r_in": g[0], "r_out": g[1], "nr": r[0], "ntheta": r[1]}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> DomainSpec:
        kind = d["kind"]
        if kind == "interval":
            return cls.interval(d["length"], d["n"])
        if kind == "rectangle":
            return cls.rectangle(d["lx"], d["ly"], d["nx"], d["ny"])
        if kind == "disk":
            return cls.disk(d["radius"], d["nr"], d["ntheta"])
        if kind == "annulus":
            return cls.annulus(d["r_in"], d["r_out"], d["nr"], d["ntheta"])
        raise InvalidGeometryError(f"invalid geometry: unknown domain kind {kind!r}")


@dataclass(frozen=True, eq=False)
class Grid:
    spec: DomainSpec
    shape: tuple[int, ...]
    coords: np.ndarray  # (n, dim) Cartesian coordinates
    weights: np.ndarray  # (n,) quadrature weights
    radius: np.ndarray  # (n,) distance to the domain centre
    # polar data
    radii: np.ndarray | None = None
    thetas: np.ndarray | None = None
    dr: float = 0.0
    dtheta: float = 0.0
    diag: np.ndarray | None = None
    a_in: np.ndarray | None = None
    a_out: np.ndarray | None = None
    b: np.ndarray | None = None
    # cartesian data
    h: tuple[float, ...] = ()
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def kind(self) -> str:
        return self.spec.kind

    @property
    def is_polar(self) -> bool:
        return self.spec.is_polar

    @property
    def size(self) -> int:
        return int(self.weights.shape[0])

    @property
    def dim(self) -> int:
        return int(self.coords.shape[1])

    @property
    def area(self) -> float:
        g = self.spec.geometry
        if self.kind == "interval":
            return g[0]
        if self.kind == "rectangle":
            return g[0] * g[1]
        if self.kind == "disk":
            return np.pi * g[0] ** 2
        return np.pi * (g[1] ** 2 - g[0] ** 2)

    @property
    def node_theta(self) -> np.ndarray:
        if not self.is_polar:
            raise GridMismatchError("polar angles requested on a Cartesian grid")
        return np.tile(self.thetas, self.shape[0])

    def check_field(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != (self.size,):
            raise GridMismatchError(f"field of shape {f.shape} does not match grid with {self.size} nodes")
        return f

    def check_state(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.ndim != 2 or u.shape[1] != self.size:
            raise GridMismatchError(f"state of shape {u.shape} does not match grid with {self.size} nodes")
        return u

    def neg_laplacian(self, f: np.ndarray) -> np.ndarray:
        """Discrete -Δ with zero Dirichlet data."""
        f = self.check_field(f)
        if self.kind == "interval":
            return kernels.neg_lap_1d(f, 1.0 / self.h[0] ** 2)
        u = f.reshape(self.shape)
        if self.kind == "rectangle":
            out = kernels.neg_lap_2d(u, 1.0 / self.h[0] ** 2, 1.0 / self.h[1] ** 2)
        else:
            out = kernels.neg_lap_polar(u, self.diag, self.a_in, self.a_out, self.b)
        return out.reshape(-1)

    def neg_laplacian_state(self, u: np.ndarray) -> np.ndarray:
        u = self.check_state(u)
        return np.stack([self.neg_laplacian(ui) for ui in u])

    def integrate(self, f: np.ndarray) -> float:
        return float(np.dot(self.weights, self.check_field(f)))

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        return float(np.dot(self.weights, self.check_field(f) * self.check_field(g)))

    def norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(self.inner(f, f)))

    def state_inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.sum((np.asarray(u) * np.asarray(v)) @ self.weights))

    def state_norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(self.state_inner(u, u)))

    def dirichlet_form(self, f: np.ndarray) -> float:
        """<-Δ_h f, f>_w, the discrete ∫|∇f|²."""
        return self.inner(self.neg_laplacian(f), f)

    def ring_average(self, f: np.ndarray) -> np.ndarray:
        """Per-node angular average (polar) or the weighted mean (Cartesian)."""
        f = self.check_field(f)
        if self.is_polar:
            u = f.reshape(self.shape)
            return np.repeat(u.mean(axis=1), self.shape[1])
        return np.full(self.size, self.integrate(f) / float(np.sum(self.weights)))

    def solve_separable(self, c: float, shift: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        """Direct solve of ``(c(-Δ_h) + S) x = rhs`` for a separable shift S.

        ``shift`` is a full field on intervals, a per-ring profile (nr,) on polar
        grids and a scalar on rectangles.  Used as the CG preconditioner.
        """
        rhs = self.check_field(rhs)
        if self.kind == "interval":
            n = self.size
            ih2 = c / self.h[0] ** 2
            lower = np.full((1, n), -ih2)
            upper = np.full((1, n), -ih2)
            d = (2.0 * ih2 + np.broadcast_to(shift, (n,)))[None, :]
            return kernels.thomas_batched(lower, np.ascontiguousarray(d), upper, rhs[None, :])[0]
        if self.kind == "rectangle":
            nx, ny = self.shape
            lx = (2.0 - 2.0 * np.cos(np.pi * np.arange(1, nx + 1) / (nx + 1))) / self.h[0] ** 2
            ly = (2.0 - 2.0 * np.cos(np.pi * np.arange(1, ny + 1) / (ny + 1))) / self.h[1] ** 2
            denom = c * (lx[:, None] + ly[None, :]) + float(shift)
            coef = scipy.fft.dstn(rhs.reshape(self.shape), type=1)
            return scipy.fft.idstn(coef / denom, type=1).reshape(-1)
        nr, nt = self.shape
        shift = np.broadcast_to(np.asarray(shift, dtype=float), (nr,))
        coef = np.fft.rfft(rhs.reshape(self.shape), axis=1)  # (nr, nk)
        nk = coef.shape[1]
        mu = 2.0 - 2.0 * np.cos(np.arange(nk) * self.dtheta)  # angular symbol
        radial_diag = self.diag - 2.0 * self.b
        main = c * (radial_diag[None, :] + mu[:, None] * self.b[None, :]) + shift[None, :]  # (nk, nr)
        lower = np.broadcast_to(-c * self.a_in, (nk, nr))
        upper = np.broadcast_to(-c * self.a_out, (nk, nr))
        main2 = np.ascontiguousarray(np.concatenate([main, main]))
        lower2 = np.ascontiguousarray(np.concatenate([lower, lower]))
        upper2 = np.ascontiguousarray(np.concatenate([upper, upper]))
        rhs2 = np.ascontiguousarray(np.concatenate([coef.real.T, coef.imag.T]))
        sol = kernels.thomas_batched(lower2, main2, upper2, rhs2)
        spec = (sol[:nk] + 1j * sol[nk:]).T
        return np.fft.irfft(spec, n=nt, axis=1).reshape(-1)

    def separable_part(self, v: np.ndarray):
        """The part of a potential the separable solver can represent exactly."""
        v = self.check_field(v)
        if self.kind == "interval":
            return v
        if self.kind == "rectangle":
            return float(np.dot(self.weights, v) / np.sum(self.weights))
        return v.reshape(self.shape).mean(axis=1)

    def to_dict(self) -> dict[str, Any]:
        return self.spec.to_dict()

    def coordinates_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.coordinate_header())
        for row in self.coordinate_rows():
            writer.writerow(row)
        return buf.getvalue()

    def coordinate_header(self) -> list[str]:
        if self.is_polar:
            return ["index", "r", "theta", "weight"]
        if self.dim == 1:
            return ["index", "x", "weight"]
        return ["index", "x", "y", "weight"]

    def coordinate_rows(self) -> list[list]:
        if self.is_polar:
            r = np.repeat(self.radii, self.shape[1])
            cols = [r, self.node_theta]
        else:
            cols = [self.coords[:, d] for d in range(self.dim)]
        return [[i] + [repr(float(c[i])) for c in cols] + [repr(float(self.weights[i]))] for i in range(self.size)]


def _freeze(*arrays):
    for a in arrays:
        if a is not None:
            a.setflags(write=False)


def build_grid(spec: DomainSpec) -> Grid:
    """Construct the grid, weights and Laplacian stencil for a domain."""
    spec.validate()
    kind = spec.kind
    if kind == "interval":
        (length,), (n,) = spec.geometry, spec.resolution
        h = length / (n + 1)
        x = h * np.arange(1, n + 1)
        coords = x[:, None]
        weights = np.full(n, h)
        radius = np.abs(x - 0.5 * length)
        _freeze(coords, weights, radius)
        return Grid(spec, (n,), coords, weights, radius, h=(h,))
    if kind == "rectangle":
        (lx, ly), (nx, ny) = spec.geometry, spec.resolution
        hx, hy = lx / (nx + 1), ly / (ny + 1)
        x = hx * np.arange(1, nx + 1)
        y = hy * np.arange(1, ny + 1)
        X, Y = np.meshgrid(x, y, indexing="ij")
        coords = np.column_stack([X.ravel(), Y.ravel()])
        weights = np.full(nx * ny, hx * hy)
        radius = np.hypot(coords[:, 0] - 0.5 * lx, coords[:, 1] - 0.5 * ly)
        _freeze(coords, weights, radius)
        return Grid(spec, (nx, ny), coords, weights, radius, h=(hx, hy))

    if kind == "disk":
        r_in, r_out = 0.0, spec.geometry[0]
    else:
        r_in, r_out = spec.geometry
    nr, nt = spec.resolution
    dr = (r_out - r_in) / nr
    dtheta = 2.0 * np.pi / nt
    radii = r_in + (np.arange(nr) + 0.5) * dr
    thetas = dtheta * np.arange(nt)
    face_in = r_in + np.arange(nr) * dr
    face_out = face_in + dr
    a_in = face_in / (radii * dr**2)
    a_out = face_out / (radii * dr**2)
    b = 1.0 / (radii**2 * dtheta**2)
    diag = a_in + a_out + 2.0 * b
    # ghost-point Dirichlet closure on the outer (and inner annulus) face
    diag[-1] += a_out[-1]
    diag[0] += a_in[0]  # zero for the disk since face_in[0] = 0
    R, T = np.meshgrid(radii, thetas, indexing="ij")
    coords = np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])
    weights = np.repeat(radii * dr * dtheta, nt)
    radius = np.repeat(radii, nt)
    _freeze(coords, weights, radius, radii, thetas, diag, a_in, a_out, b)
    return Grid(
        spec, (nr, nt), coords, weights, radius,
        radii=radii, thetas=thetas, dr=dr, dtheta=dtheta,
        diag=diag, a_in=a_in, a_out=a_out, b=b,
    )
