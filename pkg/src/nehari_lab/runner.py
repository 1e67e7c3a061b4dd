"""Run a parsed experiment and write its output directory.

Every run directory holds ``config.json`` (the resolved config), one fields
CSV per solved state, ``summary.json`` and, for sweeps, ``sweep.csv``.  The
``meta`` block of the summary (wall clock, versions, backend) is the only
part that may differ between reruns of the same config and seed.
"""

from __future__ import annotations

import csv
import json
import logging
import platform
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .assumptions import check_assumptions
from .config import ExperimentConfig, config_hash, serialize
from .energy import Problem, minimax_lattice_check, on_manifold
from .errors import NehariLabError
from .grid import Grid, build_grid
from .mass import mass_polarization_check, solve_mass_ground_state
from .solver import diagnostics_bundle, initial_states, solve_ground_state
from .symmetry import (
    antipodality_check,
    foliated_schwarz_metrics,
    half_space_family,
    polarized_energy_compare,
    two_point_inequality_scan,
)

log = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    "beta", "status", "energy", "radial_deviation_u1", "radial_deviation_u2", "axis_u1", "axis_u2",
    "axial_asymmetry_u1", "axial_asymmetry_u2", "monotonicity_u1", "monotonicity_u2", "antipodal_deviation",
    "pde_residual", "error",
]


@dataclass
class RunSummary:
    config_hash: str
    task: str
    results: dict
    acceptance: dict
    meta: dict

    @property
    def passed(self) -> bool:
        return all(v is not False for v in self.acceptance.values())

    def to_dict(self) -> dict:
        return {"config_hash": self.config_hash, "task": self.task, "results": self.results,
                "acceptance": self.acceptance, "passed": self.passed, "meta": self.meta}

    def numeric_part(self) -> dict:
        """Everything except ``meta``; identical across reruns of one config and seed."""
        d = self.to_dict()
        d.pop("meta")
        return d


def _clean(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) if np.isfinite(x) else None
    return x


def write_fields(path: Path, grid: Grid, state: np.ndarray) -> None:
    state = np.atleast_2d(state)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(grid.coordinate_header() + [f"u{i + 1}" for i in range(state.shape[0])])
        for i, row in enumerate(grid.coordinate_rows()):
            w.writerow(row + [repr(float(x)) for x in state[:, i]])


def read_fields(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    return header, np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def _problem(config: ExperimentConfig, grid: Grid, beta: float | None = None) -> Problem:
    return Problem.build(grid, config.build_model(beta), list(config.potentials), list(config.diffusion))


def _symmetry(grid: Grid, state: np.ndarray) -> dict:
    reps = [foliated_schwarz_metrics(grid, s) for s in state]
    out = {f"u{i + 1}": r.to_dict() for i, r in enumerate(reps)}
    out["antipodal_deviation"] = antipodality_check(*reps) if len(reps) == 2 else None
    return out


def _solve(config: ExperimentConfig, beta: float | None = None):
    grid = build_grid(config.domain)
    problem = _problem(config, grid, beta)
    sol = solve_ground_state(problem, config.solver)
    diag = diagnostics_bundle(problem, sol, config.alpha)
    results = {"solution": sol.to_dict(), "diagnostics": diag,
               "on_manifold": on_manifold(problem, sol.state)}
    if problem.k <= 2:
        results["minimax"] = minimax_lattice_check(problem, sol.state).to_dict()
    if grid.is_polar:
        results["symmetry"] = _symmetry(grid, sol.state)
    slack = diag["lower_bound_slack"]
    acceptance = {
        "converged": sol.converged,
        "pde_residual": bool(np.max(sol.pde_residual) < config.solver.tol),
        "positive": not diag["positivity_flag"],
        "on_manifold": results["on_manifold"],
        "hessian_negative": diag["hessian_negative"],
        "lower_bound": slack is not None and slack >= -1e-10,
    }
    return grid, sol, results, acceptance


def _task_solve(config: ExperimentConfig, out: Path):
    grid, sol, results, acceptance = _solve(config)
    write_fields(out / "fields.csv", grid, sol.state)
    return results, acceptance


def _task_solve_mass(config: ExperimentConfig, out: Path):
    grid = build_grid(config.domain)
    beta = float(config.model["beta"])
    res = solve_mass_ground_state(grid, beta, config.mass)
    checks = [mass_polarization_check(grid, res.state, beta, H) for H in half_space_family(grid)]
    pol = {
        "half_spaces": len(checks),
        "max_mass_error": max(c.mass_error for c in checks),
        "energy_ok": all(c.energy_ok for c in checks),
        "max_energy_change": max(c.I_polarized - c.I_original for c in checks),
        "max_coupling_gap": max(c.coupling_gap for c in checks),
    }
    results = {"mass": res.to_dict(), "polarization": pol, "symmetry": _symmetry(grid, res.state)}
    acceptance = {
        "masses": bool(np.max(np.abs(res.masses - 1.0)) <= 1e-10),
        "stationarity": bool(np.max(res.stationarity) < 1e-6),
        "polarization_masses": pol["max_mass_error"] <= 1e-10,
        "polarization_energy": pol["energy_ok"],
        "coupling_equality": pol["max_coupling_gap"] <= 1e-10,
    }
    write_fields(out / "fields.csv", grid, res.state)
    return results, acceptance


def _task_check(config: ExperimentConfig, out: Path):
    grid = build_grid(config.domain)
    report = check_assumptions(config.build_model(), grid, list(config.potentials), list(config.diffusion),
                               config.alpha)
    return {"assumptions": report.to_dict()}, {"all_passed": report.all_passed}


def _task_polarize(config: ExperimentConfig, out: Path):
    grid = build_grid(config.domain)
    problem = _problem(config, grid)
    n = config.polarize_samples
    # random smooth positive pairs; skip the two structured starts
    samples = [s for _, s in initial_states(grid, 2, n + 2, config.seed)[2:]]
    table = []
    for H in half_space_family(grid):
        comps = [polarized_energy_compare(problem, s, H) for s in samples]
        tol = [min(1e-12, 64 * np.finfo(float).eps * max(1.0, abs(c.e_original))) for c in comps]
        table.append({
            "half_space": H.label,
            "normal_angle": float(H.normal_angle),
            "max_energy_change": max(c.difference for c in comps),
            "min_energy_change": min(c.difference for c in comps),
            "max_nonlinear_change": max(c.p_original - c.p_polarized for c in comps),
            "violations": sum(c.difference > t for c, t in zip(comps, tol)),
        })
    grid_vals = np.round(0.1 * np.arange(1, 31), 12)
    scan = two_point_inequality_scan(problem.model, grid_vals)
    scale = abs(float(problem.model.value_field(np.full((2, 1), grid_vals[-1]))[0]))
    results = {"samples": n, "table": table, "two_point_max_violation": scan}
    acceptance = {
        "energy_inequality": all(r["violations"] == 0 for r in table),
        "two_point": scan <= 1e-12 * max(1.0, abs(scale)),
    }
    return results, acceptance


def _sweep_entry(args):
    config, beta = args
    try:
        grid, sol, results, acceptance = _solve(config, beta)
    except NehariLabError as exc:
        return beta, None, None, f"{type(exc).__name__}: {exc}"
    return beta, sol.state, {"results": results, "acceptance": acceptance}, None


def sweep_betas(betas) -> list[float]:
    """Sorted, de-duplicated β list (duplicates are dropped with a warning)."""
    vals = [float(b) for b in betas]
    uniq = sorted(set(vals))
    if len(uniq) < len(vals):
        warnings.warn(f"duplicate beta values dropped: {sorted(vals)} -> {uniq}", stacklevel=2)
    return uniq


def _sweep_row(beta, entry, error) -> dict:
    row = dict.fromkeys(SWEEP_COLUMNS, "")
    row["beta"] = beta
    if entry is None:
        row.update(status="failed", error=error)
        return row
    res = entry["results"]
    sym = res["symmetry"]
    row.update(status="ok", energy=res["solution"]["energy"], pde_residual=max(res["solution"]["pde_residual"]))
    for i in (1, 2):
        s = sym[f"u{i}"]
        row[f"radial_deviation_u{i}"] = s["radial_deviation"]
        if not s["degenerate"]:
            row[f"axis_u{i}"] = s["axis_angle"]
        row[f"axial_asymmetry_u{i}"] = s["axial_asymmetry"]
        row[f"monotonicity_u{i}"] = s["monotonicity_violation"]
    if sym["antipodal_deviation"] is not None:
        row["antipodal_deviation"] = sym["antipodal_deviation"]
    return row


def _task_sweep(config: ExperimentConfig, out: Path):
    betas = sweep_betas(config.betas)
    jobs = [(config, b) for b in betas]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(config.workers, len(jobs))) as pool:
            done = list(pool.map(_sweep_entry, jobs))
    else:
        done = [_sweep_entry(j) for j in jobs]
    grid = build_grid(config.domain)
    rows, entries = [], []
    for i, (beta, state, entry, error) in enumerate(done):
        if state is not None:
            write_fields(out / f"fields_beta_{i:02d}.csv", grid, state)
        rows.append(_sweep_row(beta, entry, error))
        entries.append({"beta": beta, "fields": None if state is None else f"fields_beta_{i:02d}.csv",
                        "error": error, **(entry or {})})
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, SWEEP_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    ok = [r for r in rows if r["status"] == "ok"]
    rad = [max(r["radial_deviation_u1"], r["radial_deviation_u2"]) for r in ok]
    results = {"betas": betas, "entries": entries, "radial_deviation": rad}
    acceptance = {
        "all_solved": len(ok) == len(rows),
        "entries_accepted": all(all(v is not False for v in e.get("acceptance", {}).values()) for e in entries),
    }
    return results, acceptance


TASK_RUNNERS = {
    "solve": _task_solve,
    "solve_mass": _task_solve_mass,
    "check_assumptions": _task_check,
    "polarize_audit": _task_polarize,
    "sweep_beta": _task_sweep,
}


def _meta(wall: float) -> dict:
    import scipy

    try:
        import numba

        numba_version = numba.__version__
    except ImportError:  # pragma: no cover
        numba_version = None
    return {
        "wall_clock_s": wall,
        "backend": kernels.BACKEND,
        "versions": {"nehari_lab": __version__, "python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__, "numba": numba_version},
    }


def run_experiment(config: ExperimentConfig, out: str | Path | None = None) -> RunSummary:
    """Dispatch ``config.task``, write the run directory and return the summary."""
    out = Path(config.output if out is None else out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(serialize(config))
    t0 = time.perf_counter()
    try:
        results, acceptance = TASK_RUNNERS[config.task](config, out)
    except NehariLabError as exc:
        log.error("task %r on %s failed: %s", config.task, config.domain.to_dict(), exc)
        raise
    summary = RunSummary(config_hash(config), config.task, _clean(results), _clean(acceptance),
                         _meta(time.perf_counter() - t0))
    (out / "summary.json").write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n")
    return summary
