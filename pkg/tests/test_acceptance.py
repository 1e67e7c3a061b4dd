"""Acceptance criteria 1 to 12; each test prints one PASS/FAIL line via record_criterion."""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import generic_smooth_fields, record_criterion, smooth_random_states
from test_grid import J01
from test_solver import SHOOTING_ENERGY
from nehari_lab.config import config_from_dict
from nehari_lab.energy import Problem, lower_bound_check, minimax_lattice_check, project_to_nehari, \
    scalar_nehari_scaling
from nehari_lab.errors import NehariProjectionError
from nehari_lab.grid import DomainSpec, build_grid
from nehari_lab.linalg import lambda1_estimate
from nehari_lab.model import PowerCouplingModel, cubic_preset
from nehari_lab.runner import run_experiment
from nehari_lab.solver import diagnostics_bundle, solve_ground_state
from nehari_lab.symmetry import (
    antipodality_check,
    foliated_schwarz_metrics,
    half_space_family,
    lemma_invariance_errors,
    polarized_energy_compare,
    two_point_inequality_scan,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SCALAR = PowerCouplingModel(4.0, (1.0,), (2.0,), 0.0)
CUBIC_BETAS = (0.1, 1.0, 10.0)


@pytest.fixture(scope="module")
def projection_oracle():
    g = build_grid(DomainSpec.interval(1.0, 64))
    pr = Problem.build(g, SCALAR)
    fields = [s for s in smooth_random_states(g, 1, 100, seed=7)]
    t0 = time.perf_counter()
    out = [project_to_nehari(pr, u) for u in fields]
    wall = time.perf_counter() - t0
    exact = np.array([scalar_nehari_scaling(pr, u) for u in fields])
    got = np.array([t[0] for t, _, _ in out])
    slacks = [lower_bound_check(pr, w) for _, w, _ in out]
    return np.max(np.abs(got / exact - 1)), wall, slacks


@pytest.fixture(scope="module")
def certificate_cases():
    g = build_grid(DomainSpec.disk(1.0, 16, 16))
    per_beta = {}
    slacks = []
    for beta in CUBIC_BETAS:
        pr = Problem.build(g, cubic_preset(beta))
        accepted, eigs = 0, []
        for u in smooth_random_states(g, 2, 100, seed=int(10 * beta)):
            try:
                _, w, diag = project_to_nehari(pr, u)
            except NehariProjectionError:
                continue
            accepted += 1
            eigs.append(diag.hessian_max_eig)
            slacks.append(lower_bound_check(pr, w))
        per_beta[beta] = (accepted, eigs)
    return per_beta, slacks


@pytest.fixture(scope="module")
def disk_solutions():
    g = build_grid(DomainSpec.disk(1.0, 48, 48))
    out = {}
    for beta in CUBIC_BETAS:
        pr = Problem.build(g, cubic_preset(beta))
        t0 = time.perf_counter()
        sol = solve_ground_state(pr)
        out[beta] = (pr, sol, time.perf_counter() - t0)
    return out


@pytest.fixture(scope="module")
def scalar_solution():
    pr = Problem.build(build_grid(DomainSpec.interval(1.0, 256)), SCALAR)
    return pr, solve_ground_state(pr)


def test_criterion_01_projection_oracle(projection_oracle):
    err, wall, _ = projection_oracle
    ok = err <= 1e-10 and wall < 5.0
    record_criterion(1, ok, f"max rel error {err:.2e}, {wall:.2f} s for 100 fields")
    assert ok


def test_criterion_02_hessian_certificate(certificate_cases):
    per_beta, _ = certificate_cases
    eigs = [e for _, es in per_beta.values() for e in es]
    bad = sum(e >= 0 for e in eigs)
    counts = ", ".join(f"beta={b}: {a}/100 accepted" for b, (a, _) in per_beta.items())
    ok = bad == 0 and len(eigs) > 0
    record_criterion(2, ok, f"{bad} violations, max eig {max(eigs):.3e} ({counts})")
    assert ok


def test_criterion_03_pde_residuals(disk_solutions):
    lines, ok = [], True
    for beta, (pr, sol, wall) in disk_solutions.items():
        diag = diagnostics_bundle(pr, sol)
        res = float(np.max(sol.pde_residual))
        lam = float(np.max(np.abs(sol.multipliers)))
        good = sol.converged and res < 1e-8 and lam < 1e-8 and not diag["positivity_flag"] and wall < 120
        ok &= good
        lines.append(f"beta={beta}: residual {res:.1e}, |lambda| {lam:.1e}, {wall:.1f} s")
    record_criterion(3, ok, "; ".join(lines))
    assert ok


def test_criterion_04_minimax_equality(disk_solutions, scalar_solution):
    cases = [(pr, sol) for pr, sol, _ in disk_solutions.values()] + [scalar_solution]
    reps = [minimax_lattice_check(pr, sol.state) for pr, sol in cases]
    gap = max(abs(r.gap) for r in reps)
    ok = gap <= 1e-9 and all(r.contains_ones for r in reps)
    record_criterion(4, ok, f"max |lattice max - E| {gap:.2e} over {len(reps)} minimizers")
    assert ok


def test_criterion_05_lower_bound(projection_oracle, certificate_cases, disk_solutions, scalar_solution):
    slacks = list(projection_oracle[2]) + list(certificate_cases[1])
    cases = [(pr, sol) for pr, sol, _ in disk_solutions.values()] + [scalar_solution]
    slacks += [lower_bound_check(pr, sol.state) for pr, sol in cases]
    low = min(slacks)
    ok = low >= -1e-10
    record_criterion(5, ok, f"min slack {low:.3e} over {len(slacks)} Nehari points")
    assert ok


def test_criterion_06_discrete_invariance():
    g = build_grid(DomainSpec.disk(1.0, 24, 32))
    fam = half_space_family(g)
    grad, rad = 0.0, 0.0
    for u in generic_smooth_fields(g, 1, 20, seed=6):
        for H in fam:
            err = lemma_invariance_errors(g, u[0], H)
            grad = max(grad, abs(err["gradient"]))
            rad = max(rad, err["radial"])
    ok = grad <= 1e-12 and rad <= 1e-12 and len(fam) == 32
    record_criterion(6, ok, f"max rel change: gradient energy {grad:.2e} (needs <= 1e-12), radial integrals {rad:.2e}")
    assert ok


def test_criterion_07_energy_monotonicity():
    t0 = time.perf_counter()
    g = build_grid(DomainSpec.disk(1.0, 24, 32))
    pr = Problem.build(g, cubic_preset(1.0))
    fam = half_space_family(g)
    worst = -np.inf
    for s in generic_smooth_fields(g, 2, 20, seed=7):
        for H in fam:
            worst = max(worst, polarized_energy_compare(pr, s, H).difference)
    scan = two_point_inequality_scan(pr.model, np.round(0.1 * np.arange(1, 31), 12))
    wall = time.perf_counter() - t0
    ok = worst <= 1e-12 and scan <= 1e-12 and wall < 60 and len(fam) == 32
    record_criterion(7, ok, f"max E(u_H, v_H') - E(u, v) = {worst:.2e}, two-point {scan:.2e}, {wall:.1f} s")
    assert ok


def test_criterion_08_symmetry():
    t0 = time.perf_counter()
    g = build_grid(DomainSpec.disk(1.0, 48, 64))
    sol = solve_ground_state(Problem.build(g, cubic_preset(10.0)))
    reps = [foliated_schwarz_metrics(g, sol.state[i]) for i in range(2)]
    anti = antipodality_check(*reps)
    wall = time.perf_counter() - t0
    asym = max(r.axial_asymmetry for r in reps)
    mono = max(r.monotonicity_violation for r in reps)
    ok = sol.converged and asym < 1e-3 and mono < 1e-3 and anti is not None and anti < 2 * np.pi / 64 \
        and wall < 300
    record_criterion(8, ok, f"asymmetry {asym:.1e}, monotonicity {mono:.1e}, antipodal {anti:.2e}, {wall:.1f} s")
    assert ok


def test_criterion_09_sweep_trend(tmp_path):
    config = config_from_dict(json.loads((CONFIGS / "sweep_disk.json").read_text()))
    s = run_experiment(config, tmp_path)
    rad = dict(zip(s.results["betas"], s.results["radial_deviation"]))
    ratio = rad[50.0] / rad[0.1]
    ok = s.acceptance["all_solved"] and ratio >= 10
    record_criterion(9, ok, "radial deviation " + ", ".join(f"beta={b}: {v:.3g}" for b, v in rad.items())
                     + f"; ratio {ratio:.3g} (needs >= 10)")
    assert ok


def test_criterion_10_scalar_oracle(scalar_solution):
    _, sol = scalar_solution
    rel = abs(sol.energy / SHOOTING_ENERGY - 1)
    l_int = lambda1_estimate(build_grid(DomainSpec.interval(1.0, 256))) / np.pi**2 - 1
    l_disk = lambda1_estimate(build_grid(DomainSpec.disk(1.0, 48, 48))) / J01**2 - 1
    ok = rel < 1e-4 and abs(l_int) < 1e-3 and abs(l_disk) < 5e-3
    record_criterion(10, ok, f"energy rel error {rel:.2e}, lambda1 interval {l_int:+.2e}, disk {l_disk:+.2e}")
    assert ok


def test_criterion_11_mass_constrained(tmp_path):
    config = config_from_dict(json.loads((CONFIGS / "mass_disk.json").read_text()))
    s = run_experiment(config, tmp_path)
    sym = s.results["symmetry"]
    asym = max(sym[c]["axial_asymmetry"] for c in ("u1", "u2"))
    mono = max(sym[c]["monotonicity_violation"] for c in ("u1", "u2"))
    anti = sym["antipodal_deviation"]
    ntheta = config.domain.to_dict()["ntheta"]
    ok = s.passed and asym < 1e-3 and mono < 1e-3 and anti is not None and anti < 2 * np.pi / ntheta
    m = s.results["mass"]
    record_criterion(11, ok, f"mass error {max(abs(x - 1) for x in m['masses']):.1e}, stationarity "
                             f"{max(m['stationarity']):.1e}, asymmetry {asym:.1e}, antipodal {anti:.2e}")
    assert ok


def test_criterion_12_determinism(tmp_path):
    disk = {"kind": "disk", "radius": 1.0, "nr": 12, "ntheta": 16}
    configs = [
        {"task": "solve", "domain": disk, "model": {"family": "cubic", "beta": 1.0}, "seed": 3},
        {"task": "solve_mass", "domain": disk, "model": {"family": "cubic", "beta": 10.0}, "seed": 3},
        {"task": "polarize_audit", "domain": disk, "model": {"family": "cubic", "beta": 1.0},
         "polarize": {"samples": 2}, "seed": 3},
        json.loads((CONFIGS / "interval_scalar.json").read_text()),
    ]
    same = 0
    for i, d in enumerate(configs):
        cfg = config_from_dict(d)
        a = run_experiment(cfg, tmp_path / f"{i}a").numeric_part()
        b = run_experiment(cfg, tmp_path / f"{i}b").numeric_part()
        same += json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    ok = same == len(configs)
    record_criterion(12, ok, f"{same}/{len(configs)} configs reproduce their summary numerics exactly")
    assert ok
