import numpy as np
import pytest
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from nehari_lab.energy import Problem, energy_gradient
from nehari_lab.errors import AssumptionError, SolverError
from nehari_lab.grid import DomainSpec, build_grid
from nehari_lab.linalg import lambda1_estimate
from nehari_lab.model import Potential, PowerCouplingModel, cubic_preset
from nehari_lab.solver import (
    SolverOptions,
    diagnostics_bundle,
    discrete_pde_residual,
    initial_states,
    multiplier_residual,
    nehari_constraint_gradients,
    solve_ground_state,
)

# ground-state energy of -u'' = u^3 on (0, 1), from the shooting oracle below
SHOOTING_ENERGY = 15.756060010769547


def shooting_energy():
    """Shoot u(0)=0, u'(0)=s and bracket s so the first zero sits at x=1; E = ¼∫u⁴."""
    def run(s):
        return solve_ivp(lambda x, y: [y[1], -y[0] ** 3], [0, 1], [0, s], rtol=1e-13, atol=1e-14,
                         dense_output=True)

    s = brentq(lambda s: run(s).y[0, -1], 9.0, 10.5, xtol=1e-15)
    sol = run(s)
    return 0.25 * quad(lambda x: sol.sol(x)[0] ** 4, 0, 1, epsabs=1e-14, epsrel=1e-13, limit=200)[0]


@pytest.fixture(scope="module")
def scalar_solution():
    g = build_grid(DomainSpec.interval(1.0, 256))
    pr = Problem.build(g, PowerCouplingModel(4, (1.0,), (2,), 0.0))
    return pr, solve_ground_state(pr)


@pytest.fixture(scope="module")
def disk_solution():
    g = build_grid(DomainSpec.disk(1.0, 24, 24))
    pr = Problem.build(g, cubic_preset(1.0))
    return pr, solve_ground_state(pr, SolverOptions(start_count=3))


def test_shooting_oracle_frozen():
    assert shooting_energy() == pytest.approx(SHOOTING_ENERGY, rel=1e-10)


def test_scalar_matches_oracle(scalar_solution):
    pr, sol = scalar_solution
    assert sol.converged
    assert abs(sol.energy / SHOOTING_ENERGY - 1) < 1e-4
    assert np.all(sol.state > 0)
    # symmetric about the midpoint
    assert np.allclose(sol.state[0], sol.state[0][::-1], atol=1e-8 * sol.state.max())


def test_disk_residuals(disk_solution):
    pr, sol = disk_solution
    assert np.max(sol.pde_residual) < 1e-8
    assert np.max(np.abs(sol.multipliers)) < 1e-8
    diag = diagnostics_bundle(pr, sol)
    assert not diag["positivity_flag"] and diag["hessian_negative"]
    assert diag["lower_bound_slack"] >= -1e-10
    assert diag["membership"] == "analytic_yes"
    g = energy_gradient(pr, sol.state)
    assert np.allclose(discrete_pde_residual(pr, sol.state),
                       np.sqrt((g * g) @ pr.grid.weights) / np.maximum(1, np.sqrt((sol.state ** 2) @ pr.grid.weights)))


def test_selection_is_lowest_converged(disk_solution):
    _, sol = disk_solution
    es = [t.energy for t in sol.traces if t.converged]
    assert sol.energy == min(es)
    assert sol.traces[sol.start_index].energy == sol.energy
    assert sol.to_dict()["start_histories"]


def test_multiplier_fit_detects_non_critical_state():
    g = build_grid(DomainSpec.disk(1.0, 12, 16))
    pr = Problem.build(g, cubic_preset(2.0))
    u = initial_states(g, 2, 1, 0)[0][1]
    lam, fit = multiplier_residual(pr, u)
    assert fit > 1e-3
    assert nehari_constraint_gradients(pr, u).shape == (2, 2, g.size)


def test_initial_states_deterministic():
    g = build_grid(DomainSpec.disk(1.0, 12, 16))
    a = initial_states(g, 2, 5, seed=3)
    b = initial_states(g, 2, 5, seed=3)
    assert [k for k, _ in a] == ["coexisting", "segregated", "random_bumps_0", "random_bumps_1", "random_bumps_2"]
    assert all(np.array_equal(x, y) for (_, x), (_, y) in zip(a, b))
    assert all(np.all(s >= 0) for _, s in a)


def test_assumption_gate():
    g = build_grid(DomainSpec.disk(1.0, 12, 16))
    lam1 = lambda1_estimate(g)
    pr = Problem.build(g, cubic_preset(1.0), potentials=[Potential(value=-2 * lam1)] * 2)
    with pytest.raises(AssumptionError) as info:
        solve_ground_state(pr)
    assert "P0" in info.value.report.failures


def test_all_starts_fail():
    g = build_grid(DomainSpec.disk(1.0, 12, 16))
    pr = Problem.build(g, cubic_preset(1.0))
    with pytest.raises(SolverError) as info:
        solve_ground_state(pr, SolverOptions(start_count=2, max_outer_iterations=2))
    assert len(info.value.traces) == 2


def test_options_validated():
    with pytest.raises(ValueError):
        SolverOptions(backtrack=1.5)
    with pytest.raises(ValueError):
        SolverOptions(start_count=0)


def test_decoupled_is_sum_of_scalar_ground_states():
    g = build_grid(DomainSpec.disk(1.0, 16, 16))
    pair = solve_ground_state(Problem.build(g, cubic_preset(0.0)), SolverOptions(start_count=2))
    one = solve_ground_state(Problem.build(g, PowerCouplingModel(4, (1.0,), (2,), 0.0)), SolverOptions(start_count=1))
    assert pair.energy == pytest.approx(2 * one.energy, abs=1e-8)


def test_restart_idempotent_and_monotone(disk_solution):
    pr, sol = disk_solution
    again = solve_ground_state(pr, SolverOptions(), initial=sol.state)
    assert again.iterations <= 2
    assert again.energy == pytest.approx(sol.energy, abs=1e-10)
    for t in sol.traces:
        if t.energies:
            e = np.array(t.energies)
            assert np.all(np.diff(e) <= 1e-12 * np.maximum(1.0, np.abs(e[:-1])))


def test_manufactured_eigenpair_residual():
    g = build_grid(DomainSpec.disk(1.0, 16, 16))
    lam1 = lambda1_estimate(g, tol=1e-12)
    x = np.ones(g.size)
    for _ in range(60):  # inverse iteration with the exact separable solve
        x = g.solve_separable(1.0, 0.0, x)
        x /= g.norm(x)
    pr = Problem.build(g, PowerCouplingModel(4, (1e-300,), (2,), 0.0), potentials=[-lam1])
    assert discrete_pde_residual(pr, x)[0] < 1e-8
    assert discrete_pde_residual(pr, np.abs(np.sin(7 * g.node_theta)) + 1)[0] > 1e-2
