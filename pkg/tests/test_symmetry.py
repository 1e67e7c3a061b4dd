import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import smooth_random_states
from nehari_lab.energy import Problem, nonlinear_integral, quad_norms
from nehari_lab.errors import GridMismatchError
from nehari_lab.grid import DomainSpec, build_grid
from nehari_lab.model import cubic_preset
from nehari_lab.symmetry import (
    antipodality_check,
    dominance_status,
    foliated_schwarz_metrics,
    half_space_at,
    half_space_family,
    lemma_invariance_errors,
    polarize,
    polarize_pair,
    polarized_energy_compare,
    radial_deviation,
    two_point_inequality_scan,
)

DISK = build_grid(DomainSpec.disk(1.0, 12, 16))


def fs_field(grid, axis=0.0):
    g = grid.radius * (1 - grid.radius)
    return g * (1 + np.cos(grid.node_theta - axis))


def test_family_count_and_involution():
    g8 = build_grid(DomainSpec.disk(1.0, 6, 8))
    fam = half_space_family(g8)
    assert len(fam) == 8
    for h in fam:
        assert np.array_equal(h.perm[h.perm], np.arange(g8.size))
        on = h.side == 0
        assert np.array_equal(h.perm[on], np.arange(g8.size)[on])
        assert np.array_equal(h.side[h.perm], -h.side)
        assert np.array_equal(h.complement().perm, h.perm)


def test_cartesian_family():
    sq = build_grid(DomainSpec.rectangle(1.0, 1.0, 8, 8))
    assert len(half_space_family(sq)) == 8
    rect = build_grid(DomainSpec.rectangle(1.0, 2.0, 8, 6))
    assert len(half_space_family(rect)) == 4
    with pytest.raises(GridMismatchError):
        half_space_at(sq, 0)


def test_polarize_definition_and_idempotence(rng):
    H = half_space_at(DISK, 0)
    u = rng.random(DISK.size)
    uh = polarize(u, H)
    assert np.array_equal(polarize(uh, H), uh)
    a = int(np.flatnonzero(H.side > 0)[0])
    b = int(H.perm[a])
    u[a], u[b] = 1.0, 2.0
    uh = polarize(u, H)
    assert (uh[a], uh[b]) == (2.0, 1.0)
    # u_Ĥ is the reflection of u_H
    assert np.array_equal(polarize(u, H.complement()), H.reflect(polarize(u, H)))
    # equimeasurable: same multiset of values on each reflected pair
    assert np.array_equal(np.sort(uh), np.sort(u))


def test_dominant_field_is_fixed():
    H = half_space_at(DISK, 0)
    u = fs_field(DISK, 0.0)
    assert dominance_status(u, H)[0] == "dominant"
    assert np.array_equal(polarize(u, H), u)
    assert dominance_status(H.reflect(u), H)[0] == "subordinate"
    status, degenerate = dominance_status(np.ones(DISK.size), H)
    assert status == "dominant" and degenerate


def test_two_point_scan():
    vals = np.round(0.1 * np.arange(1, 31), 12)
    assert two_point_inequality_scan(cubic_preset(1.0), vals) <= 1e-12
    assert abs(two_point_inequality_scan(cubic_preset(0.0), vals)) <= 1e-12
    assert two_point_inequality_scan(cubic_preset(0.0), [0.5]) == 0.0


def test_radial_state_unchanged_by_polarization():
    pr = Problem.build(DISK, cubic_preset(1.0))
    rad = np.stack([DISK.radius * (1 - DISK.radius)] * 2)
    for H in half_space_family(DISK):
        cmp = polarized_energy_compare(pr, rad, H)
        assert cmp.difference == pytest.approx(0.0, abs=1e-14)


def test_radial_integrals_invariant():
    for u in smooth_random_states(DISK, 1, 5, seed=11):
        for H in half_space_family(DISK):
            err = lemma_invariance_errors(DISK, u[0], H)
            assert err["radial"] <= 1e-12
            assert err["gradient"] <= 1e-12  # the stencil form can only drop


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 5.0), st.integers(0, 15))
def test_energy_and_nonlinear_monotone(seed, beta, m):
    pr = Problem.build(DISK, cubic_preset(beta))
    s = smooth_random_states(DISK, 2, 1, seed)[0]
    H = half_space_at(DISK, m)
    cmp = polarized_energy_compare(pr, s, H)
    assert cmp.e_polarized <= cmp.e_original + 1e-12 * max(1.0, abs(cmp.e_original))
    sp = polarize_pair(s, H)
    assert nonlinear_integral(pr, s) <= nonlinear_integral(pr, sp) + 1e-12
    assert np.all(quad_norms(pr, sp) <= quad_norms(pr, s) * (1 + 1e-12))


@pytest.mark.parametrize("shift", [0, 3, 5])
def test_fs_metrics_exact_field(shift):
    g = build_grid(DomainSpec.disk(1.0, 16, 32))
    axis = 2 * np.pi * shift / 32
    rep = foliated_schwarz_metrics(g, fs_field(g, axis))
    assert not rep.degenerate
    assert rep.axis_angle == pytest.approx(axis, abs=1e-10)
    assert rep.axial_asymmetry < 1e-12 and rep.monotonicity_violation < 1e-12
    assert rep.dominant_fraction == 1.0


def test_fs_metrics_off_grid_axis_and_radial():
    g = build_grid(DomainSpec.disk(1.0, 16, 32))
    rep = foliated_schwarz_metrics(g, fs_field(g, 0.3))
    assert rep.axis_angle == pytest.approx(0.3, abs=1e-10)
    assert rep.axial_asymmetry < 1e-12
    radial = foliated_schwarz_metrics(g, g.radius * (1 - g.radius))
    assert radial.degenerate and radial.axial_asymmetry < 1e-12 and radial.monotonicity_violation == 0
    assert radial_deviation(g, g.radius) == 0.0
    bumpy = fs_field(g) * (1 + 0.5 * np.cos(3 * g.node_theta))
    assert foliated_schwarz_metrics(g, bumpy).monotonicity_violation > 1e-3
    assert len(foliated_schwarz_metrics(g, bumpy).profiles_csv().splitlines()) == 17


def test_antipodality():
    g = build_grid(DomainSpec.disk(1.0, 16, 32))
    a, b, c = (foliated_schwarz_metrics(g, fs_field(g, x)) for x in (0.0, np.pi, 0.0))
    assert antipodality_check(a, b) == pytest.approx(0.0, abs=1e-10)
    assert antipodality_check(a, c) == pytest.approx(np.pi, abs=1e-10)
    radial = foliated_schwarz_metrics(g, g.radius * (1 - g.radius))
    assert antipodality_check(a, radial) is None


def test_non_polar_rejected():
    sq = build_grid(DomainSpec.rectangle(1.0, 1.0, 8, 8))
    with pytest.raises(GridMismatchError):
        foliated_schwarz_metrics(sq, np.ones(sq.size))
