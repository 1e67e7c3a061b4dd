import json

import numpy as np
import pytest

from nehari_lab.assumptions import check_assumptions, sample_lattice
from nehari_lab.grid import DomainSpec, build_grid
from nehari_lab.linalg import lambda1_estimate
from nehari_lab.model import Potential, PowerCouplingModel, SeparatedModel, cubic_preset

GRID = build_grid(DomainSpec.disk(1.0, 16, 16))


def quartic(s):
    return s**4 / 4


def cubic(s):
    return s**3


def dcubic(s):
    return 3 * s**2


def zero_potentials(k):
    return [Potential()] * k


def test_cubic_preset_all_pass():
    rep = check_assumptions(cubic_preset(1.0), GRID, zero_potentials(2), [1.0, 1.0])
    assert rep.all_passed, rep.failures
    assert rep.alpha == 2.0
    assert rep["P4"].method == "closed_form"
    json.dumps(rep.to_dict())


def test_p3_fails_parameter_rules_with_pair_witness():
    rep = check_assumptions(PowerCouplingModel(3, (1.0, 1.0), (2, 2), 1.0), GRID, zero_potentials(2), [1, 1])
    assert rep["parameters"].passed is False
    assert rep["parameters"].witness is not None
    assert "P4" in rep.failures


def test_P0_fails_for_deep_potential():
    lam1 = lambda1_estimate(GRID)
    rep = check_assumptions(cubic_preset(1.0), GRID, [Potential(value=-2 * lam1)] * 2, [1.0, 1.0])
    assert rep["P0"].passed is False and not rep.existence_ok()


def test_every_verdict_has_method_and_failures_witness():
    rep = check_assumptions(PowerCouplingModel(3, (1.0, 1.0), (2, 2), 1.0), GRID, zero_potentials(2), [1, 1])
    for name, v in rep.verdicts.items():
        assert v.method in ("closed_form", "sampled"), name
        if v.passed is False:
            assert v.witness is not None, name


def test_sampled_user_model():
    b = 1.0
    sep = SeparatedModel(
        F=(quartic,) * 2, f=(cubic,) * 2, fprime=(dcubic,) * 2,
        H=lambda u: 0.5 * b * u[0] ** 2 * u[1] ** 2,
        H_grad=lambda u: np.stack([b * u[0] * u[1] ** 2, b * u[1] * u[0] ** 2]),
        H_hess=lambda u: np.array([[b * u[1] ** 2, 2 * b * u[0] * u[1]], [2 * b * u[0] * u[1], b * u[0] ** 2]]),
        p=4.0,
    )
    rep = check_assumptions(sep, GRID, zero_potentials(2), [1.0, 1.0])
    assert rep["P4"].method == "sampled"
    assert rep.existence_ok(), rep.failures


def test_sample_lattice_size():
    pts = sample_lattice(2)
    assert pts.shape == (2, 17**2) and pts.min() == pytest.approx(1e-3)
    assert sample_lattice(6).shape[1] <= 100_000


def test_bad_diffusion_rejected():
    with pytest.raises(ValueError):
        check_assumptions(cubic_preset(1.0), GRID, zero_potentials(2), [1.0, -1.0])
