import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nehari_lab.grid import DomainSpec, build_grid
from nehari_lab.model import (
    PowerCouplingModel,
    Potential,
    SeparatedModel,
    ScaledModel,
    cubic_preset,
    quartic_pair_model,
    eval_P,
    gershgorin_nsd,
    matrix_M_alpha,
)

cone = st.floats(1e-2, 5.0)


def quartic(s):
    return s**4 / 4


def cubic(s):
    return s**3


def dcubic(s):
    return 3 * s**2


def unit_cubic():
    return PowerCouplingModel(4, (1.0, 1.0), (2, 2), 1.0)


def test_eval_P_substitution():
    v, g, h = eval_P(unit_cubic(), [1.0, 1.0])
    assert v == pytest.approx(-0.5)
    assert np.allclose(g, [-1.0, -1.0])
    assert h[0, 1] == pytest.approx(-4.0) and h[0, 1] == h[1, 0]


def test_eval_P_boundary_of_cone():
    _, g, _ = eval_P(unit_cubic(), [1.0, 0.0])
    assert np.array_equal(g, [1.0, 0.0])
    v, g, _ = eval_P(unit_cubic(), [0.0, 0.0])
    assert v == 0 and not g.any()


def test_eval_P_rejects_non_finite():
    with pytest.raises(ValueError):
        eval_P(unit_cubic(), [np.nan, 1.0])


def test_finite_differences(rng):
    m = PowerCouplingModel(4.5, (1.0, 2.0, 0.5), (2.0, 2.0, 2.5), [[0, 1, 0.3], [1, 0, 2], [0.3, 2, 0]])
    for _ in range(50):
        u = rng.uniform(0.2, 3.0, 3)
        v, g, h = eval_P(m, u)
        eps = 1e-6
        for i in range(3):
            e = np.zeros(3)
            e[i] = eps
            gi = (eval_P(m, u + e)[0] - eval_P(m, u - e)[0]) / (2 * eps)
            hi = (eval_P(m, u + e)[1] - eval_P(m, u - e)[1]) / (2 * eps)
            assert gi == pytest.approx(g[i], rel=1e-6, abs=1e-8)
            assert np.allclose(hi, h[i], rtol=1e-6, atol=1e-7)


@settings(max_examples=60, deadline=None)
@given(cone, cone)
def test_even_extension(a, b):
    m = cubic_preset(0.7)
    ref = eval_P(m, [a, b])
    for pt in ([-a, b], [a, -b], [-a, -b]):
        out = eval_P(m, pt)
        assert out[0] == ref[0] and np.array_equal(out[1], ref[1]) and np.array_equal(out[2], ref[2])


@settings(max_examples=80, deadline=None)
@given(cone, cone, st.floats(0.0, 20.0))
def test_superquadratic_with_certified_alpha(a, b, beta):
    m = cubic_preset(beta)
    v, g, _ = eval_P(m, [a, b])
    assert (2 + m.default_alpha) * v <= g @ np.array([a, b]) + 1e-12 * max(1.0, abs(v))


@settings(max_examples=80, deadline=None)
@given(cone, cone, st.floats(0.0, 20.0))
def test_P3_coupling_only_lowers(a, b, beta):
    m = cubic_preset(beta)
    g = eval_P(m, [a, b])[1]
    assert g[0] * a <= eval_P(m, [a, 0.0])[1][0] * a + 1e-12
    assert g[1] * b <= eval_P(m, [0.0, b])[1][1] * b + 1e-12


def test_superlinearity():
    m = cubic_preset(3.0)
    r = [eval_P(m, [t, 0.0])[1][0] / t for t in (10.0, 100.0, 1000.0)]
    assert r[0] < r[1] < r[2]


def test_M_alpha_examples():
    m1 = PowerCouplingModel(4, (1.0,), (2,), 0.0)
    assert matrix_M_alpha(m1, [1.7], 2.0) == pytest.approx(np.zeros((1, 1)), abs=1e-12)
    M = matrix_M_alpha(unit_cubic(), [1.0, 1.0], 2.0)
    assert np.all(np.linalg.eigvalsh(M) <= 1e-12)
    assert not matrix_M_alpha(unit_cubic(), [0.0, 0.0], 2.0).any()


def test_gershgorin():
    assert gershgorin_nsd(np.diag([-1.0, -1.0]))
    assert gershgorin_nsd(np.array([[-2.0, 1.0], [1.0, -2.0]]))
    h = np.array([[1.0, 0.0], [0.0, -1.0]])
    assert not gershgorin_nsd(h) and np.linalg.eigvalsh(h)[-1] > 0
    with pytest.raises(ValueError):
        gershgorin_nsd(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_preset_coupling_conventions():
    # both enter the PDE as β
    g = eval_P(cubic_preset(1.5), [1.0, 1.0])[1]
    assert g[0] == pytest.approx(1 - 1.5)
    g = eval_P(quartic_pair_model(1.5), [1.0, 1.0])[1]
    assert g[0] == pytest.approx(1 - 1.5)
    assert eval_P(cubic_preset(1.5, lam=[2.0, 3.0]), [1.0, 2.0])[1][1] == pytest.approx(3 * 8 - 1.5 * 2)


def test_separated_model_matches_power_family(rng):
    b = 1.5
    sep = SeparatedModel(
        F=(quartic,) * 2, f=(cubic,) * 2, fprime=(dcubic,) * 2,
        H=lambda u: 0.5 * b * u[0] ** 2 * u[1] ** 2,
        H_grad=lambda u: np.stack([b * u[0] * u[1] ** 2, b * u[1] * u[0] ** 2]),
        H_hess=lambda u: np.array([[b * u[1] ** 2, 2 * b * u[0] * u[1]], [2 * b * u[0] * u[1], b * u[0] ** 2]]),
        p=4.0,
    )
    ref = quartic_pair_model(b)
    for _ in range(20):
        u = rng.uniform(0.1, 3, 2)
        for x, y in zip(eval_P(sep, u), eval_P(ref, u)):
            assert np.allclose(x, y, rtol=1e-13, atol=1e-13)


def test_scaled_model_matches_closed_form(rng):
    base = PowerCouplingModel(4, (1.0, 2.0), (2, 2), 0.8)
    c = (2.0, 0.5)
    for _ in range(10):
        u = rng.uniform(0.1, 2, 2)
        assert eval_P(ScaledModel(base, c), u)[0] == pytest.approx(eval_P(base.scaled(c), u)[0], rel=1e-13)


def test_parameter_violations():
    m = PowerCouplingModel(3, (1.0, 1.0), (2, 2), 1.0)
    v = [x for x in m.parameter_violations() if x["rule"] == "p >= q_i + q_j"]
    assert v and v[0]["pair"] == [0, 1]
    assert cubic_preset(2.0).satisfies_parameter_rules()
    with pytest.raises(ValueError):
        PowerCouplingModel(4, (1.0, 1.0), (2, 2), [[0, 1, 2]])


def test_potentials():
    g = build_grid(DomainSpec.disk(1.0, 8, 8))
    assert np.all(Potential("constant", value=2.0).realize(g) == 2.0)
    q = Potential("radial_quadratic", a=1.0, b=2.0).realize(g)
    assert np.allclose(q, 1 + 2 * g.radius**2)
    t = Potential("tabulated_radial", r=(0.0, 1.0), v=(0.0, 1.0))
    assert np.allclose(t.realize(g), g.radius)
    assert Potential.from_dict(t.to_dict()) == t
    with pytest.raises(ValueError):
        Potential("tabulated_radial", r=(1.0, 0.0), v=(0.0, 1.0))
    with pytest.raises(ValueError):
        Potential("gaussian")
