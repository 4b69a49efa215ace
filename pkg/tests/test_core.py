import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qchaos.core import (
    INFINITY,
    BlochVector,
    ErrorAngle,
    NonPureInput,
    OffSphere,
    ProjectionPole,
    bloch_step,
    bloch_step_arrays,
    bloch_to_z,
    f_eps,
    f_eps_derivative,
    inverse_stereographic,
    purity,
    stereographic_project,
    z_to_bloch,
)
from qchaos.oracle import (
    ZeroSuccessProbability,
    bloch_of,
    density_matrix,
    faulty_hadamard,
    hadamard_product_step,
    is_physical_matrix,
    oracle_report,
    random_density_matrix,
    step_via_circuit,
    success_probability,
)

E0 = ErrorAngle(0.0)


def test_f_eps_examples():
    assert abs(f_eps(0, E0) - 1) < 1e-15
    assert f_eps(1j, E0) is INFINITY
    assert abs(f_eps(INFINITY, E0) - (-1)) < 1e-15
    e = ErrorAngle.from_degrees(9)
    th = e.theta
    assert abs(f_eps(INFINITY, e) + math.cos(th) / math.sin(th)) < 1e-15


def test_f_eps_huge_argument_uses_other_chart():
    e = ErrorAngle.from_degrees(3)
    z = 1e200 + 1e200j
    w = f_eps(z, e)
    assert w is not INFINITY and abs(w - f_eps(INFINITY, e)) < 1e-12


def test_f_eps_matches_circuit_at_spec_point():
    e = ErrorAngle.from_degrees(9)
    z = 0.3 + 0.2j
    rho = density_matrix(z_to_bloch(z))
    out, _ = step_via_circuit(rho, e)
    assert abs(bloch_to_z(bloch_of(out)) - f_eps(z, e)) < 1e-12


def test_reduces_to_ideal_map():
    rng = np.random.default_rng(1)
    for z in rng.normal(size=1000) + 1j * rng.normal(size=1000):
        assert abs(f_eps(z, E0) - (1 - z * z) / (1 + z * z)) < 1e-12 * max(1, abs((1 - z * z) / (1 + z * z)))


def test_derivative_against_difference_quotient():
    e = ErrorAngle.from_degrees(-7)
    z = 0.4 - 0.3j
    h = 1e-6
    num = (f_eps(z + h, e) - f_eps(z - h, e)) / (2 * h)
    assert abs(num - f_eps_derivative(z, e)) < 1e-8


def test_bloch_step_examples():
    out = bloch_step(BlochVector(0, 0, 1), E0)
    assert np.allclose(out.as_array(), [1, 0, 0])
    for d in (-40, 0, 13):
        assert bloch_step(BlochVector(0, 0, 0), ErrorAngle.from_degrees(d)).norm_sq == 0
    e = ErrorAngle.from_degrees(10)
    s = BlochVector(0.2, 0.3, -0.4)
    out, _ = step_via_circuit(density_matrix(s), e)
    assert np.abs(bloch_of(out).as_array() - bloch_step(s, e).as_array()).max() < 1e-12


def test_array_step_matches_scalar():
    e = ErrorAngle.from_degrees(4.5)
    rng = np.random.default_rng(3)
    pts = rng.uniform(-0.5, 0.5, size=(50, 3))
    u, v, w = bloch_step_arrays(pts[:, 0], pts[:, 1], pts[:, 2], e)
    for i, p in enumerate(pts):
        b = bloch_step(BlochVector(*p), e)
        assert np.allclose([u[i], v[i], w[i]], b.as_array(), atol=1e-15)


def test_purity_examples():
    assert purity(BlochVector(0, 0, 0)) == 0.5
    assert purity(BlochVector(1, 0, 0)) == 1.0
    assert abs(purity(BlochVector(0.639, 0, 0.361)) - 0.769) < 5e-4


def test_riemann_parameter_examples():
    assert bloch_to_z(BlochVector(0, 0, 1)) == 0
    assert bloch_to_z(BlochVector(0, 0, -1)) is INFINITY
    assert bloch_to_z(BlochVector(1, 0, 0)) == 1
    assert z_to_bloch(INFINITY) == BlochVector(0, 0, -1)
    with pytest.raises(NonPureInput):
        bloch_to_z(BlochVector(0.5, 0, 0))


def test_angle_units():
    assert abs(ErrorAngle.from_percent(5).degrees - 4.5) < 1e-12
    e = ErrorAngle.parse(-4.5, "deg")
    assert abs(ErrorAngle.parse(e.percent, "pct").epsilon - e.epsilon) < 1e-15
    assert ErrorAngle.parse(0.1, "rad").epsilon == 0.1
    with pytest.raises(ValueError):
        ErrorAngle.parse(1, "grad")


def test_stereographic_examples():
    assert stereographic_project(BlochVector(0, 0, 1), 1.0) == (0.0, 0.0)
    assert stereographic_project(BlochVector(1, 0, 0), 1.0) == (1.0, 0.0)
    w = math.sqrt(0.9 - 0.09)
    x, y = stereographic_project(BlochVector(0.3, 0, w), 0.95)
    assert abs(x - 0.3 / (math.sqrt(0.9) + w)) < 1e-12 and y == 0
    with pytest.raises(OffSphere):
        stereographic_project(BlochVector(0.3, 0, 0), 1.0)
    with pytest.raises(ProjectionPole):
        stereographic_project(BlochVector(0, 0, -math.sqrt(0.5)), 0.75)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(-3, 3),
    st.floats(-3, 3),
    st.floats(0.51, 1.0),
)
def test_stereographic_round_trip(x, y, P):
    u, v, w = inverse_stereographic(x, y, P)
    xx, yy = stereographic_project(BlochVector(u, v, w), P)
    assert abs(xx - x) < 1e-9 * (1 + abs(x)) and abs(yy - y) < 1e-9 * (1 + abs(y))


unit_ball = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(
    lambda p: p[0] ** 2 + p[1] ** 2 + p[2] ** 2 <= 1
)
angles = st.floats(-math.pi / 2, math.pi / 2)


@settings(max_examples=300, deadline=None)
@given(unit_ball, angles)
def test_invariant_sets_and_physicality(p, e):
    s = BlochVector(*p)
    out = bloch_step(s, e)
    assert out.norm_sq <= 1 + 1e-12
    if s.v == 0:
        assert out.v == 0
    if s.norm_sq > 1e-6:
        t = BlochVector.from_array(np.array(p) / math.sqrt(s.norm_sq))
        assert abs(bloch_step(t, e).norm_sq - 1.0) < 1e-12


@settings(max_examples=300, deadline=None)
@given(st.complex_numbers(max_magnitude=50, allow_nan=False, allow_infinity=False), angles)
def test_conjugacy(z, e):
    lhs = z_to_bloch(f_eps(z, e))
    rhs = bloch_step(z_to_bloch(z), e)
    assert np.abs(lhs.as_array() - rhs.as_array()).max() < 1e-10


def test_purity_along_orbits_never_exceeds_one():
    rng = np.random.default_rng(11)
    for _ in range(200):
        p = rng.normal(size=3)
        s = BlochVector.from_array(p / np.linalg.norm(p) * rng.uniform() ** (1 / 3))
        e = rng.uniform(-0.8, 0.8)
        for _ in range(50):
            s = bloch_step(s, e)
            assert purity(s) <= 1 + 1e-12


# ---------------------------------------------------------------- oracle


def test_faulty_hadamard_properties():
    for d in (-30, 0, 4.5):
        H = faulty_hadamard(ErrorAngle.from_degrees(d))
        assert np.allclose(H @ H.conj().T, np.eye(2), atol=1e-12)
        assert np.allclose(H @ H, np.eye(2), atol=1e-12)
    assert np.allclose(np.abs(faulty_hadamard(E0)), 1 / math.sqrt(2))


def test_circuit_examples():
    out, p = step_via_circuit(density_matrix(BlochVector(0, 0, 1)), E0)
    assert p == pytest.approx(1.0) and np.allclose(bloch_of(out).as_array(), [1, 0, 0])
    out, p = step_via_circuit(np.eye(2) / 2, E0)
    assert p == pytest.approx(0.5) and np.allclose(out, np.eye(2) / 2)
    plus = density_matrix(BlochVector(1, 0, 0))
    assert np.allclose(bloch_of(hadamard_product_step(plus, E0)).as_array(), [0, 0, 1])


def test_zero_success_probability():
    with pytest.raises(ZeroSuccessProbability):
        hadamard_product_step(np.zeros((2, 2)), E0)


def test_circuit_equals_elementwise_product_form():
    rng = np.random.default_rng(5)
    for _ in range(200):
        rho = random_density_matrix(rng)
        e = rng.uniform(-0.8, 0.8)
        out, p = step_via_circuit(rho, e)
        assert np.allclose(out, hadamard_product_step(rho, e), atol=1e-12)
        assert abs(p - success_probability(bloch_of(rho))) < 1e-12
        assert 0.5 - 1e-12 <= p <= 1 + 1e-12
        assert is_physical_matrix(out)


def test_oracle_report_small():
    rep = oracle_report(200, 3)
    assert rep["max_error_mixed"] < 1e-12 and rep["max_error_pure"] < 1e-10
