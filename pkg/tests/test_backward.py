import numpy as np
import pytest

from qchaos.backward import (
    INFINITY,
    DeadEnd,
    DepthTooLarge,
    Mode,
    constant_branch_orbit,
    critical_purity,
    critical_purity_report,
    inverse_bloch,
    inverse_f,
    julia_cloud,
    quasi_julia_cloud,
)
from qchaos.core import BlochVector, ErrorAngle, bloch_step, f_eps
from qchaos.stability import NoC3, find_c3

deg = ErrorAngle.from_degrees


def test_inverse_f_examples():
    a, b = inverse_f(1, deg(0))
    assert abs(a) < 1e-7 and abs(b) < 1e-7
    a, b = inverse_f(0, deg(0))
    assert {round(a.real, 12), round(b.real, 12)} == {1.0, -1.0}
    a, b = inverse_f(INFINITY, deg(0))
    assert abs(a - 1j) < 1e-12 and abs(b + 1j) < 1e-12


def test_inverse_f_round_trip():
    rng = np.random.default_rng(2)
    for _ in range(500):
        z = complex(*rng.normal(size=2))
        e = rng.uniform(-0.3, 0.3)
        for y in inverse_f(z, e):
            assert abs(f_eps(y, e) - z) < 1e-10 * max(1, abs(z))


def test_inverse_bloch_examples():
    e = deg(0)
    pre = inverse_bloch(BlochVector(1, 0, 0), e)
    assert len(pre) == 1 and np.allclose(pre[0].as_array(), [0, 0, 1])
    pre = inverse_bloch(BlochVector(0, 0, 1), e)
    assert sorted(round(p.u, 12) for p in pre) == [-1.0, 1.0]
    pre = inverse_bloch(BlochVector(0, 0, 0), e)
    assert len(pre) == 1 and pre[0].norm_sq == 0


def test_inverse_bloch_round_trip_random():
    rng = np.random.default_rng(9)
    for _ in range(2000):
        p = rng.normal(size=3)
        t = BlochVector.from_array(p / np.linalg.norm(p) * rng.uniform() ** (1 / 3))
        e = rng.uniform(-0.2, 0.2)
        for s in inverse_bloch(t, e):
            assert s.norm_sq <= 1 + 1e-9
            assert bloch_step(s, e).distance(t) < 1e-9


def test_inverse_bloch_recovers_forward_preimage():
    rng = np.random.default_rng(4)
    for _ in range(500):
        p = rng.normal(size=3)
        s = BlochVector.from_array(p / np.linalg.norm(p) * rng.uniform() ** (1 / 3))
        e = rng.uniform(-0.2, 0.2)
        pre = inverse_bloch(bloch_step(s, e), e)
        assert min(q.distance(s) for q in pre) < 1e-6


def test_plane_closure():
    e = deg(3)
    ce, se = np.cos(e.epsilon), np.sin(e.epsilon)
    for U in np.linspace(-0.9, 0.9, 13):
        for W in np.linspace(-0.9, 0.9, 13):
            if U * U + W * W > 1:
                continue
            for p in inverse_bloch(BlochVector(U, 0, W), e):
                if U * se + W * ce >= 0:
                    assert abs(p.v) < 1e-12
                else:
                    assert abs(p.u) < 1e-12


def test_julia_full_tree():
    cloud = julia_cloud(deg(0), 3, Mode.FULL_TREE)
    assert len(cloud) == 8
    for z in cloud.points:
        x = z
        for _ in range(3):
            x = f_eps(x, 0.0)
        assert abs(x - cloud.start) < 1e-8
    with pytest.raises(DepthTooLarge):
        julia_cloud(deg(0), 25, Mode.FULL_TREE)


def test_julia_cloud_symmetry_and_determinism():
    a = julia_cloud(deg(0), 12, Mode.FULL_TREE).points
    # f_0 is even: the cloud is closed under z -> -z
    s = np.sort_complex(np.round(a, 9))
    t = np.sort_complex(np.round(-a, 9) + 0.0)
    assert np.allclose(s, t, atol=1e-8)
    r1 = julia_cloud(deg(2), 2000, seed=5).points
    r2 = julia_cloud(deg(2), 2000, seed=5).points
    assert np.array_equal(r1, r2)


def test_julia_elongation_swaps_with_sign_of_eps():
    def aspect(d):
        z = julia_cloud(deg(d), 14, Mode.FULL_TREE).points
        z = z[np.isfinite(z) & (np.abs(z) < 50)]
        return np.ptp(z.real) / np.ptp(z.imag)

    assert (aspect(4.5) - 1) * (aspect(-4.5) - 1) < 0


def test_quasi_julia_cloud_purity_floor():
    e = deg(4.5)
    c3 = find_c3(e)
    cloud = quasi_julia_cloud(c3.location, e, depth=4000, seed=3, orbits=4)
    pur = cloud.purities()
    assert pur.min() < c3.purity
    assert pur.min() >= 0.838 - 5e-3
    cloud0 = quasi_julia_cloud(find_c3(0.0).location, 0.0, depth=4000, seed=3, orbits=4)
    assert cloud0.purities().min() >= 0.769 - 1e-3


def test_quasi_julia_dead_end():
    # the map is onto the ball, so only a start outside it can run out of preimages
    with pytest.raises(DeadEnd):
        quasi_julia_cloud(BlochVector(0.9, 0.0, 0.9), deg(0), depth=3, mode=Mode.FULL_TREE)
    with pytest.raises(DeadEnd):
        quasi_julia_cloud(BlochVector(0.9, 0.0, 0.9), deg(0), depth=3)


def test_constant_branch_orbits():
    e = deg(0)
    c3 = find_c3(e).location
    plus = constant_branch_orbit(c3, e, +1, 50)
    assert plus[-1].distance(c3) < 1e-9


def test_critical_purity_examples():
    assert abs(critical_purity(deg(0)) - 0.769) < 1e-3
    assert abs(critical_purity(deg(4.5)) - 0.838) < 2e-3
    assert abs(critical_purity(deg(-4.5)) - 0.688) < 2e-3
    rep = critical_purity_report(deg(-2))
    assert abs(rep.p_c - rep.p3) < 1e-3
    rep = critical_purity_report(deg(2))
    assert rep.p_c < rep.p3
    with pytest.raises(NoC3):
        critical_purity(deg(12))
