import numpy as np
import pytest

from qchaos.basins import (
    InvalidViewport,
    Kind,
    Surface,
    classify,
    classify_arrays,
    monte_carlo_divergence,
    pixel_coords,
    render,
    sample_ball,
)
from qchaos.core import BlochVector, ErrorAngle, bloch_step, purity
from qchaos.fractal import verify_contact
from qchaos.stability import attractor_inventory

deg = ErrorAngle.from_degrees
PLANE = (-1.0, 1.0, -1.0, 1.0)


def test_classify_examples():
    assert classify(BlochVector(0, 0, 1), deg(0)).kind is Kind.TO_C1_EVEN
    assert classify(BlochVector(0, 0, 1), deg(0)).iterations == 0
    assert classify(BlochVector(1, 0, 0), deg(0)).kind is Kind.TO_C1_ODD
    assert classify(BlochVector(0.01, 0, 0.01), deg(0)).kind is Kind.TO_C0
    lab = classify(BlochVector(0.639 + 1e-6, 0, 0.361), deg(0))
    assert lab.kind in (Kind.TO_C1_EVEN, Kind.TO_C1_ODD, Kind.TO_C0)


def test_parity_flips_along_orbit():
    e = deg(2)
    inv = attractor_inventory(e)
    rng = np.random.default_rng(0)
    n = 0
    for _ in range(300):
        p = rng.uniform(-1, 1, 3)
        if p @ p > 1:
            continue
        s = BlochVector(*p)
        a = classify(s, e, inv)
        b = classify(bloch_step(s, e), e, inv)
        if a.kind in (Kind.TO_C1_EVEN, Kind.TO_C1_ODD) and a.iterations > 0:
            assert b.kind in (Kind.TO_C1_EVEN, Kind.TO_C1_ODD) and b.kind != a.kind
            assert b.iterations == a.iterations - 1
            n += 1
    assert n > 50


def test_pixel_coords_antisymmetric():
    X, Y = pixel_coords((-1, 1, -1, 1), 7, 5)
    assert np.array_equal(X, -X[:, ::-1]) and np.array_equal(Y, -Y[::-1, :])
    assert Y[0, 0] > Y[-1, 0]  # row 0 is the top


def test_plane_render_mirror_and_outside_disk():
    g = render(Surface.plane(), PLANE, 256, 256, deg(0))
    # f_0 is even in (u, v): mirrored states share every future step, parity included
    assert np.array_equal(g.kinds, g.kinds[:, ::-1])
    assert g.kinds[0, 0] == Kind.NON_CONVERGED and g.iterations[0, 0] == 0
    assert g.counts()["TO_C0"] > 0


def test_plane_mirror_holds_for_any_error():
    # on the plane the map only sees u through u**2
    for d in (4.5, -4.5):
        g = render(Surface.plane(), PLANE, 128, 128, deg(d))
        assert np.array_equal(g.kinds, g.kinds[:, ::-1])
        # ... but the north/south mirror is broken by the error
        c0 = g.kinds == Kind.TO_C0
        assert not np.array_equal(c0, c0[::-1, :])


def test_render_thread_independent():
    a = render(Surface.sphere(0.95), (-2, 2, -2, 2), 300, 300, deg(1.8), threads=1)
    b = render(Surface.sphere(0.95), (-2, 2, -2, 2), 300, 300, deg(1.8), threads=4)
    assert np.array_equal(a.kinds, b.kinds) and np.array_equal(a.iterations, b.iterations)


def test_sphere_below_critical_purity_has_no_pure_contact():
    g = render(Surface.sphere(0.75), (-2.4, 2.4, -2.4, 2.4), 256, 256, deg(0))
    assert not verify_contact(g)
    g = render(Surface.sphere(1.0), (-2.4, 2.4, -2.4, 2.4), 256, 256, deg(0))
    assert verify_contact(g)


def test_c0_basin_tails_lose_purity():
    e = deg(0)
    inv = attractor_inventory(e)
    rng = np.random.default_rng(1)
    checked = 0
    for _ in range(200):
        p = rng.uniform(-1, 1, 3)
        p[1] = 0
        if p @ p > 1:
            continue
        s = BlochVector(*p)
        lab = classify(s, e, inv)
        if lab.kind is not Kind.TO_C0 or lab.iterations < 12:
            continue
        traj = [s]
        for _ in range(lab.iterations):
            traj.append(bloch_step(traj[-1], e))
        assert traj[-1].norm_sq <= 1e-6 + 1e-12
        assert purity(traj[-1]) < purity(s)
        checked += 1
    assert checked > 0


def test_no_c0_basin_when_repelling():
    g = render(Surface.plane(), PLANE, 128, 128, deg(45))
    assert g.counts()["TO_C0"] == 0


def test_invalid_viewport():
    with pytest.raises(InvalidViewport):
        render(Surface.plane(), (1, -1, 0, 1), 10, 10, 0.0)
    with pytest.raises(InvalidViewport):
        render(Surface.plane(), (0, 1, 0, float("nan")), 10, 10, 0.0)
    with pytest.raises(InvalidViewport):
        Surface.sphere(0.4)


def test_writers(tmp_path):
    g = render(Surface.plane(), PLANE, 6, 4, deg(0))
    g.write_ppm(tmp_path / "a.ppm")
    data = (tmp_path / "a.ppm").read_bytes()
    assert data.startswith(b"P6\n6 4\n255\n") and len(data) == len(b"P6\n6 4\n255\n") + 6 * 4 * 3
    g.write_csv(tmp_path / "a.csv")
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == "x_index,y_index,kind,iterations" and len(lines) == 25


def test_sampling_partition_invariant():
    whole = sample_ball(3, 0, 1000)
    parts = np.concatenate([sample_ball(3, 0, 300), sample_ball(3, 300, 700)])
    assert np.array_equal(whole, parts)
    assert (np.einsum("ij,ij->i", whole, whole) <= 1).all()


def test_monte_carlo_zero_error_and_determinism():
    r = monte_carlo_divergence(0.0, n=5000, seed=2)
    assert r.delta == 0.0
    a = monte_carlo_divergence(deg(4.5), n=70000, seed=2, threads=1)
    b = monte_carlo_divergence(deg(4.5), n=70000, seed=2, threads=3)
    assert a.delta == b.delta and a.label_counts == b.label_counts


def test_classify_arrays_shapes():
    k, it = classify_arrays([0.0, 0.0], [0.0, 0.0], [1.0, 0.0], 0.0, attractor_inventory(0.0))
    assert list(k) == [Kind.TO_C1_EVEN, Kind.TO_C0] and list(it) == [0, 0]


def test_mixed_cycle_label_at_minus_45():
    e = deg(-45)
    lab = classify(BlochVector(-0.4, 0, -0.26), e, r=1e-3, max_iter=3000)
    assert lab.kind is Kind.TO_MIXED_CYCLE
