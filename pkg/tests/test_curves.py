import numpy as np
import pytest

from mesomem import (
    Configuration,
    CurveError,
    PeriodicCurve,
    RayOverrunError,
    TransversalityError,
    embedding_check,
    load_configuration,
    load_curve,
    ray_map,
    ray_mass,
    ray_offset,
    resample_arclength,
    save_configuration,
    save_curve,
)


def test_circle_geometry():
    c = resample_arclength("circle:1", 512)
    assert c.length == pytest.approx(2 * np.pi, abs=1e-8)
    speed = np.linalg.norm(c.tangent, axis=1)
    assert np.max(np.abs(speed - 1.0)) <= 1e-6
    # counterclockwise circle, perp (a,b) -> (-b,a): inward normal, kappa = -1
    assert np.max(np.abs(c.curvature + 1.0)) <= 1e-6
    assert np.sum(c.curvature) * c.ds == pytest.approx(-2 * np.pi, abs=1e-6)
    # normal is unit and orthogonal to the tangent
    assert np.max(np.abs(np.linalg.norm(c.normal, axis=1) - 1.0)) <= 1e-12
    assert np.max(np.abs(np.sum(c.normal * c.tangent, axis=1))) <= 1e-9


def test_degenerate_ellipse_is_circle():
    e = resample_arclength("ellipse:1:1", 256)
    c = resample_arclength("circle:1", 256)
    assert np.allclose(e.points, c.points)
    assert e.length == c.length


def test_ellipse_bending_self_convergence():
    e = resample_arclength("ellipse:1:0.6", 1024)
    ref = resample_arclength("ellipse:1:0.6", 8192)
    val = np.sum(e.curvature**2) * e.ds
    ref_val = np.sum(ref.curvature**2) * ref.ds
    assert val == pytest.approx(ref_val, rel=1e-5)


def test_resample_idempotent():
    e = resample_arclength("ellipse:1:0.6", 512)
    again = resample_arclength(e.points, 512)
    move = np.max(np.linalg.norm(again.points - e.points, axis=1))
    assert move < 1e-10


def test_degenerate_inputs_rejected():
    with pytest.raises(CurveError):
        resample_arclength(np.zeros((16, 2)), 64)  # repeated points
    with pytest.raises(CurveError):
        resample_arclength(np.random.default_rng(0).random((5, 2)), 64)  # too few
    with pytest.raises(CurveError):
        resample_arclength("circle:-1", 64)
    with pytest.raises(CurveError):
        PeriodicCurve(np.random.default_rng(0).random((64, 2)), 1.0)  # not arclength


def test_ray_offset_examples():
    assert ray_offset(1.0, 0.0, 1.0, 0.1) == pytest.approx(0.1, abs=0)
    assert ray_offset(1.0, 1.0, 1.0, 0.1) == pytest.approx(1 - np.sqrt(0.8), rel=1e-14)
    assert ray_offset(1.0, 1.0, -1.0, 0.1) == pytest.approx(1 - np.sqrt(1.2), rel=1e-13)
    with pytest.raises(RayOverrunError):
        ray_offset(1.0, 1.0, 1.0, 1.5)  # discriminant < 0


def test_ray_mass_examples():
    assert ray_mass(1.0, 1.0, ray_offset(1.0, 1.0, 1.0, 0.1), 0.1) == pytest.approx(
        1.0, abs=1e-12)
    assert ray_mass(1.0, 0.0, 0.1, 0.1) == 1.0
    assert ray_mass(1.0, 1.0, 0.0, 0.1) == 0.0


def test_ray_roundtrip_sweep():
    rng = np.random.default_rng(42)
    N = 10_000
    A = 0.2 + 0.8 * rng.random(N)
    # straddle the series/closed-form boundary: mix tiny and O(1) rotations
    B = np.where(rng.random(N) < 0.3,
                 rng.standard_normal(N) * 1e-7,
                 rng.standard_normal(N))
    m = 2.0 * rng.standard_normal(N)
    eps = 10.0 ** rng.uniform(-3, -0.5, N)
    keep = 2.0 * B * eps * m / A**2 < 0.9
    A, B, m, eps = A[keep], B[keep], m[keep], eps[keep]
    t = ray_offset(A, B, m, eps)
    back = ray_mass(A, B, t, eps)
    assert np.max(np.abs(back - m)) <= 1e-12


def test_ray_branch_continuity():
    # series and closed form agree at the switching threshold
    A, m, eps = 1.0, 1.0, 0.1
    btol = 1e-6 * A**2 / (eps * max(abs(m), 1.0))
    B = btol
    x = 2.0 * B * eps * m / A**2
    closed = (A / B) * x / (1.0 + np.sqrt(1.0 - x))
    em = eps * m
    series = em / A + B * em**2 / (2 * A**3) + B**2 * em**3 / (2 * A**5)
    assert abs(closed - series) <= 1e-12 * abs(series)


def test_ray_map_basics(unit_circle_config):
    Z = unit_circle_config
    p0 = ray_map(Z, 0.0, 0.0, 0.1)
    assert np.allclose(p0, Z.curve.points[0], atol=1e-12)
    # circle R=1, theta = inward normal: offset moves the point inward
    p1 = ray_map(Z, 0.0, 1.0, 0.1)
    dist = np.linalg.norm(np.asarray(p1) - Z.curve.points[0])
    assert dist == pytest.approx(1 - np.sqrt(0.8), rel=1e-9)
    assert np.linalg.norm(p1) == pytest.approx(1 - dist, rel=1e-9)
    # odd symmetry in m when B = 0: build a configuration on a straightish
    # curve is overkill; check via the offset directly
    assert ray_offset(1.0, 0.0, -0.3, 0.1) == -ray_offset(1.0, 0.0, 0.3, 0.1)


def test_embedding_pass_thin_annulus(unit_circle_config):
    res = embedding_check(unit_circle_config, 0.05)
    assert res.ok
    assert bool(res) is True


def test_embedding_fail_ray_overrun(unit_circle_config):
    res = embedding_check(unit_circle_config, 1.5)
    assert not res.ok
    assert res.reason == "ray-overrun"


def test_embedding_fail_figure_eight():
    t = 2 * np.pi * np.arange(64) / 64
    pts = np.stack([np.sin(t), np.sin(t) * np.cos(t)], axis=1)
    curve = resample_arclength(pts, 256)
    Z = Configuration(curve, curve.normal.copy(),
                      np.ones(256, dtype=int), 0.5 * np.ones(256))
    res = embedding_check(Z, 0.05)
    assert not res.ok
    assert res.reason == "overlap"
    assert res.cells is not None
    # oracle: brute-force segment crossing among the sampled mesh edges
    from mesomem.curves import _mesh_points
    pts3, _ = _mesh_points(Z, 0.05, 24)
    segs = []
    ns, K = pts3.shape[0], pts3.shape[1]
    for j in range(ns):
        for k in range(K):
            segs.append((pts3[j, k], pts3[(j + 1) % ns, k]))

    def crosses(a, b, c, d):
        def orient(p, q, r):
            return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
        return (orient(a, b, c) * orient(a, b, d) < 0
                and orient(c, d, a) * orient(c, d, b) < 0)

    found = False
    for i in range(len(segs)):
        for j in range(i + 2, len(segs)):
            if crosses(*segs[i], *segs[j]):
                found = True
                break
        if found:
            break
    assert found  # independent confirmation that the sampled sheet overlaps


def test_embedding_resolution_guard(unit_circle_config):
    with pytest.raises(ValueError):
        embedding_check(unit_circle_config, 0.05, resolution=8)


def test_transversality_validation():
    c = resample_arclength("circle:1", 64)
    theta = c.normal.copy()
    theta[10] = -theta[10]  # flip one director against the normal
    with pytest.raises(TransversalityError) as err:
        Configuration(c, theta, np.ones(64, dtype=int), np.ones(64))
    assert err.value.node == 10


def test_curve_io_roundtrip(tmp_path):
    c = resample_arclength("ellipse:1:0.6", 128)
    path = tmp_path / "curve.txt"
    save_curve(path, c)
    back = load_curve(path)
    assert back.length == c.length
    assert np.array_equal(back.points, c.points)


def test_configuration_io_roundtrip(tmp_path, unit_circle_config):
    Z = unit_circle_config
    path = tmp_path / "config.txt"
    save_configuration(path, Z)
    back = load_configuration(path)
    assert np.array_equal(back.curve.points, Z.curve.points)
    assert np.array_equal(back.chi, Z.chi)
    assert np.array_equal(back.mass, Z.mass)
    assert np.allclose(back.theta, Z.theta, atol=1e-15)
