import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elasticflow.errors import DegenerateCurve, GridMismatch, TooFewNodes
from elasticflow.geometry import (
    arclength_derivative,
    build_curve,
    compute_geometry,
    reparametrize_constant_speed,
    spatial_derivatives,
)

from conftest import circle_curve, segment_curve


def test_build_circle_length():
    c = circle_curve(n=128)
    g = compute_geometry(c)
    # trapezoid length of the sampled circle is 2*pi*sinc(2*pi*h)
    assert abs(g.length - 2 * np.pi) < 2 * np.pi * (2 * np.pi / 128) ** 2 / 4


def test_too_few_nodes():
    with pytest.raises(TooFewNodes):
        build_curve([[0.0, 0.0], [1.0, 0.0]], closed=False)
    with pytest.raises(TooFewNodes):
        build_curve(np.zeros((5, 2)), closed=True)


def test_degenerate_all_equal():
    with pytest.raises(DegenerateCurve):
        build_curve(np.zeros((64, 2)), closed=True)


def test_degenerate_near_stall():
    # distinct nodes, but a whole band collapses onto one point so the
    # parametrization speed stalls far below the regularity threshold
    x = np.arange(64) / 64
    th = 2 * np.pi * x
    pts = np.stack([np.cos(th), np.sin(th)], axis=1)
    for i in range(1, 5):
        pts[i] = pts[0] + i * np.array([1e-12, 0.0])
    with pytest.raises(DegenerateCurve):
        build_curve(pts, closed=True)


def test_second_derivative_circle():
    c = circle_curve(n=256)
    d2 = spatial_derivatives(c, 2)
    target = -(2 * np.pi) ** 2 * c.points
    err = np.max(np.linalg.norm(d2 - target, axis=1))
    assert err < (2 * np.pi) ** 2 * 4 * (1 / 256) ** 2 * 10


def test_straight_segment_interior_second_derivative():
    c = segment_curve(n=65)
    d2 = spatial_derivatives(c, 2)
    assert np.max(np.abs(d2)) < 1e-12


def test_cubic_third_derivative_exact():
    x = np.linspace(0.0, 1.0, 33)
    pts = np.stack([x, x**3], axis=1)
    c = build_curve(pts, closed=False)
    d3 = spatial_derivatives(c, 3)
    assert np.max(np.abs(d3[:, 0])) < 1e-10
    assert np.max(np.abs(d3[:, 1] - 6.0)) < 1e-10


def test_circle_curvature_sign_and_value():
    ccw = compute_geometry(circle_curve(n=128))
    assert np.allclose(ccw.curvature, 1.0, atol=1e-3)
    cw = compute_geometry(circle_curve(n=128, clockwise=True))
    assert np.allclose(cw.curvature, -1.0, atol=1e-3)
    big = compute_geometry(circle_curve(n=128, r=2.0))
    assert np.allclose(big.curvature, 0.5, atol=5e-4)
    assert abs(big.length - 4 * np.pi) < 8e-3


def test_frame_orthonormal():
    c = circle_curve(n=64, r=1.7, center=(0.3, -2.0))
    g = compute_geometry(c)
    assert np.max(np.abs(np.linalg.norm(g.tau, axis=1) - 1.0)) < 1e-12
    assert np.max(np.abs(np.linalg.norm(g.nu, axis=1) - 1.0)) < 1e-12
    assert np.max(np.abs(np.einsum("ij,ij->i", g.tau, g.nu))) < 1e-12
    # nu is exactly the +pi/2 rotation of tau
    rot = np.stack([-g.tau[:, 1], g.tau[:, 0]], axis=1)
    assert np.array_equal(rot, g.nu)


def test_ds_weight_sums_to_length():
    for curve in (circle_curve(n=96), segment_curve(n=33)):
        g = compute_geometry(curve)
        assert abs(np.sum(g.ds_weight) - g.length) < 1e-14 * max(1.0, g.length)


@settings(max_examples=25, deadline=None)
@given(angle=st.floats(-np.pi, np.pi), tx=st.floats(-5, 5), ty=st.floats(-5, 5))
def test_rigid_motion_invariance(angle, tx, ty):
    c = circle_curve(n=64, r=1.3)
    rot = np.array([[np.cos(angle), -np.sin(angle)],
                    [np.sin(angle), np.cos(angle)]])
    moved = build_curve(c.points @ rot.T + np.array([tx, ty]), closed=True)
    g0 = compute_geometry(c)
    g1 = compute_geometry(moved)
    assert np.max(np.abs(g0.curvature - g1.curvature)) < 1e-11
    assert abs(g0.length - g1.length) < 1e-11
    assert np.max(np.abs(g0.ds_weight - g1.ds_weight)) < 1e-12


@settings(max_examples=20, deadline=None)
@given(lam=st.floats(0.1, 10.0))
def test_scaling_law(lam):
    c = circle_curve(n=64)
    scaled = build_curve(lam * c.points, closed=True)
    g0 = compute_geometry(c)
    g1 = compute_geometry(scaled)
    assert np.allclose(g1.curvature * lam, g0.curvature, rtol=0, atol=1e-12)
    assert np.isclose(g1.length, lam * g0.length, rtol=1e-12)


def test_curvature_convergence_order():
    errs = []
    for n in (64, 128, 256):
        g = compute_geometry(circle_curve(n=n))
        errs.append(np.max(np.abs(g.curvature - 1.0)))
    for e1, e2 in zip(errs, errs[1:]):
        assert 3.5 < e1 / e2 < 4.5


def test_arclength_derivative_constant_and_curvature():
    c = circle_curve(n=128)
    g = compute_geometry(c)
    const = arclength_derivative(np.ones(c.n), c, 1, g)
    assert np.max(np.abs(const)) < 1e-12
    dk = arclength_derivative(g.curvature, c, 1, g)
    assert np.max(np.abs(dk)) < 1e-6


def test_arclength_derivative_analytic():
    n = 256
    c = circle_curve(n=n)
    g = compute_geometry(c)
    x = np.arange(n) / n
    f = np.sin(2 * np.pi * x)
    df = arclength_derivative(f, c, 1, g)
    target = np.cos(2 * np.pi * x) * (2 * np.pi / g.speed)
    assert np.max(np.abs(df - target)) < 5e-4  # O(h^2)


def test_arclength_derivative_grid_mismatch():
    c = circle_curve(n=64)
    with pytest.raises(GridMismatch):
        arclength_derivative(np.ones(65), c, 1)


def test_reparametrize_idempotent_on_uniform_circle():
    c = circle_curve(n=128)
    r = reparametrize_constant_speed(c)
    assert np.max(np.abs(r.points - c.points)) < 1e-10


def test_reparametrize_clustered_circle():
    n = 128
    x = np.arange(n) / n
    th = 2 * np.pi * (x + 0.05 * np.sin(2 * np.pi * x))
    c = build_curve(np.stack([np.cos(th), np.sin(th)], axis=1), closed=True)
    r = reparametrize_constant_speed(c)
    ring = np.vstack([r.points, r.points[:1]])
    gaps = np.linalg.norm(np.diff(ring, axis=0), axis=1)
    assert (gaps.max() - gaps.min()) / gaps.mean() < 1e-3


def test_reparametrize_open_segment():
    u = np.linspace(0.0, 1.0, 65) ** 1.3
    c = build_curve(np.stack([u, np.zeros_like(u)], axis=1), closed=False)
    r = reparametrize_constant_speed(c)
    assert np.array_equal(r.points[0], c.points[0])
    assert np.array_equal(r.points[-1], c.points[-1])
    gaps = np.linalg.norm(np.diff(r.points, axis=0), axis=1)
    assert (gaps.max() - gaps.min()) / gaps.mean() < 2e-2


def test_reparametrize_length_stable():
    n = 128
    x = np.arange(n) / n
    th = 2 * np.pi * (x + 0.04 * np.sin(4 * np.pi * x))
    c = build_curve(np.stack([np.cos(th), np.sin(th)], axis=1), closed=True)
    before = compute_geometry(c).length
    after = compute_geometry(reparametrize_constant_speed(c)).length
    assert abs(after - before) / before < (1.0 / n) ** 2 * 10
