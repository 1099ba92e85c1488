import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elasticflow.geometry import build_curve, compute_geometry
from elasticflow.variational import (
    elastic_energy,
    flow_velocity,
    gradient_check,
    network_energy,
    normal_velocity,
    tangential_velocity,
)

from conftest import circle_curve, perturbed_circle_curve, segment_curve, smooth_probe

# frozen quadrature oracle for the 2:1 ellipse (adaptive quadrature of the
# closed-form curvature k(t) = ab / (a^2 sin^2 t + b^2 cos^2 t)^{3/2})
ELLIPSE_2_1_BENDING = 6.636029752123301
ELLIPSE_2_1_LENGTH = 9.688448220547675


def ellipse_curve(a, b, n):
    t = 2 * np.pi * np.arange(n) / n
    return build_curve(np.stack([a * np.cos(t), b * np.sin(t)], axis=1), True)


def test_unit_circle_energy():
    rep = elastic_energy(circle_curve(n=256), 1.0)
    assert abs(rep.bending - 2 * np.pi) < 3e-3
    assert abs(rep.weighted_length - 2 * np.pi) < 1e-3
    assert abs(rep.total - 4 * np.pi) < 3e-3


def test_radius_two_energy_mu_zero():
    # k = 1/2 on a circle of length 4*pi, so the bending integral is pi
    rep = elastic_energy(circle_curve(n=256, r=2.0), 0.0)
    assert rep.weighted_length == 0.0
    assert abs(rep.total - np.pi) < 2e-3


def test_ellipse_energy_vs_quadrature_oracle():
    rep = elastic_energy(ellipse_curve(2.0, 1.0, 512), 1.0)
    expected = ELLIPSE_2_1_BENDING + ELLIPSE_2_1_LENGTH
    assert abs(rep.total - expected) / expected < 1e-3


def test_network_energy_sums():
    curves = [circle_curve(n=64), circle_curve(n=96, r=2.0)]
    rep = network_energy(curves, [1.0, 0.5])
    parts = [elastic_energy(c, m) for c, m in zip(curves, (1.0, 0.5))]
    assert rep.total == pytest.approx(sum(p.total for p in parts), rel=1e-14)
    assert len(rep.bending_per_curve) == 2


def test_energy_rejects_negative_weight():
    with pytest.raises(ValueError):
        elastic_energy(circle_curve(n=64), -0.5)


@pytest.mark.parametrize("r,expected", [(1.0, 0.0), (2.0, 3.0 / 8.0), (0.5, -6.0)])
def test_normal_velocity_on_circles(r, expected):
    v = normal_velocity(circle_curve(n=256, r=r), 1.0)
    assert np.max(np.abs(v - expected)) < 2e-3 * max(1.0, abs(expected))


def test_tangential_velocity_circle_vanishes():
    t = tangential_velocity(circle_curve(n=128), 1.0)
    assert np.max(np.abs(t)) < 1e-8


def test_tangential_velocity_straight_segment():
    t = tangential_velocity(segment_curve(n=65), 1.0)
    assert np.max(np.abs(t)) < 1e-10


def test_tangential_velocity_two_routes_agree(rng):
    c = perturbed_circle_curve(rng, 128, modes=4, amp=0.1)
    direct = tangential_velocity(c, 1.3)
    via_full = flow_velocity(c, 1.3).tangential
    assert np.max(np.abs(direct - via_full)) < 1e-10


def test_flow_velocity_stationary_circle():
    vf = flow_velocity(circle_curve(n=256), 1.0)
    assert np.max(np.linalg.norm(vf.full, axis=1)) < 2e-3


def test_flow_velocity_matches_normal_velocity_on_circle():
    vf = flow_velocity(circle_curve(n=256, r=2.0), 1.0)
    assert np.max(np.abs(vf.normal - 3.0 / 8.0)) < 1e-3


def test_velocity_decomposition_identity(rng):
    c = perturbed_circle_curve(rng, 128, modes=4, amp=0.08)
    g = compute_geometry(c)
    vf = flow_velocity(c, 1.0, g)
    rebuilt = vf.normal[:, None] * g.nu + vf.tangential[:, None] * g.tau
    assert np.max(np.abs(rebuilt - vf.full)) < 1e-12 * max(1, np.max(np.abs(vf.full)))
    assert np.max(np.abs(np.einsum("ij,ij->i", vf.full, g.nu) - vf.normal)) < 1e-12


def test_normal_velocity_cross_check(rng):
    # the intrinsic (k and k_ss) and closed-form parameter-derivative
    # routes are independent discretizations of the same speed: their
    # mismatch must vanish at second order under grid refinement
    mismatch = {}
    for n in (256, 512, 1024):
        local = np.random.default_rng(5)
        c = perturbed_circle_curve(local, n, modes=3, amp=0.03)
        v_int = normal_velocity(c, 1.0)
        v_ext = flow_velocity(c, 1.0).normal
        mismatch[n] = np.max(np.abs(v_int - v_ext)) / np.max(np.abs(v_int))
    assert mismatch[512] < 2e-3
    assert 2.8 < mismatch[256] / mismatch[512] < 5.7
    assert 2.8 < mismatch[512] / mismatch[1024] < 5.7


def test_gradient_check_critical_circle():
    err = gradient_check(circle_curve(n=256), 1.0, 0.3 * np.ones(256))
    assert err < 1e-6


def test_gradient_check_uniform_inflation():
    # radius-2 circle, probe along nu: both sides equal -(3/8) * 4pi
    c = circle_curve(n=512, r=2.0)
    g = compute_geometry(c)
    probe = np.ones(c.n)
    v = normal_velocity(c, 1.0, g)
    predicted = float(np.sum(-v * probe * g.ds_weight))
    assert predicted == pytest.approx(-3 * np.pi / 2, rel=2e-3)
    assert gradient_check(c, 1.0, probe) < 1e-4


def test_gradient_check_random(rng):
    n = 4096
    errs = []
    for _ in range(3):
        c = perturbed_circle_curve(rng, n)
        errs.append(gradient_check(c, 1.0, smooth_probe(rng, n)))
    assert max(errs) < 1e-5


def test_descent_direction(rng):
    # moving with the flow velocity never increases the energy to first order
    c = perturbed_circle_curve(rng, 128, modes=4, amp=0.06)
    g = compute_geometry(c)
    v = normal_velocity(c, 1.0, g)
    assert np.sum(-v * v * g.ds_weight) <= 0.0


@settings(max_examples=20, deadline=None)
@given(angle=st.floats(-np.pi, np.pi), tx=st.floats(-3, 3), ty=st.floats(-3, 3))
def test_energy_rigid_invariance(angle, tx, ty):
    c = circle_curve(n=64, r=1.4)
    rot = np.array([[np.cos(angle), -np.sin(angle)],
                    [np.sin(angle), np.cos(angle)]])
    moved = build_curve(c.points @ rot.T + np.array([tx, ty]), closed=True)
    assert elastic_energy(moved, 0.7).total == pytest.approx(
        elastic_energy(c, 0.7).total, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(lam=st.floats(0.2, 5.0))
def test_energy_scaling_mu_zero(lam):
    c = circle_curve(n=64)
    scaled = build_curve(lam * c.points, closed=True)
    e0 = elastic_energy(c, 0.0).total
    e1 = elastic_energy(scaled, 0.0).total
    assert e1 == pytest.approx(e0 / lam, rel=1e-12)
