"""Backend agreement: compiled kernels against the numpy reference."""

import numpy as np
import pytest

from elasticflow._kernels import _reference

_fast = pytest.importorskip("elasticflow._kernels._fast")


def random_cyclic_system(rng, n, m=3):
    diags = rng.normal(size=(5, n))
    diags[2] += 10.0  # keep it comfortably nonsingular
    rhs = rng.normal(size=(n, m))
    return diags, rhs


def dense_from_diags(diags):
    n = diags.shape[1]
    a = np.zeros((n, n))
    for o in range(-2, 3):
        for i in range(n):
            a[i, (i + o) % n] = diags[o + 2, i]
    return a


def test_periodic_derivatives_agree():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(97, 2))
    ref = _reference.periodic_derivatives(pts, 1.0 / 97)
    fast = _fast.periodic_derivatives(pts, 1.0 / 97)
    for a, b in zip(ref, fast):
        assert np.allclose(a, b, rtol=1e-13, atol=1e-10)


def test_curve_velocity_agrees():
    rng = np.random.default_rng(4)
    n = 64
    th = 2 * np.pi * np.arange(n) / n
    pts = np.stack([np.cos(th), np.sin(th)], axis=1) + 0.05 * rng.normal(size=(n, 2))
    d = _reference.periodic_derivatives(pts, 1.0 / n)
    ref = _reference.curve_velocity(*d, 1.2)
    fast = _fast.curve_velocity(*d, 1.2)
    assert np.allclose(ref, fast, rtol=1e-12, atol=1e-9)


@pytest.mark.parametrize("n", [8, 13, 64, 257])
def test_cyclic_solve_agrees_and_matches_dense(n):
    rng = np.random.default_rng(n)
    diags, rhs = random_cyclic_system(rng, n)
    x_ref = _reference.solve_cyclic_banded(diags, rhs)
    x_fast = _fast.solve_cyclic_banded(diags, rhs)
    x_dense = np.linalg.solve(dense_from_diags(diags), rhs)
    assert np.allclose(x_ref, x_dense, rtol=1e-11, atol=1e-11)
    assert np.allclose(x_fast, x_dense, rtol=1e-11, atol=1e-11)


def test_cyclic_solve_singular_returns_none():
    n = 16
    diags = np.zeros((5, n))  # the zero matrix
    rhs = np.ones((n, 1))
    assert _reference.solve_cyclic_banded(diags, rhs) is None
    assert _fast.solve_cyclic_banded(diags, rhs) is None
