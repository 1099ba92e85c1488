import numpy as np
import pytest

from elasticflow.geometry import build_curve


def circle_curve(n=128, r=1.0, clockwise=False, center=(0.0, 0.0)):
    x = np.arange(n) / n
    th = 2.0 * np.pi * x
    if clockwise:
        th = -th
    pts = np.stack([center[0] + r * np.cos(th), center[1] + r * np.sin(th)], axis=1)
    return build_curve(pts, closed=True)


def segment_curve(p=(0.0, 0.0), q=(1.0, 0.0), n=65):
    u = np.linspace(0.0, 1.0, n)[:, None]
    pts = np.asarray(p) * (1.0 - u) + np.asarray(q) * u
    return build_curve(pts, closed=False)


def perturbed_circle_curve(rng, n, r=1.0, modes=3, amp=0.03):
    x = np.arange(n) / n
    th = 2.0 * np.pi * x
    rad = np.full(n, r)
    for m in range(1, modes + 1):
        a, b = rng.normal(size=2) * amp / modes
        rad += a * np.cos(m * th) + b * np.sin(m * th)
    pts = np.stack([rad * np.cos(th), rad * np.sin(th)], axis=1)
    return build_curve(pts, closed=True)


def smooth_probe(rng, n, modes=3):
    th = 2.0 * np.pi * np.arange(n) / n
    p = np.zeros(n)
    for m in range(0, modes + 1):
        a, b = rng.normal(size=2)
        p += a * np.cos(m * th) + b * np.sin(m * th)
    return p


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
