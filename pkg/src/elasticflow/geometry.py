"""Discrete differential geometry of sampled planar curves.

A curve is a map from [0, 1] to the plane stored by its values on a
uniform parameter grid. Closed curves never store a duplicated
wrap-around node and wrap their stencils modulo n; open curves switch to
flush boundary stencils of the same (second) order near the ends. The
unit normal is the counterclockwise quarter turn of the unit tangent and
the scalar curvature is signed against it.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from . import _kernels, _stencils
from .errors import DegenerateCurve, GridMismatch, TooFewNodes

MIN_NODES_CLOSED = 8
MIN_NODES_OPEN = 5
EPS_REGULARITY = 1e-6


@dataclass(frozen=True, eq=False)
class SampledCurve:
    """Planar curve sampled on a uniform parameter grid.

    Attributes
    ----------
    points : (n, 2) float array
        Node positions. Never mutated in place.
    closed : bool
        Whether the parameter domain is periodic.
    param_step : float
        Grid spacing: 1/n for closed curves, 1/(n-1) for open ones.
    """

    points: np.ndarray
    closed: bool
    param_step: float

    @property
    def n(self):
        return self.points.shape[0]

    def with_points(self, points):
        """Same grid, new positions (used by the stepper and remesher)."""
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.shape != self.points.shape:
            raise GridMismatch(
                f"replacement points have shape {pts.shape}, "
                f"expected {self.points.shape}")
        return SampledCurve(pts, self.closed, self.param_step)


def build_curve(points, closed, eps_reg=EPS_REGULARITY):
    """Validate raw points and wrap them into a SampledCurve.

    Raises
    ------
    TooFewNodes
        Fewer nodes than the stencil width requires.
    DegenerateCurve
        Duplicate consecutive nodes, or parametrization speed below
        ``eps_reg`` times the total length at some node.
    """
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64))
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"points must be (n, 2), got shape {pts.shape}")
    n = pts.shape[0]
    minimum = MIN_NODES_CLOSED if closed else MIN_NODES_OPEN
    if n < minimum:
        raise TooFewNodes(
            f"{'closed' if closed else 'open'} curve needs at least "
            f"{minimum} nodes, got {n}")
    gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    if closed:
        gaps = np.append(gaps, np.linalg.norm(pts[0] - pts[-1]))
    if np.any(gaps == 0.0):
        raise DegenerateCurve("consecutive nodes coincide")
    h = 1.0 / n if closed else 1.0 / (n - 1)
    curve = SampledCurve(pts, bool(closed), h)
    compute_geometry(curve, eps_reg=eps_reg)  # runs the regularity check
    return curve


@dataclass(frozen=True, eq=False)
class GeometryCache:
    """Per-node geometric fields derived from a curve's positions."""

    dx1: np.ndarray
    dx2: np.ndarray
    dx3: np.ndarray
    dx4: np.ndarray
    speed: np.ndarray      # |dx1|
    tau: np.ndarray        # unit tangent
    nu: np.ndarray         # unit normal, +pi/2 rotation of tau
    curvature: np.ndarray  # oriented scalar curvature against nu
    ds_weight: np.ndarray  # arclength quadrature weights
    length: float


def spatial_derivatives(curve, order):
    """Parameter derivative of the node positions, orders 1..4."""
    if curve.closed:
        idx = order - 1
        return _kernels.periodic_derivatives(curve.points, curve.param_step)[idx]
    return _stencils.diff_open(curve.points, order, curve.param_step)


def compute_geometry(curve, eps_reg=EPS_REGULARITY):
    """Tangent, normal, curvature and quadrature data for a curve.

    Raises DegenerateCurve when the parametrization speed falls below
    ``eps_reg`` times the total length at any node.
    """
    h = curve.param_step
    if curve.closed:
        dx1, dx2, dx3, dx4 = _kernels.periodic_derivatives(curve.points, h)
    else:
        dx1 = _stencils.diff_open(curve.points, 1, h)
        dx2 = _stencils.diff_open(curve.points, 2, h)
        dx3 = _stencils.diff_open(curve.points, 3, h)
        dx4 = _stencils.diff_open(curve.points, 4, h)
    speed = np.linalg.norm(dx1, axis=1)

    ds_weight = h * speed
    if not curve.closed:
        ds_weight = ds_weight.copy()
        ds_weight[0] *= 0.5
        ds_weight[-1] *= 0.5
    length = float(np.sum(ds_weight))

    if np.min(speed) < eps_reg * length:
        raise DegenerateCurve(
            f"parametrization speed {np.min(speed):.3e} below "
            f"{eps_reg:.1e} * length ({length:.3e})")

    tau = dx1 / speed[:, None]
    nu = np.empty_like(tau)
    nu[:, 0] = -tau[:, 1]
    nu[:, 1] = tau[:, 0]
    # The tangential part of the second arclength derivative is normal to
    # nu, so the oriented curvature reduces to <dx2, nu> / speed^2.
    curvature = np.einsum("ij,ij->i", dx2, nu) / speed**2

    return GeometryCache(dx1=dx1, dx2=dx2, dx3=dx3, dx4=dx4, speed=speed,
                         tau=tau, nu=nu, curvature=curvature,
                         ds_weight=ds_weight, length=length)


def arclength_derivative(field, curve, order=1, cache=None):
    """Derivative with respect to arclength of a nodal field.

    ``field`` may be scalar (n,) or vector (n, 2) on the curve's grid.
    Applies (d/dx)/|dx gamma| once or twice, with the same stencils as
    ``spatial_derivatives``.
    """
    f = np.asarray(field, dtype=np.float64)
    if f.shape[0] != curve.n or f.ndim > 2:
        raise GridMismatch(
            f"field of shape {f.shape} does not match a curve with "
            f"{curve.n} nodes")
    if order not in (1, 2):
        raise ValueError("arclength derivative supports orders 1 and 2")
    if cache is None:
        cache = compute_geometry(curve)
    speed = cache.speed if f.ndim == 1 else cache.speed[:, None]
    out = _stencils.diff(f, 1, curve.param_step, curve.closed) / speed
    if order == 2:
        out = _stencils.diff(out, 1, curve.param_step, curve.closed) / speed
    return out


def _cumulative_arclength(speed, h, closed):
    """Trapezoidal cumulative arclength at the nodes (n+1 values if closed)."""
    if closed:
        seg = 0.5 * h * (speed + np.roll(speed, -1))
    else:
        seg = 0.5 * h * (speed[:-1] + speed[1:])
    return np.concatenate([[0.0], np.cumsum(seg)])


def reparametrize_constant_speed(curve, cache=None):
    """Resample the curve at (approximately) uniform arclength spacing.

    A cubic interpolant of the current nodes (periodic for closed curves)
    is evaluated at the inverse of the cumulative arclength map. Node
    count and the closed flag are preserved; endpoints of open curves are
    kept exactly.
    """
    if cache is None:
        cache = compute_geometry(curve)
    h = curve.param_step
    n = curve.n
    if curve.closed:
        xs = np.linspace(0.0, 1.0, n + 1)
        ys = np.vstack([curve.points, curve.points[:1]])
        spline = CubicSpline(xs, ys, axis=0, bc_type="periodic")
        s_nodes = _cumulative_arclength(cache.speed, h, closed=True)
        total = s_nodes[-1]
        targets = np.arange(n) * (total / n)
    else:
        xs = np.linspace(0.0, 1.0, n)
        spline = CubicSpline(xs, curve.points, axis=0)
        s_nodes = _cumulative_arclength(cache.speed, h, closed=False)
        total = s_nodes[-1]
        targets = np.linspace(0.0, total, n)
    inverse = PchipInterpolator(s_nodes, xs)
    x_new = np.clip(inverse(targets), 0.0, 1.0)
    x_new[0] = 0.0
    if not curve.closed:
        x_new[-1] = 1.0
    pts = spline(x_new)
    if not curve.closed:
        pts[0] = curve.points[0]
        pts[-1] = curve.points[-1]
    return build_curve(pts, curve.closed)
