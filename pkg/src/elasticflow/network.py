"""Curve networks: topology, boundary conditions, junction algebra.

A network bundles curves with a table of junctions (where several curve
ends concur) and a table of order-one endpoint conditions. Every end of
every open curve must be claimed exactly once. Members join a junction
with an orientation sign so that conditions derived for curves starting
at the junction apply regardless of which end actually sits there: the
sign flips tangents, arclength derivatives and the oriented curvature of
members that arrive with their parameter end.
"""

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateJunction
from .geometry import (
    SampledCurve,
    arclength_derivative,
    build_curve,
    compute_geometry,
)
from .variational import normal_velocity

START, END = 0, 1


@dataclass(frozen=True, eq=False)
class NavierEndpoint:
    """Fixed position with vanishing curvature."""

    point: tuple

    def __post_init__(self):
        object.__setattr__(self, "point", tuple(float(v) for v in self.point))


@dataclass(frozen=True, eq=False)
class ClampedEndpoint:
    """Fixed position and fixed unit tangent (in the curve's own direction)."""

    point: tuple
    tangent: tuple

    def __post_init__(self):
        object.__setattr__(self, "point", tuple(float(v) for v in self.point))
        t = np.asarray(self.tangent, dtype=float)
        norm = np.linalg.norm(t)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"clamped tangent must be unit length, |t| = {norm}")
        object.__setattr__(self, "tangent", tuple(float(v) for v in t))


@dataclass(frozen=True)
class JunctionSpec:
    """m curve ends meeting at one point.

    members : tuple of (curve_id, end) with end in {START, END}
    kind : "natural" (curvature vanishes per member) or "clamped"
        (mutual tangent angles fixed, curvatures sum to zero)
    cosines : prescribed consecutive angle cosines, clamped junctions only
    """

    members: tuple
    kind: str = "natural"
    cosines: tuple = ()

    def __post_init__(self):
        if self.kind not in ("natural", "clamped"):
            raise ValueError(f"unknown junction kind {self.kind!r}")
        if len(self.members) < 2:
            raise ValueError("a junction joins at least two curve ends")
        if self.kind == "clamped":
            if len(self.cosines) != len(self.members) - 1:
                raise ValueError("clamped junction needs m-1 angle cosines")
            if any(abs(c) > 1.0 for c in self.cosines):
                raise ValueError("angle cosines must lie in [-1, 1]")

    @property
    def order(self):
        return len(self.members)


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    """Curves plus junction membership, endpoint conditions and weights."""

    curves: tuple
    mu: tuple
    junctions: tuple = ()
    endpoints: tuple = ()  # entries (curve_id, end, condition)

    def __post_init__(self):
        object.__setattr__(self, "curves", tuple(self.curves))
        mu = tuple(float(m) for m in (
            self.mu if np.ndim(self.mu) else [self.mu] * len(self.curves)))
        if len(mu) != len(self.curves):
            raise ValueError("one length weight per curve required")
        if any(m < 0 for m in mu):
            raise ValueError("length weights must be nonnegative")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "junctions", tuple(self.junctions))
        object.__setattr__(self, "endpoints", tuple(self.endpoints))
        _check_structure(self)

    @property
    def is_single_curve(self):
        return len(self.curves) == 1 and not self.junctions and not self.endpoints

    def with_curves(self, curves):
        return replace(self, curves=tuple(curves))


def _check_structure(spec):
    """Every open end claimed exactly once; the network connected."""
    claims = {}
    for j, junction in enumerate(spec.junctions):
        for curve_id, end in junction.members:
            key = (curve_id, end)
            if key in claims:
                raise ValueError(f"curve end {key} claimed twice")
            claims[key] = ("junction", j)
    for curve_id, end, _cond in spec.endpoints:
        key = (curve_id, end)
        if key in claims:
            raise ValueError(f"curve end {key} claimed twice")
        claims[key] = ("endpoint", key)
    for i, curve in enumerate(spec.curves):
        for end in (START, END):
            claimed = (i, end) in claims
            if curve.closed and claimed:
                raise ValueError(f"closed curve {i} cannot have end conditions")
            if not curve.closed and not claimed:
                raise ValueError(f"open curve {i} end {end} has no condition")
    if len(spec.curves) > 1:
        parent = list(range(len(spec.curves)))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for junction in spec.junctions:
            rep = find(junction.members[0][0])
            for curve_id, _end in junction.members[1:]:
                parent[find(curve_id)] = rep
        roots = {find(i) for i in range(len(spec.curves))}
        if len(roots) > 1:
            raise ValueError("network is not connected")


def single_curve_network(curve, mu, bc_start=None, bc_end=None):
    """Convenience wrapper for one closed or one open curve."""
    endpoints = []
    if not curve.closed:
        if bc_start is None or bc_end is None:
            raise ValueError("open curve needs conditions at both ends")
        endpoints = [(0, START, bc_start), (0, END, bc_end)]
    return NetworkSpec(curves=(curve,), mu=(mu,), endpoints=tuple(endpoints))


def junction_node(curve, end):
    return 0 if end == START else curve.n - 1


@dataclass(frozen=True, eq=False)
class MemberFrame:
    """Geometry of one junction member, oriented away from the junction.

    All fields live in the outward frame (as if the curve started at the
    junction): tangent, normal, curvature and normal speed flip with the
    member sign, while dk/ds is invariant under reparametrization reversal.
    """

    curve_id: int
    end: int
    sign: float        # +1 if the curve starts here, -1 if it ends here
    position: np.ndarray
    tau: np.ndarray
    nu: np.ndarray
    curvature: float
    dk_ds: float
    normal_speed: float


def junction_frames(spec, junction, caches):
    """Outward frames and one-sided boundary data for each member."""
    frames = []
    for curve_id, end in junction.members:
        curve = spec.curves[curve_id]
        cache = caches[curve_id]
        node = junction_node(curve, end)
        sign = 1.0 if end == START else -1.0
        tau = sign * cache.tau[node]
        nu = np.array([-tau[1], tau[0]])
        dk = arclength_derivative(cache.curvature, curve, 1, cache)[node]
        v = normal_velocity(curve, spec.mu[curve_id], cache)[node]
        frames.append(MemberFrame(
            curve_id=curve_id, end=end, sign=sign,
            position=curve.points[node].copy(), tau=tau, nu=nu,
            curvature=sign * cache.curvature[node],
            dk_ds=dk, normal_speed=sign * v))
    return frames


def _consecutive_angles(tangents):
    """cos and sin of the turn from each tangent to the next (cyclic)."""
    t = np.asarray(tangents, dtype=float)
    nxt = np.roll(t, -1, axis=0)
    cos = np.einsum("ij,ij->i", t, nxt)
    sin = t[:, 0] * nxt[:, 1] - t[:, 1] * nxt[:, 0]
    return cos, sin


def junction_tangential_solve(unit_normals, normal_speeds):
    """Tangential speeds that give all members one junction velocity.

    Solves the cyclic system obtained by testing the equality of member
    velocities with each member's unit tangent,

        T_j - cos(a_j) T_{j+1} = -sin(a_j) V_{j+1}   (indices mod m),

    by dense elimination with partial pivoting. The matrix determinant is
    1 - prod_j cos(a_j); the solve refuses junctions where it (nearly)
    vanishes, which is exactly the degenerate all-tangents-parallel case.

    The reconstructed vectors V_j nu_j + T_j tau_j coincide for all j
    whenever the normal speeds are mutually consistent (as they are along
    a flow); the solve itself is defined for any input.
    """
    nus = np.asarray(unit_normals, dtype=float)
    v = np.asarray(normal_speeds, dtype=float)
    m = nus.shape[0]
    if m < 2:
        raise ValueError("a junction has at least two members")
    taus = np.stack([nus[:, 1], -nus[:, 0]], axis=1)  # nu = rot90(tau)
    cos, sin = _consecutive_angles(taus)
    det = 1.0 - np.prod(cos)
    if abs(det) < 1e-10:
        raise DegenerateJunction(
            f"junction tangential system is singular (det = {det:.2e})")
    mat = np.eye(m)
    rhs = np.empty(m)
    for j in range(m):
        mat[j, (j + 1) % m] = -cos[j]
        rhs[j] = -sin[j] * v[(j + 1) % m]
    return np.linalg.solve(mat, rhs)


def nondegeneracy_measure(tangents):
    """max |sin| over consecutive tangent angles, counterclockwise order.

    Zero exactly when all member tangents are parallel, i.e. when the
    unit normals fail to span the plane.
    """
    t = np.asarray(tangents, dtype=float)
    order = np.argsort(np.arctan2(t[:, 1], t[:, 0]))
    _cos, sin = _consecutive_angles(t[order])
    return float(np.max(np.abs(sin)))


@dataclass(frozen=True)
class ConditionCheck:
    location: str
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self):
        return self.residual <= self.tolerance


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]


@dataclass(frozen=True)
class ValidatorTolerances:
    """Discretization-aware residual budgets for admissibility checks."""

    concurrency_rel: float = 1e-8   # times the network diameter
    angle: float = 1e-6
    curvature: float = 1e-2
    third_order: float = 5e-2
    velocity: float = 5e-2
    nondegeneracy_min: float = 1e-6

    def loosened(self, factor):
        return ValidatorTolerances(
            concurrency_rel=self.concurrency_rel * factor,
            angle=self.angle * factor,
            curvature=self.curvature * factor,
            third_order=self.third_order * factor,
            velocity=self.velocity * factor,
            nondegeneracy_min=self.nondegeneracy_min / factor,
        )


def network_diameter(spec):
    pts = np.vstack([c.points for c in spec.curves])
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    return float(np.linalg.norm(hi - lo)) or 1.0


def _third_order_vector(frames, mu, clamped):
    """Sum over members of -2 dk/ds nu - [k^2 tau] + mu tau, outward frames.

    The arclength derivative of the curvature vector has normal part
    dk/ds * nu; both it and tau flip with the member sign, which is
    already folded into the outward frames (dk_ds is sign-invariant).
    """
    total = np.zeros(2)
    for f, m in zip(frames, mu):
        term = -2.0 * f.dk_ds * f.nu + m * f.tau
        if clamped:
            term = term - f.curvature**2 * f.tau
        total += term
    return total


def _junction_condition_checks(spec, junction, caches, label, tol, diam):
    frames = junction_frames(spec, junction, caches)
    mu = [spec.mu[f.curve_id] for f in frames]
    checks = []

    positions = np.stack([f.position for f in frames])
    gap = float(np.max(np.linalg.norm(positions - positions[0], axis=1)))
    checks.append(ConditionCheck(label, "concurrency", gap,
                                 tol.concurrency_rel * diam))

    if junction.kind == "natural":
        for f in frames:
            checks.append(ConditionCheck(
                label, f"curvature[{f.curve_id}]", abs(f.curvature),
                tol.curvature))
        res = np.linalg.norm(_third_order_vector(frames, mu, clamped=False))
        checks.append(ConditionCheck(label, "third_order", res, tol.third_order))
    else:
        taus = [f.tau for f in frames]
        for i, c_target in enumerate(junction.cosines):
            got = float(np.dot(taus[i], taus[i + 1]))
            checks.append(ConditionCheck(
                label, f"angle[{i},{i + 1}]", abs(got - c_target), tol.angle))
        ksum = abs(sum(f.curvature for f in frames))
        checks.append(ConditionCheck(label, "curvature_sum", ksum, tol.curvature))
        res = np.linalg.norm(_third_order_vector(frames, mu, clamped=True))
        checks.append(ConditionCheck(label, "third_order", res, tol.third_order))
    return checks, frames


def _endpoint_condition_checks(spec, entry, caches, tol, diam):
    curve_id, end, cond = entry
    curve = spec.curves[curve_id]
    cache = caches[curve_id]
    node = junction_node(curve, end)
    label = f"endpoint[{curve_id},{'start' if end == START else 'end'}]"
    checks = []
    gap = float(np.linalg.norm(curve.points[node] - np.asarray(cond.point)))
    checks.append(ConditionCheck(label, "concurrency", gap,
                                 tol.concurrency_rel * diam))
    if isinstance(cond, NavierEndpoint):
        checks.append(ConditionCheck(label, "curvature",
                                     abs(cache.curvature[node]), tol.curvature))
    else:
        gap_t = float(np.linalg.norm(cache.tau[node] - np.asarray(cond.tangent)))
        checks.append(ConditionCheck(label, "angle", gap_t, tol.angle))
    return checks


def boundary_residuals(spec, caches=None, tolerances=None):
    """Residuals of every imposed boundary condition on the current state.

    Uses one-sided second order stencils at the boundary nodes. Closed
    single curves have nothing to check and yield an empty report.
    """
    tol = tolerances or ValidatorTolerances()
    if caches is None:
        caches = [compute_geometry(c) for c in spec.curves]
    diam = network_diameter(spec)
    checks = []
    for j, junction in enumerate(spec.junctions):
        cs, _frames = _junction_condition_checks(
            spec, junction, caches, f"junction[{j}]", tol, diam)
        checks.extend(cs)
    for entry in spec.endpoints:
        checks.extend(_endpoint_condition_checks(spec, entry, caches, tol, diam))
    return ValidationReport(tuple(checks))


def validate_admissible(spec, tolerances=None):
    """Check the compatibility conditions an initial network should satisfy.

    Beyond the boundary conditions themselves this verifies, at order-one
    endpoints, that the normal driving speed vanishes; at each junction,
    that the normals span the plane; and at junctions of order at least
    three, the sine-weighted consistency relation between the member
    normal speeds. Failures are reported, never raised: near-admissible
    data is allowed to run.
    """
    tol = tolerances or ValidatorTolerances()
    caches = [compute_geometry(c) for c in spec.curves]
    diam = network_diameter(spec)
    checks = list(boundary_residuals(spec, caches, tol).checks)

    for curve_id, end, _cond in spec.endpoints:
        curve = spec.curves[curve_id]
        node = junction_node(curve, end)
        v = normal_velocity(curve, spec.mu[curve_id], caches[curve_id])[node]
        label = f"endpoint[{curve_id},{'start' if end == START else 'end'}]"
        checks.append(ConditionCheck(label, "normal_speed", abs(v), tol.velocity))

    for j, junction in enumerate(spec.junctions):
        label = f"junction[{j}]"
        frames = junction_frames(spec, junction, caches)
        measure = nondegeneracy_measure([f.tau for f in frames])
        # recorded as a shortfall so that "residual <= tolerance" reads pass
        shortfall = max(0.0, tol.nondegeneracy_min - measure)
        checks.append(ConditionCheck(label, "nondegeneracy", shortfall, 0.0))
        if junction.order >= 3:
            checks.extend(_velocity_consistency_checks(frames, label, tol))
    return ValidationReport(tuple(checks))


def _velocity_consistency_checks(frames, label, tol):
    """Sine-weighted relation between member normal speeds, order >= 3."""
    nus = np.stack([f.nu for f in frames])
    v = np.array([f.normal_speed for f in frames])
    m = len(frames)
    # consecutive pair (i, k) whose normals span the plane best
    sines = [abs(nus[i, 0] * nus[(i + 1) % m, 1] - nus[i, 1] * nus[(i + 1) % m, 0])
             for i in range(m)]
    i = int(np.argmax(sines))
    k = (i + 1) % m
    checks = []

    def signed_sin(a, b):
        return a[0] * b[1] - a[1] * b[0]

    for j in range(m):
        if j in (i, k):
            continue
        th_i = signed_sin(nus[k], nus[j])
        th_k = signed_sin(nus[j], nus[i])
        th_j = signed_sin(nus[i], nus[k])
        res = abs(th_i * v[i] + th_k * v[k] + th_j * v[j])
        checks.append(ConditionCheck(label, f"velocity_consistency[{j}]",
                                     res, tol.velocity))
    return checks


# ---------------------------------------------------------------------------
# JSON interchange (see README for the schema)

_BC_SAVERS = {
    NavierEndpoint: lambda c: {"type": "navier", "point": list(c.point)},
    ClampedEndpoint: lambda c: {"type": "clamped", "point": list(c.point),
                                "tangent": list(c.tangent)},
}


def spec_to_dict(spec):
    return {
        "curves": [
            {"points": c.points.tolist(), "closed": bool(c.closed)}
            for c in spec.curves
        ],
        "mu": list(spec.mu),
        "junctions": [
            {"members": [[int(cid), "start" if end == START else "end"]
                         for cid, end in j.members],
             "kind": j.kind,
             **({"cosines": list(j.cosines)} if j.kind == "clamped" else {})}
            for j in spec.junctions
        ],
        "endpoints": [
            {"curve": int(cid), "end": "start" if end == START else "end",
             **_BC_SAVERS[type(cond)](cond)}
            for cid, end, cond in spec.endpoints
        ],
    }


def _end_from_name(name):
    if name not in ("start", "end"):
        raise ValueError(f"curve end must be 'start' or 'end', got {name!r}")
    return START if name == "start" else END


def spec_from_dict(data):
    curves = [build_curve(np.asarray(c["points"], dtype=float), bool(c["closed"]))
              for c in data["curves"]]
    junctions = []
    for j in data.get("junctions", []):
        junctions.append(JunctionSpec(
            members=tuple((int(cid), _end_from_name(end))
                          for cid, end in j["members"]),
            kind=j.get("kind", "natural"),
            cosines=tuple(j.get("cosines", ())),
        ))
    endpoints = []
    for e in data.get("endpoints", []):
        if e["type"] == "navier":
            cond = NavierEndpoint(point=tuple(e["point"]))
        elif e["type"] == "clamped":
            cond = ClampedEndpoint(point=tuple(e["point"]),
                                   tangent=tuple(e["tangent"]))
        else:
            raise ValueError(f"unknown endpoint type {e['type']!r}")
        endpoints.append((int(e["curve"]), _end_from_name(e["end"]), cond))
    return NetworkSpec(curves=tuple(curves), mu=tuple(data["mu"]),
                       junctions=tuple(junctions), endpoints=tuple(endpoints))


def save_spec(spec, path):
    with open(path, "w") as fh:
        json.dump(spec_to_dict(spec), fh, indent=2)


def load_spec(path):
    with open(path) as fh:
        return spec_from_dict(json.load(fh))
