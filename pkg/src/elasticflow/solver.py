"""Semi-implicit time integration of the curve evolution.

Each step solves, per curve and per component,

    (p^{new} - p^{old}) / dt + (2 / q^4) D4 p^{new} = f(p^{old}),

where q is the parametrization speed frozen at the old state, D4 the
second order five point stencil for the fourth parameter derivative, and
f the lower order terms of the closed-form evolution velocity evaluated
explicitly. This is the classical linearization of the stiff leading
term, refrozen at every step. Boundary bands of open curves are replaced
by discrete boundary condition rows: exact position rows for fixed
endpoints, first or second derivative rows for clamped tangents and
vanishing curvature, and coupled concurrency / curvature / third order
rows tying junction members together (collocation, not penalties).

Single closed curves produce one cyclic pentadiagonal system per step
and are solved by the specialized bordered elimination kernel; single
open curves use a plain banded solve; networks assemble one sparse
system over all curves and go through a sparse direct factorization.
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from . import _kernels, diagnostics
from ._stencils import end_row_weights
from .errors import DegenerateCurve, SingularSystem, StepFailed
from .geometry import (
    arclength_derivative,
    compute_geometry,
    reparametrize_constant_speed,
)
from .network import (
    END,
    START,
    ClampedEndpoint,
    NavierEndpoint,
    junction_node,
)
from .variational import network_energy, normal_velocity

log = logging.getLogger("elasticflow")

CONVERGED = "converged"
REACHED_T_END = "reached_t_end"
MAX_STEPS = "max_steps"


@dataclass(frozen=True)
class SolverConfig:
    dt_init: float = 1e-4
    dt_min: float = 1e-9
    dt_max: float = 5e-2
    t_end: float = 10.0
    stop_velocity_tol: float = 1e-5
    remesh_every: int = 25          # 0 disables remeshing
    energy_backtrack: bool = True
    max_steps: int = 200_000
    dt_growth: float = 1.2
    tol_mono_rel: float = 1e-8      # energy-increase budget, times E(0)

    def __post_init__(self):
        if not (0 < self.dt_min <= self.dt_init <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if self.stop_velocity_tol < 0 or self.tol_mono_rel < 0:
            raise ValueError("tolerances must be nonnegative")


@dataclass(frozen=True, eq=False)
class FlowState:
    """Time stamp, current network, and per-curve geometry caches."""

    t: float
    network: object
    caches: tuple

    @classmethod
    def initial(cls, spec):
        return cls(t=0.0, network=spec,
                   caches=tuple(compute_geometry(c) for c in spec.curves))

    def energy(self):
        return network_energy(self.network.curves, self.network.mu, self.caches)


@dataclass
class StepReport:
    t_before: float
    dt_used: float
    energy_before: float
    energy_after: float
    dissipation_lhs: float       # (E_after - E_before) / dt
    dissipation_rhs: float       # -int V^2 ds at the pre-step state
    linear_residual: float
    remeshed: bool = False
    backtracks: int = 0
    bound_flags: dict = field(default_factory=dict)


@dataclass
class Trajectory:
    states: list
    reports: list
    monitor: object
    status: str


# ---------------------------------------------------------------------------
# step systems

@dataclass(eq=False)
class CyclicStepSystem:
    """One closed curve: five cyclic diagonals, shared by both components."""

    diags: np.ndarray   # (5, n)
    rhs: np.ndarray     # (n, 2)

    def matvec(self, x):
        out = np.zeros_like(x)
        for o in range(-2, 3):
            out += self.diags[o + 2][:, None] * np.roll(x, -o, axis=0)
        return out

    def solve(self):
        x = _kernels.solve_cyclic_banded(self.diags, self.rhs)
        if x is None:
            raise SingularSystem("cyclic banded factorization failed")
        residual = _relative_residual(self.matvec(x), self.rhs)
        return [x], residual


@dataclass(eq=False)
class BandedStepSystem:
    """One open curve: bandwidth-two rows, one matrix for both components."""

    ab: np.ndarray      # scipy solve_banded layout, shape (5, n)
    rhs: np.ndarray     # (n, 2)

    def matvec(self, x):
        n = x.shape[0]
        out = np.zeros_like(x)
        for o in range(-2, 3):
            diag = np.zeros(n)
            if o >= 0:
                diag[:n - o] = self.ab[2 - o, o:]
                out[:n - o] += diag[:n - o, None] * x[o:]
            else:
                diag[-o:] = self.ab[2 - o, :n + o]
                out[-o:] += diag[-o:, None] * x[:n + o]
        return out

    def solve(self):
        try:
            x = solve_banded((2, 2), self.ab, self.rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(f"banded factorization failed: {exc}") from exc
        if not np.all(np.isfinite(x)):
            raise SingularSystem("banded solve produced non-finite values")
        residual = _relative_residual(self.matvec(x), self.rhs)
        return [x], residual


@dataclass(eq=False)
class SparseStepSystem:
    """Network: one sparse matrix over all curves, components interleaved."""

    matrix: object      # csr
    rhs: np.ndarray     # (2 * total_nodes,)
    layout: tuple       # per curve (offset, n)

    def solve(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error", MatrixRankWarning)
            try:
                x = spsolve(self.matrix.tocsc(), self.rhs)
            except (MatrixRankWarning, RuntimeError) as exc:
                raise SingularSystem(f"sparse solve failed: {exc}") from exc
        if not np.all(np.isfinite(x)):
            raise SingularSystem("sparse solve produced non-finite values")
        residual = _relative_residual(self.matrix @ x, self.rhs)
        positions = []
        for offset, n in self.layout:
            block = x[offset:offset + 2 * n]
            positions.append(block.reshape(n, 2))
        return positions, residual


def _relative_residual(ax, b):
    scale = np.max(np.abs(b))
    if scale == 0.0:
        scale = 1.0
    return float(np.max(np.abs(ax - b)) / scale)


def solve_linear(system, residual_tol=1e-9):
    """Direct solve of an assembled step system with a residual guard."""
    positions, residual = system.solve()
    if residual > residual_tol:
        raise SingularSystem(
            f"linear residual {residual:.2e} exceeds {residual_tol:.0e} "
            "(degenerate geometry or incompatible boundary rows)")
    return positions, residual


# ---------------------------------------------------------------------------
# assembly

def _explicit_terms(curve, mu, cache):
    """Lower order part of the evolution velocity at the old state."""
    full = _kernels.curve_velocity(cache.dx1, cache.dx2, cache.dx3,
                                   cache.dx4, float(mu))
    return full + 2.0 * cache.dx4 / cache.speed[:, None]**4


def _implicit_coeff(curve, cache, dt):
    """Per-node diagonal scaling of the implicit fourth-derivative term."""
    h = curve.param_step
    return 2.0 / (cache.speed**4 * h**4)


def assemble_step_system(state, dt):
    """Linear system for the next positions, frozen at the current state."""
    if dt <= 0:
        raise ValueError("time step must be positive")
    spec = state.network
    if spec.is_single_curve and spec.curves[0].closed:
        return _assemble_cyclic(spec, state.caches, dt)
    if len(spec.curves) == 1 and not spec.junctions:
        return _assemble_single_open(spec, state.caches, dt)
    return _assemble_network(spec, state.caches, dt)


def _assemble_cyclic(spec, caches, dt):
    curve, mu, cache = spec.curves[0], spec.mu[0], caches[0]
    n = curve.n
    e = _implicit_coeff(curve, cache, dt)
    diags = np.empty((5, n))
    diags[0] = e
    diags[1] = -4.0 * e
    diags[2] = 1.0 / dt + 6.0 * e
    diags[3] = -4.0 * e
    diags[4] = e
    rhs = curve.points / dt + _explicit_terms(curve, mu, cache)
    return CyclicStepSystem(diags=diags, rhs=rhs)


def _endpoint_rows(curve, cond, end, cache):
    """(node, [(index, weight)], target (2,)) rows for one endpoint."""
    n = curve.n
    h = curve.param_step
    at_start = end == START
    node_pos = 0 if at_start else n - 1
    node_sec = 1 if at_start else n - 2
    rows = [(node_pos, [(node_pos, 1.0)], np.asarray(cond.point, dtype=float))]
    if isinstance(cond, NavierEndpoint):
        idx, w = end_row_weights(2, h, at_start)
        idx = idx % n
        rows.append((node_sec, list(zip(idx, w)), np.zeros(2)))
    elif isinstance(cond, ClampedEndpoint):
        idx, w = end_row_weights(1, h, at_start)
        idx = idx % n
        # keep the tangent direction fixed; freezing the magnitude at the
        # current speed preserves the mesh spacing near the endpoint
        target = cache.speed[node_pos] * np.asarray(cond.tangent, dtype=float)
        rows.append((node_sec, list(zip(idx, w)), target))
    else:
        raise TypeError(f"unsupported endpoint condition {type(cond).__name__}")
    return rows


def _assemble_single_open(spec, caches, dt):
    curve, mu, cache = spec.curves[0], spec.mu[0], caches[0]
    n = curve.n
    e = _implicit_coeff(curve, cache, dt)
    ab = np.zeros((5, n))
    rhs = np.zeros((n, 2))

    idx = np.arange(2, n - 2)
    ab[0, idx + 2] = e[idx]
    ab[1, idx + 1] = -4.0 * e[idx]
    ab[2, idx] = 1.0 / dt + 6.0 * e[idx]
    ab[3, idx - 1] = -4.0 * e[idx]
    ab[4, idx - 2] = e[idx]
    f = _explicit_terms(curve, mu, cache)
    rhs[idx] = curve.points[idx] / dt + f[idx]

    conds = {(cid, end): cond for cid, end, cond in spec.endpoints}
    for end in (START, END):
        for node, entries, target in _endpoint_rows(curve, conds[(0, end)],
                                                    end, cache):
            for j, w in entries:
                ab[2 + node - j, j] = w
            rhs[node] = target
    return BandedStepSystem(ab=ab, rhs=rhs)


class _SparseBuilder:
    def __init__(self, size):
        self.rows = []
        self.cols = []
        self.vals = []
        self.b = np.zeros(size)

    def add(self, r, c, v):
        self.rows.append(r)
        self.cols.append(c)
        self.vals.append(v)

    def add_block(self, rows, cols, vals):
        self.rows.append(np.asarray(rows))
        self.cols.append(np.asarray(cols))
        self.vals.append(np.asarray(vals))

    def finish(self, size):
        rows = np.concatenate([np.atleast_1d(r) for r in self.rows])
        cols = np.concatenate([np.atleast_1d(c) for c in self.cols])
        vals = np.concatenate([np.atleast_1d(v) for v in self.vals])
        mat = sp.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()
        # normalize rows for conditioning (boundary rows mix very
        # different scales with the stiff interior rows)
        scale = np.zeros(size)
        np.maximum.at(scale, rows, np.abs(vals))
        scale[scale == 0.0] = 1.0
        inv = sp.diags(1.0 / scale)
        return inv @ mat, self.b / scale


def _assemble_network(spec, caches, dt):
    sizes = [c.n for c in spec.curves]
    offsets = np.concatenate([[0], np.cumsum([2 * n for n in sizes])])
    total = int(offsets[-1])
    builder = _SparseBuilder(total)

    def gix(cid, node, comp):
        return int(offsets[cid] + 2 * node + comp)

    # interior rows
    for cid, (curve, mu, cache) in enumerate(zip(spec.curves, spec.mu, caches)):
        n = curve.n
        e = _implicit_coeff(curve, cache, dt)
        f = _explicit_terms(curve, mu, cache)
        interior = np.arange(2, n - 2)
        for comp in (0, 1):
            r = offsets[cid] + 2 * interior + comp
            for off, coef in ((-2, e), (-1, -4.0 * e), (1, -4.0 * e), (2, e)):
                builder.add_block(r, offsets[cid] + 2 * (interior + off) + comp,
                                  coef[interior])
            builder.add_block(r, offsets[cid] + 2 * interior + comp,
                              1.0 / dt + 6.0 * e[interior])
            builder.b[r] = curve.points[interior, comp] / dt + f[interior, comp]

    # order-one endpoints
    for cid, end, cond in spec.endpoints:
        curve, cache = spec.curves[cid], caches[cid]
        for node, entries, target in _endpoint_rows(curve, cond, end, cache):
            for comp in (0, 1):
                r = gix(cid, node, comp)
                for j, w in entries:
                    builder.add(r, gix(cid, int(j), comp), w)
                builder.b[r] = target[comp]

    # junction members
    for junction in spec.junctions:
        _junction_rows(spec, caches, junction, builder, gix)

    matrix, b = builder.finish(total)
    return SparseStepSystem(matrix=matrix, rhs=b,
                            layout=tuple((int(offsets[i]), sizes[i])
                                         for i in range(len(sizes))))


def _member_data(spec, caches, cid, end):
    curve, cache = spec.curves[cid], caches[cid]
    node = junction_node(curve, end)
    adjacent = 1 if end == START else curve.n - 2
    sign = 1.0 if end == START else -1.0
    tau = cache.tau[node]
    proj = np.eye(2) - np.outer(tau, tau)
    return {
        "cid": cid, "end": end, "node": node, "adjacent": adjacent,
        "sign": sign, "curve": curve, "cache": cache,
        "h": curve.param_step, "q": cache.speed[node],
        "tau_own": tau, "nu_own": cache.nu[node],
        "tau_out": sign * tau, "proj": proj, "mu": spec.mu[cid],
        "k": cache.curvature[node],
    }


def _junction_rows(spec, caches, junction, builder, gix):
    members = [_member_data(spec, caches, cid, end)
               for cid, end in junction.members]
    m = len(members)
    clamped = junction.kind == "clamped"

    # concurrency: consecutive member pairs, placed on the junction-node
    # rows of the first member of each pair
    for j in range(m - 1):
        a, b = members[j], members[j + 1]
        for comp in (0, 1):
            r = gix(a["cid"], a["node"], comp)
            builder.add(r, gix(a["cid"], a["node"], comp), 1.0)
            builder.add(r, gix(b["cid"], b["node"], comp), -1.0)
            builder.b[r] = 0.0

    # third order condition on the last member's junction-node rows
    last = members[m - 1]
    row_base = [gix(last["cid"], last["node"], comp) for comp in (0, 1)]
    rhs_vec = np.zeros(2)
    for mem in members:
        idx, w3 = end_row_weights(3, mem["h"], mem["end"] == START)
        idx = idx % mem["curve"].n
        block = mem["sign"] * (-2.0 / mem["q"]**3) * mem["proj"]
        for j, wgt in zip(idx, w3):
            for rc in (0, 1):
                for cc in (0, 1):
                    builder.add(row_base[rc], gix(mem["cid"], int(j), cc),
                                block[rc, cc] * wgt)
        # linear part at the old state
        rhs_vec += block @ mem["cache"].dx3[mem["node"]]
        # nonlinear condition value at the old state
        cache, curve = mem["cache"], mem["curve"]
        dk = _boundary_dk_ds(curve, cache, mem["node"])
        term = mem["sign"] * (-2.0 * dk * mem["nu_own"]
                              + mem["mu"] * mem["tau_own"])
        if clamped:
            term -= mem["sign"] * mem["k"]**2 * mem["tau_own"]
        rhs_vec -= term
    for rc in (0, 1):
        builder.b[row_base[rc]] = rhs_vec[rc]

    if not clamped:
        # vanishing second parameter derivative per member
        for mem in members:
            idx, w2 = end_row_weights(2, mem["h"], mem["end"] == START)
            idx = idx % mem["curve"].n
            for comp in (0, 1):
                r = gix(mem["cid"], mem["adjacent"], comp)
                for j, wgt in zip(idx, w2):
                    builder.add(r, gix(mem["cid"], int(j), comp), wgt)
                builder.b[r] = 0.0
        return

    # clamped junction: orthogonality gauge per member, then angle rows and
    # the curvature-sum row on the adjacent-node slots
    for mem in members:
        idx, w2 = end_row_weights(2, mem["h"], mem["end"] == START)
        idx = idx % mem["curve"].n
        r = gix(mem["cid"], mem["adjacent"], 0)
        for j, wgt in zip(idx, w2):
            for cc in (0, 1):
                builder.add(r, gix(mem["cid"], int(j), cc),
                            wgt * mem["tau_own"][cc])
        builder.b[r] = 0.0

    for j in range(m - 1):
        a, b = members[j], members[j + 1]
        r = gix(a["cid"], a["adjacent"], 1)
        for mem, other in ((a, b), (b, a)):
            idx, w1 = end_row_weights(1, mem["h"], mem["end"] == START)
            idx = idx % mem["curve"].n
            coefs = mem["sign"] * (mem["proj"] @ other["tau_out"]) / mem["q"]
            for jj, wgt in zip(idx, w1):
                for cc in (0, 1):
                    builder.add(r, gix(mem["cid"], int(jj), cc),
                                wgt * coefs[cc])
        builder.b[r] = junction.cosines[j] - float(
            np.dot(a["tau_out"], b["tau_out"]))

    last = members[m - 1]
    r = gix(last["cid"], last["adjacent"], 1)
    for mem in members:
        idx, w2 = end_row_weights(2, mem["h"], mem["end"] == START)
        idx = idx % mem["curve"].n
        coefs = mem["sign"] * mem["nu_own"] / mem["q"]**2
        for j, wgt in zip(idx, w2):
            for cc in (0, 1):
                builder.add(r, gix(mem["cid"], int(j), cc), wgt * coefs[cc])
    builder.b[r] = 0.0


def _boundary_dk_ds(curve, cache, node):
    """One-sided arclength derivative of the curvature at a boundary node."""
    return float(arclength_derivative(cache.curvature, curve, 1, cache)[node])


# ---------------------------------------------------------------------------
# stepping

def _dissipation_rate(spec, caches):
    total = 0.0
    for curve, mu, cache in zip(spec.curves, spec.mu, caches):
        v = normal_velocity(curve, mu, cache)
        total += float(np.sum(v * v * cache.ds_weight))
    return total


def step(state, config, dt=None, remesh=False, tol_mono=None):
    """One accepted step; halves dt on energy increase when backtracking.

    Returns (new_state, report). Raises StepFailed when no acceptable dt
    above dt_min exists, and DegenerateCurve when even the smallest step
    produces an irregular curve.
    """
    spec = state.network
    dt = config.dt_init if dt is None else dt
    energy_before = state.energy().total
    if tol_mono is None:
        tol_mono = config.tol_mono_rel * energy_before
    v_sq = _dissipation_rate(spec, state.caches)

    backtracks = 0
    while True:
        system = assemble_step_system(state, dt)
        try:
            positions, residual = solve_linear(system)
            new_curves = [c.with_points(p)
                          for c, p in zip(spec.curves, positions)]
            new_caches = [compute_geometry(c) for c in new_curves]
        except (SingularSystem, DegenerateCurve) as exc:
            if not config.energy_backtrack or dt * 0.5 < config.dt_min:
                raise
            log.debug("step rejected (%s); halving dt to %.3e", exc, dt / 2)
            dt *= 0.5
            backtracks += 1
            continue
        energy_after = network_energy(new_curves, spec.mu, new_caches).total
        if (config.energy_backtrack
                and energy_after > energy_before + tol_mono):
            if dt * 0.5 < config.dt_min:
                raise StepFailed(
                    f"no energy-decreasing step above dt_min={config.dt_min}; "
                    f"last increase {energy_after - energy_before:.3e}")
            log.debug("energy rose by %.3e; halving dt to %.3e",
                      energy_after - energy_before, dt / 2)
            dt *= 0.5
            backtracks += 1
            continue
        break

    remeshed = False
    if remesh:
        try:
            remesh_curves = [reparametrize_constant_speed(c, g)
                             for c, g in zip(new_curves, new_caches)]
            remesh_caches = [compute_geometry(c) for c in remesh_curves]
            remesh_energy = network_energy(remesh_curves, spec.mu,
                                           remesh_caches).total
            if remesh_energy <= energy_before + tol_mono:
                new_curves, new_caches = remesh_curves, remesh_caches
                energy_after = remesh_energy
                remeshed = True
            else:
                log.debug("remesh skipped: energy budget exceeded")
        except DegenerateCurve:
            log.debug("remesh skipped: resampled curve degenerate")

    new_state = FlowState(t=state.t + dt,
                          network=spec.with_curves(new_curves),
                          caches=tuple(new_caches))
    report = StepReport(
        t_before=state.t, dt_used=dt,
        energy_before=energy_before, energy_after=energy_after,
        dissipation_lhs=(energy_after - energy_before) / dt,
        dissipation_rhs=-v_sq,
        linear_residual=residual, remeshed=remeshed, backtracks=backtracks)
    return new_state, report


def _run_bounds(spec, e0):
    if len(spec.curves) == 1:
        curve = spec.curves[0]
        if curve.closed:
            return diagnostics.length_bounds(e0, spec.mu[0], "closed")
        fixed = [np.asarray(cond.point) for _cid, _end, cond in spec.endpoints]
        if len(fixed) == 2:
            return diagnostics.length_bounds(e0, spec.mu[0], "open",
                                             endpoints=fixed)
    return diagnostics.length_bounds(e0, min(spec.mu), "network")


def run(spec, config, snapshot_every=0):
    """Integrate until t_end, convergence, max_steps, or failure.

    Returns a Trajectory whose monitor holds one record per accepted step
    (plus the initial state). Length-bound or non-degeneracy violations
    are flagged in the records, never raised. StepFailed propagates with
    the partial trajectory attached.
    """
    state = FlowState.initial(spec)
    e_rep = state.energy()
    e0 = e_rep.total
    tol_mono = config.tol_mono_rel * e0
    lower, upper = _run_bounds(spec, e0)

    monitor = diagnostics.MonitorReport(lower_bound=lower, upper_bound=upper)
    v_l2 = diagnostics.stationarity(spec, state.caches)
    monitor.append(diagnostics.monitor_record(
        spec, state.caches, state.t, e_rep, v_l2, lower, upper))

    trajectory = Trajectory(states=[state], reports=[], monitor=monitor,
                            status=MAX_STEPS)
    dt = config.dt_init
    accepted = 0
    while True:
        if v_l2 < config.stop_velocity_tol:
            trajectory.status = CONVERGED
            break
        if state.t >= config.t_end:
            trajectory.status = REACHED_T_END
            break
        if accepted >= config.max_steps:
            trajectory.status = MAX_STEPS
            break
        remesh = (config.remesh_every > 0
                  and (accepted + 1) % config.remesh_every == 0)
        try:
            state, report = step(state, config, dt=dt, remesh=remesh,
                                 tol_mono=tol_mono)
        except (StepFailed, DegenerateCurve) as exc:
            if isinstance(exc, StepFailed):
                exc.trajectory = trajectory
            _finalize(trajectory, state)
            raise
        accepted += 1
        dt = min(report.dt_used * config.dt_growth, config.dt_max)

        cur = state.network
        e_rep = state.energy()
        v_l2 = diagnostics.stationarity(cur, state.caches)
        record = diagnostics.monitor_record(
            cur, state.caches, state.t, e_rep, v_l2, lower, upper)
        monitor.append(record)
        report.bound_flags = {
            "length_lower": not record.length_lower_ok,
            "length_upper": not record.length_upper_ok,
        }
        trajectory.reports.append(report)
        if snapshot_every and accepted % snapshot_every == 0:
            trajectory.states.append(state)

    _finalize(trajectory, state)
    return trajectory


def _finalize(trajectory, state):
    if trajectory.states[-1] is not state:
        trajectory.states.append(state)
