"""Runtime monitors: dissipation, length bounds, stationarity, limits.

Along the flow the energy dissipates at rate -int V^2 ds, the weighted
total length stays below its initial-energy bound, and closed curves
cannot become shorter than 4 pi^2 over the initial energy. These facts
are cheap to monitor and are the primary correctness oracles for the
discretization.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotStationary
from .geometry import compute_geometry
from .network import junction_frames, nondegeneracy_measure, single_curve_network
from .variational import normal_velocity

EPS_FLOOR = 1e-12


def length_bounds(e0, mu, kind, endpoints=None):
    """Lower and upper length bounds implied by the initial energy.

    Parameters
    ----------
    e0 : float
        Energy of the initial state (of the single curve, or of the whole
        network for the upper bound).
    mu : float
        Length weight; for networks pass the minimum over the curves.
    kind : {"closed", "open", "network"}
        Closed curves get the Gauss-Bonnet lower bound 4 pi^2 / e0; open
        curves with fixed endpoints P, Q get |P - Q| (or pi^2 / e0 when
        the endpoints coincide); networks only get the upper bound on the
        total length.
    endpoints : pair of points, open curves only.
    """
    if e0 <= 0:
        raise ValueError("initial energy must be positive")
    upper = e0 / mu if mu > 0 else math.inf
    if kind == "closed":
        lower = 4.0 * math.pi**2 / e0
    elif kind == "open":
        if endpoints is None:
            raise ValueError("open-curve bounds need the fixed endpoints")
        p, q = (np.asarray(e, dtype=float) for e in endpoints)
        gap = float(np.linalg.norm(p - q))
        lower = gap if gap > 0 else math.pi**2 / e0
    elif kind == "network":
        lower = 0.0
    else:
        raise ValueError(f"unknown curve kind {kind!r}")
    return lower, upper


def stationarity(spec, caches=None):
    """L2 norm of the normal speed over the whole network."""
    if caches is None:
        caches = [compute_geometry(c) for c in spec.curves]
    total = 0.0
    for curve, mu, cache in zip(spec.curves, spec.mu, caches):
        v = normal_velocity(curve, mu, cache)
        total += float(np.sum(v * v * cache.ds_weight))
    return math.sqrt(total)


def dissipation_residual(reports, eps_floor=EPS_FLOOR):
    """Relative defect of the dissipation identity, per accepted step.

    Each report carries the measured energy rate (dissipation_lhs) and
    the independently computed -int V^2 ds at the pre-step state
    (dissipation_rhs); the residual is their mismatch relative to the
    dissipation magnitude, floored to keep stationary states at zero.
    """
    if len(reports) == 0:
        return np.zeros(0)
    out = np.empty(len(reports))
    for i, rep in enumerate(reports):
        rate = -rep.dissipation_rhs
        out[i] = abs(rep.dissipation_lhs - rep.dissipation_rhs) / max(rate, eps_floor)
    return out


def winding_number(curve, cache=None):
    """Integral of the oriented curvature over 2 pi, rounded."""
    if cache is None:
        cache = compute_geometry(curve)
    total = float(np.sum(cache.curvature * cache.ds_weight))
    return int(round(total / (2.0 * math.pi)))


@dataclass(frozen=True)
class LimitClass:
    kind: str        # "circle", "figure_eight", "other"
    winding: int
    radius: float = math.nan
    heuristic: bool = False


def classify_limit(curve, mu, stationarity_tol=1e-3):
    """Classify a (nearly) stationary closed curve.

    Circles are detected by near-constant curvature matching sqrt(mu)
    with the sign of the winding number; the figure-eight test (winding
    zero, curvature changing sign exactly twice, the two lobes carrying
    equal arclength) is a heuristic and flagged as such.
    """
    if not curve.closed:
        raise ValueError("limit classification applies to closed curves")
    cache = compute_geometry(curve)
    vnorm = stationarity(single_curve_network(curve, mu), [cache])
    if vnorm > stationarity_tol:
        raise NotStationary(
            f"velocity norm {vnorm:.3e} above threshold {stationarity_tol:.0e}")

    k = cache.curvature
    w = winding_number(curve, cache)
    mean_abs = float(np.mean(np.abs(k)))
    mean_k = float(np.mean(k))
    spread = float(np.std(k))
    if w != 0 and mean_abs > 0 and spread / mean_abs < 0.01:
        target = math.copysign(math.sqrt(mu), w) if mu > 0 else mean_k
        if mu == 0 or abs(mean_k - target) <= 0.02 * abs(target):
            if math.copysign(1, mean_k) == math.copysign(1, w):
                return LimitClass(kind="circle", winding=w,
                                  radius=1.0 / mean_abs)
    if w == 0:
        signs = np.sign(k[np.abs(k) > 1e-12 * max(1.0, mean_abs)])
        flips = int(np.sum(signs != np.roll(signs, 1)))
        pos = float(np.sum(cache.ds_weight[k > 0]))
        neg = float(np.sum(cache.ds_weight[k < 0]))
        balanced = abs(pos - neg) <= 0.1 * (pos + neg)
        if flips == 2 and balanced:
            return LimitClass(kind="figure_eight", winding=0, heuristic=True)
    return LimitClass(kind="other", winding=w, heuristic=True)


@dataclass(frozen=True)
class MonitorRecord:
    t: float
    energy_total: float
    energy_bending: float
    lengths: tuple
    velocity_l2: float
    length_lower_ok: bool
    length_upper_ok: bool
    nondegeneracy: tuple  # per-junction measures


@dataclass
class MonitorReport:
    """Per-time records collected along a run; time strictly increasing."""

    records: list = field(default_factory=list)
    lower_bound: float = 0.0
    upper_bound: float = math.inf

    def append(self, record):
        if self.records and record.t <= self.records[-1].t:
            raise ValueError("monitor time stamps must increase strictly")
        self.records.append(record)

    @property
    def any_violation(self):
        return any(not (r.length_lower_ok and r.length_upper_ok)
                   for r in self.records)


def monitor_record(spec, caches, t, energy_report, velocity_l2,
                   lower_bound, upper_bound):
    """One monitor row for the current state."""
    lengths = tuple(c.length for c in caches)
    total_len = sum(lengths)
    lower_ok = all(l >= lower_bound * (1.0 - 1e-12) for l in lengths) \
        if len(lengths) == 1 else True
    upper_ok = total_len <= upper_bound * (1.0 + 1e-12)
    measures = []
    for junction in spec.junctions:
        frames = junction_frames(spec, junction, caches)
        measures.append(nondegeneracy_measure([f.tau for f in frames]))
    return MonitorRecord(
        t=t, energy_total=energy_report.total,
        energy_bending=energy_report.bending, lengths=lengths,
        velocity_l2=velocity_l2, length_lower_ok=lower_ok,
        length_upper_ok=upper_ok, nondegeneracy=tuple(measures))
