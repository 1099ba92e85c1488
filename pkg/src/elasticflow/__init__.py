"""Numerical evolution of planar curves and networks by the gradient flow
of bending energy plus weighted length."""

from ._kernels import BACKEND as KERNEL_BACKEND
from .diagnostics import (
    LimitClass,
    MonitorReport,
    classify_limit,
    dissipation_residual,
    length_bounds,
    stationarity,
    winding_number,
)
from .errors import (
    BadParams,
    DegenerateCurve,
    DegenerateJunction,
    ElasticFlowError,
    GridMismatch,
    NotStationary,
    SingularSystem,
    StepFailed,
    TooFewNodes,
    UnknownShape,
)
from .geometry import (
    GeometryCache,
    SampledCurve,
    arclength_derivative,
    build_curve,
    compute_geometry,
    reparametrize_constant_speed,
    spatial_derivatives,
)
from .network import (
    ClampedEndpoint,
    JunctionSpec,
    NavierEndpoint,
    NetworkSpec,
    ValidationReport,
    ValidatorTolerances,
    boundary_residuals,
    junction_tangential_solve,
    load_spec,
    nondegeneracy_measure,
    save_spec,
    single_curve_network,
    validate_admissible,
)
from .solver import (
    CONVERGED,
    MAX_STEPS,
    REACHED_T_END,
    FlowState,
    SolverConfig,
    StepReport,
    Trajectory,
    assemble_step_system,
    run,
    solve_linear,
    step,
)
from .variational import (
    EnergyReport,
    VelocityField,
    elastic_energy,
    flow_velocity,
    gradient_check,
    network_energy,
    normal_velocity,
    tangential_velocity,
)

__version__ = "0.1.0"
