"""Exception hierarchy shared by all modules."""


class ElasticFlowError(Exception):
    """Base class for all package errors."""


class TooFewNodes(ElasticFlowError):
    """Curve has fewer sample points than the stencils require."""


class DegenerateCurve(ElasticFlowError):
    """The parametrization speed dropped below the regularity threshold."""


class GridMismatch(ElasticFlowError):
    """A per-node field does not match the curve's sample grid."""


class DegenerateJunction(ElasticFlowError):
    """Unit normals at a junction fail to span the plane."""


class SingularSystem(ElasticFlowError):
    """Direct linear solve failed or left a large residual."""


class StepFailed(ElasticFlowError):
    """Time step could not be accepted down to the minimal step size."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class NotStationary(ElasticFlowError):
    """Limit classification requested on a state that is still moving."""


class UnknownShape(ElasticFlowError):
    """Requested initial-condition generator does not exist."""


class BadParams(ElasticFlowError):
    """Initial-condition generator called with invalid parameters."""
