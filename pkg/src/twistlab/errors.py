"""Exception types raised by the numerical operations.

Every error carries enough context to identify the offending input;
scenario drivers catch :class:`TwistlabError` subclasses and convert them
into manifest entries / exit codes rather than tracebacks.
"""


class TwistlabError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(TwistlabError):
    """Invalid or unknown configuration input."""


class LevelSetNotLoop(TwistlabError):
    """Level set is empty, contractible, or has several components."""


class DegenerateGradient(TwistlabError):
    """|grad psi| fell below tolerance on a traced level curve."""


class UnderSampled(TwistlabError):
    """Trajectory samples too sparse to resolve winding unambiguously."""


class EmptyCurve(TwistlabError):
    """Polyline with fewer than two vertices."""


class NonZeroMean(TwistlabError):
    """Torus inversion requires mean-free vorticity."""


class UnsupportedDomain(TwistlabError):
    """Operation not defined on this domain kind."""


class CFLViolation(TwistlabError):
    """Time step exceeds the advective CFL limit."""


class EmptyHistory(TwistlabError):
    """Time series with no samples."""


class InterpolationOutOfDomain(TwistlabError):
    """Particle left the interpolable region (broken wall tangency)."""


class StencilCollapse(TwistlabError):
    """Jacobian stencil points degenerated to coincident positions."""


class UnderResolved(TwistlabError):
    """Neighboring lifted positions differ by more than half a turn."""


class NodeBudgetExceeded(TwistlabError):
    """Curve refinement hit the configured node cap."""


class DomainMismatch(TwistlabError):
    """Diagnostic applied to an ensemble from the wrong domain kind."""


class MisalignedHistories(TwistlabError):
    """Paired time series sampled on different time grids."""


class NonIntegrableProfile(TwistlabError):
    """Angular-velocity profile fails the required decay checks."""


class DegenerateHighways(TwistlabError):
    """Weight profiles overlap; two distinct highways are required."""


class TangencyDetected(TwistlabError):
    """Level value tangent to the sampled field; crossing count uncertain."""


class GeometryOverlap(TwistlabError):
    """Constructed patch components intersect; recipe infeasible."""


class QueryOnBoundary(TwistlabError):
    """Velocity query coincides with a contour node."""


class SelfIntersection(TwistlabError):
    """Evolving contour crossed itself."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class EmptyRadialBand(TwistlabError):
    """No contour vertices above the requested radial floor."""


class HypothesisViolated(TwistlabError):
    """Curve fails a hypothesis of the spiral length bound."""


class ClippingDegeneracy(TwistlabError):
    """Polygon clipping produced a degenerate result."""


class NumericalAbort(TwistlabError):
    """Run aborted: CFL or conservation-drift gate tripped."""


class NoSeriesFound(TwistlabError):
    """Run directory contains no diagnostic series."""
