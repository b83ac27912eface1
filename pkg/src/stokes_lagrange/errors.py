"""Exception hierarchy.

Errors split into two families so that the command line front-end can map
them onto exit codes: :class:`ValidationError` means the inputs are
inconsistent (exit 2), :class:`RuntimeFailure` means a well-posed run broke
down part way (exit 3).
"""


class StokesLagrangeError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(StokesLagrangeError, ValueError):
    """Inputs violate a precondition."""


class RuntimeFailure(StokesLagrangeError, RuntimeError):
    """A computation failed after its inputs were accepted."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


# geometry
class InvalidCurve(ValidationError):
    pass


class InvalidDomain(ValidationError):
    pass


class OnBoundary(ValidationError):
    pass


class CurveNotInDomain(ValidationError):
    pass


class TubeLeavesDomain(ValidationError):
    pass


class SampleCountMismatch(ValidationError):
    pass


# basis
class OffsetTooLarge(ValidationError):
    pass


class EvaluationAtSingularity(ValidationError):
    pass


class TooCloseToSingularity(ValidationError):
    pass


# fitting
class DegenerateProblem(ValidationError):
    pass


class InfeasibleFlux(ValidationError):
    pass


class MissingNormals(ValidationError):
    pass


# model flow
class AreaMismatch(ValidationError):
    pass


class HomotopyClassMismatch(ValidationError):
    pass


class SweepLeavesDomain(ValidationError):
    pass


class NotStarShaped(ValidationError):
    pass


class ScenarioMismatch(ValidationError):
    """The requested generator does not carry gamma0 onto gamma1."""


class OutOfRange(ValidationError):
    pass


class CurveLeftDomain(RuntimeFailure):
    pass


class SelfIntersection(RuntimeFailure):
    pass


# pipeline
class ConfigError(ValidationError):
    pass


class SynthesisResidualTooLarge(RuntimeFailure):
    pass


class BlobEscapesDuringRamp(RuntimeFailure):
    pass


class IncompleteTrajectory(ValidationError):
    pass


class MissingArtifacts(ValidationError):
    pass
