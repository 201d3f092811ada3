"""Exception types shared across the package.

Every failure mode that callers are expected to branch on gets its own class.
All of them derive from :class:`TiltmixError` so the CLI can map whole
categories to exit codes without enumerating leaf types.
"""

from __future__ import annotations


class TiltmixError(Exception):
    """Base class for all package-specific errors."""


class EstimationError(TiltmixError):
    """Base class for failures raised while solving or evaluating a model."""


# --- numerics ---------------------------------------------------------------

class NoSignChange(EstimationError):
    """Root bracket endpoints have the same sign."""


class MaxIterExceeded(EstimationError):
    """Iteration limit reached before the convergence test was met.

    Carries the last :class:`~tiltmix.numerics.SolveDiagnostics` (when the
    failing routine tracks one) so callers can inspect the final state.
    """

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class SingularHessian(EstimationError):
    """Hessian solve failed and no fallback direction was usable."""


class Diverged(EstimationError):
    """Iterates left the trust region (norm above the divergence cap)."""


class NonFiniteInput(EstimationError):
    """An input or evaluation produced NaN or infinity."""


# --- model core -------------------------------------------------------------

class DimensionMismatch(EstimationError):
    """Array arguments have incompatible shapes."""


class RhoOutOfRange(EstimationError):
    """A class proportion lies outside the open interval (0, 1)."""


class AlphaOutOfRange(EstimationError):
    """A mixing weight lies outside the open interval (0, 1)."""


class NormalizationViolated(EstimationError):
    """Base-distribution weights fail their normalization constraints."""


class OverflowGuardTripped(EstimationError):
    """A linear predictor exceeded the exp() guard during evaluation."""


# --- supervised -------------------------------------------------------------

class SingleClass(EstimationError):
    """Labeled data contain only one outcome class."""


class Separation(EstimationError):
    """Logistic fit diverged in norm: data are (quasi-)separated."""


class SingularH(EstimationError):
    """Sandwich bread matrix is numerically singular."""


# --- tilt mixture fits ------------------------------------------------------

class DegenerateTilts(EstimationError):
    """All tilt weights equal one: the mixing weight is unidentified."""


class NoInteriorRoot(EstimationError):
    """Scalar score has no root inside the open unit interval."""


# --- asymptotic variance ----------------------------------------------------

class MissingG0(EstimationError):
    """Oracle integration requested without a base distribution."""


class MissingWeights(EstimationError):
    """Plug-in integration requested without support points and weights."""


class DegenerateS22(EstimationError):
    """The alpha curvature scalar is zero; U-matrices are undefined."""


class SingularBlock(EstimationError):
    """A variance block inversion failed."""


class NotApplicable(EstimationError):
    """A quantity is undefined for the given configuration."""


class NonpositiveV(EstimationError):
    """The intercept efficiency-gap constant failed its positivity check."""


# --- simulation harness -----------------------------------------------------

class ShapeMismatch(EstimationError):
    """Replication sample arrays disagree in shape."""


class AllReplicationsFailed(EstimationError):
    """Every replication of a scenario raised an estimation error."""


class UsageError(TiltmixError):
    """Bad CLI flags or configuration values (exit code 1)."""


class InputOutputError(TiltmixError):
    """File could not be read, parsed, or written (exit code 3)."""
