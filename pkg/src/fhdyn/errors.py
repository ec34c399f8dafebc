"""Exception hierarchy shared by all modules.

Every domain failure carries enough payload (offending mode, witness point,
violated bound) to be reported verbatim by the CLI.
"""

from __future__ import annotations


class FhdError(Exception):
    """Base class for all domain errors of this package."""


class NonFiniteSample(FhdError):
    """A sampler returned NaN or infinity on the evaluation grid."""


class NonZeroMean(FhdError):
    """Cohomological right-hand side has a non-negligible mean mode."""

    def __init__(self, mean):
        self.mean = mean
        super().__init__(f"right-hand side has non-zero mean {mean!r}")


class SmallDivisorError(FhdError):
    """A required divisor fell below the configured floor.

    ``witness`` is ``(mode, j)`` for order-``j+1`` homological solves and
    ``(mode, None)`` for the plain cohomological equation.
    """

    def __init__(self, witness, divisor, floor, report=None):
        self.witness = witness
        self.divisor = divisor
        self.floor = floor
        self.report = report
        super().__init__(
            f"divisor {divisor:.3e} below floor {floor:.3e} at {witness}"
        )


class OutOfDomain(FhdError):
    """A fiber was evaluated outside its certified disc."""

    def __init__(self, abs_z, radius):
        self.abs_z = abs_z
        self.radius = radius
        super().__init__(f"|z| = {abs_z:.6g} exceeds domain radius {radius:.6g}")


class NoConvergence(FhdError):
    """An iteration hit its step budget before reaching tolerance."""

    def __init__(self, message, achieved=None):
        self.achieved = achieved
        super().__init__(message)


class OutOfCertifiedRange(FhdError):
    """A fiber inversion was requested beyond the certified radius."""

    def __init__(self, abs_w, radius):
        self.abs_w = abs_w
        self.radius = radius
        super().__init__(
            f"|w| = {abs_w:.6g} exceeds certified inversion radius {radius:.6g}"
        )


class DegreeOverflow(FhdError):
    """A refitted coefficient needs Fourier degree beyond the cutoff."""

    def __init__(self, tail_mass, cutoff):
        self.tail_mass = tail_mass
        self.cutoff = cutoff
        super().__init__(
            f"Fourier tail mass {tail_mass:.3e} beyond degree cutoff {cutoff}"
        )


class UnwrapAmbiguity(FhdError):
    """Argument unwrapping kept jumps >= pi/2 at the finest allowed grid."""


class NotAttracting(FhdError):
    """Operation requires a contracting zero section (multiplier < 1)."""

    def __init__(self, kappa):
        self.kappa = kappa
        super().__init__(f"multiplier {kappa:.12g} is not < 1")


class NotIndifferent(FhdError):
    """Operation requires an indifferent zero section (multiplier == 1)."""

    def __init__(self, kappa):
        self.kappa = kappa
        super().__init__(f"multiplier {kappa:.12g} is not 1 within tolerance")


class ApproximationStall(FhdError):
    """No trigonometric degree below the cutoff met the sup-error target."""

    def __init__(self, best_error, target, max_degree):
        self.best_error = best_error
        self.target = target
        self.max_degree = max_degree
        super().__init__(
            f"sup error {best_error:.3e} never reached {target:.3e} "
            f"up to degree {max_degree}"
        )


class InsufficientLiouville(FhdError):
    """Denominator growth is too slow for the requested divergence schedule."""

    def __init__(self, message, level=None):
        self.level = level
        super().__init__(message)


class SearchExhausted(FhdError):
    """No prime denominator below the cap met the accuracy requirement."""


class CertificateFailure(FhdError):
    """A numerical certificate (non-vanishing, injectivity) failed."""

    def __init__(self, message, bound=None):
        self.bound = bound
        super().__init__(message)


class SchemaError(FhdError):
    """An input file does not match the documented schema."""

    def __init__(self, path, message):
        self.field_path = path
        super().__init__(f"{path}: {message}")


class EmptySet(FhdError):
    """Distance requested between masks at least one of which is empty."""


class InverseBreakdown(FhdError):
    """Certified fiber inversion failed inside the tube."""

    def __init__(self, theta, w):
        self.theta = theta
        self.w = w
        super().__init__(f"fiber inversion failed at theta={theta!r}, w={w!r}")


class ScheduleExhausted(FhdError):
    """Successive approximation levels did not stabilise within threshold."""

    def __init__(self, drift, threshold):
        self.drift = drift
        self.threshold = threshold
        super().__init__(
            f"mask drift {drift:.3g} px above stabilisation threshold "
            f"{threshold:.3g} px at last level"
        )
