"""Exception types shared across the toolkit."""


class CovertraceError(Exception):
    """Base class for all toolkit errors."""


class InvalidInput(CovertraceError, ValueError):
    """A precondition on an operation's inputs was violated."""


class TotalInternalReflection(CovertraceError):
    """No transmitted ray exists for the requested refraction.

    Raised when eta**2 * (1 - cos_i**2) > 1 for at least one ray.  The
    ``mask`` attribute marks the offending lanes of a batched call.
    """

    def __init__(self, mask=None):
        super().__init__("total internal reflection")
        self.mask = mask


class NoConvergence(CovertraceError):
    """An iterative numerical routine failed to reach its tolerance."""


class OutOfBounds(CovertraceError, ValueError):
    """A pixel coordinate lies outside the image."""


class SizeMismatch(CovertraceError, ValueError):
    """Two buffers that must have equal shape do not."""


class LengthMismatch(SizeMismatch):
    """Two sequences that must have equal length do not."""


class TooSmall(CovertraceError, ValueError):
    """An image is too small for the requested windowed metric."""


class InvalidRange(CovertraceError, ValueError):
    """A (near, far) interval is empty or inverted."""


class NonFiniteLoss(CovertraceError):
    """Training produced a NaN/inf loss.

    Carries the last finite checkpoint in ``state`` so callers can recover.
    """

    def __init__(self, iteration, state=None):
        super().__init__(f"non-finite loss at iteration {iteration}")
        self.iteration = iteration
        self.state = state
