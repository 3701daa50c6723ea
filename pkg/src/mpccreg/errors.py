"""Exception types raised by the analysis modules."""


class MpccError(Exception):
    """Base class for all package errors."""


class InputError(MpccError, ValueError):
    """Malformed input: wrong dimensions, bad problem files, bad parameters."""


class InfeasiblePointError(InputError):
    """The point violates the constraints of the set it is analyzed on.

    ``violations`` maps a constraint label such as ``"F1[0]"`` or
    ``"F1F2[2]"`` to its signed residual.
    """

    def __init__(self, message: str, violations: dict[str, float]):
        super().__init__(message)
        self.violations = violations


class NotStationaryError(MpccError):
    """Stationarity residual above tolerance where a stationary point is required."""


class NotKktError(MpccError):
    """The point is not a KKT point of the regularized program."""


class PreconditionError(MpccError, ValueError):
    """A nondegeneracy precondition failed; ``flag`` names it (e.g. ``"NDC4"``)."""

    def __init__(self, message: str, flag: str):
        super().__init__(message)
        self.flag = flag


class SeedError(MpccError, ValueError):
    """A seed cannot be constructed from the given multipliers."""


class CorrectorError(MpccError, RuntimeError):
    """Newton corrector failure.

    ``reason`` is one of ``"max-iter"``, ``"singular-jacobian"``,
    ``"pattern-oscillation"``, ``"retries-exhausted"``.
    """

    def __init__(self, message: str, reason: str):
        super().__init__(message)
        self.reason = reason
