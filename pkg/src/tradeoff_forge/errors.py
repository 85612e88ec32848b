"""Exception hierarchy shared by all solver modules."""


class TradeoffError(Exception):
    """Base class for all library errors."""


class ValidationError(TradeoffError):
    """Base class for input-validation failures (CLI exit code 2)."""


class BadRange(ValidationError):
    """A scalar parameter is outside its admissible range."""


class NonzeroBase(ValidationError):
    """The power vector does not start at zero cost for zero packets."""


class NonConvexPower(ValidationError):
    """Power increments are not strictly increasing."""


class InfeasibleThresholds(ValidationError):
    """A threshold vector implies an overflow/underflow-violating action."""


class MultiChain(TradeoffError):
    """The policy-induced chain has several closed classes and state 0 is transient.

    Carries the detected closed classes so the caller can pick one explicitly.
    """

    def __init__(self, classes):
        self.classes = [frozenset(c) for c in classes]
        super().__init__(
            f"chain has {len(self.classes)} closed classes and state 0 is transient: "
            + ", ".join(sorted(str(sorted(c)) for c in self.classes))
        )


class RowMismatch(TradeoffError):
    """Two policies were expected to differ in exactly one row but do not."""


class DegenerateSegment(TradeoffError):
    """The two policies map to the same average power; the segment has no slope."""


class NoConvergence(TradeoffError):
    """Policy iteration did not stabilize within the iteration cap."""


class InfeasibleBudget(TradeoffError):
    """The requested power budget lies below the minimum achievable average power."""


class NumericalFailure(TradeoffError):
    """A linear solve or pivoting loop failed to meet its tolerance (CLI exit code 4)."""


class CountExceeded(TradeoffError):
    """Deterministic policy enumeration would exceed the configured cap."""


class OverflowViolated(TradeoffError):
    """A simulated transition left the buffer above Q; the policy is not feasible."""


class UnderflowViolated(TradeoffError):
    """A simulated transition drove the buffer below 0; the policy is not feasible."""
