"""Exception hierarchy for stablepeg."""

from __future__ import annotations


class StablePegError(Exception):
    """Base class for every error raised by this package."""


class InvalidQ(StablePegError, ValueError):
    """Redemption quantity outside ``[0, total_supply]``."""


class InvalidParameter(StablePegError, ValueError):
    """A spec or economy parameter is outside its admissible range."""


class MonotonicityViolation(StablePegError, ValueError):
    """An economy function fails its monotonicity or range check on the grid."""

    def __init__(self, function: str, detail: str, points=()):
        self.function = function
        self.points = list(points)
        super().__init__(f"{function}: {detail}" + (f" at {self.points[:5]}" if self.points else ""))


class SupplyConsistencyViolation(StablePegError, ValueError):
    """Liquidation demand plus debtor debt does not add up to total supply."""


class NoRoot(StablePegError):
    """A threshold equation has no crossing on the theta interval.

    ``side`` is ``"low"`` when the function stays below its target everywhere
    and ``"high"`` when it stays above.
    """

    def __init__(self, what: str, side: str):
        self.what = what
        self.side = side
        super().__init__(f"{what}: no crossing on the interval (function stays {'below' if side == 'low' else 'above'} target)")


class AssumptionViolated(StablePegError):
    """A precondition of the zone classification does not hold."""

    def __init__(self, assumption: str, detail: str = ""):
        self.assumption = assumption
        super().__init__(f"{assumption}" + (f": {detail}" if detail else ""))


class NonConvergence(StablePegError):
    """Best-response dynamics did not settle within ``max_iter`` passes."""

    def __init__(self, iterations: int, cycling: list):
        self.iterations = iterations
        self.cycling = cycling
        super().__init__(f"no fixed point after {iterations} passes; agents still switching: {cycling[:10]}")


class EmptySeries(StablePegError, ValueError):
    pass


class DegenerateVariance(StablePegError, ValueError):
    pass


class InsufficientOverlap(StablePegError, ValueError):
    pass


class SingularDesign(StablePegError, ValueError):
    pass


class ParseError(StablePegError, ValueError):
    """Malformed config or CSV input. ``location`` names the line or field."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class NonPositivePrice(StablePegError, ValueError):
    pass


class ValidationError(StablePegError, ValueError):
    """Aggregates every problem found while validating a config."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
