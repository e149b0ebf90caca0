"""Exception hierarchy shared by every module."""


class RankCSPError(Exception):
    """Base class for all library errors."""


class MalformedInstanceError(RankCSPError):
    pass


class PositionCollisionError(RankCSPError):
    pass


class DomainMismatchError(RankCSPError):
    pass


class InstanceTooSmallError(RankCSPError):
    pass


class SizeCapError(RankCSPError):
    """Raised when an exact solver is asked to handle more vertices than its cap."""

    def __init__(self, what, size, cap):
        super().__init__(f"{what}: size {size} exceeds cap {cap}")
        self.size = size
        self.cap = cap


class GuessBudgetError(RankCSPError):
    def __init__(self, required, budget):
        super().__init__(
            f"exhaustive guessing needs {required} guesses, budget is {budget}"
        )
        self.required = required
        self.budget = budget
