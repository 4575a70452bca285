"""Exception types shared across the package."""


class PlantSchedError(Exception):
    """Base class for all package errors."""


class ValidationError(PlantSchedError, ValueError):
    """Input failed validation.

    ``problems`` lists every violated rule, so callers can report them all at once.
    """

    def __init__(self, problems, context=None):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        self.context = context
        msg = "; ".join(self.problems)
        if context:
            msg = f"{context}: {msg}"
        super().__init__(msg)


class CalendarRangeError(PlantSchedError, ValueError):
    pass


class ShapeError(PlantSchedError, ValueError):
    pass


class SingularKernelError(PlantSchedError, ArithmeticError):
    pass


class InfeasibleError(PlantSchedError):
    """No schedule satisfies the window and capacity constraints.

    ``binding_weeks`` holds ``(scenario, week, load)`` triples where the best
    attempt still exceeded capacity, when known.
    """

    def __init__(self, message, binding_weeks=None):
        super().__init__(message)
        self.binding_weeks = list(binding_weeks or [])


class BudgetExceededError(PlantSchedError):
    pass
