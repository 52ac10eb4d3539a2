"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class ValidationError(ValueError):
    """A scenario violates one or more invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.violations))


class ApplicabilityError(ValueError):
    """A solver was asked to handle a scenario shape it does not model."""


class BudgetExceeded(RuntimeError):
    """Brute-force enumeration would exceed the configured budget."""

    def __init__(self, size, budget):
        self.size = size
        self.budget = budget
        super().__init__(f"enumeration size {size} exceeds budget {budget}")
