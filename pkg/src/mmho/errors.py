"""Exception and warning types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the region where a model is defined."""


class DegenerateGeometryError(DomainError):
    """The geometric construction has no unique answer (e.g. a point at the origin)."""


class NoCrossingError(DomainError):
    """A trajectory never reaches the edge it was asked to cross."""


class NumericError(ArithmeticError):
    """A numerical routine failed to reach the requested accuracy."""


class ConfigError(ValueError):
    """One or more configuration problems, reported together."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class DiagnosticWarning(UserWarning):
    """Emitted when a result was clamped, saturated or flagged as degenerate."""
