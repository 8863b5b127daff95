"""Exception hierarchy shared by the heavy-tail bound modules.

Library code raises these; orchestration layers (ExperimentManager, the Flask
routes and the CLI) translate them into result dicts or exit codes.
"""

__all__ = [
    "HeavyTailError",
    "DomainError",
    "TableFormatError",
    "NonConvergence",
    "BracketError",
    "DivergenceError",
    "InvalidFamily",
    "FamilyError",
    "DivergentC",
    "ThresholdError",
    "NotCertified",
    "ConditionError",
    "RareEventError",
    "DominationFailure",
    "ConfigError",
]


class HeavyTailError(Exception):
    """Base class for every error raised by this package."""


class DomainError(HeavyTailError):
    """Argument outside the domain of a tail function or distribution."""


class TableFormatError(DomainError):
    """Malformed tabulated tail file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonConvergence(HeavyTailError):
    """Quadrature or root finding did not reach its tolerance."""


class BracketError(HeavyTailError):
    """Root bracket without a sign change."""


class DivergenceError(HeavyTailError):
    """Integral is not finite."""


class InvalidFamily(HeavyTailError):
    """Tail family does not satisfy the hypothesis of the requested bound."""


class FamilyError(InvalidFamily):
    """Tail family routed to the wrong large-deviation check."""


class DivergentC(HeavyTailError):
    """c_{L,beta} provider returned infinity."""


class ThresholdError(HeavyTailError):
    """m*t does not exceed the certified C_epsilon threshold."""


class NotCertified(HeavyTailError):
    """No grid point certifies c_{L,beta} <= Var + epsilon."""


class ConditionError(HeavyTailError):
    """Deviation sequence fails the polynomial-tail growth conditions."""


class RareEventError(HeavyTailError):
    """Predicted probability too small for the Monte Carlo budget."""


class DominationFailure(HeavyTailError):
    """Empirical tail exceeded the theoretical bound in at least one cell."""

    def __init__(self, cells):
        self.cells = list(cells)
        listed = ", ".join(f"(m={c['m']}, t={c['t']:.6g})" for c in self.cells)
        super().__init__(f"{len(self.cells)} violating cell(s): {listed}")


class ConfigError(HeavyTailError):
    """Experiment configuration cannot be parsed or validated."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        prefix = []
        if line is not None:
            prefix.append(f"line {line}")
        if field is not None:
            prefix.append(f"field '{field}'")
        if prefix:
            message = f"{', '.join(prefix)}: {message}"
        super().__init__(message)
