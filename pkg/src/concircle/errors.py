"""Exception hierarchy shared across the package.

The CLI maps these onto its exit-code contract: configuration problems
exit 2, runtime computation problems exit 3 (check failures exit 1 but
are reported through return values, not exceptions).
"""


class ConcircleError(Exception):
    """Base class for all package errors."""


class ParseError(ConcircleError):
    """Expression text could not be parsed; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class EvalError(ConcircleError):
    """Base for numeric evaluation failures."""


class UnboundVariableError(EvalError):
    def __init__(self, name: str):
        super().__init__(f"unbound variable '{name}'")
        self.name = name


class DomainError(EvalError):
    """Argument outside a function's domain (log <= 0, sqrt < 0, x/0, ...)."""


class OrderOverflowError(ConcircleError):
    """A jet operation would need a derivative order above the configured cap."""


class DegenerateMetricError(ConcircleError):
    """det g vanished (or signature mismatch) at an evaluation point."""


class NullVelocityError(ConcircleError):
    """A norm of the velocity was requested where it is (numerically) null."""


class SingularSolveError(ConcircleError):
    """The 2x2 linear solve for the third-order acceleration degenerated."""

    def __init__(self, message: str, cond: float):
        super().__init__(f"{message} (condition number ~{cond:.3e})")
        self.cond = cond


class ConfigError(ConcircleError):
    """Scenario configuration rejected; carries the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
