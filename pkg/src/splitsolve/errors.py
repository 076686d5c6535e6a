"""Exception and warning types shared across the solver."""


class SolverError(Exception):
    """Base class for all solver errors."""


class NonCoercive(SolverError):
    """Conjugation or radius search hit its bracket boundary: the declared
    coercivity data (K_H or the dual's growth) is inconsistent with the
    Hamiltonian actually supplied."""


class RadiusExhausted(SolverError):
    """The discrete minimizer stayed on the scan boundary even after the
    candidate radius was doubled once."""


class CflViolation(SolverError):
    """Explicit finite-difference step requested with sigma^2*dt/h^2 > 1
    or |b|*dt/h > 1."""


class StepMismatch(SolverError):
    """The horizon T is not an integer multiple of the time step."""


class OutOfRange(SolverError):
    """Evaluation requested outside the valid (t, x) range."""


class DegenerateFit(SolverError):
    """Log-log rate fit impossible: fewer than two rows with positive error."""


class ConfigError(SolverError):
    """Invalid or missing configuration value; message names section/key."""


class IoError(SolverError):
    """Filesystem failure while writing reports or layer exports."""


class ExprError(SolverError):
    """Base class for expression-language failures."""


class ParseError(ExprError):
    """Syntax error; carries the byte offset and the expected token set."""

    def __init__(self, message, offset, expected=()):
        super().__init__(f"{message} at offset {offset}"
                         + (f" (expected {', '.join(sorted(expected))})" if expected else ""))
        self.offset = offset
        self.expected = frozenset(expected)


class UnknownIdentifier(ExprError):
    def __init__(self, name, offset):
        super().__init__(f"unknown identifier {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class ArityMismatch(ExprError):
    def __init__(self, name, expected, got, offset):
        super().__init__(f"{name} takes {expected} argument(s), got {got} at offset {offset}")
        self.name = name
        self.offset = offset


class PolicyNonConvergence(UserWarning):
    """Howard policy iteration hit its iteration cap; the layer is kept."""
