"""Exception hierarchy shared by both engines, the optimizer and the runner."""


class TwinSolverError(Exception):
    """Base class for every error raised by this package."""


class DomainError(TwinSolverError, ValueError):
    """An argument lies outside the domain of a physical formula."""


class GeometryError(TwinSolverError, ValueError):
    """Wire geometry is invalid (overlapping wires, coincident cells, ...)."""


class SingularLengthError(DomainError):
    """Dipole length is a multiple of the wavelength: the feed current vanishes."""


class StructuralError(TwinSolverError, ValueError):
    """Matrix blocks or port maps have inconsistent dimensions."""


class ConditioningError(TwinSolverError, ArithmeticError):
    """A linear system is singular or too ill-conditioned to solve.

    Attributes
    ----------
    condition : float
        Estimated 1-norm condition number (``inf`` for an exactly singular
        matrix).
    """

    def __init__(self, message, condition=float("inf")):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class SingularUpdateError(TwinSolverError, ArithmeticError):
    """A rank-one update would make the updated matrix singular."""


class ConfigError(TwinSolverError, ValueError):
    """Configuration file or CLI arguments could not be interpreted.

    ``key`` and ``line`` locate the offending entry when known.
    """

    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        text = f"{message} ({', '.join(where)})" if where else message
        super().__init__(text)
        self.key = key
        self.line = line
