"""Exception types shared across the package."""


class MesomemError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(MesomemError, ValueError):
    """Model parameters outside their admissible domain."""


class GridMismatchError(MesomemError, ValueError):
    """Two grid quantities defined on different grids."""


class CurveError(MesomemError, ValueError):
    """Degenerate or inconsistent curve input."""


class TransversalityError(MesomemError, ValueError):
    """The director field fails nu . theta > 0 at some node."""

    def __init__(self, node: int, value: float):
        self.node = node
        self.value = value
        super().__init__(f"nu.theta = {value:.6g} <= 0 at node {node}")


class RayOverrunError(MesomemError, ValueError):
    """Stacked mass exceeds the focal capacity of a ray (negative discriminant)."""


class ImmersionError(MesomemError, ValueError):
    """A perturbed curve loses immersion (|gamma'| reaches zero)."""


class RecoveryError(MesomemError, RuntimeError):
    """Constructive recovery step failed (bump construction, Newton solve, ...)."""


class NumericalError(MesomemError, RuntimeError):
    """Non-finite values encountered during an iterative computation."""
