"""Exception hierarchy shared by all modules."""


class JacobiFlowError(Exception):
    """Base class for every error raised by the package."""


class DomainError(JacobiFlowError, ValueError):
    """A mathematical precondition on the input data is violated."""


class ConstraintError(DomainError):
    """A named parameter constraint is violated.

    Parameters
    ----------
    constraint : str
        Human readable name of the violated constraint, e.g. ``"k3 > 0"``.
    message : str, optional
        Extra detail.
    """

    def __init__(self, constraint, message=""):
        self.constraint = constraint
        text = f"constraint violated: {constraint}"
        if message:
            text += f" ({message})"
        super().__init__(text)


class SingularConfigurationError(DomainError):
    """Drift requested at a tie or at a wall, where it is undefined."""


class CollisionError(JacobiFlowError, RuntimeError):
    """Step size underflow of the interior integrator.

    Attributes
    ----------
    pair : tuple of int
        Indices of the closest approaching neighbours.
    time : float
        Raw time at which the integrator gave up.
    """

    def __init__(self, pair, time, gap):
        self.pair = tuple(int(i) for i in pair)
        self.time = float(time)
        self.gap = float(gap)
        super().__init__(
            f"step size underflow at t={self.time:.6g}: particles {self.pair} "
            f"are {self.gap:.3g} apart"
        )


class SingularStartError(JacobiFlowError, RuntimeError):
    """Boundary start did not reach the interior during the bootstrap."""


class NotInImageError(DomainError):
    """ESP vector whose polynomial has non-real roots."""


class GrowthGuardError(JacobiFlowError, OverflowError):
    """Noncompact trajectory exceeded the growth guard."""


class ConfigError(JacobiFlowError, ValueError):
    """Malformed or unknown configuration content."""
