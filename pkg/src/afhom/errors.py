class AfhomError(Exception):
    """Base class for library errors."""


class ConfigError(AfhomError, ValueError):
    """Invalid operator, integrand, grid or experiment configuration."""


class ConstantRankViolation(AfhomError):
    """The symbol rank differs between two probed frequencies."""

    def __init__(self, first, second):
        self.witnesses = (first, second)
        (w1, r1), (w2, r2) = first, second
        super().__init__(f"rank {r1} at w={list(map(float, w1))} but rank {r2} at w={list(map(float, w2))}")


class ExtrapolationError(AfhomError, ValueError):
    """A tabulated integrand was evaluated outside its table."""


class Unsupported(AfhomError, NotImplementedError):
    """Requested variant is not implemented (e.g. negative norm for p != 2)."""


class SolverDiverged(AfhomError, RuntimeError):
    """Objective became non-finite during descent."""

    def __init__(self, msg, last_iterate=None):
        super().__init__(msg)
        self.last_iterate = last_iterate


class Infeasible(AfhomError, RuntimeError):
    """Constraint set could not be reached to tolerance."""

    def __init__(self, msg, residual_history=()):
        super().__init__(msg)
        self.residual_history = list(residual_history)
