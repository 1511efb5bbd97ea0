"""Exception types shared across the solver."""


class RobustImpulseError(Exception):
    """Base class for all solver errors."""


class SingularDiffusion(RobustImpulseError):
    """The sigma_22 diffusion block is (numerically) singular."""


class IllConditioned(RobustImpulseError):
    """Regression design matrix is rank deficient and no ridge is active."""


class DriverNonFinite(RobustImpulseError):
    """BSDE driver returned a NaN or infinity."""


class BarrierAboveTerminal(RobustImpulseError):
    """Reflecting barrier exceeds the terminal condition at the horizon."""

    def __init__(self, path_index, barrier_value, terminal_value):
        self.path_index = path_index
        self.barrier_value = barrier_value
        self.terminal_value = terminal_value
        super().__init__(
            f"barrier {barrier_value:.6g} > terminal {terminal_value:.6g} "
            f"on path {path_index}"
        )


class PolicyRange(RobustImpulseError):
    """A policy returned an action outside A or a mark outside U."""


class ProbabilityOutOfRange(RobustImpulseError):
    """Tree transition probability left (0, 1); refine the tree or shrink A."""


class OffTreeImpulse(RobustImpulseError):
    """Impulse target state lies outside the tree lattice."""


class ConfigInvalid(RobustImpulseError):
    """Run configuration failed validation.

    ``field`` holds a dotted path to the offending entry, e.g.
    ``monte_carlo.paths``.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
