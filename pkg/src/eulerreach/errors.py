"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class CouplingError(ValueError):
    """A discretization violates the rho = 2*L*P*h^2 coupling required here."""


class ResourceCapError(RuntimeError):
    """A lattice set (or the points needed to build it) exceeded the cap."""

    def __init__(self, step: int, projected: float, cap: int):
        self.step = step
        self.projected = projected
        self.cap = cap
        super().__init__(
            f"step {step}: projected {projected:.3e} lattice points exceeds "
            f"cap {cap:.3e}"
        )


class InvariantViolation(RuntimeError):
    """An internal runtime invariant failed."""
