"""Exception types raised across the package."""


class D2ocError(Exception):
    """Base class for all package errors."""


class ConfigError(D2ocError):
    """Invalid or inconsistent scenario configuration."""


class AllMassLost(D2ocError):
    """Every sample weight is non-positive; the measure cannot be normalized."""


class SizeCapExceeded(D2ocError):
    """Transport problem larger than the solver's entry cap."""


class DegenerateField(D2ocError):
    """The discretized ground-truth field carries no mass."""


class EmptySelection(D2ocError):
    """No positive transport coefficient to build a centroid from."""


class SingularSystem(D2ocError):
    """The control normal matrix could not be inverted."""


class InsufficientMass(D2ocError):
    """Sample weights do not cover the per-step mass budget."""


class DimensionMismatch(D2ocError):
    """Array shapes do not chain through a network."""


class SimulationError(D2ocError):
    """Failure inside the step loop, annotated with step and agent."""

    def __init__(self, message, step=None, agent=None):
        self.step = step
        self.agent = agent
        where = []
        if step is not None:
            where.append(f"step {step}")
        if agent is not None:
            where.append(f"agent {agent}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
