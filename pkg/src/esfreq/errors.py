"""Exception types raised by esfreq."""


class NumericDomainError(ValueError):
    """A non-finite or degenerate numeric input reached a computation."""


class SimulationAbort(RuntimeError):
    """The integrator produced a non-finite state; the run cannot continue."""


class InvalidScenarioError(ValueError):
    """A scenario or model violates one of its invariants."""


class ConfigError(ValueError):
    """A configuration file could not be read, parsed or validated."""


class SweepError(RuntimeError):
    """One point of a parameter sweep failed; ``value`` names the point."""

    def __init__(self, value, cause):
        super().__init__(f"sweep point {value!r} failed: {cause}")
        self.value = value
        self.cause = cause
