"""Exception hierarchy shared by all modules."""


class FlickerError(Exception):
    """Base class for library errors."""


class InvalidStateError(FlickerError, ValueError):
    """A state or parameter value is non-finite or otherwise unusable."""


class NumericalError(FlickerError):
    """A numerical procedure failed (divergence, no root, exhausted retries)."""


class SimulationDiverged(NumericalError):
    def __init__(self, step, value=None, bound=None):
        self.step = step
        self.value = value
        msg = f"simulation diverged at step {step}"
        if bound is not None:
            msg += f" (|x| exceeded {bound:g})"
        super().__init__(msg)


class NoSaddleNodeError(NumericalError):
    pass


class SamplerExhausted(NumericalError):
    pass


class DataError(FlickerError, ValueError):
    """Input data is missing, malformed, or too short."""
