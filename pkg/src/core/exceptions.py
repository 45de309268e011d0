from typing import Optional


class BoundaryLayerError(Exception):
    """Base class of every error raised by the lab."""


class ConfigError(BoundaryLayerError, ValueError):
    pass


class InvalidFieldError(BoundaryLayerError, ValueError):
    """Non-finite samples or mismatched grids."""


class SymmetryViolationError(BoundaryLayerError, ValueError):
    """Spectrum claimed to represent real data is not conjugate symmetric."""


class InsufficientDecayError(BoundaryLayerError):
    """Weighted values e^Psi f overflow: the field does not decay fast enough in y."""


class AnalyticityDeficitError(BoundaryLayerError):
    def __init__(self, message: str, mode: Optional[int] = None, xi: Optional[float] = None):
        super().__init__(message)
        self.mode = mode
        self.xi = xi


class SpectrumUnderresolvedError(BoundaryLayerError):
    pass


class CompatibilityError(BoundaryLayerError):
    """Wall conditions u = 0 or d_y theta = 0 at y = 0 are violated."""


class RunAbortedError(BoundaryLayerError):
    def __init__(self, message: str, t: float):
        super().__init__(message)
        self.t = t


class TemperatureFloorError(RunAbortedError):
    pass


class BlowUpError(RunAbortedError):
    pass
