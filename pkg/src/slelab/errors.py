"""Error types shared across the package.

Invalid arguments raise plain ValueError; everything that can fail for a
numerical or structural reason gets its own class so callers (and the CLI)
can map failures to exit codes and diagnostics.
"""


class SlelabError(Exception):
    """Base class for non-ValueError failures."""


class IllPosedSystemError(SlelabError):
    """Harmonic solve requested with no boundary data."""


class SolverFailureError(SlelabError):
    """Numerical breakdown inside an iterative or map-composition solve."""

    def __init__(self, message, step=None, diagnostics=None):
        super().__init__(message)
        self.step = step
        self.diagnostics = diagnostics or {}


class InvalidCurveError(SlelabError):
    """Curve violates the closed upper half-plane contract."""


class DegenerateSegmentError(SlelabError):
    """Curve segment mapped to zero length during unzipping."""


class CapacityExceededError(SlelabError):
    """Exact transform requested for more bits than the 2^n budget allows."""


class CalibrationError(SlelabError):
    """Root bracketing / statistical matching failed in a calibration loop."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InversionError(SlelabError):
    """Regularized spectral inversion was too ill-conditioned to trust."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
