"""
XDiff error hierarchy
Every failure the CLI can report maps onto one of these, with its exit code
"""
from typing import Optional


class XDiffError(Exception):
    """Base class for all xdiff failures"""

    exit_code = 2


class ConfigError(XDiffError):
    """Invalid configuration, parameters file or command usage"""

    exit_code = 1


class GridError(XDiffError):
    """Shape, axis or grid mismatch between fields"""

    exit_code = 1


class ImageFormatError(XDiffError):
    """Unsupported, truncated or colour image"""

    exit_code = 1


class NumericalError(XDiffError):
    """NaN or overflow during a rollout, loss or gradient evaluation"""

    def __init__(self, message: str, step: Optional[int] = None, iteration: Optional[int] = None):
        details = []
        if iteration is not None:
            details.append(f"iteration {iteration}")
        if step is not None:
            details.append(f"step {step}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)
        self.step = step
        self.iteration = iteration


class SolverError(XDiffError):
    """Semi-implicit linear solve missed the residual contract"""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


class InterpolationError(XDiffError):
    """RBF kernel system is numerically singular"""


class StabilityRefusal(XDiffError):
    """Parameters violate the semi-implicit stability constraints"""

    exit_code = 3

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report
