"""
Gaussian RBF influence functions d1..d4

    d_l(v) = sum_i delta[l, i] * exp(-(v - mu_i)^2 / (4 nu^2))

The functions depend on the edge-detector component v only and are
evaluated as-is outside the center range (no clamping).
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ..errors import ConfigError, InterpolationError

# Step of the centered difference used for d_l'
DERIVATIVE_STEP = 1e-4

# Reference basis: A = [-20, 20], P = 151, nu = 0.2
DEFAULT_A_MIN = -20.0
DEFAULT_A_MAX = 20.0
DEFAULT_P = 151
DEFAULT_NU = 0.2

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class RbfBasis:
    """P equidistant Gaussian centers over [a_min, a_max] with scale nu"""
    p: int = DEFAULT_P
    a_min: float = DEFAULT_A_MIN
    a_max: float = DEFAULT_A_MAX
    nu: float = DEFAULT_NU

    def __post_init__(self):
        if self.p < 2:
            raise ConfigError(f"RBF basis needs at least 2 centers, got p={self.p}")
        if not self.a_max > self.a_min:
            raise ConfigError(f"RBF range must satisfy a_min < a_max, got [{self.a_min}, {self.a_max}]")
        if not self.nu > 0:
            raise ConfigError(f"RBF scale nu must be positive, got {self.nu}")

    @cached_property
    def centers(self) -> np.ndarray:
        centers = np.linspace(self.a_min, self.a_max, self.p)
        centers.setflags(write=False)
        return centers

    def matrix(self, v: ArrayLike) -> np.ndarray:
        """Phi with entry (j, i) = phi(|v_j - mu_i| / (2 nu)); shape (len(v), P)"""
        v = np.atleast_1d(np.asarray(v, dtype=float)).ravel()
        z = (v[:, None] - self.centers[None, :]) / (2.0 * self.nu)
        return np.exp(-z * z)

    def sample(self, count: int = 4001) -> np.ndarray:
        """Equally spaced points over [a_min, a_max]"""
        return np.linspace(self.a_min, self.a_max, count)


def eval_basis_matrix(basis: RbfBasis, v: ArrayLike) -> np.ndarray:
    return basis.matrix(v)


@dataclass(frozen=True)
class InfluenceSet:
    """The four influence functions sharing one basis; deltas has shape (4, P)"""
    basis: RbfBasis
    deltas: np.ndarray = field(repr=False)

    def __post_init__(self):
        deltas = np.array(self.deltas, dtype=float)
        if deltas.shape != (4, self.basis.p):
            raise ConfigError(f"influence coefficients need shape (4, {self.basis.p}), got {deltas.shape}")
        if not np.all(np.isfinite(deltas)):
            raise ConfigError("influence coefficients must be finite")
        deltas.setflags(write=False)
        object.__setattr__(self, "deltas", deltas)

    @classmethod
    def zeros(cls, basis: RbfBasis) -> "InfluenceSet":
        return cls(basis, np.zeros((4, basis.p)))

    def evaluate(self, ell: int, v: ArrayLike) -> ArrayLike:
        """d_ell(v) for ell in 1..4; scalar in, scalar out"""
        row = self.deltas[_row(ell)]
        values = self.basis.matrix(v) @ row
        return float(values[0]) if np.ndim(v) == 0 else values.reshape(np.shape(v))

    def evaluate_all(self, v: np.ndarray) -> np.ndarray:
        """All four functions at the entries of v; shape (4,) + v.shape"""
        v = np.asarray(v, dtype=float)
        values = self.basis.matrix(v) @ self.deltas.T
        return values.T.reshape((4,) + v.shape)

    def derivative(self, ell: int, v: ArrayLike, step: float = DERIVATIVE_STEP) -> ArrayLike:
        """Centered difference of d_ell with step h_d"""
        v_arr = np.asarray(v, dtype=float)
        slope = (self.evaluate(ell, v_arr + step) - self.evaluate(ell, v_arr - step)) / (2.0 * step)
        return float(slope) if np.ndim(v) == 0 else slope

    def derivative_all(self, v: np.ndarray, step: float = DERIVATIVE_STEP) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return (self.evaluate_all(v + step) - self.evaluate_all(v - step)) / (2.0 * step)


def _row(ell: int) -> int:
    if ell not in (1, 2, 3, 4):
        raise ConfigError(f"influence function index must be 1..4, got {ell}")
    return ell - 1


def ncdf_profile(x: ArrayLike) -> ArrayLike:
    """g(x) = 1 / (1 + x^2)"""
    return 1.0 / (1.0 + np.asarray(x, dtype=float) ** 2)


# Complex-diffusion targets as multiples of g: d1, d2, d3, d4
NCDF_WEIGHTS = (0.99, -0.1, 0.1, 0.99)


def ncdf_targets(x: ArrayLike) -> np.ndarray:
    g = ncdf_profile(x)
    return np.stack([w * g for w in NCDF_WEIGHTS])


def init_ncdf(basis: RbfBasis) -> InfluenceSet:
    """Interpolate the complex-diffusion influence functions exactly at the centers"""
    kernel = basis.matrix(basis.centers)
    targets = ncdf_targets(basis.centers)
    try:
        factor = cho_factor(kernel)
        deltas = cho_solve(factor, targets.T).T
    except LinAlgError as e:
        raise InterpolationError(
            f"RBF kernel system is singular (nu={basis.nu} too large for center spacing): {e}"
        ) from e
    residual = np.max(np.abs(kernel @ deltas.T - targets.T))
    if not np.isfinite(residual) or residual > 1e-8:
        raise InterpolationError(
            f"RBF interpolation residual {residual:.3e} exceeds 1e-8 (nu={basis.nu}, p={basis.p})"
        )
    return InfluenceSet(basis, deltas)
