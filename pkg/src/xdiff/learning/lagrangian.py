"""
PHR augmented Lagrangian for the semi-implicit stability constraints

Constraints on the RBF coefficients, stacked as [c1; c2; c3; c4] (length 4P):

    c1 = delta1 - (delta2 + delta3)/2      c2 = delta1 + (delta2 + delta3)/2
    c3 = delta4 - (delta2 + delta3)/2      c4 = delta4 + (delta2 + delta3)/2

Penalty: rho/2 * sum max(0, mu/rho - c)^2. Multipliers are clamped to
[0, mu_bar]; rho shrinks by gamma when infeasibility drops by the factor tau
and grows by gamma otherwise.
"""
import math
from dataclasses import dataclass, field, replace
from typing import Tuple

import numpy as np

from ..errors import ConfigError
from .autodiff import GradientVector, ParameterVector

# Augmented Lagrangian defaults used in the reference experiments
DEFAULT_MU_BAR = 2.0
DEFAULT_RHO = 6e5
DEFAULT_TAU = 0.5
DEFAULT_GAMMA = 2.0


@dataclass
class LagrangianState:
    """Multipliers, penalty and the previous infeasibility measure

    infeasibility_prev starts at infinity, so the first penalty update always
    counts as progress and divides rho by gamma.
    """
    mu: np.ndarray
    mu_bar: float = DEFAULT_MU_BAR
    rho: float = DEFAULT_RHO
    tau: float = DEFAULT_TAU
    gamma: float = DEFAULT_GAMMA
    infeasibility_prev: float = field(default=math.inf)

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        if not self.mu_bar > 0:
            raise ConfigError(f"mu_bar must be positive, got {self.mu_bar}")
        if not self.rho > 0:
            raise ConfigError(f"rho must be positive, got {self.rho}")
        if not 0 < self.tau <= 1:
            raise ConfigError(f"tau must lie in (0, 1], got {self.tau}")
        if not self.gamma > 1:
            raise ConfigError(f"gamma must exceed 1, got {self.gamma}")
        if np.any(self.mu < 0) or np.any(self.mu > self.mu_bar):
            raise ConfigError("multipliers must lie in [0, mu_bar]")

    @classmethod
    def initial(cls, p: int, **kwargs) -> "LagrangianState":
        return cls(mu=np.zeros(4 * p), **kwargs)


def constraints(theta: ParameterVector) -> np.ndarray:
    d1, d2, d3, d4 = theta.deltas()
    half_sum = 0.5 * (d2 + d3)
    return np.concatenate([d1 - half_sum, d1 + half_sum, d4 - half_sum, d4 + half_sum])


def _shifted_violation(theta: ParameterVector, lag: LagrangianState) -> np.ndarray:
    """max(0, mu/rho - c), componentwise"""
    return np.maximum(0.0, lag.mu / lag.rho - constraints(theta))


def augmented_lagrangian(loss: float, theta: ParameterVector, lag: LagrangianState) -> Tuple[float, GradientVector]:
    """Loss plus PHR penalty, and the gradient of the penalty w.r.t. Theta"""
    violation = _shifted_violation(theta, lag)
    value = loss + 0.5 * lag.rho * float(np.sum(violation * violation))
    # d penalty / d c = -rho * violation
    s1, s2, s3, s4 = np.split(lag.rho * violation, 4)
    grad_d1 = -(s1 + s2)
    grad_d4 = -(s3 + s4)
    grad_d23 = 0.5 * (s1 - s2 + s3 - s4)
    penalty_grad = GradientVector(0.0, np.concatenate([grad_d1, grad_d4]), np.concatenate([grad_d23, grad_d23]))
    return value, penalty_grad


def update_multipliers(lag: LagrangianState, theta: ParameterVector) -> LagrangianState:
    """mu <- min(max(0, mu - rho c), mu_bar)"""
    mu = np.clip(lag.mu - lag.rho * constraints(theta), 0.0, lag.mu_bar)
    return replace(lag, mu=mu)


def infeasibility(lag: LagrangianState, theta: ParameterVector) -> float:
    """Infinity norm of the negative part of min(c, mu/rho)"""
    shifted = np.minimum(constraints(theta), lag.mu / lag.rho)
    return float(max(0.0, -np.min(shifted)))


def update_penalty(lag: LagrangianState, infeas_now: float) -> LagrangianState:
    """Divide rho by gamma when infeasibility fell below tau times the previous
    value, multiply it otherwise. With no previous value (infinity) the first
    call always divides, even for an infinite infeasibility.
    """
    if infeas_now <= lag.tau * lag.infeasibility_prev:
        rho = lag.rho / lag.gamma
    else:
        rho = lag.rho * lag.gamma
    return replace(lag, rho=rho, infeasibility_prev=float(infeas_now))
