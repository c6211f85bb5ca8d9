"""
Adam optimizer state over the flat parameter vector
"""
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


@dataclass
class AdamState:
    """First/second moment estimates and step counter"""
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.m.shape != self.v.shape:
            raise ConfigError("Adam moments must have matching shapes")
        if self.alpha < 0 or not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1) or self.eps_adam <= 0:
            raise ConfigError("Adam needs alpha >= 0, betas in [0, 1) and eps > 0")

    @classmethod
    def initial(cls, size: int, **kwargs) -> "AdamState":
        return cls(m=np.zeros(size), v=np.zeros(size), **kwargs)

    def step(self, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
        """Advance the moments with `grads` and return the updated parameters"""
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t

        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grads
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * (grads * grads)

        denom = np.sqrt(self.v / bc2) + self.eps_adam
        return params - (self.alpha / bc1) * self.m / denom
