"""
Stability conditions for the cross-diffusion steppers

- semi-implicit: d1 >= |d2 + d3|/2 and d4 >= |d2 + d3|/2 on the edge-detector range,
  enforced through the coefficient constraints c_{l,i} >= 0
- explicit: row-dominance (Gershgorin) sufficient condition per axis
- reaction weight: 0 < zeta < 1 - 2 dt lambda - 2 dt eps
- a-priori growth bounds on ||W^m||_h for both schemes
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Union

import numpy as np

from .field import Grid, norm_h
from .influence import InfluenceSet
from .scheme import StepTrace

DENSE_SAMPLES = 4001
DEFAULT_EPS = 0.01
DEFAULT_ZETA = 0.5


class StabilityCondition(Enum):
    """Which inequality a report checks"""
    SEMI_IMPLICIT_PD = "SemiImplicitPD"
    EXPLICIT_GERSHGORIN = "ExplicitGershgorin"
    LAMBDA_BOUND = "LambdaBound"


@dataclass
class StabilityReport:
    """Outcome of one stability check; satisfied iff margin >= 0"""
    condition: StabilityCondition
    margin: float
    worst_point: Union[float, int, None] = None
    details: Dict[str, float] = field(default_factory=dict)

    @property
    def satisfied(self) -> bool:
        return self.margin >= 0

    def to_lines(self) -> list:
        """key=value lines, prefixed with the condition name"""
        prefix = self.condition.value
        lines = [
            f"{prefix}.satisfied={str(self.satisfied).lower()}",
            f"{prefix}.margin={self.margin!r}",
        ]
        if self.worst_point is not None:
            lines.append(f"{prefix}.worst_point={self.worst_point!r}")
        for key, value in self.details.items():
            lines.append(f"{prefix}.{key}={value!r}")
        return lines


def constraint_values(iset: InfluenceSet) -> np.ndarray:
    """c_{1..4,i}: delta1 -/+ s/2, delta4 -/+ s/2 with s = delta2 + delta3; shape (4, P)"""
    d1, d2, d3, d4 = iset.deltas
    half_sum = 0.5 * (d2 + d3)
    return np.stack([d1 - half_sum, d1 + half_sum, d4 - half_sum, d4 + half_sum])


def check_semi_implicit(iset: InfluenceSet, samples: int = DENSE_SAMPLES) -> StabilityReport:
    """Dense-sample margin of d1, d4 >= |d2 + d3|/2 plus the coefficient constraints"""
    x = iset.basis.sample(samples)
    d1, d2, d3, d4 = iset.evaluate_all(x)
    half_abs = 0.5 * np.abs(d2 + d3)
    slack = np.minimum(d1 - half_abs, d4 - half_abs)
    worst = int(np.argmin(slack))
    coefficient_min = float(np.min(constraint_values(iset)))
    return StabilityReport(
        condition=StabilityCondition.SEMI_IMPLICIT_PD,
        margin=float(slack[worst]),
        worst_point=float(x[worst]),
        details={"coefficient_min": coefficient_min},
    )


def check_explicit_gershgorin(iset: InfluenceSet, dt: float, grid: Grid, eps: float = DEFAULT_EPS,
                              samples: int = DENSE_SAMPLES) -> StabilityReport:
    """Row-dominance sufficient condition for the explicit scheme, per axis"""
    x = iset.basis.sample(samples)
    d1, d2, d3, d4 = iset.evaluate_all(x)
    slack = np.full(x.shape, np.inf)
    for h in (grid.h1, grid.h2):
        r = 4.0 * dt / h ** 2
        off_diagonal = np.abs(0.5 * (d2 + d3) - r * ((1 + eps) * d1 * d2 + d3 * d4))
        first = d1 - r * ((1 + eps) * d1 ** 2 + d3 ** 2) - off_diagonal
        second = d4 - r * ((1 + eps) * d2 ** 2 + d4 ** 2) - off_diagonal
        slack = np.minimum(slack, np.minimum(first, second))
    worst = int(np.argmin(slack))
    return StabilityReport(
        condition=StabilityCondition.EXPLICIT_GERSHGORIN,
        margin=float(slack[worst]),
        worst_point=float(x[worst]),
        details={"dt": float(dt), "eps": float(eps)},
    )


def check_lambda_bound(lam: float, dt: float, eps: float = DEFAULT_EPS, zeta: float = DEFAULT_ZETA) -> StabilityReport:
    """zeta < 1 - 2 dt lambda - 2 dt eps"""
    bound = 1.0 - 2.0 * dt * lam - 2.0 * dt * eps
    return StabilityReport(
        condition=StabilityCondition.LAMBDA_BOUND,
        margin=float(bound - zeta),
        details={"lambda": float(lam), "dt": float(dt), "eps": float(eps), "zeta": float(zeta)},
    )


def growth_factor(t: float, dt: float, lambda_max: float, eps: float, zeta: float, theta: int = 1) -> float:
    """Upper bound of ||W(t)||_h^2 / ||W^0||_h^2"""
    if theta == 1:
        rate = 1.0 + 2.0 * (lambda_max + eps) / zeta
        source = lambda_max ** 2 / (2.0 * eps * zeta)
    else:
        rate = 2.0 * (lambda_max + eps + dt * (1.0 + 1.0 / eps) * lambda_max ** 2)
        source = 2.0 * (lambda_max ** 2 / (4.0 * eps) + dt * (1.0 + 1.0 / eps) * lambda_max ** 2)
    if rate * t > 700.0:
        return math.inf
    return math.exp(rate * t) * (1.0 + t * source)


def growth_bound(trace: StepTrace, lambda_max: Optional[float] = None, eps: float = DEFAULT_EPS,
                 zeta: float = DEFAULT_ZETA) -> bool:
    """True iff every recorded state respects the a-priori growth bound of its scheme"""
    cfg = trace.config
    lam = cfg.lam if lambda_max is None else lambda_max
    initial = norm_h(trace.states[0]) ** 2
    for m, state in enumerate(trace.states):
        bound = growth_factor(m * cfg.dt, cfg.dt, lam, eps, zeta, cfg.theta) * initial
        if norm_h(state) ** 2 > bound * (1.0 + 1e-12) + 1e-300:
            return False
    return True
