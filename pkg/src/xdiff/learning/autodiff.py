"""
Reverse-mode gradient of the rollout loss through the explicit scheme

One explicit step in vector form reads

    w' = w + dt * sum_k [K_l D_L K_rL + K_l D_R K_rR] w - dt lambda P_u (w - (u0, 0))

with face coefficients g = avg @ d(v) / 2. The adjoint of a row vector a
through this map is applied matrix-free with the sparse axis operators of
`scheme`; the Jacobian is never materialized.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..errors import ConfigError, GridError, NumericalError
from ..numerics.field import ScalarField, VectorField
from ..numerics.influence import InfluenceSet, RbfBasis
from ..numerics.scheme import SchemeConfig, StepTrace, axis_operators


@dataclass
class ParameterVector:
    """Theta = (lambda, [delta1; delta4], [delta2; delta3])"""
    lam: float
    lam14: np.ndarray
    lam23: np.ndarray

    def __post_init__(self):
        self.lam = float(self.lam)
        self.lam14 = np.asarray(self.lam14, dtype=float)
        self.lam23 = np.asarray(self.lam23, dtype=float)
        if self.lam14.shape != self.lam23.shape or self.lam14.ndim != 1 or self.lam14.size % 2:
            raise ConfigError(
                f"coefficient blocks must both have length 2P, got {self.lam14.shape} and {self.lam23.shape}"
            )

    @property
    def p(self) -> int:
        return self.lam14.size // 2

    def to_array(self) -> np.ndarray:
        return np.concatenate([[self.lam], self.lam14, self.lam23])

    @classmethod
    def from_array(cls, theta: np.ndarray):
        theta = np.asarray(theta, dtype=float)
        if theta.size % 4 != 1:
            raise ConfigError(f"parameter vector needs 4P+1 entries, got {theta.size}")
        p = (theta.size - 1) // 4
        return cls(theta[0], theta[1:2 * p + 1].copy(), theta[2 * p + 1:].copy())

    @classmethod
    def from_influence(cls, iset: InfluenceSet, lam: float):
        d1, d2, d3, d4 = iset.deltas
        return cls(lam, np.concatenate([d1, d4]), np.concatenate([d2, d3]))

    @classmethod
    def zeros(cls, p: int):
        return cls(0.0, np.zeros(2 * p), np.zeros(2 * p))

    def deltas(self) -> np.ndarray:
        """Coefficient rows ordered d1, d2, d3, d4"""
        p = self.p
        return np.stack([self.lam14[:p], self.lam23[:p], self.lam23[p:], self.lam14[p:]])

    def to_influence(self, basis: RbfBasis) -> InfluenceSet:
        return InfluenceSet(basis, self.deltas())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.to_array())))

    def __add__(self, other):
        return type(self).from_array(self.to_array() + other.to_array())


class GradientVector(ParameterVector):
    """Derivative of a scalar w.r.t. Theta, same layout as ParameterVector"""


def _check_pair(u_final: ScalarField, u_clean: ScalarField):
    if u_final.grid != u_clean.grid:
        raise GridError("rollout output and clean image live on different grids")


def loss(u_final: ScalarField, u_clean: ScalarField) -> float:
    """1/2 * sum_j (u_final - u_clean)^2, unweighted"""
    _check_pair(u_final, u_clean)
    residual = u_final.values - u_clean.values
    return 0.5 * float(np.sum(residual * residual))


def loss_output_adjoint(u_final: ScalarField, u_clean: ScalarField) -> np.ndarray:
    """dl/dw^M = [(u^M - u_clean)^T, 0]"""
    _check_pair(u_final, u_clean)
    return np.concatenate([u_final.flat - u_clean.flat, np.zeros(u_final.grid.size)])


class _StepLinearization:
    """One explicit step linearized at w^m, shared by the state and parameter adjoints"""

    def __init__(self, w: VectorField, iset: InfluenceSet):
        self.grid = w.grid
        self.u = w.u.flat
        self.v = w.v.flat
        self.iset = iset
        self.phi = iset.basis.matrix(self.v)
        self.nodal = (self.phi @ iset.deltas.T).T
        self.ops = axis_operators(self.grid)

    def contract(self, adjoint: np.ndarray):
        """Contract the adjoint with the diffusion term.

        Returns the frozen-coefficient state gradient (u, v) and the
        sensitivities w.r.t. the node values d1..d4 (before the 1/2 of the
        face average), each summed over both axes.
        """
        n = self.grid.size
        a_u, a_v = adjoint[:n], adjoint[n:]
        grad_u = np.zeros(n)
        grad_v = np.zeros(n)
        node_sens = np.zeros((4, n))
        for ops in self.ops.values():
            d1, d2, d3, d4 = 0.5 * (ops.avg @ self.nodal.T).T
            du = ops.diff @ self.u
            dv = ops.diff @ self.v
            b_u = ops.div.T @ a_u
            b_v = ops.div.T @ a_v
            grad_u += ops.diff.T @ (d1 * b_u + d3 * b_v)
            grad_v += ops.diff.T @ (d2 * b_u + d4 * b_v)
            node_sens[0] += ops.avg.T @ (du * b_u)
            node_sens[1] += ops.avg.T @ (dv * b_u)
            node_sens[2] += ops.avg.T @ (du * b_v)
            node_sens[3] += ops.avg.T @ (dv * b_v)
        return grad_u, grad_v, node_sens

    def state_adjoint(self, adjoint: np.ndarray, contracted, cfg: SchemeConfig) -> np.ndarray:
        n = self.grid.size
        grad_u, grad_v, node_sens = contracted
        slopes = self.iset.derivative_all(self.v)
        grad_v = grad_v + 0.5 * np.sum(slopes * node_sens, axis=0)
        result = adjoint + cfg.dt * np.concatenate([grad_u, grad_v])
        result[:n] -= cfg.dt * cfg.lam * adjoint[:n]
        return result

    def param_adjoint(self, adjoint: np.ndarray, contracted, u0: ScalarField, cfg: SchemeConfig) -> "GradientVector":
        n = self.grid.size
        _, _, node_sens = contracted
        lam_grad = -cfg.dt * float(adjoint[:n] @ (self.u - u0.flat))
        delta_grad = 0.5 * cfg.dt * (node_sens @ self.phi)
        return GradientVector(
            lam_grad,
            np.concatenate([delta_grad[0], delta_grad[3]]),
            np.concatenate([delta_grad[1], delta_grad[2]]),
        )


def _require_explicit(cfg: SchemeConfig):
    if cfg.theta != 0:
        raise ConfigError("gradients are defined for the explicit scheme only (theta=0)")


def step_jacobian_apply(adjoint: np.ndarray, w_m: VectorField, iset: InfluenceSet, cfg: SchemeConfig) -> np.ndarray:
    """adjoint @ (dw^{m+1}/dw^m) for the explicit step, reaction block included"""
    _require_explicit(cfg)
    adjoint = np.asarray(adjoint, dtype=float)
    lin = _StepLinearization(w_m, iset)
    return lin.state_adjoint(adjoint, lin.contract(adjoint), cfg)


def step_param_partial(adjoint: np.ndarray, w_prev: VectorField, u0: ScalarField, iset: InfluenceSet,
                       cfg: SchemeConfig) -> GradientVector:
    """adjoint @ (direct partial of one explicit step output w.r.t. Theta)"""
    _require_explicit(cfg)
    adjoint = np.asarray(adjoint, dtype=float)
    lin = _StepLinearization(w_prev, iset)
    return lin.param_adjoint(adjoint, lin.contract(adjoint), u0, cfg)


def backprop(trace: StepTrace, u_clean: ScalarField, iset: InfluenceSet) -> Tuple[float, GradientVector]:
    """Loss of the final U against u_clean and its gradient w.r.t. Theta"""
    cfg = trace.config
    _require_explicit(cfg)
    if len(trace.states) != cfg.steps + 1:
        raise ConfigError(f"trace holds {len(trace.states)} states, expected {cfg.steps + 1} (record=True)")
    u0 = trace.u0
    value = loss(trace.final.u, u_clean)
    adjoint = loss_output_adjoint(trace.final.u, u_clean)
    grad = GradientVector.zeros(iset.basis.p)
    for m in range(cfg.steps - 1, -1, -1):
        lin = _StepLinearization(trace.states[m], iset)
        contracted = lin.contract(adjoint)
        grad = grad + lin.param_adjoint(adjoint, contracted, u0, cfg)
        if m > 0:
            adjoint = lin.state_adjoint(adjoint, contracted, cfg)
    if not (np.isfinite(value) and grad.is_finite()):
        raise NumericalError("non-finite loss or gradient in backprop")
    return value, grad
