"""
Cross-diffusion-with-reaction time steppers

    (U' - U)/dt = sum_k delta_k(d1 delta_k U* + d2 delta_k V*) - lambda (U* - U0)
    (V' - V)/dt = sum_k delta_k(d3 delta_k U* + d4 delta_k V*)

with * = m (explicit, theta=0) or m+1 (semi-implicit, theta=1). The
coefficients are always frozen at W^m and averaged onto the faces.

Two equivalent evaluation paths exist: the stencil path (numpy slicing on
(n1, n2) arrays) and the matrix path (scipy.sparse operators acting on the
concatenated vector w = (u, v)). The stencil path is the reference.
"""
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Dict, List, Tuple, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import ConfigError, NumericalError, SolverError
from ..log import get_logger
from .field import AXES, Grid, HalfPointField, ScalarField, VectorField, average_faces, diff_faces, div_nodes
from .influence import InfluenceSet

logger = get_logger(__name__)

# Relative residual every accepted semi-implicit step must reach
RESIDUAL_TOLERANCE = 1e-10
# Grids above this node count use the Krylov path
DIRECT_SOLVE_MAX_NODES = 256 * 256


@dataclass(frozen=True)
class SchemeConfig:
    """Time step, step count, scheme type and reaction weight"""
    dt: float
    steps: int
    grid: Grid
    theta: int = 1
    lam: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.steps < 0:
            raise ConfigError(f"steps must be non-negative, got {self.steps}")
        if self.theta not in (0, 1):
            raise ConfigError(f"theta must be 0 or 1, got {self.theta}")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ConfigError(f"lambda must be finite and non-negative, got {self.lam}")

    @property
    def stopping_time(self) -> float:
        return self.dt * self.steps


@dataclass(frozen=True)
class StepTrace:
    """All states w^0 .. w^M of one rollout"""
    states: Tuple[VectorField, ...]
    config: SchemeConfig

    @property
    def final(self) -> VectorField:
        return self.states[-1]

    @property
    def u0(self) -> ScalarField:
        return self.states[0].u


def initial_state(u0: ScalarField) -> VectorField:
    """W^0 = (u^0, 0)"""
    return VectorField(u0, ScalarField.constant(u0.grid, 0.0))


# Coefficients

def face_coefficients(iset: InfluenceSet, v: np.ndarray) -> Dict[int, np.ndarray]:
    """Per axis, an array (4, faces...) of half-point averaged d1..d4"""
    nodal = iset.evaluate_all(v)
    return {axis: average_faces(nodal, axis + 1) for axis in AXES}


def half_point_coefficients(iset: InfluenceSet, w: VectorField, axis: int) -> Tuple[HalfPointField, ...]:
    """d_l at faces j + e_k/2 as the mean of the two node evaluations on v"""
    faces = face_coefficients(iset, w.v.values)[axis]
    return tuple(HalfPointField(w.grid, axis, faces[ell]) for ell in range(4))


# Stencil path

def apply_diffusion(faces: Dict[int, np.ndarray], u: np.ndarray, v: np.ndarray, grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    """Cross-diffusion term with frozen face coefficients applied to (u, v)"""
    div_u = np.zeros(grid.shape)
    div_v = np.zeros(grid.shape)
    for axis in AXES:
        h = grid.spacing(axis)
        d1, d2, d3, d4 = faces[axis]
        du = diff_faces(u, axis, h)
        dv = diff_faces(v, axis, h)
        div_u += div_nodes(d1 * du + d2 * dv, axis, h)
        div_v += div_nodes(d3 * du + d4 * dv, axis, h)
    return div_u, div_v


def diffusion_term(iset: InfluenceSet, w: VectorField) -> Tuple[np.ndarray, np.ndarray]:
    faces = face_coefficients(iset, w.v.values)
    return apply_diffusion(faces, w.u.values, w.v.values, w.grid)


def explicit_step(w: VectorField, u0: ScalarField, iset: InfluenceSet, cfg: SchemeConfig) -> VectorField:
    """One theta=0 step with coefficients frozen at w"""
    if cfg.theta != 0:
        raise ConfigError("explicit_step needs theta=0")
    div_u, div_v = diffusion_term(iset, w)
    u_next = w.u.values + cfg.dt * (div_u - cfg.lam * (w.u.values - u0.values))
    v_next = w.v.values + cfg.dt * div_v
    return _checked_state(w.grid, u_next, v_next)


# Matrix path

@dataclass(frozen=True)
class AxisOperators:
    """Sparse operators of one axis acting on flattened node vectors.

    diff: nodes -> faces, (f[j+e_k] - f[j]) / h
    div: faces -> nodes, ghost-reflected node difference / h
    avg: nodes -> faces, pure adjacency (f[j] + f[j+e_k]); face value = avg @ d / 2
    """
    diff: sp.csr_matrix
    div: sp.csr_matrix
    avg: sp.csr_matrix


def _diff_1d(n: int) -> sp.csr_matrix:
    return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n), format="csr")


def _div_1d(n: int) -> sp.csr_matrix:
    # Rows are nodes, columns faces; boundary rows see the reflected ghost flux
    div = sp.lil_matrix((n, n - 1))
    div[0, 0] = 2.0
    for j in range(1, n - 1):
        div[j, j] = 1.0
        div[j, j - 1] = -1.0
    div[n - 1, n - 2] = -2.0
    return div.tocsr()


@lru_cache(maxsize=32)
def axis_operators(grid: Grid) -> Dict[int, AxisOperators]:
    ops = {}
    for axis in AXES:
        h = grid.spacing(axis)
        n_axis = grid.n1 if axis == 1 else grid.n2
        eye = sp.identity(grid.n2 if axis == 1 else grid.n1, format="csr")

        def lift(op_1d):
            return sp.kron(op_1d, eye, format="csr") if axis == 1 else sp.kron(eye, op_1d, format="csr")

        diff_1d = _diff_1d(n_axis)
        ops[axis] = AxisOperators(
            diff=lift(diff_1d / h),
            div=lift(_div_1d(n_axis) / h),
            avg=lift(abs(diff_1d)),
        )
    return ops


def assemble_matrix_form(iset: InfluenceSet, w: VectorField, cfg: SchemeConfig) -> sp.csr_matrix:
    """K_l^x D_L^x K_rL^x + K_l^y D_L^y K_rL^y + K_l^x D_R^x K_rR^x + K_l^y D_R^y K_rR^y"""
    grid = w.grid
    nodal = iset.evaluate_all(w.v.flat)
    total = sp.csr_matrix((2 * grid.size, 2 * grid.size))
    for axis, ops in axis_operators(grid).items():
        faces = 0.5 * (ops.avg @ nodal.T).T
        k_l = sp.block_diag([ops.div, ops.div])
        k_rl = sp.block_diag([ops.diff, ops.diff])
        k_rr = sp.bmat([[None, ops.diff], [ops.diff, None]])
        d_l = sp.diags(np.concatenate([faces[0], faces[3]]))
        d_r = sp.diags(np.concatenate([faces[1], faces[2]]))
        total = total + k_l @ d_l @ k_rl + k_l @ d_r @ k_rr
    return total.tocsr()


def diffusion_operator(iset: InfluenceSet, w: VectorField) -> spla.LinearOperator:
    """Matrix-free frozen-coefficient diffusion acting on concatenated vectors"""
    grid = w.grid
    faces = face_coefficients(iset, w.v.values)
    n = grid.size

    def matvec(x):
        x = np.asarray(x).ravel()
        div_u, div_v = apply_diffusion(faces, x[:n].reshape(grid.shape), x[n:].reshape(grid.shape), grid)
        return np.concatenate([div_u.ravel(), div_v.ravel()])

    return spla.LinearOperator((2 * n, 2 * n), matvec=matvec, dtype=float)


def reaction_projector(grid: Grid) -> sp.dia_matrix:
    """P_u: identity on the U block, zero on the V block"""
    return sp.diags(np.concatenate([np.ones(grid.size), np.zeros(grid.size)]))


def semi_implicit_system(w: VectorField, u0: ScalarField, iset: InfluenceSet, cfg: SchemeConfig) -> Tuple[sp.csr_matrix, np.ndarray]:
    """[(I + dt lambda P_u) - dt A(W^m)] w' = w^m + dt lambda P_u (u0, 0)"""
    grid = w.grid
    identity = sp.identity(2 * grid.size, format="csr")
    system = identity + cfg.dt * cfg.lam * reaction_projector(grid) - cfg.dt * assemble_matrix_form(iset, w, cfg)
    rhs = w.flat + cfg.dt * cfg.lam * np.concatenate([u0.flat, np.zeros(grid.size)])
    return system.tocsc(), rhs


def _relative_residual(system, x: np.ndarray, rhs: np.ndarray) -> float:
    scale = np.linalg.norm(rhs)
    residual = np.linalg.norm(system @ x - rhs)
    return float(residual / scale) if scale > 0 else float(residual)


def _krylov_solve(system: sp.csc_matrix, rhs: np.ndarray, x0: np.ndarray) -> np.ndarray:
    diagonal = system.diagonal()
    if np.any(diagonal == 0):
        raise SolverError("zero on the system diagonal, Jacobi preconditioner undefined")
    preconditioner = spla.LinearOperator(system.shape, matvec=lambda x: x / diagonal, dtype=float)
    x, info = spla.bicgstab(system, rhs, x0=x0, rtol=1e-13, atol=0.0, maxiter=5000, M=preconditioner)
    if info != 0:
        logger.warning(f"⚠️ BiCGSTAB stopped with info={info}, retrying with GMRES")
        x, info = spla.gmres(system, rhs, x0=x, rtol=1e-13, atol=0.0, restart=100, maxiter=200, M=preconditioner)
    return x


def semi_implicit_step(w: VectorField, u0: ScalarField, iset: InfluenceSet, cfg: SchemeConfig) -> VectorField:
    """One theta=1 step: a sparse linear solve with coefficients frozen at w"""
    if cfg.theta != 1:
        raise ConfigError("semi_implicit_step needs theta=1")
    system, rhs = semi_implicit_system(w, u0, iset, cfg)
    if w.grid.size <= DIRECT_SOLVE_MAX_NODES:
        try:
            x = spla.splu(system).solve(rhs)
        except RuntimeError as e:
            raise SolverError(f"sparse LU failed: {e}") from e
    else:
        x = _krylov_solve(system, rhs, w.flat)
    residual = _relative_residual(system, x, rhs)
    if not np.isfinite(residual) or residual > RESIDUAL_TOLERANCE:
        raise SolverError("semi-implicit solve missed the residual tolerance", residual=residual)
    n = w.grid.size
    return _checked_state(w.grid, x[:n].reshape(w.grid.shape), x[n:].reshape(w.grid.shape))


def step(w: VectorField, u0: ScalarField, iset: InfluenceSet, cfg: SchemeConfig) -> VectorField:
    if cfg.theta == 0:
        return explicit_step(w, u0, iset, cfg)
    return semi_implicit_step(w, u0, iset, cfg)


def run(w0: VectorField, iset: InfluenceSet, cfg: SchemeConfig, record: bool = False) -> Union[StepTrace, VectorField]:
    """Iterate the configured stepper cfg.steps times from w0 (reaction target u0 = w0.u)"""
    u0 = w0.u
    states: List[VectorField] = [w0]
    w = w0
    for m in range(cfg.steps):
        try:
            w = step(w, u0, iset, cfg)
        except NumericalError as e:
            raise NumericalError("rollout produced non-finite values", step=m + 1) from e
        if record:
            states.append(w)
    if record:
        return StepTrace(tuple(states), cfg)
    return w


def _checked_state(grid: Grid, u: np.ndarray, v: np.ndarray) -> VectorField:
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise NumericalError("non-finite values after a time step")
    return VectorField(ScalarField(grid, u), ScalarField(grid, v))


def with_lambda(cfg: SchemeConfig, lam: float) -> SchemeConfig:
    return replace(cfg, lam=max(float(lam), 0.0))
