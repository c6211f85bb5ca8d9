#!/usr/bin/env python3
"""
Test the Explicit and Semi-Implicit Steppers
"""
import sys
from pathlib import Path

import numpy as np
import pytest

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent.parent / "src"))

from xdiff.errors import ConfigError, NumericalError
from xdiff.numerics import scheme
from xdiff.numerics.field import Grid, ScalarField, VectorField, node_weights
from xdiff.numerics.influence import InfluenceSet, RbfBasis, init_ncdf
from xdiff.numerics.scheme import (
    SchemeConfig, StepTrace, apply_diffusion, assemble_matrix_form, diffusion_operator, diffusion_term, explicit_step,
    face_coefficients, half_point_coefficients, initial_state, run, semi_implicit_step, semi_implicit_system,
    with_lambda,
)


def random_state(grid: Grid, rng: np.random.Generator, v_scale: float = 2.0) -> VectorField:
    u = ScalarField(grid, 50.0 * rng.random(grid.shape))
    v = ScalarField(grid, v_scale * rng.standard_normal(grid.shape))
    return VectorField(u, v)


class TestSchemeConfig:
    """Configuration validation"""

    def setup_method(self):
        self.grid = Grid(4, 4)

    def test_stopping_time(self):
        assert SchemeConfig(0.05, 10, self.grid).stopping_time == pytest.approx(0.5)

    @pytest.mark.parametrize("kwargs", [{"dt": 0.0}, {"steps": -1}, {"theta": 2}, {"lam": -0.1}, {"lam": float("inf")}])
    def test_invalid(self, kwargs):
        params = {"dt": 0.1, "steps": 1, "theta": 1, "lam": 0.0, **kwargs}
        with pytest.raises(ConfigError):
            SchemeConfig(grid=self.grid, **params)

    def test_with_lambda_projects(self):
        cfg = with_lambda(SchemeConfig(0.1, 1, self.grid), -0.3)
        assert cfg.lam == 0.0


class TestStencilMatrixEquivalence:
    """The sparse assembly reproduces the stencil path"""

    def setup_method(self):
        rng = np.random.default_rng(11)
        self.basis = RbfBasis(p=11, a_min=-20.0, a_max=20.0, nu=3.0)
        self.iset = InfluenceSet(self.basis, rng.standard_normal((4, 11)))
        self.rng = rng

    @pytest.mark.parametrize("h1,h2", [(1.0, 1.0), (1.0, 0.5), (0.7, 1.3)])
    def test_matrix_matches_stencil(self, h1, h2):
        grid = Grid(8, 6, h1, h2)
        w = random_state(grid, self.rng)
        cfg = SchemeConfig(0.05, 1, grid, theta=1)
        matrix = assemble_matrix_form(self.iset, w, cfg)
        div_u, div_v = diffusion_term(self.iset, w)
        stencil = np.concatenate([div_u.ravel(), div_v.ravel()])
        np.testing.assert_allclose(matrix @ w.flat, stencil, rtol=1e-12, atol=1e-12 * np.max(np.abs(stencil)))

    def test_matrix_free_operator(self):
        grid = Grid(5, 7)
        w = random_state(grid, self.rng)
        x = self.rng.standard_normal(2 * grid.size)
        matrix = assemble_matrix_form(self.iset, w, SchemeConfig(0.05, 1, grid))
        np.testing.assert_allclose(diffusion_operator(self.iset, w) @ x, matrix @ x, rtol=1e-12, atol=1e-12)

    def test_system_assembly(self):
        grid = Grid(5, 5)
        w = random_state(grid, self.rng)
        u0 = ScalarField(grid, self.rng.random(grid.shape))
        cfg = SchemeConfig(0.1, 1, grid, theta=1, lam=0.7)
        system, rhs = semi_implicit_system(w, u0, self.iset, cfg)
        a = assemble_matrix_form(self.iset, w, cfg).toarray()
        expected = np.eye(2 * grid.size) - cfg.dt * a
        expected[: grid.size, : grid.size] += cfg.dt * cfg.lam * np.eye(grid.size)
        np.testing.assert_allclose(system.toarray(), expected, atol=1e-12)
        np.testing.assert_allclose(rhs[: grid.size], w.u.flat + cfg.dt * cfg.lam * u0.flat)
        np.testing.assert_array_equal(rhs[grid.size:], w.v.flat)


class TestHalfPointCoefficients:
    """Influence values at the faces as the mean of the two adjacent nodes"""

    def test_matches_pointwise_average(self):
        rng = np.random.default_rng(21)
        basis = RbfBasis(p=11, a_min=-20.0, a_max=20.0, nu=3.0)
        iset = InfluenceSet(basis, rng.standard_normal((4, 11)))
        grid = Grid(6, 5, 1.0, 0.5)
        w = random_state(grid, rng)
        v = w.v.values
        for axis in (1, 2):
            faces = half_point_coefficients(iset, w, axis)
            assert len(faces) == 4
            for ell, face in enumerate(faces, start=1):
                assert face.axis == axis
                assert face.values.shape == grid.face_shape(axis)
                nodal = iset.evaluate(ell, v)
                if axis == 1:
                    expected = 0.5 * (nodal[:-1, :] + nodal[1:, :])
                else:
                    expected = 0.5 * (nodal[:, :-1] + nodal[:, 1:])
                np.testing.assert_allclose(face.values, expected, rtol=1e-13, atol=1e-13)

    def test_constant_v_gives_node_value(self):
        iset = init_ncdf(RbfBasis(p=31, nu=1.0))
        grid = Grid(4, 4)
        w = VectorField(ScalarField.constant(grid, 10.0), ScalarField.constant(grid, 0.7))
        for ell, face in enumerate(half_point_coefficients(iset, w, 2), start=1):
            np.testing.assert_allclose(face.values, iset.evaluate(ell, 0.7), rtol=1e-13)


class TestRandomStateSweep:
    """Both steppers agree with the stencil form on many random 8x8 states"""

    def setup_method(self):
        self.iset = init_ncdf(RbfBasis(p=31, nu=1.0))
        self.grid = Grid(8, 8)

    @pytest.mark.parametrize("theta", [0, 1])
    def test_fifty_states(self, theta):
        rng = np.random.default_rng(300 + theta)
        cfg = SchemeConfig(0.05 if theta == 0 else 0.1, 1, self.grid, theta=theta, lam=0.6)
        for _ in range(50):
            w = random_state(self.grid, rng)
            u0 = ScalarField(self.grid, 50.0 * rng.random(self.grid.shape))
            faces = face_coefficients(self.iset, w.v.values)

            matrix = assemble_matrix_form(self.iset, w, cfg)
            div_u, div_v = apply_diffusion(faces, w.u.values, w.v.values, self.grid)
            stencil = np.concatenate([div_u.ravel(), div_v.ravel()])
            np.testing.assert_allclose(matrix @ w.flat, stencil, rtol=1e-12, atol=1e-12 * np.max(np.abs(stencil)))

            nxt = explicit_step(w, u0, self.iset, cfg) if theta == 0 else semi_implicit_step(w, u0, self.iset, cfg)
            # Stencil residual of the update with coefficients frozen at w
            implicit = w if theta == 0 else nxt
            div_u, div_v = apply_diffusion(faces, implicit.u.values, implicit.v.values, self.grid)
            res_u = nxt.u.values - w.u.values - cfg.dt * (div_u - cfg.lam * (implicit.u.values - u0.values))
            res_v = nxt.v.values - w.v.values - cfg.dt * div_v
            scale = np.max(np.abs(w.flat))
            np.testing.assert_allclose(res_u, 0.0, atol=1e-8 * scale)
            np.testing.assert_allclose(res_v, 0.0, atol=1e-8 * scale)


class TestSteppers:
    """Explicit and semi-implicit time stepping"""

    def setup_method(self):
        self.iset = init_ncdf(RbfBasis(p=31, nu=1.0))
        self.grid = Grid(10, 12)

    def test_explicit_constant_is_fixed_point(self):
        w = VectorField(ScalarField.constant(self.grid, 42.0), ScalarField.constant(self.grid, 0.3))
        cfg = SchemeConfig(0.05, 1, self.grid, theta=0, lam=0.8)
        nxt = explicit_step(w, w.u, self.iset, cfg)
        np.testing.assert_array_equal(nxt.u.values, w.u.values)
        np.testing.assert_array_equal(nxt.v.values, w.v.values)

    def test_semi_implicit_constant_is_fixed_point(self):
        w = VectorField(ScalarField.constant(self.grid, 42.0), ScalarField.constant(self.grid, 0.3))
        cfg = SchemeConfig(0.1, 1, self.grid, theta=1, lam=0.5)
        nxt = semi_implicit_step(w, w.u, self.iset, cfg)
        np.testing.assert_allclose(nxt.u.values, 42.0, rtol=0, atol=1e-10 * 42.0)
        np.testing.assert_allclose(nxt.v.values, 0.3, rtol=0, atol=1e-10)

    def test_explicit_step_needs_theta_zero(self):
        w = initial_state(ScalarField.constant(self.grid, 1.0))
        with pytest.raises(ConfigError):
            explicit_step(w, w.u, self.iset, SchemeConfig(0.1, 1, self.grid, theta=1))

    def test_zero_steps_returns_input(self):
        u0 = ScalarField(self.grid, np.random.default_rng(1).random(self.grid.shape))
        w0 = initial_state(u0)
        final = run(w0, self.iset, SchemeConfig(0.1, 0, self.grid, theta=1))
        np.testing.assert_array_equal(final.u.values, u0.values)

    def test_record_keeps_every_state(self):
        u0 = ScalarField(self.grid, np.random.default_rng(2).random(self.grid.shape))
        trace = run(initial_state(u0), self.iset, SchemeConfig(0.05, 4, self.grid, theta=0), record=True)
        assert isinstance(trace, StepTrace)
        assert len(trace.states) == 5
        assert trace.u0 is u0

    def test_mean_is_conserved_without_reaction(self):
        rng = np.random.default_rng(5)
        u0 = ScalarField(self.grid, 100.0 * rng.random(self.grid.shape))
        weights = node_weights(self.grid)
        for theta in (0, 1):
            final = run(initial_state(u0), self.iset, SchemeConfig(0.05, 5, self.grid, theta=theta))
            assert np.sum(weights * final.u.values) == pytest.approx(np.sum(weights * u0.values), rel=1e-8)

    def test_explicit_blow_up_reports_step(self):
        basis = self.iset.basis
        heat = InfluenceSet(basis, np.stack([np.ones(basis.p), np.zeros(basis.p), np.zeros(basis.p), np.ones(basis.p)]))
        u0 = ScalarField(self.grid, 100.0 * np.random.default_rng(3).standard_normal(self.grid.shape))
        cfg = SchemeConfig(100.0, 500, self.grid, theta=0)
        with pytest.raises(NumericalError) as info:
            with np.errstate(all="ignore"):
                run(initial_state(u0), heat, cfg)
        assert info.value.step is not None

    def test_krylov_path_matches_direct(self, monkeypatch):
        rng = np.random.default_rng(9)
        w = random_state(self.grid, rng, v_scale=0.5)
        cfg = SchemeConfig(0.1, 1, self.grid, theta=1, lam=0.4)
        direct = semi_implicit_step(w, w.u, self.iset, cfg)
        monkeypatch.setattr(scheme, "DIRECT_SOLVE_MAX_NODES", 0)
        krylov = semi_implicit_step(w, w.u, self.iset, cfg)
        np.testing.assert_allclose(krylov.flat, direct.flat, rtol=1e-8, atol=1e-8)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
