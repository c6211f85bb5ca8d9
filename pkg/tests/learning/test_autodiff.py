#!/usr/bin/env python3
"""
Test Reverse-Mode Gradients Against Finite Differences
"""
import sys
from pathlib import Path

import numpy as np
import pytest

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent.parent / "src"))

from xdiff.errors import ConfigError, GridError
from xdiff.learning.autodiff import (
    GradientVector, ParameterVector, backprop, loss, loss_output_adjoint, step_jacobian_apply,
    step_param_partial,
)
from xdiff.numerics.field import Grid, ScalarField, VectorField
from xdiff.numerics.influence import InfluenceSet, RbfBasis, init_ncdf
from xdiff.numerics.scheme import SchemeConfig, explicit_step, initial_state, run

BASIS = RbfBasis(p=11, a_min=-20.0, a_max=20.0, nu=3.0)
GRID = Grid(12, 12)
DT = 0.05
STEPS = 3


def random_instance(seed: int):
    """Perturbed NCDF parameters with a clean/noisy image pair"""
    rng = np.random.default_rng(seed)
    ncdf = init_ncdf(BASIS)
    deltas = ncdf.deltas + 0.05 * rng.standard_normal(ncdf.deltas.shape)
    theta = ParameterVector.from_influence(InfluenceSet(BASIS, deltas), rng.uniform(0.1, 1.0))
    clean = ScalarField(GRID, 20.0 * rng.random(GRID.shape))
    noisy = ScalarField(GRID, clean.values + 5.0 * rng.standard_normal(GRID.shape))
    return theta, clean, noisy


def rollout_loss(arr: np.ndarray, clean: ScalarField, noisy: ScalarField) -> float:
    theta = ParameterVector.from_array(arr)
    cfg = SchemeConfig(DT, STEPS, GRID, theta=0, lam=theta.lam)
    final = run(initial_state(noisy), theta.to_influence(BASIS), cfg)
    return loss(final.u, clean)


def finite_difference(arr: np.ndarray, clean: ScalarField, noisy: ScalarField) -> np.ndarray:
    grad = np.zeros_like(arr)
    for i in range(arr.size):
        h = 1e-5 * max(1.0, abs(arr[i]))
        plus, minus = arr.copy(), arr.copy()
        plus[i] += h
        minus[i] -= h
        grad[i] = (rollout_loss(plus, clean, noisy) - rollout_loss(minus, clean, noisy)) / (2.0 * h)
    return grad


class TestParameterVector:
    """Layout of Theta"""

    def test_array_round_trip(self):
        theta, _, _ = random_instance(0)
        back = ParameterVector.from_array(theta.to_array())
        np.testing.assert_array_equal(back.to_array(), theta.to_array())
        assert theta.to_array().size == 4 * BASIS.p + 1

    def test_deltas_order(self):
        ncdf = init_ncdf(BASIS)
        theta = ParameterVector.from_influence(ncdf, 0.3)
        np.testing.assert_array_equal(theta.deltas(), ncdf.deltas)
        np.testing.assert_array_equal(theta.lam14[:BASIS.p], ncdf.deltas[0])
        np.testing.assert_array_equal(theta.lam14[BASIS.p:], ncdf.deltas[3])
        np.testing.assert_array_equal(theta.lam23[BASIS.p:], ncdf.deltas[2])

    def test_bad_length(self):
        with pytest.raises(ConfigError):
            ParameterVector.from_array(np.zeros(8))

    def test_addition(self):
        total = ParameterVector.zeros(2) + GradientVector(1.0, np.ones(4), np.ones(4))
        assert total.lam == 1.0
        np.testing.assert_array_equal(total.lam23, np.ones(4))


class TestLoss:
    """Per-image squared error"""

    def test_zero_for_identical(self):
        f = ScalarField(GRID, np.random.default_rng(0).random(GRID.shape))
        assert loss(f, f) == 0.0

    def test_hand_value(self):
        grid = Grid(2, 2)
        assert loss(ScalarField.constant(grid, 3.0), ScalarField.constant(grid, 2.0)) == pytest.approx(2.0)

    def test_output_adjoint_has_zero_v_block(self):
        grid = Grid(2, 2)
        adjoint = loss_output_adjoint(ScalarField.constant(grid, 3.0), ScalarField.constant(grid, 2.0))
        np.testing.assert_array_equal(adjoint, [1, 1, 1, 1, 0, 0, 0, 0])

    def test_grid_mismatch(self):
        with pytest.raises(GridError):
            loss(ScalarField.constant(Grid(2, 2), 0.0), ScalarField.constant(Grid(2, 3), 0.0))


class TestBackprop:
    """Adjoint gradients of the explicit rollout"""

    def test_step_jacobian_directional(self):
        theta, _, noisy = random_instance(1)
        iset = theta.to_influence(BASIS)
        cfg = SchemeConfig(DT, 1, GRID, theta=0, lam=theta.lam)
        rng = np.random.default_rng(2)
        w = VectorField(noisy, ScalarField(GRID, 0.5 * rng.standard_normal(GRID.shape)))
        adjoint = rng.standard_normal(2 * GRID.size)
        direction = rng.standard_normal(2 * GRID.size)
        eps = 1e-6

        def image(x):
            return explicit_step(VectorField.from_flat(GRID, x), noisy, iset, cfg).flat

        fd = adjoint @ (image(w.flat + eps * direction) - image(w.flat - eps * direction)) / (2.0 * eps)
        exact = step_jacobian_apply(adjoint, w, iset, cfg) @ direction
        assert exact == pytest.approx(fd, rel=1e-5)

    def test_step_param_partial_matches_finite_differences(self):
        theta, _, noisy = random_instance(5)
        rng = np.random.default_rng(6)
        w = VectorField(
            ScalarField(GRID, noisy.values + rng.standard_normal(GRID.shape)),
            ScalarField(GRID, 0.5 * rng.standard_normal(GRID.shape)),
        )
        adjoint = rng.standard_normal(2 * GRID.size)
        arr = theta.to_array()

        def projected(x):
            params = ParameterVector.from_array(x)
            cfg = SchemeConfig(DT, 1, GRID, theta=0, lam=params.lam)
            return adjoint @ explicit_step(w, noisy, params.to_influence(BASIS), cfg).flat

        fd = np.zeros_like(arr)
        for i in range(arr.size):
            h = 1e-4 * max(1.0, abs(arr[i]))
            plus, minus = arr.copy(), arr.copy()
            plus[i] += h
            minus[i] -= h
            fd[i] = (projected(plus) - projected(minus)) / (2.0 * h)

        cfg = SchemeConfig(DT, 1, GRID, theta=0, lam=theta.lam)
        exact = step_param_partial(adjoint, w, noisy, theta.to_influence(BASIS), cfg).to_array()
        np.testing.assert_allclose(exact, fd, rtol=1e-6, atol=1e-6 * np.max(np.abs(fd)))

    @pytest.mark.parametrize("seed", range(20))
    def test_gradient_matches_finite_differences(self, seed):
        theta, clean, noisy = random_instance(100 + seed)
        cfg = SchemeConfig(DT, STEPS, GRID, theta=0, lam=theta.lam)
        iset = theta.to_influence(BASIS)
        trace = run(initial_state(noisy), iset, cfg, record=True)
        value, grad = backprop(trace, clean, iset)

        arr = theta.to_array()
        assert value == pytest.approx(rollout_loss(arr, clean, noisy), rel=1e-12)
        fd = finite_difference(arr, clean, noisy)
        error = np.max(np.abs(grad.to_array() - fd)) / max(np.max(np.abs(fd)), 1e-8)
        assert error <= 1e-4

    def test_needs_explicit_scheme(self):
        theta, clean, noisy = random_instance(3)
        iset = theta.to_influence(BASIS)
        trace = run(initial_state(noisy), iset, SchemeConfig(DT, 2, GRID, theta=1, lam=theta.lam), record=True)
        with pytest.raises(ConfigError):
            backprop(trace, clean, iset)

    def test_zero_steps_has_no_parameter_gradient(self):
        theta, clean, noisy = random_instance(4)
        iset = theta.to_influence(BASIS)
        trace = run(initial_state(noisy), iset, SchemeConfig(DT, 0, GRID, theta=0, lam=theta.lam), record=True)
        value, grad = backprop(trace, clean, iset)
        assert value == pytest.approx(loss(noisy, clean))
        np.testing.assert_array_equal(grad.to_array(), 0.0)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
