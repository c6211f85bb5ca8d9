#!/usr/bin/env python3
"""
Test RBF Influence Functions and the NCDF Initialization
"""
import sys
from pathlib import Path

import numpy as np
import pytest

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent.parent / "src"))

from xdiff.errors import ConfigError, InterpolationError
from xdiff.numerics.influence import InfluenceSet, RbfBasis, init_ncdf, ncdf_profile, ncdf_targets


class TestRbfBasis:
    """Gaussian basis layout and evaluation"""

    def test_centers_are_equidistant(self):
        basis = RbfBasis(p=5, a_min=-2.0, a_max=2.0, nu=0.5)
        np.testing.assert_allclose(basis.centers, [-2.0, -1.0, 0.0, 1.0, 2.0])

    def test_matrix_entries(self):
        basis = RbfBasis(p=5, a_min=-2.0, a_max=2.0, nu=0.5)
        phi = basis.matrix([0.0, 1.0])
        assert phi.shape == (2, 5)
        assert phi[0, 2] == pytest.approx(1.0)
        assert phi[0, 3] == pytest.approx(np.exp(-1.0))
        assert phi[1, 1] == pytest.approx(np.exp(-4.0))

    @pytest.mark.parametrize("kwargs", [{"p": 1}, {"a_min": 1.0, "a_max": 1.0}, {"nu": 0.0}])
    def test_invalid_basis(self, kwargs):
        with pytest.raises(ConfigError):
            RbfBasis(**kwargs)


class TestInfluenceSet:
    """Evaluation of the four influence functions"""

    def setup_method(self):
        self.basis = RbfBasis(p=11, a_min=-20.0, a_max=20.0, nu=3.0)
        rng = np.random.default_rng(0)
        self.iset = InfluenceSet(self.basis, rng.standard_normal((4, 11)))

    def test_evaluate_scalar_and_array(self):
        value = self.iset.evaluate(2, 0.3)
        assert isinstance(value, float)
        values = self.iset.evaluate(2, np.array([[0.3, 1.0]]))
        assert values.shape == (1, 2)
        assert values[0, 0] == pytest.approx(value)

    def test_evaluate_all_matches_rows(self):
        v = np.linspace(-5, 5, 12).reshape(3, 4)
        stacked = self.iset.evaluate_all(v)
        assert stacked.shape == (4, 3, 4)
        for ell in range(1, 5):
            np.testing.assert_allclose(stacked[ell - 1], self.iset.evaluate(ell, v))

    def test_derivative_matches_analytic(self):
        v = np.array([-3.0, 0.5, 7.0])
        z = (v[:, None] - self.basis.centers[None, :]) / (2.0 * self.basis.nu)
        analytic = (-2.0 * z / (2.0 * self.basis.nu) * np.exp(-z * z)) @ self.iset.deltas[0]
        np.testing.assert_allclose(self.iset.derivative(1, v), analytic, rtol=1e-6, atol=1e-9)

    def test_bad_index(self):
        with pytest.raises(ConfigError):
            self.iset.evaluate(5, 0.0)

    def test_bad_shape(self):
        with pytest.raises(ConfigError):
            InfluenceSet(self.basis, np.zeros((4, 10)))

    def test_zeros(self):
        assert InfluenceSet.zeros(self.basis).evaluate(4, 1.5) == 0.0


class TestNcdfInitialization:
    """Interpolation of the complex-diffusion influence functions"""

    def setup_method(self):
        self.basis = RbfBasis()
        self.iset = init_ncdf(self.basis)

    def test_exact_at_centers(self):
        centers = self.basis.centers
        targets = ncdf_targets(centers)
        for ell in range(1, 5):
            np.testing.assert_allclose(self.iset.evaluate(ell, centers), targets[ell - 1], rtol=0, atol=1e-8)

    def test_dense_error(self):
        x = self.basis.sample(4001)
        error = np.abs(self.iset.evaluate(1, x) - 0.99 * ncdf_profile(x))
        assert np.max(error) <= 1e-3

    def test_cross_terms_are_antisymmetric(self):
        np.testing.assert_allclose(self.iset.deltas[1], -self.iset.deltas[2], rtol=1e-12, atol=1e-12)

    def test_profile_values(self):
        assert ncdf_profile(0.0) == pytest.approx(1.0)
        assert ncdf_profile(1.0) == pytest.approx(0.5)

    def test_ill_conditioned_kernel(self):
        with pytest.raises(InterpolationError):
            init_ncdf(RbfBasis(p=151, nu=50.0))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
