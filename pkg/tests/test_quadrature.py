import pytest
import numpy as np
from plrtest import quadrature
from plrtest.errors import ConfigurationError


class TestGaussLegendre:
    """Test the [0,1] Gauss-Legendre rule."""

    def test_midpoint(self):
        nodes, weights = quadrature.gauss_legendre_01(1)
        np.testing.assert_allclose(nodes, [0.5], atol=1e-15)
        np.testing.assert_allclose(weights, [1.0], atol=1e-15)

    def test_two_point_cubic(self):
        nodes, weights = quadrature.gauss_legendre_01(2)
        assert weights @ nodes ** 3 == pytest.approx(0.25, abs=1e-14)

    @pytest.mark.parametrize("q", [2, 4, 8, 16])
    def test_polynomial_exactness(self, q):
        nodes, weights = quadrature.gauss_legendre_01(q)
        for p in range(2 * q):
            assert weights @ nodes ** p == pytest.approx(1.0 / (p + 1), abs=1e-12)

    @pytest.mark.parametrize("q", [1, 3, 7, 64, 128])
    def test_weights_and_nodes(self, q):
        nodes, weights = quadrature.gauss_legendre_01(q)
        assert weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(weights > 0)
        assert np.all((nodes > 0) & (nodes < 1))
        assert np.all(np.diff(nodes) > 0)

    def test_matches_numpy_rule(self):
        y, w = np.polynomial.legendre.leggauss(20)
        nodes, weights = quadrature.gauss_legendre_01(20)
        np.testing.assert_allclose(nodes, (y + 1) / 2, atol=1e-14)
        np.testing.assert_allclose(weights, w / 2, atol=1e-14)

    @pytest.mark.parametrize("q", [0, -3, 2.5, True])
    def test_invalid_size(self, q):
        with pytest.raises(ConfigurationError):
            quadrature.gauss_legendre_01(q)


class TestJointGrid:
    """Test the product grid over [0,1] x {0,1}."""

    def test_single_node_per_label(self):
        grid = quadrature.joint_grid(1)
        np.testing.assert_allclose(grid.x, [0.5, 0.5])
        np.testing.assert_array_equal(grid.z, [0, 1])
        np.testing.assert_allclose(grid.weights, [1.0, 1.0])

    def test_total_measure(self):
        grid = quadrature.joint_grid()
        assert grid.resolution == 64
        assert grid.size == 128
        assert grid.integrate(np.ones(grid.size)) == pytest.approx(2.0, abs=1e-12)

    def test_slice_integral(self):
        grid = quadrature.joint_grid(2)
        assert grid.integrate(lambda x, z: x * (z == 1)) == pytest.approx(0.5, abs=1e-14)

    def test_refinement_plateau(self):
        g = lambda x, z: np.exp(np.sin(2 * np.pi * x) + 0.3 * z * x ** 2)
        coarse = quadrature.joint_grid(64).integrate(g)
        fine = quadrature.joint_grid(128).integrate(g)
        assert abs(coarse - fine) < 1e-9

    def test_grid_is_read_only(self):
        grid = quadrature.joint_grid(4)
        with pytest.raises(ValueError):
            grid.weights[0] = 1.0


if __name__ == "__main__":
    pytest.main([__file__])
