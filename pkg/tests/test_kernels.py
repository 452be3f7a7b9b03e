import pytest
import numpy as np
from plrtest import kernels
from plrtest.errors import ConfigurationError, DomainError, ShapeError


def random_dataset(n, seed=0, balanced=False):
    rng = np.random.default_rng(seed)
    x = rng.random(n)
    if balanced:
        z = np.arange(n) % 2
    else:
        z = (rng.random(n) < 0.5).astype(int)
        z[0], z[1] = 0, 1
    return kernels.Dataset(x, z)


class TestKernelConfig:
    """Test configuration validation."""

    def test_defaults(self):
        cfg = kernels.KernelConfig()
        assert (cfg.m, cfg.eig_floor, cfg.psd_tol) == (2, 1e-10, 1e-8)

    @pytest.mark.parametrize("kwargs", [{"m": 3}, {"m": 0}, {"eig_floor": 0.0}, {"psd_tol": -1e-9}])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            kernels.KernelConfig(**kwargs)


class TestDataset:
    """Test Dataset validation and group bookkeeping."""

    def test_group_weights(self):
        data = kernels.Dataset([0.1, 0.2, 0.3, 0.4], [0, 0, 0, 1])
        assert (data.n, data.n0, data.n1) == (4, 3, 1)
        assert data.omega_hat == (0.75, 0.25)
        assert sum(data.omega_hat) == 1.0

    def test_arrays_are_read_only(self):
        data = kernels.Dataset([0.1, 0.2], [0, 1])
        with pytest.raises(ValueError):
            data.x[0] = 0.5

    def test_out_of_range_x(self):
        with pytest.raises(DomainError):
            kernels.Dataset([0.1, 1.2], [0, 1])

    def test_bad_labels(self):
        with pytest.raises(DomainError):
            kernels.Dataset([0.1, 0.2], [0, 2])

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            kernels.Dataset([0.1, 0.2, 0.3], [0, 1])

    def test_too_small(self):
        with pytest.raises(DomainError):
            kernels.Dataset([0.1], [0])

    def test_single_group_check(self):
        data = kernels.Dataset([0.1, 0.2], [1, 1])
        with pytest.raises(DomainError, match="single group"):
            data.require_two_groups()


class TestBernoulli:
    """Test the scaled Bernoulli polynomials."""

    def test_known_values(self):
        assert kernels.bernoulli_k(4, 0.5) == pytest.approx(7 / 5760, abs=1e-15)
        assert kernels.bernoulli_k(4, 0.0) == pytest.approx(-1 / 720, abs=1e-15)
        assert kernels.bernoulli_k(2, 0.0) == pytest.approx(1 / 12, abs=1e-15)

    def test_matches_bernoulli_polynomial(self):
        """k4 = B4/4! with B4(t) = t^4 - 2t^3 + t^2 - 1/30."""
        t = np.linspace(0, 1, 41)
        b4 = t ** 4 - 2 * t ** 3 + t ** 2 - 1 / 30
        np.testing.assert_allclose(kernels.bernoulli_k(4, t), b4 / 24, atol=1e-15)

    def test_reflection_symmetry(self):
        t = np.random.default_rng(1).random(100)
        for r in (2, 4):
            np.testing.assert_allclose(kernels.bernoulli_k(r, t), kernels.bernoulli_k(r, 1 - t), atol=1e-12)

    def test_unsupported_order(self):
        with pytest.raises(ConfigurationError):
            kernels.bernoulli_k(6, 0.3)


class TestSobolevKernel:
    """Test the marginal Sobolev kernel."""

    def test_zero_lag(self):
        assert kernels.sobolev_kernel(0.3, 0.3) == pytest.approx(1 + 1 / 720, abs=1e-14)

    def test_half_lag(self):
        assert kernels.sobolev_kernel(0.0, 0.5) == pytest.approx(1 - 7 / 5760, abs=1e-14)

    def test_symmetric(self):
        a, b = np.random.default_rng(2).random((2, 20))
        np.testing.assert_array_equal(kernels.sobolev_kernel(a, b), kernels.sobolev_kernel(b, a))

    def test_order_one_sign(self):
        """m = 1 adds k2 instead of subtracting k4."""
        cfg = kernels.KernelConfig(m=1)
        assert kernels.sobolev_kernel(0.2, 0.2, cfg) == pytest.approx(1 + 1 / 12)

    def test_outside_unit_interval(self):
        with pytest.raises(DomainError):
            kernels.sobolev_kernel(-0.1, 0.5)

    @pytest.mark.parametrize("m", [1, 2])
    def test_gram_positive_semidefinite(self, m):
        x = np.random.default_rng(3).random(50)
        gram = kernels.sobolev_gram(x, x, kernels.KernelConfig(m=m))
        assert np.linalg.eigvalsh(gram).min() >= -1e-8


class TestDiscreteKernel:
    """Test the indicator kernel and its decomposition."""

    def test_indicator(self):
        assert kernels.discrete_kernel(0, 0) == 1
        assert kernels.discrete_kernel(0, 1) == 0
        assert kernels.discrete_kernel(1, 1) == 1

    def test_balanced_decomposition(self):
        k0, k1 = kernels.decompose_discrete((0.5, 0.5))
        np.testing.assert_allclose(k0, np.full((2, 2), 0.5))
        np.testing.assert_allclose(k1, [[0.5, -0.5], [-0.5, 0.5]])

    @pytest.mark.parametrize("w0", [0.0, 0.1, 0.37, 0.5, 0.9, 1.0])
    def test_parts_sum_to_indicator(self, w0):
        k0, k1 = kernels.decompose_discrete((w0, 1 - w0))
        np.testing.assert_allclose(k0 + k1, np.eye(2), atol=1e-15)

    def test_weights_must_sum_to_one(self):
        with pytest.raises(DomainError):
            kernels.decompose_discrete((0.5, 0.6))


class TestContinuousDecomposition:
    """Test the plug-in mean/centred split of the x gram."""

    def test_constant_gram(self):
        q0, q1 = kernels.decompose_continuous_gram(np.ones((4, 4)))
        np.testing.assert_allclose(q1, 0.0, atol=1e-15)
        np.testing.assert_allclose(q0, 1.0)

    def test_centred_rows_and_sum(self):
        x = np.random.default_rng(4).random(30)
        q = kernels.sobolev_gram(x, x)
        q0, q1 = kernels.decompose_continuous_gram(q)
        np.testing.assert_allclose(q1.sum(axis=1), 0.0, atol=1e-10)
        np.testing.assert_allclose(q0 + q1, q, atol=1e-15)
        c = np.eye(30) - 1 / 30
        np.testing.assert_allclose(q1, c @ q @ c, atol=1e-12)

    def test_non_square(self):
        with pytest.raises(ShapeError):
            kernels.decompose_continuous_gram(np.ones((3, 4)))


class TestBuildGrams:
    """Test the assembled grams and their invariants."""

    def test_cross_group_entries_vanish(self):
        grams = kernels.build_grams(kernels.Dataset([0.2, 0.8], [0, 1]))
        assert grams.q_full[0, 1] == 0.0

    def test_single_label_kills_interaction(self):
        data = kernels.Dataset(np.linspace(0.1, 0.9, 10), np.zeros(10, dtype=int))
        grams = kernels.build_grams(data)
        np.testing.assert_allclose(grams.q_interaction, 0.0, atol=1e-15)
        np.testing.assert_allclose(grams.interaction_spectrum, 0.0, atol=1e-12)

    def test_invariants_on_random_data(self):
        rng = np.random.default_rng(5)
        for trial in range(100):
            data = random_dataset(int(rng.integers(5, 201)), seed=trial)
            grams = kernels.build_grams(data)
            report = grams.check()
            assert report["split_full"] <= 1e-12
            assert report["min_eig_q_full"] >= -1e-8
            assert report["min_eig_q_interaction"] >= -1e-8
            assert report["min_eig_q_additive"] >= -1e-8

    def test_reduced_gram_psd_when_balanced(self):
        """Balanced labels on rank-like x keep the reduced gram PSD."""
        n = 60
        data = kernels.Dataset(np.arange(1, n + 1) / (n + 1), np.arange(n) % 2)
        grams = kernels.build_grams(data)
        assert np.linalg.eigvalsh(grams.q_reduced).min() >= -1e-6

    def test_additive_gram_is_psd(self):
        data = random_dataset(40, seed=9)
        grams = kernels.build_grams(data)
        assert np.linalg.eigvalsh(grams.model_gram("reduced")).min() >= -1e-8
        assert grams.model_gram("full") is grams.q_full

    def test_spectrum_sorted(self):
        spectrum = kernels.build_grams(random_dataset(30, seed=6)).interaction_spectrum
        assert np.all(np.diff(spectrum) <= 0)
        assert spectrum.min() >= 0

    def test_precomputed_x_gram(self):
        data = random_dataset(20, seed=7)
        fresh = kernels.build_grams(data)
        reused = kernels.build_grams(data.with_labels(data.z[::-1]), q_x=fresh.q_x)
        np.testing.assert_array_equal(reused.q_x, fresh.q_x)
        with pytest.raises(ShapeError):
            kernels.build_grams(data, q_x=np.eye(3))


class TestModelKernels:
    """Test the kernels the two models are fitted with."""

    @pytest.mark.parametrize("model", ["full", "reduced"])
    def test_sample_points_reproduce_grams(self, model):
        data = random_dataset(25, seed=8)
        grams = kernels.build_grams(data)
        gram = kernels.model_gram(model, data.x, data.z, data.x, data.z)
        np.testing.assert_allclose(gram, grams.model_gram(model), atol=1e-12)

    def test_reduced_kernel_is_additive(self):
        x = np.linspace(0, 1, 9)
        k0 = kernels.reduced_kernel(x, 0.3, 0, 1)
        k1 = kernels.reduced_kernel(x, 0.3, 1, 1)
        np.testing.assert_allclose(k1 - k0, np.ones(9), atol=1e-14)
        assert kernels.reduced_kernel(0.3, 0.3, 1, 1) == pytest.approx(1.0 + 0.5 * (kernels.sobolev_kernel(0.3, 0.3) - 1.0))

    def test_reduced_space_nested_in_full(self):
        """Full minus reduced kernel is PSD on points that share x across labels."""
        x = np.random.default_rng(11).random(15)
        px, pz = np.concatenate([x, x]), np.repeat([0, 1], 15)
        full = kernels.model_gram("full", px, pz, px, pz)
        reduced = kernels.model_gram("reduced", px, pz, px, pz)
        assert np.linalg.eigvalsh(full - reduced).min() >= -1e-10
        assert np.linalg.eigvalsh(reduced).min() >= -1e-10

    def test_bad_inputs(self):
        with pytest.raises(ShapeError):
            kernels.model_gram("full", [0.1, 0.2], [0], [0.5], [1])
        with pytest.raises(DomainError):
            kernels.model_gram("reduced", [0.1], [2], [0.5], [1])

    def test_unknown_model(self):
        with pytest.raises(ConfigurationError):
            kernels.model_gram("interaction", [0.5], [0], [0.5], [0])


if __name__ == "__main__":
    pytest.main([__file__])
