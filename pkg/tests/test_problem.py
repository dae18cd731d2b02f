import numpy as np
import pytest

from hgdas.problem import (
    ConfigError,
    GeneratorConfig,
    build_instance,
    generate_matrix,
    generate_noise,
    generate_signal,
    rng_from,
)


class TestGeneratorConfig:
    @pytest.mark.parametrize("kw", [
        dict(nonzero_ratio=0.0), dict(nonzero_ratio=1.0), dict(nonzero_ratio=-0.1),
        dict(rho=1.0), dict(rho=-0.2), dict(M=150, N=150), dict(M=0),
        dict(signal_variance=0.0), dict(noise_variance=-1.0), dict(matrix_kind="fourier"),
    ])
    def test_rejects_out_of_range(self, kw):
        with pytest.raises(ConfigError):
            GeneratorConfig(**kw)

    def test_dict_round_trip(self):
        cfg = GeneratorConfig(M=10, N=30, matrix_kind="correlated_gaussian", rho=0.3, seed=2**63 + 5)
        assert GeneratorConfig.from_dict(cfg.to_dict()) == cfg


class TestSignal:
    def test_default_sparsity_expected_count(self):
        # 0.08 * 150 = 12 nonzeros on average
        cfg = GeneratorConfig(N=150, nonzero_ratio=0.08)
        counts = [np.count_nonzero(generate_signal(cfg, rng_from(5, k))) for k in range(2000)]
        assert abs(np.mean(counts) - 12.0) < 0.25

    def test_large_sample_fraction(self):
        cfg = GeneratorConfig(M=10, N=100_000, nonzero_ratio=0.08)
        x = generate_signal(cfg, rng_from(1))
        assert abs(np.count_nonzero(x) / x.size - 0.08) <= 0.005

    def test_nonzero_values_have_requested_variance(self):
        cfg = GeneratorConfig(M=10, N=200_000, nonzero_ratio=0.5, signal_variance=4.0)
        x = generate_signal(cfg, rng_from(2))
        nz = x[x != 0]
        assert abs(nz.mean()) < 0.03
        assert abs(nz.var() - 4.0) < 0.06

    def test_tiny_ratio_gives_zero_vector(self):
        cfg = GeneratorConfig(M=2, N=10, nonzero_ratio=1e-12)
        np.testing.assert_array_equal(generate_signal(cfg, rng_from(0)), np.zeros(10))


class TestMatrix:
    def test_rho_zero_is_iid(self):
        a = GeneratorConfig(matrix_kind="correlated_gaussian", rho=0.0)
        b = GeneratorConfig(matrix_kind="iid_gaussian")
        np.testing.assert_array_equal(generate_matrix(a, rng_from(9)), generate_matrix(b, rng_from(9)))

    def test_correlated_column_covariance(self):
        cfg = GeneratorConfig(M=200, N=400, matrix_kind="correlated_gaussian", rho=0.5)
        A = generate_matrix(cfg, rng_from(3))
        lag1 = np.mean(A[:, :-1] * A[:, 1:])
        lag2 = np.mean(A[:, :-2] * A[:, 2:])
        diag = np.mean(A * A)
        assert abs(lag1 - 0.5) <= 0.02
        assert abs(lag2 - 0.25) <= 0.02
        assert abs(diag - 1.0) <= 0.02

    def test_iid_moments(self):
        A = generate_matrix(GeneratorConfig(M=200, N=400), rng_from(4))
        assert abs(A.mean()) < 0.01
        assert abs(A.var() - 1.0) < 0.02
        assert abs(np.mean(A[:, :-1] * A[:, 1:])) < 0.02

    def test_seeded_determinism(self):
        cfg = GeneratorConfig(M=75, N=150)
        np.testing.assert_array_equal(generate_matrix(cfg, rng_from(42)), generate_matrix(cfg, rng_from(42)))
        assert not np.array_equal(generate_matrix(cfg, rng_from(42)), generate_matrix(cfg, rng_from(43)))


class TestInstance:
    def test_noiseless_exact(self):
        prob = build_instance(GeneratorConfig(noise_variance=0.0, seed=1), 10.0)
        assert np.linalg.norm(prob.y - prob.A @ prob.x_star) == 0.0

    def test_default_setting(self):
        prob = build_instance(GeneratorConfig(M=75, N=150, noise_variance=0.1,
                                              matrix_kind="correlated_gaussian", rho=0.5), 10.0)
        assert prob.A.shape == (75, 150) and prob.y.shape == (75,) and prob.lam == 10.0
        np.testing.assert_allclose(prob.y, prob.A @ prob.x_star + prob.noise, rtol=0, atol=0)

    def test_zero_signal_gives_pure_noise(self):
        cfg = GeneratorConfig(M=5, N=10, nonzero_ratio=1e-12, seed=8)
        prob = build_instance(cfg, 1.0)
        assert not prob.x_star.any()
        np.testing.assert_array_equal(prob.y, prob.noise)

    def test_same_seed_bit_identical(self):
        cfg = GeneratorConfig(matrix_kind="correlated_gaussian", rho=0.5, seed=77)
        a, b = build_instance(cfg, 10.0), build_instance(cfg, 10.0)
        for f in ("A", "y", "x_star", "noise"):
            np.testing.assert_array_equal(getattr(a, f), getattr(b, f))

    def test_noise_level_does_not_change_matrix_or_signal(self):
        a = build_instance(GeneratorConfig(noise_variance=0.1, seed=5), 1.0)
        b = build_instance(GeneratorConfig(noise_variance=0.5, seed=5), 1.0)
        np.testing.assert_array_equal(a.A, b.A)
        np.testing.assert_array_equal(a.x_star, b.x_star)

    def test_noise_variance(self):
        v = generate_noise(GeneratorConfig(M=100_000, N=100_001), rng_from(6))
        assert abs(v.var() - 0.1) < 0.003

    def test_rejects_nonpositive_lambda(self):
        with pytest.raises(ConfigError):
            build_instance(GeneratorConfig(), 0.0)
