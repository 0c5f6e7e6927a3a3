import numpy as np
import pytest

from esprit_perf.errors import ConfigurationError, DimensionError
from esprit_perf.signal_model import (
    NoiseSpec,
    Scenario,
    array_steering_matrix,
    augmented_real_covariance,
    draw_noise_vectors,
    generate_noise,
    generate_symbols,
    mode_steering_matrices,
    noiseless_tensor,
    steering_derivatives,
    steering_matrix,
    steering_tensor,
    steering_vector,
    symbol_covariance,
    synthesize,
)
from esprit_perf.tensor_core import khatri_rao, multi_mode_product, unfold, vec


def test_steering_vector_examples():
    assert np.allclose(steering_vector(0.0, 3), [1, 1, 1])
    assert np.allclose(steering_vector(np.pi, 2), [1, -1])
    rng = np.random.default_rng(0)
    for mu in rng.uniform(-np.pi, np.pi, 5):
        assert np.isclose(np.linalg.norm(steering_vector(mu, 7)) ** 2, 7)


def test_scenario_validation():
    with pytest.raises(ConfigurationError):
        Scenario(M=(1,), N=3, mu=[0.1])
    with pytest.raises(ConfigurationError):
        Scenario(M=(4,), N=3, mu=[4.0])
    with pytest.raises(ConfigurationError):
        Scenario(M=(4,), N=3, mu=[0.1], rho=1.0)
    with pytest.raises(ConfigurationError):
        Scenario(M=(4, 4), N=3, mu=[[0.1, 0.2, 0.3]])
    s = Scenario(M=(4, 5), N=3, mu=[[0.1, 0.2], [0.3, 0.4]])
    assert (s.R, s.d, s.M_total, s.tensor_dims) == (2, 2, 20, (4, 5, 3))


def test_steering_tensor_rank_one_for_single_source():
    s = Scenario(M=(3, 4), N=2, mu=[[0.3, -0.7]])
    t = steering_tensor(s)[..., 0]
    a1, a2 = steering_vector(0.3, 3), steering_vector(-0.7, 4)
    assert np.allclose(t, np.outer(a1, a2))


def test_steering_tensor_unfolding_is_khatri_rao():
    rng = np.random.default_rng(1)
    s = Scenario(M=(3, 4), N=2, mu=rng.uniform(-np.pi, np.pi, (3, 2)))
    a1, a2 = mode_steering_matrices(s)
    assert np.abs(unfold(steering_tensor(s), 3).T - khatri_rao(a1, a2)).max() <= 1e-12
    assert np.abs(array_steering_matrix(s) - khatri_rao(a1, a2)).max() <= 1e-12


def test_steering_tensor_cp_form_matches_concatenation():
    s = Scenario(M=(3, 4), N=2, mu=[[0.2, 0.5], [-1.0, 1.3]])
    a1, a2 = mode_steering_matrices(s)
    ident = np.zeros((2, 2, 2))
    ident[0, 0, 0] = ident[1, 1, 1] = 1.0
    cp = multi_mode_product(ident, {1: a1, 2: a2})
    assert np.allclose(cp, steering_tensor(s), atol=1e-12)


def test_steering_derivatives_finite_difference():
    s = Scenario(M=(3, 4), N=2, mu=[[0.2, 0.5], [-1.0, 1.3]])
    h = 1e-6
    for r, deriv in enumerate(steering_derivatives(s)):
        for k in range(s.d):
            mu_p = s.mu.copy()
            mu_p[k, r] += h
            mu_m = s.mu.copy()
            mu_m[k, r] -= h
            fd = (
                array_steering_matrix(Scenario(M=s.M, N=2, mu=mu_p))[:, k]
                - array_steering_matrix(Scenario(M=s.M, N=2, mu=mu_m))[:, k]
            ) / (2 * h)
            assert np.allclose(deriv[:, k], fd, atol=1e-8)


def test_symbols_uncorrelated():
    s = Scenario(M=(4,), N=10_000, mu=[0.1, 0.5])
    x = generate_symbols(s, 0)
    corr = np.abs(x[0] @ x[1].conj()) / np.sqrt(np.vdot(x[0], x[0]).real * np.vdot(x[1], x[1]).real)
    assert corr < 0.1


def test_symbols_correlated_magnitude():
    s = Scenario(M=(4,), N=100_000, mu=[0.1, 0.5, 0.9], rho=0.97)
    x = generate_symbols(s, 1)
    r = x @ x.conj().T / s.N
    for i in range(3):
        for j in range(i + 1, 3):
            c = abs(r[i, j]) / np.sqrt(r[i, i].real * r[j, j].real)
            assert abs(c - 0.97) < 0.03


def test_symbols_total_power():
    s = Scenario(M=(4,), N=100_000, mu=[0.1, 0.5], rho=0.5, power=2.0)
    x = generate_symbols(s, 2)
    assert abs(np.linalg.norm(x) ** 2 / s.N - 2 * 2.0) < 0.05 * 4.0


def test_symbol_covariance_positive_for_rho_below_one():
    for d in range(1, 9):
        for rho in (0.0, 0.5, 0.9):
            phases = np.zeros((d, d))
            assert np.linalg.eigvalsh(symbol_covariance(d, rho, phases)).min() > 0


def test_symbols_reproducible():
    s = Scenario(M=(4,), N=5, mu=[0.1, 0.5], rho=0.9)
    assert np.array_equal(generate_symbols(s, 7), generate_symbols(s, 7))


def test_white_noise_moments():
    x = draw_noise_vectors(NoiseSpec.white(1.0), 3, 100_000, 0)
    r = x.T @ x.conj() / len(x)
    c = x.T @ x / len(x)
    assert np.abs(r - np.eye(3)).max() < 0.05
    assert np.abs(c).max() < 0.05


def test_fully_noncircular_noise_is_real():
    r = np.array([[2.0, 0.5], [0.5, 1.0]], dtype=complex)
    x = draw_noise_vectors(NoiseSpec.general(r, r), 2, 1000, 1)
    assert np.abs(x.imag).max() < 1e-12


def test_general_noise_moments_within_three_standard_errors():
    rng = np.random.default_rng(2)
    g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    h = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    # n = g w + h w* for circular w yields a valid (R, C) pair
    r_nn = g @ g.conj().T + h @ h.conj().T
    c_nn = g @ h.T + h @ g.T
    spec = NoiseSpec.general(r_nn, c_nn)
    count = 200_000
    x = draw_noise_vectors(spec, 4, count, 3)
    for est, target, prods in (
        (x.T @ x.conj() / count, r_nn, x[:, :, None] * x[:, None, :].conj()),
        (x.T @ x / count, c_nn, x[:, :, None] * x[:, None, :]),
    ):
        se_re = prods.real.std(axis=0) / np.sqrt(count)
        se_im = prods.imag.std(axis=0) / np.sqrt(count)
        assert np.all(np.abs(est.real - target.real) <= 3 * se_re + 1e-12)
        assert np.all(np.abs(est.imag - target.imag) <= 3 * se_im + 1e-12)


def test_noise_spec_validation():
    with pytest.raises(ConfigurationError):
        NoiseSpec.white(-1.0)
    with pytest.raises(ConfigurationError):
        NoiseSpec.general(np.eye(2), 2 * np.eye(2))  # |C| > R is not a valid second-order pair
    with pytest.raises(ConfigurationError):
        NoiseSpec.general(np.array([[1, 1j], [1j, 1]]), np.zeros((2, 2)))
    with pytest.raises(ConfigurationError):
        NoiseSpec(kind="pink")


def test_augmented_covariance_blocks():
    r = np.array([[2.0, 0.3 + 0.2j], [0.3 - 0.2j, 1.0]])
    c = np.zeros((2, 2), dtype=complex)
    aug = augmented_real_covariance(r, c)
    assert np.allclose(aug[:2, :2], 0.5 * r.real)
    assert np.allclose(aug[2:, 2:], 0.5 * r.real)
    assert np.allclose(aug, aug.T)


def test_generate_noise_layout_matches_vec_convention():
    spec = NoiseSpec.general(np.diag(np.arange(1.0, 13.0)).astype(complex), np.zeros((12, 12), complex))
    x = np.stack([vec(generate_noise(spec, (2, 3, 2), s).reshape(6, 2)) for s in range(20_000)])
    var = np.mean(np.abs(x) ** 2, axis=0)
    assert np.allclose(var, np.arange(1.0, 13.0), rtol=0.05)


def test_synthesize_noise_free_and_views():
    s = Scenario(M=(3, 4), N=5, mu=[[0.2, 0.5], [-1.0, 1.3]], rho=0.5)
    obs = synthesize(s, NoiseSpec.white(0.0), 4)
    assert np.array_equal(obs.X, obs.X0)
    assert np.array_equal(unfold(obs.x_tensor, 3).T, obs.X)
    assert np.array_equal(obs.x_tensor, obs.x0_tensor + obs.noise_tensor)
    sv = np.linalg.svd(obs.X0, compute_uv=False)
    assert np.sum(sv > 1e-10 * sv[0]) == s.d
    assert np.allclose(obs.X0, array_steering_matrix(s) @ obs.symbols, atol=1e-12)


def test_synthesize_single_source_outer_product():
    s = Scenario(M=(5,), N=4, mu=[0.4])
    obs = synthesize(s, NoiseSpec.white(0.1), 5)
    assert np.allclose(obs.X0, np.outer(steering_vector(0.4, 5), obs.symbols[0]), atol=1e-12)


def test_noiseless_tensor_shape_check():
    s = Scenario(M=(3,), N=4, mu=[0.4])
    with pytest.raises(DimensionError):
        noiseless_tensor(s, np.ones((2, 4)))


def test_steering_matrix_columns():
    mu = np.array([0.1, -0.4])
    a = steering_matrix(mu, 4)
    assert np.allclose(a[:, 1], steering_vector(-0.4, 4))
