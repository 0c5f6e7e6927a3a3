import itertools
import warnings

import numpy as np
import pytest

from esprit_perf.errors import (
    ConditioningWarning,
    DegenerateGeometryError,
    DimensionError,
    IllPosedError,
    PairingWarning,
    UnsupportedVariantError,
)
from esprit_perf.esprit import (
    VARIANTS,
    EigenStructure,
    eigen_structure,
    estimate,
    estimate_tensor,
    ls_solve_invariance,
    pair_modes,
    selection_matrices,
    sls_refine,
)
from esprit_perf.signal_model import NoiseSpec, Scenario, array_steering_matrix, steering_vector, synthesize
from esprit_perf.subspace import svd_subspace


def test_selection_matrices_small():
    sel = selection_matrices((2,), 1)
    assert np.array_equal(sel.j1, [[1, 0]])
    assert np.array_equal(sel.j2, [[0, 1]])
    sel = selection_matrices((3, 2), 1)
    assert sel.j1_eff.shape == (4, 6)
    assert np.array_equal(sel.j1_eff, np.kron(np.eye(1), np.kron(sel.j1, np.eye(2))))
    assert np.all(sel.j1_eff.sum(axis=1) == 1)
    with pytest.raises(DimensionError):
        selection_matrices((3,), 2)


def test_shift_invariance_of_steering_vectors():
    rng = np.random.default_rng(0)
    s = Scenario(M=(4, 3, 2), N=1, mu=rng.uniform(-np.pi, np.pi, (3, 3)))
    a = array_steering_matrix(s)
    for r in range(3):
        sel = selection_matrices(s, r + 1)
        for k in range(3):
            lhs = sel.j2_eff @ a[:, k]
            rhs = np.exp(1j * s.mu[k, r]) * sel.j1_eff @ a[:, k]
            assert np.abs(lhs - rhs).max() <= 1e-12


def test_ls_single_source_is_exponential():
    us = (steering_vector(0.9, 5) / np.sqrt(5))[:, None]
    st = ls_solve_invariance(us, selection_matrices((5,), 1))
    assert np.abs(st.psi[0, 0] - np.exp(0.9j)) <= 1e-12


def test_ls_three_sources_exact_and_similarity_invariant():
    s = Scenario(M=(8,), N=10, mu=[1.0, -0.2, 0.4], rho=0.5)
    obs = synthesize(s, NoiseSpec.white(0.0), 1)
    us = svd_subspace(obs.X0, 3).Us
    sel = selection_matrices(s, 1)
    lam = np.sort_complex(ls_solve_invariance(us, sel).eigenvalues)
    assert np.abs(np.sort(np.angle(lam)) - np.sort(s.mu[:, 0])).max() <= 1e-10
    rng = np.random.default_rng(2)
    t = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    lam_t = np.sort_complex(ls_solve_invariance(us @ t, sel).eigenvalues)
    assert np.abs(lam - lam_t).max() <= 1e-10


def test_ls_rank_deficiency_rejected():
    with pytest.raises(IllPosedError):
        ls_solve_invariance(np.ones((4, 2)), selection_matrices((4,), 1))


def test_eigen_structure_and_conditioning_warning():
    psi = np.diag([1.0, 2.0]) + 0j
    st = eigen_structure(psi)
    assert np.allclose(st.psi @ st.Q, st.Q @ np.diag(st.eigenvalues))
    assert np.allclose(st.P @ st.Q, np.eye(2))
    nearly_defective = np.array([[1.0, 1.0], [0.0, 1.0 + 1e-12]])
    with pytest.warns(ConditioningWarning):
        eigen_structure(nearly_defective)


def test_pairing_noise_free_two_sources():
    s = Scenario(M=(4, 5), N=6, mu=[[0.3, -0.9], [1.1, 0.8]], rho=0.3)
    obs = synthesize(s, NoiseSpec.white(0.0), 3)
    mu_hat = estimate(obs, s, "standard").mu_hat
    perms = list(itertools.permutations(range(2)))
    errs = [np.abs(mu_hat[list(p)] - s.mu).max() for p in perms]
    assert errs[int(np.argmin(errs))] <= 1e-10
    # the row order must keep each source's dimensions together
    for k in range(2):
        row = mu_hat[k]
        assert np.min(np.abs(s.mu - row).max(axis=1)) <= 1e-10


def test_pairing_high_snr_equals_min_error_permutation():
    s = Scenario(M=(5, 5), N=20, mu=[[0.3, -0.9], [1.1, 0.8], [-0.6, 0.2]], rho=0.3)
    obs = synthesize(s, NoiseSpec.white(1e-6), 4)
    mu_hat = estimate(obs, s, "standard_tensor").mu_hat
    costs = {p: np.sum((mu_hat[list(p)] - s.mu) ** 2) for p in itertools.permutations(range(3))}
    best = min(costs, key=costs.get)
    assert np.abs(mu_hat[list(best)] - s.mu).max() < 1e-2


def test_pairing_warning_on_inconsistent_modes():
    a = EigenStructure(psi=np.diag([1.0, 2.0]) + 0j, eigenvalues=np.array([1.0, 2.0]), Q=np.eye(2), P=np.eye(2))
    rot = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2)
    psi_b = rot @ np.diag([3.0, 4.0]) @ rot.T
    b = EigenStructure(psi=psi_b + 0j, eigenvalues=np.array([3.0, 4.0]), Q=rot, P=rot.T)
    with pytest.warns(PairingWarning):
        pair_modes([a, b])


@pytest.mark.parametrize("variant", VARIANTS)
def test_noise_free_exact_recovery_all_variants(variant):
    if variant == "sls":
        s = Scenario(M=(7,), N=6, mu=[1.0, -0.2, 0.4], rho=0.5)
    else:
        s = Scenario(M=(4, 5), N=6, mu=[[0.3, -0.9], [1.1, 0.8], [-0.5, 2.0]], rho=0.5)
    obs = synthesize(s, NoiseSpec.white(0.0), 5)
    mu_hat = estimate(obs, s, variant).mu_hat
    order = np.argsort(mu_hat[:, 0])
    assert np.abs(mu_hat[order] - s.mu[np.argsort(s.mu[:, 0])]).max() <= 1e-10


def test_single_source_any_variant_exact():
    for variant in VARIANTS:
        dims = (6,) if variant == "sls" else (3, 4)
        mu = [[0.5]] if variant == "sls" else [[0.5, -1.2]]
        s = Scenario(M=dims, N=3, mu=mu)
        obs = synthesize(s, NoiseSpec.white(0.0), 6)
        assert np.abs(estimate(obs, s, variant).mu_hat - s.mu).max() <= 1e-10


def test_unitary_runs_where_standard_cannot():
    s = Scenario(M=(8,), N=3, mu=[1.0, 0.7, -0.6, -0.3])
    obs = synthesize(s, NoiseSpec.white(1e-8), 7)
    with pytest.raises(DimensionError):
        estimate(obs, s, "standard")
    mu_hat = estimate(obs, s, "unitary").mu_hat
    assert np.abs(np.sort(mu_hat[:, 0]) - np.sort(s.mu[:, 0])).max() < 1e-3
    mu_sls = estimate(obs, s, "sls", sls_base="unitary").mu_hat
    assert np.abs(np.sort(mu_sls[:, 0]) - np.sort(s.mu[:, 0])).max() < 1e-3


def test_sls_noise_free_step_is_zero():
    s = Scenario(M=(6,), N=5, mu=[0.9, -0.4], rho=0.2)
    obs = synthesize(s, NoiseSpec.white(0.0), 8)
    us = svd_subspace(obs.X0, 2).Us
    sel = selection_matrices(s, 1)
    ls = ls_solve_invariance(us, sel)
    refined = sls_refine(us, sel, ls)
    assert np.abs(refined.psi - ls.psi).max() <= 1e-12


def test_sls_eigenvalues_invariant_under_unitary_diagonal_basis_change():
    s = Scenario(M=(6,), N=5, mu=[0.9, -0.4], rho=0.2)
    obs = synthesize(s, NoiseSpec.white(1e-3), 9)
    us = svd_subspace(obs.X, 2).Us
    sel = selection_matrices(s, 1)
    t = np.diag(np.exp(1j * np.array([0.3, -1.7])))
    a = np.sort_complex(sls_refine(us, sel, ls_solve_invariance(us, sel)).eigenvalues)
    b = np.sort_complex(sls_refine(us @ t, sel, ls_solve_invariance(us @ t, sel)).eigenvalues)
    assert np.abs(a - b).max() <= 1e-10


def test_sls_preconditions():
    us = np.linalg.qr(np.random.default_rng(0).standard_normal((3, 3)))[0] + 0j
    sel = selection_matrices((3,), 1)
    with pytest.raises(DimensionError):
        sls_refine(us, sel, eigen_structure(np.eye(3) + 0j))
    # a huge rank-one J1 Us swamps the well-conditioned shift block of F
    big = np.full((3, 1), 1e9, dtype=complex)
    with pytest.raises(DegenerateGeometryError):
        sls_refine(big, selection_matrices((3,), 1), eigen_structure(np.eye(1) + 0j))


def test_sls_rejects_multidimensional_arrays_and_unknown_variant():
    x = np.zeros((3, 3, 4), dtype=complex)
    with pytest.raises(UnsupportedVariantError):
        estimate_tensor(x, 1, "sls")
    with pytest.raises(UnsupportedVariantError):
        estimate_tensor(x, 1, "music")
    with pytest.raises(UnsupportedVariantError):
        estimate_tensor(np.zeros((3, 4), dtype=complex), 1, "sls", sls_base="forward")


def test_variants_agree_at_high_snr():
    s = Scenario(M=(5, 5), N=20, mu=[[0.7, -0.1], [0.9, -0.3], [1.1, -0.5]], rho=0.97)
    obs = synthesize(s, NoiseSpec.white(1e-8), 10)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        for variant in ("standard", "unitary", "standard_tensor", "unitary_tensor"):
            mu_hat = estimate(obs, s, variant).mu_hat
            order = np.argsort(mu_hat[:, 0])
            assert np.abs(mu_hat[order] - s.mu).max() < 1e-3
