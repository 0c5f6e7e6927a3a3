"""Analytical mean square errors, deterministic Cramer-Rao bounds and efficiencies."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, IllPosedError, UnsupportedVariantError
from .perturbation import ExactModel, sensitivity_vectors
from .signal_model import NoiseSpec, Scenario, array_steering_matrix, steering_derivatives
from .subspace import SubspaceSet, TensorSubspaceSet
from .tensor_core import commutation_permutation, exchange_matrix


@dataclass
class MseReport:
    """Per-source, per-dimension figures of merit (``d x R`` arrays)."""

    mse: np.ndarray
    crb: np.ndarray | None = None
    effective_snr: float | None = None
    sensitivity: np.ndarray | None = None
    weight: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    @property
    def mse_total(self) -> float:
        return float(np.sum(self.mse))

    @property
    def efficiency(self) -> np.ndarray | None:
        if self.crb is None:
            return None
        return efficiency(self.crb, self.mse)


def build_w_mat(exact: SubspaceSet) -> np.ndarray:
    """Linear map from ``vec(N)`` to ``vec(dUs)`` for the SVD-based basis."""
    if np.any(exact.sigma_s <= 0):
        raise IllPosedError("signal singular values must be positive")
    left = exact.Vs.T / exact.sigma_s[:, None]
    return np.kron(left, exact.noise_projector)


def _stacked_columns(t: np.ndarray, eye_size: int) -> np.ndarray:
    """Vertical stack of ``I_{eye_size} kron t[:, m]`` over the columns ``m`` of ``t``."""
    eye = np.eye(eye_size)
    return np.vstack([np.kron(eye, t[:, [m]]) for m in range(t.shape[1])])


def build_w_ten(exact: TensorSubspaceSet) -> np.ndarray:
    """Linear map from ``vec(N)`` to ``vec(dU)`` for the tensor basis of a two-dimensional array."""
    if len(exact.mode_sets) != 2:
        raise UnsupportedVariantError("the tensor weight matrix is available for two array dimensions only")
    t1, t2 = exact.projections
    m1, m2 = t1.shape[0], t2.shape[0]
    m = m1 * m2
    svd = exact.svd
    ncols = svd.Vs.shape[0]
    us = svd.Us
    # the snapshot-mode unfolding is X^T: its left factor is conj(Vs), its noise projector Un Un^H
    term1 = np.kron(svd.Vs.T / svd.sigma_s[:, None], np.kron(t1, t2) @ svd.noise_projector)
    lift = np.kron(us.T, np.eye(m))
    tbar1 = np.kron(_stacked_columns(t1, m2), np.eye(m2))
    tbar2 = np.kron(np.eye(m1), _stacked_columns(t2, m1))

    def mode_block(ms: SubspaceSet) -> np.ndarray:
        left = ms.Us.conj() @ np.diag(1.0 / ms.sigma_s) @ ms.Vs.T
        return np.kron(left, ms.noise_projector)

    ms1, ms2 = exact.mode_sets
    # right factor commutation_matrix(m1 * ncols, m2) reorders vec(N) into vec of the first-mode unfolding
    to_mode1 = commutation_permutation(m2, m1 * ncols)
    term2 = lift @ tbar2 @ mode_block(ms1)[:, to_mode1]
    term3 = lift @ tbar1 @ mode_block(ms2)
    return term1 + term2 + term3


def fba_noise_statistics(R_nn: np.ndarray, C_nn: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Covariance and pseudo-covariance of ``[n; Pi conj(n)]``."""
    pi = exchange_matrix(R_nn.shape[0])
    r = np.block([[R_nn, C_nn @ pi], [pi @ C_nn.conj(), pi @ R_nn.conj() @ pi]])
    c = np.block([[C_nn, R_nn @ pi], [pi @ R_nn.conj(), pi @ C_nn.conj() @ pi]])
    return r, c


def quadratic_mse(z: np.ndarray, R_nn: np.ndarray, C_nn: np.ndarray) -> float:
    """``E[Im(z^T n)^2]`` for zero-mean ``n`` with covariance ``R_nn`` and pseudo-covariance ``C_nn``."""
    return 0.5 * float(np.real(z.conj() @ R_nn.T @ z) - np.real(z @ C_nn @ z))


def white_mse(z: np.ndarray, variance: float, fba: bool) -> float:
    """Closed shortcut of :func:`quadratic_mse` for white circular noise."""
    energy = float(np.vdot(z, z).real)
    if not fba:
        return 0.5 * variance * energy
    # after forward-backward extension the pseudo-covariance is variance times an exchange matrix
    return 0.5 * variance * (energy - float(np.real(z @ z[::-1])))


def weight_matrix(model: ExactModel) -> np.ndarray:
    if model.tensor is not None:
        return build_w_ten(model.tensor)
    return build_w_mat(model.svd)


def projected_sensitivities(model: ExactModel) -> np.ndarray:
    """Array ``[k, r, :]`` of ``W^T r_k^(r)``, so ``dmu_k^(r) = Im(z^T vec(N))``."""
    w = weight_matrix(model)
    return np.einsum("krm,mn->krn", sensitivity_vectors(model), w)


def scaled_identity_mse(z: np.ndarray, variance: float, kappa: float, fba: bool) -> float:
    """:func:`quadratic_mse` for ``R_nn = variance I`` and ``C_nn = kappa variance I``.

    Forward-backward statistics are applied implicitly, which keeps the cost
    linear in the length of ``z``.
    """
    energy = float(np.vdot(z, z).real)
    if not fba:
        return 0.5 * variance * (energy - kappa * float(np.real(z @ z)))
    half = z.shape[0] // 2
    a, b = z[:half], z[half:]
    b_rev = b[::-1]
    cross_h = float(np.real(np.vdot(a, b_rev)))
    cross = float(np.real(a @ b_rev))
    self_terms = float(np.real(a @ a + b @ b))
    return 0.5 * variance * (energy + 2 * kappa * cross_h - kappa * self_terms - 2 * cross)


def analytical_mse(model: ExactModel, noise: NoiseSpec, use_shortcut: bool = True) -> MseReport:
    """First-order MSE of every frequency estimate of ``model`` under ``noise``.

    Forward-backward variants substitute the extended noise statistics; with
    ``use_shortcut`` white noise avoids forming them explicitly.
    """
    w = weight_matrix(model)
    sens = sensitivity_vectors(model)
    d, R = sens.shape[:2]
    n_in = w.shape[1]
    base = n_in // 2 if model.fba else n_in
    z_all = np.einsum("krm,mn->krn", sens, w)
    mse = np.empty((d, R))
    if noise.is_white and use_shortcut:
        for k in range(d):
            for r in range(R):
                mse[k, r] = white_mse(z_all[k, r], noise.variance, model.fba)
    else:
        r_nn, c_nn = noise.covariances(base)
        if model.fba:
            r_nn, c_nn = fba_noise_statistics(r_nn, c_nn)
        for k in range(d):
            for r in range(R):
                mse[k, r] = quadratic_mse(z_all[k, r], r_nn, c_nn)
    return MseReport(mse=mse, sensitivity=sens, weight=w)


def effective_snr(symbols: np.ndarray, variance: float) -> float:
    """``N * P_T / variance`` with the empirical total power ``P_T = ||S||_F^2 / N``."""
    return float(np.linalg.norm(symbols) ** 2 / variance)


def crb_deterministic(s: Scenario, symbols: np.ndarray, variance: float) -> MseReport:
    """Deterministic Cramer-Rao bound on every ``mu_k^(r)`` (returned as ``d x R``)."""
    symbols = np.asarray(symbols)
    if symbols.shape != (s.d, s.N):
        raise DimensionError(f"symbols must be {s.d} x {s.N}")
    a = array_steering_matrix(s)
    if np.linalg.matrix_rank(a) < s.d:
        raise IllPosedError("steering matrix is rank deficient")
    dmat = np.hstack(steering_derivatives(s))
    proj = np.eye(s.M_total) - a @ np.linalg.solve(a.conj().T @ a, a.conj().T)
    rs = symbols @ symbols.conj().T / s.N
    fisher = np.real((dmat.conj().T @ proj @ dmat) * np.kron(np.ones((s.R, s.R)), rs.T))
    if np.linalg.cond(fisher) > 1e14:
        raise IllPosedError("Fisher information is singular")
    cov = variance / (2.0 * s.N) * np.linalg.inv(fisher)
    crb = np.diag(cov).reshape(s.R, s.d).T
    return MseReport(mse=crb.copy(), crb=crb, extras={"covariance": cov})


def ls_mse_single_source(dims: tuple[int, ...] | list[int], snr: float) -> np.ndarray:
    """Per-dimension LS-ESPRIT MSE for one source at effective SNR ``snr``."""
    dims = np.asarray(dims, dtype=float)
    total = np.prod(dims)
    return dims / (total * (dims - 1) ** 2) / snr


def sls_mse_single_source(m: int, snr: float) -> float:
    """Single-step SLS-ESPRIT MSE for one source on an ``m``-element uniform linear array."""
    poly = m**4 - 2 * m**3 + 24 * m**2 - 22 * m + 23
    return 6.0 * poly / (m * (m**2 + 11) ** 2 * (m - 1) ** 2) / snr


def crb_single_source(dims: tuple[int, ...] | list[int], snr: float) -> np.ndarray:
    dims = np.asarray(dims, dtype=float)
    return 6.0 / (np.prod(dims) * (dims**2 - 1)) / snr


def single_source_closed_forms(
    dims: tuple[int, ...] | list[int], snr: float, variant: str = "standard"
) -> MseReport:
    """Closed-form MSE, CRB and efficiency for one source (``1 x R`` arrays)."""
    dims = tuple(int(m) for m in dims)
    crb = crb_single_source(dims, snr)[None, :]
    if variant in ("standard", "unitary", "standard_tensor", "unitary_tensor"):
        if variant.endswith("tensor") and len(dims) != 2:
            raise UnsupportedVariantError("tensor closed forms are stated for two array dimensions")
        mse = ls_mse_single_source(dims, snr)[None, :]
    elif variant == "sls":
        if len(dims) != 1:
            raise UnsupportedVariantError("SLS closed form is one-dimensional")
        mse = np.array([[sls_mse_single_source(dims[0], snr)]])
    else:
        raise UnsupportedVariantError(f"unknown variant {variant!r}")
    return MseReport(mse=mse, crb=crb, effective_snr=snr)


def efficiency_ls(m: int) -> float:
    return 6.0 * (m - 1) / (m * (m + 1))


def efficiency_sls(m: int) -> float:
    poly = m**4 - 2 * m**3 + 24 * m**2 - 22 * m + 23
    return (m**2 + 11) ** 2 * (m - 1) / ((m + 1) * poly)


def efficiency(crb: np.ndarray | float, mse: np.ndarray | float) -> np.ndarray:
    mse = np.asarray(mse, dtype=float)
    if np.any(mse == 0):
        raise ZeroDivisionError("efficiency undefined for zero MSE")
    return np.asarray(crb, dtype=float) / mse


def g_matrix(m: int) -> np.ndarray:
    """``(1/m) ones + 2 I - J1 J2^H - J2 J1^H`` of size ``(m-1) x (m-1)``."""
    eye = np.eye(m)
    j1, j2 = eye[:-1], eye[1:]
    return np.ones((m - 1, m - 1)) / m + 2 * np.eye(m - 1) - j1 @ j2.T - j2 @ j1.T


def g_inverse_formula(m: int) -> np.ndarray:
    idx = np.arange(1, m)
    m1, m2 = np.meshgrid(idx, idx, indexing="ij")
    common = 3.0 * m1 * (m - m1) * m2 * (m - m2) / (m**2 + 11)
    lower = (m - m1) * m2 - common
    upper = m1 * (m - m2) - common
    return np.where(m1 >= m2, lower, upper) / m


@dataclass(frozen=True)
class SlsInternals:
    gamma: float
    g_d: np.ndarray
    g_inv: np.ndarray
    g: np.ndarray


def sls_closed_form_internals(m: int) -> SlsInternals:
    """Scalars and matrices behind the single-source SLS closed form."""
    if m < 2:
        raise DimensionError("need at least two sensors")
    idx = np.arange(1, m + 1)
    return SlsInternals(
        gamma=(m - 1) * m * (m + 1) / (m**2 + 11),
        g_d=6.0 * (2 * idx - m - 1) / (m**2 + 11),
        g_inv=g_inverse_formula(m),
        g=g_matrix(m),
    )
