"""First-order expansions of subspace and frequency estimation errors.

Everything here is evaluated against exact (noise-free) quantities and is
linear in a given noise realisation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGapError, DimensionError, UnsupportedVariantError
from .esprit import SLS_BASES, VARIANTS, SelectionPair, selection_matrices
from .signal_model import Scenario, array_steering_matrix, noiseless_tensor
from .subspace import (
    GAP_TOL,
    SubspaceSet,
    TensorSubspaceSet,
    fba_extend_tensor,
    hosvd_subspace,
    svd_subspace,
)
from .tensor_core import kron_all, unfold, vec


@dataclass(frozen=True)
class FirstOrderSubspaceError:
    """Leakage term ``Un Gamma_n`` and, optionally, the in-subspace rotation ``Us Gamma_s``."""

    delta_us: np.ndarray
    gamma_n: np.ndarray
    delta_us_basis: np.ndarray | None = None
    gamma_s: np.ndarray | None = None
    d_matrix: np.ndarray | None = None

    @property
    def total(self) -> np.ndarray:
        if self.delta_us_basis is None:
            return self.delta_us
        return self.delta_us + self.delta_us_basis


@dataclass(frozen=True)
class FirstOrderFrequencyError:
    delta_mu: np.ndarray
    variant: str


def gap_weights(sigma: np.ndarray) -> np.ndarray:
    """``D[k, l] = 1 / (sigma_l^2 - sigma_k^2)`` off the diagonal, zero on it."""
    s2 = np.asarray(sigma, dtype=float) ** 2
    diff = s2[None, :] - s2[:, None]
    off = ~np.eye(len(s2), dtype=bool)
    if np.any(np.abs(diff[off]) <= GAP_TOL * max(s2.max(initial=0.0), np.finfo(float).tiny)):
        raise DegenerateGapError("repeated signal singular values, basis perturbation undefined")
    out = np.zeros_like(diff)
    out[off] = 1.0 / diff[off]
    return out


def svd_expansion(
    noise: np.ndarray, exact: SubspaceSet, include_basis: bool = False
) -> FirstOrderSubspaceError:
    """First-order error of the dominant left singular vectors under additive ``noise``."""
    noise = np.asarray(noise)
    if noise.shape != (exact.Us.shape[0], exact.Vs.shape[0]):
        raise DimensionError(f"noise shape {noise.shape} does not match the exact SVD")
    inv_sigma = 1.0 / exact.sigma_s
    gamma_n = (exact.Un.conj().T @ noise @ exact.Vs) * inv_sigma[None, :]
    delta = exact.Un @ gamma_n
    if not include_basis:
        return FirstOrderSubspaceError(delta_us=delta, gamma_n=gamma_n)
    dmat = gap_weights(exact.sigma_s)
    inner = exact.Us.conj().T @ noise @ exact.Vs
    herm = inner * exact.sigma_s[None, :] + exact.sigma_s[:, None] * inner.conj().T
    gamma_s = dmat * herm
    return FirstOrderSubspaceError(
        delta_us=delta,
        gamma_n=gamma_n,
        delta_us_basis=exact.Us @ gamma_s,
        gamma_s=gamma_s,
        d_matrix=dmat,
    )


def mode_expansion(noise: np.ndarray, exact_mode: SubspaceSet, mode: int) -> np.ndarray:
    """First-order error of the dominant basis of the ``mode``-th unfolding (noise-subspace part)."""
    unf = unfold(noise, mode)
    return exact_mode.Un @ (exact_mode.Un.conj().T @ unf @ exact_mode.Vs) / exact_mode.sigma_s[None, :]


def hosvd_expansion(
    noise: np.ndarray, exact: TensorSubspaceSet, include_basis: bool = False
) -> np.ndarray:
    """First-order error of the tensor signal basis ``(T1 kron ... kron TR) Us``."""
    noise = np.asarray(noise)
    us = exact.svd.Us
    delta_us = svd_expansion(noise.reshape(-1, noise.shape[-1]), exact.svd, include_basis).total
    out = exact.kron_projection @ delta_us
    for r, ms in enumerate(exact.mode_sets):
        du = mode_expansion(noise, ms, r + 1)
        factors = list(exact.projections)
        factors[r] = du @ ms.Us.conj().T
        out = out + kron_all(factors) @ us
    return out


@dataclass(frozen=True)
class ExactModel:
    """Noise-free quantities a variant's expansions are evaluated against.

    ``Q`` holds right eigenvectors of every invariance solution; they are the
    same for all array dimensions in the noise-free case. ``P = Q^{-1}``.
    ``eigenvalues[k, r] = exp(j mu_k^(r))``.
    """

    variant: str
    dims: tuple[int, ...]
    fba: bool
    svd: SubspaceSet
    tensor: TensorSubspaceSet | None
    selections: list[SelectionPair]
    Q: np.ndarray
    P: np.ndarray
    eigenvalues: np.ndarray
    symbols: np.ndarray

    @property
    def Us(self) -> np.ndarray:
        return self.svd.Us

    @property
    def d(self) -> int:
        return self.Q.shape[0]

    def psi(self, r: int = 0) -> np.ndarray:
        return self.Q @ np.diag(self.eigenvalues[:, r]) @ self.P


def exact_model(
    s: Scenario, symbols: np.ndarray, variant: str, sls_base: str = "standard"
) -> ExactModel:
    """Build the exact model of ``variant`` from the noise-free data of ``s``."""
    if variant not in VARIANTS:
        raise UnsupportedVariantError(f"unknown variant {variant!r}")
    if variant == "sls":
        if s.R != 1:
            raise UnsupportedVariantError("SLS is defined for one-dimensional arrays only")
        if sls_base not in SLS_BASES:
            raise UnsupportedVariantError(f"unknown SLS base {sls_base!r}")
    fba = variant in ("unitary", "unitary_tensor") or (variant == "sls" and sls_base == "unitary")
    x0 = noiseless_tensor(s, symbols)
    if fba:
        x0 = fba_extend_tensor(x0)
    tensor = None
    if variant in ("standard_tensor", "unitary_tensor"):
        tensor = hosvd_subspace(x0, s.d)
        svd = tensor.svd
    else:
        svd = svd_subspace(x0.reshape(-1, x0.shape[-1]), s.d)
    a = array_steering_matrix(s)
    q = svd.Us.conj().T @ a
    return ExactModel(
        variant=variant,
        dims=s.M,
        fba=fba,
        svd=svd,
        tensor=tensor,
        selections=[selection_matrices(s.M, r + 1) for r in range(s.R)],
        Q=q,
        P=np.linalg.inv(q),
        eigenvalues=np.exp(1j * s.mu),
        symbols=np.asarray(symbols),
    )


def shift_operator(model: ExactModel, r: int, k: int) -> np.ndarray:
    """``(J1 Us)^+ (J2 / lambda_k - J1)`` for dimension ``r`` (0-based) and source ``k``."""
    sel = model.selections[r]
    lam = model.eigenvalues[k, r]
    return np.linalg.pinv(sel.j1_eff @ model.Us) @ (sel.j2_eff / lam - sel.j1_eff)


def r_vector(model: ExactModel, r: int, k: int) -> np.ndarray:
    """``q_k kron (B^T p_k)`` with ``B`` the shift operator, so ``dmu = Im(r^T vec(dU))``."""
    b = shift_operator(model, r, k)
    return np.kron(model.Q[:, k], b.T @ model.P[k, :])


def r_vector_sls(model: ExactModel, k: int) -> np.ndarray:
    """Sensitivity of the single-step SLS estimate of source ``k`` to ``vec(dUs)``."""
    sel = model.selections[0]
    j1, j2 = sel.j1_eff, sel.j2_eff
    us = model.Us
    d = model.d
    psi = model.psi(0)
    lam = model.eigenvalues[k, 0]
    j1us = j1 @ us
    j1us_pinv = np.linalg.pinv(j1us)
    eye_d = np.eye(d)
    f = np.hstack([np.kron(eye_d, j1us), np.kron(psi.T, j1) - np.kron(eye_d, j2)])
    proj = j1us @ j1us_pinv
    w_ru = np.kron(psi.T, j1) + np.kron(eye_d, proj @ j2) - np.kron(psi.T, proj @ j1) - np.kron(eye_d, j2)
    qk, pk = model.Q[:, k], model.P[k, :]
    ls_part = np.kron(qk, pk @ j1us_pinv @ (j2 / lam - j1))
    left = np.kron(qk, pk @ j1us.conj().T / lam)
    correction = np.linalg.solve((f @ f.conj().T).T, left) @ w_ru
    return ls_part - correction


def sensitivity_vectors(model: ExactModel) -> np.ndarray:
    """Array ``[k, r, :]`` of vectors with ``dmu_k^(r) = Im(v^T vec(dU))``."""
    d, R = model.eigenvalues.shape
    out = np.empty((d, R, model.Us.size), dtype=complex)
    for k in range(d):
        for r in range(R):
            out[k, r] = r_vector_sls(model, k) if model.variant == "sls" else r_vector(model, r, k)
    return out


def subspace_error(noise: np.ndarray, model: ExactModel, include_basis: bool = False) -> np.ndarray:
    """First-order error of the variant's signal basis for a noise tensor."""
    noise = np.asarray(noise)
    if model.fba:
        noise = fba_extend_tensor(noise)
    if model.tensor is not None:
        return hosvd_expansion(noise, model.tensor, include_basis)
    return svd_expansion(noise.reshape(-1, noise.shape[-1]), model.svd, include_basis).total


def dmu_first_order(noise: np.ndarray, model: ExactModel) -> FirstOrderFrequencyError:
    """First-order frequency errors ``d x R`` for one noise tensor."""
    du = subspace_error(noise, model)
    d, R = model.eigenvalues.shape
    out = np.empty((d, R))
    if model.variant == "sls":
        v = vec(du)
        for k in range(d):
            out[k, 0] = np.imag(r_vector_sls(model, k) @ v)
    else:
        for r in range(R):
            for k in range(d):
                b = shift_operator(model, r, k)
                out[k, r] = np.imag(model.P[k, :] @ b @ du @ model.Q[:, k])
    return FirstOrderFrequencyError(delta_mu=out, variant=model.variant)

