"""ESPRIT-type estimators: standard, forward-backward, tensor and single-step SLS."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConditioningWarning,
    DegenerateGeometryError,
    DimensionError,
    IllPosedError,
    PairingWarning,
    UnsupportedVariantError,
)
from .signal_model import ObservationSet, Scenario
from .subspace import fba_extend, fba_extend_tensor, hosvd_subspace, svd_subspace
from .tensor_core import vec

VARIANTS = ("standard", "unitary", "standard_tensor", "unitary_tensor", "sls")
SLS_BASES = ("standard", "unitary")


@dataclass(frozen=True)
class SelectionPair:
    """Maximum-overlap subarray selections for one array dimension.

    ``j1``/``j2`` act on that dimension alone; ``j1_eff``/``j2_eff`` act on the
    whole stacked array and leave the other dimensions untouched.
    """

    mode: int
    j1: np.ndarray
    j2: np.ndarray
    j1_eff: np.ndarray
    j2_eff: np.ndarray


def selection_matrices(geometry: Scenario | tuple[int, ...] | list[int], mode: int) -> SelectionPair:
    """Selection pair for dimension ``mode`` (1-based)."""
    dims = geometry.M if isinstance(geometry, Scenario) else tuple(int(m) for m in geometry)
    if not 1 <= mode <= len(dims):
        raise DimensionError(f"mode {mode} out of range for {len(dims)} array dimensions")
    m = dims[mode - 1]
    if m < 2:
        raise DimensionError("a shift needs at least two sensors")
    eye = np.eye(m)
    j1, j2 = eye[:-1], eye[1:]
    before = np.eye(int(np.prod(dims[: mode - 1])))
    after = np.eye(int(np.prod(dims[mode:])))
    return SelectionPair(
        mode=mode,
        j1=j1,
        j2=j2,
        j1_eff=np.kron(before, np.kron(j1, after)),
        j2_eff=np.kron(before, np.kron(j2, after)),
    )


@dataclass(frozen=True)
class EigenStructure:
    """Invariance solution ``psi = Q diag(eigenvalues) P`` with ``P = Q^{-1}``."""

    psi: np.ndarray
    eigenvalues: np.ndarray
    Q: np.ndarray
    P: np.ndarray

    @property
    def mu(self) -> np.ndarray:
        return np.angle(self.eigenvalues)


def eigen_structure(psi: np.ndarray, cond_limit: float = 1e8) -> EigenStructure:
    lam, q = np.linalg.eig(psi)
    if np.linalg.cond(q) > cond_limit:
        warnings.warn("eigenvector matrix is ill-conditioned", ConditioningWarning, stacklevel=3)
    return EigenStructure(psi=psi, eigenvalues=lam, Q=q, P=np.linalg.inv(q))


def ls_solve_invariance(us: np.ndarray, sel: SelectionPair) -> EigenStructure:
    """Least-squares solution of ``J1 Us psi = J2 Us``."""
    lower = sel.j1_eff @ us
    upper = sel.j2_eff @ us
    if np.linalg.matrix_rank(lower) < us.shape[1]:
        raise IllPosedError("selected subarray basis is rank deficient")
    psi = np.linalg.lstsq(lower, upper, rcond=None)[0]
    return eigen_structure(psi)


@dataclass(frozen=True)
class EstimateReport:
    """Paired spatial frequencies (``d x R``) and the per-dimension eigenstructures."""

    mu_hat: np.ndarray
    structures: list[EigenStructure]
    variant: str


def pair_modes(structures: list[EigenStructure], variant: str = "standard") -> EstimateReport:
    """Read all dimensions off the eigenvectors of the first one.

    ``mu[k, r]`` is the phase of the k-th diagonal entry of ``Q1^{-1} psi_r Q1``.
    """
    first = structures[0]
    d = first.psi.shape[0]
    mu = np.empty((d, len(structures)))
    for r, st in enumerate(structures):
        if st.psi.shape != (d, d):
            raise DimensionError("all dimensions must share the model order")
        diag = first.P @ st.psi @ first.Q
        mu[:, r] = np.angle(np.diag(diag))
        off = diag - np.diag(np.diag(diag))
        if np.linalg.norm(off) > 0.1 * np.linalg.norm(st.psi):
            warnings.warn(
                f"pairing residual in dimension {r + 1} is large", PairingWarning, stacklevel=2
            )
    return EstimateReport(mu_hat=mu, structures=list(structures), variant=variant)


def sls_refine(us_hat: np.ndarray, sel: SelectionPair, psi_ls: EigenStructure) -> EigenStructure:
    """One linearised structured least-squares step without regularisation.

    The update ``[vec dPsi; vec dU]`` is the minimum-norm solution of
    ``F [vec dPsi; vec dU] = -r`` where ``r`` is the LS residual of the
    invariance equation and ``F`` its Jacobian at ``(us_hat, psi_ls)``.
    """
    d = us_hat.shape[1]
    m = us_hat.shape[0]
    if d > m - 1:
        raise DimensionError(f"SLS needs d <= M-1, got d={d}, M={m}")
    j1, j2 = sel.j1_eff, sel.j2_eff
    psi = psi_ls.psi
    eye_d = np.eye(d)
    f = np.hstack([np.kron(eye_d, j1 @ us_hat), np.kron(psi.T, j1) - np.kron(eye_d, j2)])
    residual = vec(j1 @ us_hat @ psi - j2 @ us_hat)
    gram = f @ f.conj().T
    if np.linalg.cond(gram) > 1e14:
        raise DegenerateGeometryError("SLS normal matrix F F^H is singular")
    step = -f.conj().T @ np.linalg.solve(gram, residual)
    dpsi = step[: d * d].reshape(d, d, order="F")
    return eigen_structure(psi + dpsi)


def signal_subspace(x_tensor: np.ndarray, d: int, variant: str) -> np.ndarray:
    """Estimated signal basis used by ``variant`` (SLS uses its LS base subspace)."""
    x = x_tensor.reshape(-1, x_tensor.shape[-1])
    if variant in ("standard", "sls"):
        return svd_subspace(x, d).Us
    if variant == "unitary":
        return svd_subspace(fba_extend(x), d).Us
    if variant == "standard_tensor":
        return hosvd_subspace(x_tensor, d).combined
    if variant == "unitary_tensor":
        return hosvd_subspace(fba_extend_tensor(x_tensor), d).combined
    raise UnsupportedVariantError(f"unknown variant {variant!r}")


def estimate_tensor(
    x_tensor: np.ndarray, d: int, variant: str, sls_base: str = "standard"
) -> EstimateReport:
    """Estimate ``d`` frequency tuples from an ``M1 x ... x MR x N`` observation."""
    dims = x_tensor.shape[:-1]
    if variant not in VARIANTS:
        raise UnsupportedVariantError(f"unknown variant {variant!r}")
    if variant == "sls":
        if len(dims) != 1:
            raise UnsupportedVariantError("SLS is defined for one-dimensional arrays only")
        if sls_base not in SLS_BASES:
            raise UnsupportedVariantError(f"unknown SLS base {sls_base!r}")
        us = signal_subspace(x_tensor, d, "unitary" if sls_base == "unitary" else "standard")
        sel = selection_matrices(dims, 1)
        refined = sls_refine(us, sel, ls_solve_invariance(us, sel))
        return pair_modes([refined], variant)
    us = signal_subspace(x_tensor, d, variant)
    structures = [ls_solve_invariance(us, selection_matrices(dims, r + 1)) for r in range(len(dims))]
    return pair_modes(structures, variant)


def estimate(
    obs: ObservationSet, s: Scenario, variant: str, sls_base: str = "standard"
) -> EstimateReport:
    return estimate_tensor(obs.x_tensor, s.d, variant, sls_base)
