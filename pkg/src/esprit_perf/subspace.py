"""Signal-subspace estimation from SVDs and HOSVDs, plus forward-backward averaging."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, DegenerateGapError, DimensionError
from .tensor_core import exchange_matrix, kron_all, multi_mode_product, unfold

GAP_TOL = 1e-12


@dataclass(frozen=True)
class SubspaceSet:
    """Partitioned SVD ``X = [Us Un] diag(sigma) [Vs Vn]^H``."""

    Us: np.ndarray
    Un: np.ndarray
    Vs: np.ndarray
    Vn: np.ndarray
    sigma_s: np.ndarray

    @property
    def d(self) -> int:
        return self.Us.shape[1]

    @property
    def noise_projector(self) -> np.ndarray:
        return self.Un @ self.Un.conj().T

    @property
    def signal_projector(self) -> np.ndarray:
        return self.Us @ self.Us.conj().T


def _check_gap(s: np.ndarray, d: int, what: str) -> None:
    if d < len(s) and s.size and abs(s[d - 1] - s[d]) <= GAP_TOL * max(s[0], np.finfo(float).tiny):
        raise DegenerateGapError(
            f"{what}: singular values {d} and {d + 1} coincide ({s[d - 1]:.3e}), subspace is not unique"
        )


def svd_subspace(x: np.ndarray, d: int) -> SubspaceSet:
    """Split the full SVD of ``x`` after the ``d`` dominant singular triplets."""
    x = np.asarray(x)
    if x.ndim != 2:
        raise DimensionError("svd_subspace expects a matrix")
    if not 1 <= d <= min(x.shape):
        raise DimensionError(f"model order {d} exceeds min{x.shape}")
    u, s, vh = np.linalg.svd(x, full_matrices=True)
    _check_gap(s, d, "svd_subspace")
    v = vh.conj().T
    return SubspaceSet(Us=u[:, :d], Un=u[:, d:], Vs=v[:, :d], Vn=v[:, d:], sigma_s=s[:d])


@dataclass(frozen=True)
class TensorSubspaceSet:
    """Per-mode SVDs of the spatial unfoldings and the projected signal basis."""

    mode_sets: list[SubspaceSet]
    projections: list[np.ndarray]
    combined: np.ndarray
    svd: SubspaceSet

    @property
    def kron_projection(self) -> np.ndarray:
        return kron_all(self.projections)


def default_mode_ranks(dims: tuple[int, ...], d: int) -> list[int]:
    return [min(m, d) for m in dims]


def hosvd_subspace(
    x: np.ndarray, d: int, mode_ranks: list[int] | None = None
) -> TensorSubspaceSet:
    """Tensor signal subspace ``(T1 kron ... kron TR) Us`` of an ``M1 x ... x MR x N`` tensor.

    ``T_r`` projects onto the dominant ``mode_ranks[r]`` left singular vectors
    of the r-th unfolding. ``Us`` comes from the SVD of the ``M x N`` matrix view.
    """
    x = np.asarray(x)
    spatial = x.shape[:-1]
    ranks = default_mode_ranks(spatial, d) if mode_ranks is None else list(mode_ranks)
    if len(ranks) != len(spatial):
        raise DimensionError(f"need {len(spatial)} mode ranks, got {len(ranks)}")
    mode_sets = []
    for r, p in enumerate(ranks):
        if not 1 <= p <= spatial[r]:
            raise DimensionError(f"mode rank {p} invalid for extent {spatial[r]}")
        mode_sets.append(svd_subspace(unfold(x, r + 1), p))
    projections = [ms.signal_projector for ms in mode_sets]
    matrix_set = svd_subspace(x.reshape(-1, x.shape[-1]), d)
    combined = kron_all(projections) @ matrix_set.Us
    return TensorSubspaceSet(
        mode_sets=mode_sets, projections=projections, combined=combined, svd=matrix_set
    )


def hosvd_subspace_via_core(
    x: np.ndarray, d: int, mode_ranks: list[int] | None = None
) -> np.ndarray:
    """Same basis as :func:`hosvd_subspace`, built from the truncated core tensor.

    The core is ``x`` multiplied by the Hermitian factors in every mode; it is
    then expanded back with the spatial factors and the inverse signal
    singular values in the snapshot mode.
    """
    x = np.asarray(x)
    spatial = x.shape[:-1]
    ranks = default_mode_ranks(spatial, d) if mode_ranks is None else list(mode_ranks)
    factors = [svd_subspace(unfold(x, r + 1), p).Us for r, p in enumerate(ranks)]
    matrix_set = svd_subspace(x.reshape(-1, x.shape[-1]), d)
    last = len(spatial) + 1
    snapshot_factor = matrix_set.Vs.conj()
    core = multi_mode_product(
        x, {**{r + 1: u.conj().T for r, u in enumerate(factors)}, last: snapshot_factor.conj().T}
    )
    full = multi_mode_product(
        core, {**{r + 1: u for r, u in enumerate(factors)}, last: np.diag(1.0 / matrix_set.sigma_s)}
    )
    return unfold(full, last).T


def fba_extend(x: np.ndarray) -> np.ndarray:
    """Forward-backward extension ``[X, Pi_M conj(X) Pi_N]``."""
    x = np.asarray(x)
    return np.concatenate([x, np.conj(x[::-1, ::-1])], axis=1)


def fba_extend_tensor(t: np.ndarray) -> np.ndarray:
    """Forward-backward extension of an ``M1 x ... x MR x N`` tensor along the snapshot mode."""
    t = np.asarray(t)
    z = fba_extend(t.reshape(-1, t.shape[-1]))
    return z.reshape(*t.shape[:-1], z.shape[1])


def is_centro_hermitian(z: np.ndarray, tol: float = 1e-10) -> bool:
    z = np.asarray(z)
    pm, pn = exchange_matrix(z.shape[0]), exchange_matrix(z.shape[1])
    return bool(np.abs(pm @ z.conj() @ pn - z).max() <= tol * max(np.abs(z).max(), 1.0))


def align_columns(us_hat: np.ndarray, us: np.ndarray) -> np.ndarray:
    """Rotate each column of ``us_hat`` by the phase that brings it closest to ``us``."""
    us_hat = np.asarray(us_hat)
    us = np.asarray(us)
    if us_hat.shape != us.shape:
        raise DimensionError(f"shapes differ: {us_hat.shape} vs {us.shape}")
    inner = np.einsum("ij,ij->j", us_hat.conj(), us)
    mag = np.abs(inner)
    if np.any(mag < 1e-12):
        raise AlignmentError("a column is orthogonal to its reference")
    return us_hat * (inner / mag)


def align_subspace_error(us_hat: np.ndarray, us: np.ndarray) -> np.ndarray:
    """Column-wise error after removing the per-column phase ambiguity."""
    return align_columns(us_hat, us) - us
