"""Dense complex multilinear algebra.

Tensors are plain ``numpy.ndarray`` objects in C order. Modes are 1-based in
the public API, matching the usual tensor notation.

Unfolding convention
--------------------
``unfold(t, n)`` has ``I_n`` rows. Its columns enumerate the remaining indices
in the cyclic order ``n+1, ..., N, 1, ..., n-1`` with the *last* listed index
running fastest. For a tensor of size ``I1 x I2 x I3`` this gives

* mode 1: columns ``(i2, i3)``, ``i3`` fastest
* mode 2: columns ``(i3, i1)``, ``i1`` fastest
* mode 3: columns ``(i1, i2)``, ``i2`` fastest

With this order the multilinear identity

    unfold(S x1 U1 ... xN UN, n) = Un unfold(S, n) (U_{n+1} kron ... kron UN kron U1 kron ... kron U_{n-1})^T

holds, and for an array tensor of size ``M1 x ... x MR x N`` the last unfolding
transposed is the ``M x N`` measurement matrix with the first spatial index
running slowest. ``vec`` always stacks columns (Fortran order).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import DimensionError


def _check_mode(t: np.ndarray, mode: int) -> int:
    if not 1 <= mode <= t.ndim:
        raise DimensionError(f"mode {mode} out of range for a tensor of order {t.ndim}")
    return mode - 1


def _cyclic_axes(order: int, axis: int) -> list[int]:
    return [axis] + [(axis + k) % order for k in range(1, order)]


def unfold(t: np.ndarray, mode: int) -> np.ndarray:
    """Matrix unfolding of ``t`` along ``mode`` (1-based), cyclic column order."""
    t = np.asarray(t)
    axis = _check_mode(t, mode)
    return np.transpose(t, _cyclic_axes(t.ndim, axis)).reshape(t.shape[axis], -1)


def fold(mat: np.ndarray, mode: int, dims: tuple[int, ...] | list[int]) -> np.ndarray:
    """Inverse of :func:`unfold` for a tensor of extents ``dims``."""
    dims = tuple(int(v) for v in dims)
    if not 1 <= mode <= len(dims):
        raise DimensionError(f"mode {mode} out of range for a tensor of order {len(dims)}")
    axis = mode - 1
    perm = _cyclic_axes(len(dims), axis)
    permuted_dims = [dims[p] for p in perm]
    mat = np.asarray(mat)
    if mat.size != int(np.prod(dims)) or mat.shape[0] != dims[axis]:
        raise DimensionError(f"matrix of shape {mat.shape} cannot fold into {dims} along mode {mode}")
    return np.transpose(mat.reshape(permuted_dims), np.argsort(perm))


def n_mode_product(t: np.ndarray, u: np.ndarray, mode: int) -> np.ndarray:
    """Multiply every mode-``mode`` fibre of ``t`` by ``u``."""
    t = np.asarray(t)
    u = np.asarray(u)
    axis = _check_mode(t, mode)
    if u.ndim != 2 or u.shape[1] != t.shape[axis]:
        raise DimensionError(
            f"matrix with {u.shape[-1]} columns cannot multiply mode {mode} of extent {t.shape[axis]}"
        )
    return np.moveaxis(np.tensordot(u, t, axes=(1, axis)), 0, axis)


def multi_mode_product(t: np.ndarray, mats: dict[int, np.ndarray]) -> np.ndarray:
    """Apply several n-mode products, keyed by 1-based mode."""
    out = np.asarray(t)
    for mode, u in sorted(mats.items()):
        out = n_mode_product(out, u, mode)
    return out


@dataclass(frozen=True)
class HosvdFactors:
    """Truncated higher-order SVD: core tensor, per-mode bases and spectra."""

    core: np.ndarray
    factors: list[np.ndarray]
    mode_singular_values: list[np.ndarray]

    def reconstruct(self) -> np.ndarray:
        return multi_mode_product(self.core, {n + 1: u for n, u in enumerate(self.factors)})


def hosvd_truncated(t: np.ndarray, ranks: list[int] | tuple[int, ...]) -> HosvdFactors:
    """Truncated HOSVD keeping ``ranks[n]`` dominant left singular vectors per mode."""
    t = np.asarray(t)
    if len(ranks) != t.ndim:
        raise DimensionError(f"need {t.ndim} ranks, got {len(ranks)}")
    factors = []
    spectra = []
    for n, (extent, rank) in enumerate(zip(t.shape, ranks)):
        if not 1 <= rank <= extent:
            raise DimensionError(f"rank {rank} invalid for mode {n + 1} of extent {extent}")
        u, s, _ = np.linalg.svd(unfold(t, n + 1), full_matrices=False)
        factors.append(u[:, :rank])
        spectra.append(s)
    core = multi_mode_product(t, {n + 1: u.conj().T for n, u in enumerate(factors)})
    return HosvdFactors(core=core, factors=factors, mode_singular_values=spectra)


def vec(a: np.ndarray) -> np.ndarray:
    """Stack the columns of a matrix into one vector."""
    return np.asarray(a).reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    return np.asarray(v).reshape(rows, cols, order="F")


def commutation_matrix(m: int, n: int) -> np.ndarray:
    """Permutation ``K`` with ``K @ vec(A.T) == vec(A)`` for every ``m x n`` matrix ``A``."""
    if m < 1 or n < 1:
        raise DimensionError("commutation matrix needs positive sizes")
    k = np.zeros((m * n, m * n))
    # vec(A) position of A[i, j] is i + j*m; vec(A.T) position is j + i*n
    i, j = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
    k[(i + j * m).ravel(), (j + i * n).ravel()] = 1.0
    return k


def commutation_permutation(m: int, n: int) -> np.ndarray:
    """Index array ``p`` with ``commutation_matrix(m, n) @ v == v[p]``.

    Right multiplication permutes columns the other way:
    ``B @ commutation_matrix(m, n) == B[:, commutation_permutation(n, m)]``.
    """
    if m < 1 or n < 1:
        raise DimensionError("commutation permutation needs positive sizes")
    i, j = np.meshgrid(np.arange(m), np.arange(n), indexing="ij")
    p = np.empty(m * n, dtype=np.intp)
    p[(i + j * m).ravel()] = (j + i * n).ravel()
    return p


def exchange_matrix(n: int) -> np.ndarray:
    """Ones on the anti-diagonal."""
    return np.eye(n)[::-1]


def khatri_rao(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise DimensionError(f"khatri_rao needs equal column counts, got {a.shape} and {b.shape}")
    return (a[:, None, :] * b[None, :, :]).reshape(a.shape[0] * b.shape[0], a.shape[1])


def kron_all(mats: list[np.ndarray]) -> np.ndarray:
    """Kronecker product of a list, first factor outermost."""
    return reduce(np.kron, mats)
