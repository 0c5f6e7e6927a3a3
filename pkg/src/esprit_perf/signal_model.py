"""Synthetic R-D harmonic mixtures with configurable symbol and noise statistics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DimensionError
from .tensor_core import khatri_rao, kron_all, n_mode_product, unvec, vec

SeedLike = int | np.random.Generator | np.random.SeedSequence | None


def as_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class Scenario:
    """Array geometry and source parameters.

    ``mu`` is ``d x R``: row ``k`` holds the spatial frequencies of source ``k``
    in every array dimension. ``power`` is the per-source symbol power.
    """

    M: tuple[int, ...]
    N: int
    mu: np.ndarray
    rho: float = 0.0
    power: float = 1.0

    def __post_init__(self) -> None:
        M = tuple(int(m) for m in np.atleast_1d(self.M))
        mu = np.array(self.mu, dtype=float, copy=True)
        if mu.ndim == 1:
            mu = mu.reshape(-1, 1) if len(M) == 1 else mu.reshape(1, -1)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "mu", mu)
        mu.setflags(write=False)
        if any(m < 2 for m in M):
            raise ConfigurationError(f"every array dimension needs at least 2 sensors, got {M}")
        if self.N < 1:
            raise ConfigurationError(f"N must be positive, got {self.N}")
        if mu.shape[1] != len(M) or mu.shape[0] < 1:
            raise ConfigurationError(f"mu must be d x {len(M)}, got shape {mu.shape}")
        if np.any(np.abs(mu) > np.pi):
            raise ConfigurationError("spatial frequencies must lie in [-pi, pi]")
        if not 0.0 <= self.rho < 1.0:
            raise ConfigurationError(f"rho must lie in [0, 1), got {self.rho}")
        if self.power <= 0:
            raise ConfigurationError(f"power must be positive, got {self.power}")

    @property
    def R(self) -> int:
        return len(self.M)

    @property
    def d(self) -> int:
        return self.mu.shape[0]

    @property
    def M_total(self) -> int:
        return int(np.prod(self.M))

    @property
    def tensor_dims(self) -> tuple[int, ...]:
        return (*self.M, self.N)

    def with_geometry(self, M: tuple[int, ...] | list[int], N: int | None = None) -> "Scenario":
        return Scenario(M=tuple(M), N=self.N if N is None else N, mu=self.mu, rho=self.rho, power=self.power)


@dataclass(frozen=True)
class NoiseSpec:
    """Second-order description of zero-mean additive noise.

    ``white_circular`` carries only a variance. ``general`` carries the
    covariance ``R_nn = E[n n^H]`` and pseudo-covariance ``C_nn = E[n n^T]`` of
    ``n = vec(X)``, the column-stacked ``M x N`` noise matrix.
    """

    kind: str = "white_circular"
    variance: float = 1.0
    R_nn: np.ndarray | None = None
    C_nn: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind == "white_circular":
            if self.variance < 0:
                raise ConfigurationError("noise variance must be nonnegative")
            return
        if self.kind != "general":
            raise ConfigurationError(f"unknown noise kind {self.kind!r}")
        if self.R_nn is None or self.C_nn is None:
            raise ConfigurationError("general noise needs both R_nn and C_nn")
        r = np.asarray(self.R_nn, dtype=complex)
        c = np.asarray(self.C_nn, dtype=complex)
        if r.shape != c.shape or r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ConfigurationError("R_nn and C_nn must be square and of equal size")
        scale = max(np.abs(r).max(), 1.0)
        if np.abs(r - r.conj().T).max() > 1e-10 * scale:
            raise ConfigurationError("R_nn must be Hermitian")
        if np.abs(c - c.T).max() > 1e-10 * scale:
            raise ConfigurationError("C_nn must be symmetric")
        object.__setattr__(self, "R_nn", r)
        object.__setattr__(self, "C_nn", c)
        _real_factor(augmented_real_covariance(r, c))

    @classmethod
    def white(cls, variance: float) -> "NoiseSpec":
        return cls(kind="white_circular", variance=float(variance))

    @classmethod
    def general(cls, R_nn: np.ndarray, C_nn: np.ndarray) -> "NoiseSpec":
        return cls(kind="general", R_nn=R_nn, C_nn=C_nn)

    @property
    def is_white(self) -> bool:
        return self.kind == "white_circular"

    def scaled(self, factor: float) -> "NoiseSpec":
        if self.is_white:
            return NoiseSpec.white(self.variance * factor)
        return NoiseSpec.general(self.R_nn * factor, self.C_nn * factor)

    def covariances(self, size: int) -> tuple[np.ndarray, np.ndarray]:
        """Explicit ``(R_nn, C_nn)`` for a noise vector of length ``size``."""
        if self.is_white:
            return self.variance * np.eye(size, dtype=complex), np.zeros((size, size), dtype=complex)
        if self.R_nn.shape[0] != size:
            raise DimensionError(f"noise statistics are {self.R_nn.shape[0]}-dimensional, need {size}")
        return self.R_nn, self.C_nn


def augmented_real_covariance(R_nn: np.ndarray, C_nn: np.ndarray) -> np.ndarray:
    """Covariance of ``[Re n; Im n]`` given ``E[n n^H]`` and ``E[n n^T]``."""
    rr = 0.5 * np.real(R_nn + C_nn)
    ii = 0.5 * np.real(R_nn - C_nn)
    ri = -0.5 * np.imag(R_nn - C_nn)
    ir = 0.5 * np.imag(R_nn + C_nn)
    return np.block([[rr, ri], [ir, ii]])


def _real_factor(cov: np.ndarray) -> np.ndarray:
    cov = 0.5 * (cov + cov.T)
    w, v = np.linalg.eigh(cov)
    tol = 1e-10 * max(abs(w).max(), 1e-300)
    if w.min() < -tol:
        raise ConfigurationError(
            f"augmented noise covariance is not positive semidefinite (min eigenvalue {w.min():.3e})"
        )
    return v * np.sqrt(np.clip(w, 0.0, None))


def steering_vector(mu: float, m: int) -> np.ndarray:
    """Uniform-array response ``[1, e^{j mu}, ..., e^{j (m-1) mu}]``."""
    if m < 1:
        raise DimensionError("steering vector needs at least one sensor")
    return np.exp(1j * mu * np.arange(m))


def steering_matrix(mu: np.ndarray, m: int) -> np.ndarray:
    """Columns are steering vectors for each entry of ``mu``."""
    return np.exp(1j * np.outer(np.arange(m), np.atleast_1d(mu)))


def mode_steering_matrices(s: Scenario) -> list[np.ndarray]:
    return [steering_matrix(s.mu[:, r], s.M[r]) for r in range(s.R)]


def array_steering_matrix(s: Scenario) -> np.ndarray:
    """``M x d`` steering matrix, first array dimension running slowest."""
    mats = mode_steering_matrices(s)
    out = mats[0]
    for a in mats[1:]:
        out = khatri_rao(out, a)
    return out


def steering_derivatives(s: Scenario) -> list[np.ndarray]:
    """Per dimension ``r``, the ``M x d`` matrix of derivatives of ``a_k`` w.r.t. ``mu_k^(r)``."""
    mats = mode_steering_matrices(s)
    out = []
    for r in range(s.R):
        cols = []
        for k in range(s.d):
            parts = [m[:, k] for m in mats]
            parts[r] = 1j * np.arange(s.M[r]) * parts[r]
            cols.append(kron_all(parts))
        out.append(np.stack(cols, axis=1))
    return out


def steering_tensor(s: Scenario) -> np.ndarray:
    """``M1 x ... x MR x d`` tensor whose k-th slice is the outer product of the mode responses."""
    slices = []
    for k in range(s.d):
        t = np.ones(())
        for r in range(s.R):
            t = np.multiply.outer(t, steering_vector(s.mu[k, r], s.M[r]))
        slices.append(t)
    return np.stack(slices, axis=-1)


def symbol_covariance(d: int, rho: float, phases: np.ndarray) -> np.ndarray:
    """Unit-diagonal covariance with off-diagonals ``rho * exp(j phases[i, j])`` for ``i < j``."""
    cov = np.eye(d, dtype=complex)
    iu = np.triu_indices(d, 1)
    cov[iu] = rho * np.exp(1j * phases[iu])
    cov[(iu[1], iu[0])] = np.conj(cov[iu])
    return cov


def generate_symbols(
    s: Scenario, seed: SeedLike = None, max_redraws: int = 100_000
) -> np.ndarray:
    """``d x N`` correlated circular Gaussian symbols with per-source power ``s.power``.

    Correlation phases are uniform on ``[0, 2 pi)``. A phase draw that makes
    the covariance indefinite is discarded and redrawn.
    """
    rng = as_rng(seed)
    d = s.d
    chol = None
    for _ in range(max_redraws):
        phases = rng.uniform(0.0, 2.0 * np.pi, size=(d, d))
        cov = symbol_covariance(d, s.rho, phases)
        try:
            chol = np.linalg.cholesky(cov)
            break
        except np.linalg.LinAlgError:
            continue
    if chol is None:
        raise ConfigurationError(
            f"no positive definite symbol covariance found for d={d}, rho={s.rho}"
        )
    z = (rng.standard_normal((d, s.N)) + 1j * rng.standard_normal((d, s.N))) / np.sqrt(2.0)
    return np.sqrt(s.power) * chol @ z


def draw_noise_vectors(spec: NoiseSpec, size: int, count: int, seed: SeedLike = None) -> np.ndarray:
    """``count x size`` independent noise vectors following ``spec``."""
    rng = as_rng(seed)
    if spec.is_white:
        z = rng.standard_normal((count, size)) + 1j * rng.standard_normal((count, size))
        return np.sqrt(spec.variance / 2.0) * z
    r, c = spec.covariances(size)
    factor = _real_factor(augmented_real_covariance(r, c))
    w = rng.standard_normal((count, 2 * size)) @ factor.T
    return w[:, :size] + 1j * w[:, size:]


def generate_noise(spec: NoiseSpec, dims: tuple[int, ...], seed: SeedLike = None) -> np.ndarray:
    """Noise tensor of extents ``dims`` (spatial extents then snapshots)."""
    dims = tuple(int(v) for v in dims)
    m = int(np.prod(dims[:-1]))
    n = draw_noise_vectors(spec, m * dims[-1], 1, seed)[0]
    return unvec(n, m, dims[-1]).reshape(dims)


@dataclass(frozen=True)
class ObservationSet:
    """Noise-free, noise and noisy tensors plus their ``M x N`` matrix views."""

    x0_tensor: np.ndarray
    noise_tensor: np.ndarray
    symbols: np.ndarray
    x_tensor: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "x_tensor", self.x0_tensor + self.noise_tensor)

    @staticmethod
    def _matrix(t: np.ndarray) -> np.ndarray:
        return t.reshape(-1, t.shape[-1])

    @property
    def X0(self) -> np.ndarray:
        return self._matrix(self.x0_tensor)

    @property
    def X(self) -> np.ndarray:
        return self._matrix(self.x_tensor)

    @property
    def N(self) -> np.ndarray:
        return self._matrix(self.noise_tensor)

    @property
    def noise_vector(self) -> np.ndarray:
        return vec(self.N)


def noiseless_tensor(s: Scenario, symbols: np.ndarray) -> np.ndarray:
    symbols = np.asarray(symbols)
    if symbols.shape != (s.d, s.N):
        raise DimensionError(f"symbols must be {s.d} x {s.N}, got {symbols.shape}")
    return n_mode_product(steering_tensor(s), symbols.T, s.R + 1)


def synthesize(
    s: Scenario,
    spec: NoiseSpec,
    seed: SeedLike = None,
    symbols: np.ndarray | None = None,
) -> ObservationSet:
    """Draw symbols (unless given) and noise, and assemble the observation."""
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    sym_seq, noise_seq = seq.spawn(2)
    if symbols is None:
        symbols = generate_symbols(s, np.random.default_rng(sym_seq))
    x0 = noiseless_tensor(s, symbols)
    noise = generate_noise(spec, s.tensor_dims, np.random.default_rng(noise_seq))
    return ObservationSet(x0_tensor=x0, noise_tensor=noise, symbols=np.asarray(symbols))
