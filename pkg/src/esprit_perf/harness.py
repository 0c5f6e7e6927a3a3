"""Monte-Carlo sweep driver: empirical, semi-analytical, analytical and CRB curves."""

from __future__ import annotations

import csv
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from scipy.optimize import linear_sum_assignment

from .errors import ConfigurationError, EspritError
from .esprit import SLS_BASES, VARIANTS, estimate_tensor
from .mse_analysis import crb_deterministic, projected_sensitivities, scaled_identity_mse
from .perturbation import dmu_first_order, exact_model
from .signal_model import Scenario, generate_symbols, noiseless_tensor

OUTPUT_KINDS = ("empirical", "semi_analytical", "analytical", "crb")
MODES = ("snr", "geometry")
NOISE_KINDS = ("white_circular",)
DEFAULT_TRIALS = 1000
CRB_VARIANT = "crb"

_TOP_KEYS = {
    "name", "scenario", "noise", "snr_db", "variants", "sls_base", "trials", "seed",
    "outputs", "redraw_symbols", "workers", "mode", "geometry",
}
_SCENARIO_KEYS = {"M", "N", "mu", "rho", "power"}
_NOISE_KEYS = {"kind", "noncircularity"}
_GEOMETRY_KEYS = {"m_values", "array", "snr_db"}


@dataclass(frozen=True)
class GeometrySweep:
    """Array sizes for ``mode: geometry``; ``array`` is ``ula`` (M) or ``ura`` (M x M)."""

    m_values: tuple[int, ...]
    array: str
    snr_db: float

    def dims(self, m: int) -> tuple[int, ...]:
        return (m,) if self.array == "ula" else (m, m)


@dataclass(frozen=True)
class SweepConfig:
    """Validated sweep description.

    SNR is ``1 / sigma_n^2`` in dB. ``noncircularity`` is ``kappa`` in
    ``C_nn = kappa sigma_n^2 I``; zero gives white circular noise.
    """

    scenario: Scenario
    snr_db: tuple[float, ...]
    variants: tuple[str, ...] = ("standard",)
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    outputs: tuple[str, ...] = OUTPUT_KINDS
    sls_base: str = "standard"
    redraw_symbols: bool = True
    noise_kind: str = "white_circular"
    noncircularity: float = 0.0
    workers: int = 1
    mode: str = "snr"
    geometry: GeometrySweep | None = None
    name: str = ""

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ConfigurationError(f"trials: must be at least 1, got {self.trials}")
        if self.workers < 1:
            raise ConfigurationError(f"workers: must be at least 1, got {self.workers}")
        if self.mode not in MODES:
            raise ConfigurationError(f"mode: expected one of {MODES}, got {self.mode!r}")
        if self.noise_kind not in NOISE_KINDS:
            raise ConfigurationError(f"noise.kind: expected one of {NOISE_KINDS}, got {self.noise_kind!r}")
        if not -1.0 <= self.noncircularity <= 1.0:
            raise ConfigurationError("noise.noncircularity: must lie in [-1, 1]")
        for v in self.variants:
            if v not in VARIANTS:
                raise ConfigurationError(f"variants: unknown variant {v!r}")
        if not self.variants:
            raise ConfigurationError("variants: need at least one")
        for o in self.outputs:
            if o not in OUTPUT_KINDS:
                raise ConfigurationError(f"outputs: unknown output {o!r}")
        if self.sls_base not in SLS_BASES:
            raise ConfigurationError(f"sls_base: expected one of {SLS_BASES}, got {self.sls_base!r}")
        if self.mode == "geometry":
            if self.geometry is None:
                raise ConfigurationError("geometry: required when mode is geometry")
        else:
            grid = np.asarray(self.snr_db, dtype=float)
            if grid.size == 0:
                raise ConfigurationError("snr_db: need at least one grid point")
            if np.any(np.diff(grid) <= 0):
                raise ConfigurationError("snr_db: grid must be strictly increasing")

    @property
    def x_values(self) -> tuple[float, ...]:
        if self.mode == "geometry":
            return tuple(float(m) for m in self.geometry.m_values)
        return tuple(float(v) for v in self.snr_db)

    @property
    def x_column(self) -> str:
        return "m_sensors" if self.mode == "geometry" else "snr_db"

    def replace(self, **changes) -> "SweepConfig":
        fields = {name: getattr(self, name) for name in self.__dataclass_fields__}
        fields.update(changes)
        return SweepConfig(**fields)


@dataclass(frozen=True)
class SweepRecord:
    variant: str
    x: float
    kind: str
    mse_total: float
    trials: int
    fail_frac: float
    wall_seconds: float = 0.0
    mse_per_kr: np.ndarray | None = field(default=None, compare=False)


def _require_keys(tree: dict, allowed: set[str], where: str) -> None:
    if not isinstance(tree, dict):
        raise ConfigurationError(f"{where}: expected a mapping")
    unknown = sorted(set(tree) - allowed)
    if unknown:
        raise ConfigurationError(f"{where}: unknown key(s) {', '.join(map(str, unknown))}")


def _typed(tree: dict, key: str, kind, where: str, default=None):
    if key not in tree:
        return default
    value = tree[key]
    try:
        if kind is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind is int:
            if isinstance(value, bool) or float(value) != int(value):
                raise TypeError
            return int(value)
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{where}.{key}: cannot interpret {value!r} as {kind.__name__}") from None


def _as_list(value, where: str) -> list:
    if isinstance(value, (list, tuple)):
        return list(value)
    if isinstance(value, (str, int, float)):
        return [value]
    raise ConfigurationError(f"{where}: expected a list")


def config_from_tree(tree: dict) -> SweepConfig:
    """Validate a parsed key-value tree and build the sweep configuration."""
    _require_keys(tree, _TOP_KEYS, "config")
    if "scenario" not in tree:
        raise ConfigurationError("scenario: required")
    sc = tree["scenario"]
    _require_keys(sc, _SCENARIO_KEYS, "scenario")
    for key in ("M", "N", "mu"):
        if key not in sc:
            raise ConfigurationError(f"scenario.{key}: required")
    try:
        m = tuple(int(v) for v in _as_list(sc["M"], "scenario.M"))
        mu = np.array(sc["mu"], dtype=float)
    except (TypeError, ValueError):
        raise ConfigurationError("scenario: M must be integers and mu a numeric d x R table") from None
    if mu.ndim == 1 and len(m) > 1:
        mu = mu.reshape(1, -1)
    scenario = Scenario(
        M=m,
        N=_typed(sc, "N", int, "scenario"),
        mu=mu,
        rho=_typed(sc, "rho", float, "scenario", 0.0),
        power=_typed(sc, "power", float, "scenario", 1.0),
    )
    noise = tree.get("noise", {}) or {}
    _require_keys(noise, _NOISE_KEYS, "noise")
    geometry = None
    if "geometry" in tree:
        g = tree["geometry"]
        _require_keys(g, _GEOMETRY_KEYS, "geometry")
        if "m_values" not in g or "snr_db" not in g:
            raise ConfigurationError("geometry: m_values and snr_db are required")
        values = tuple(int(v) for v in _as_list(g["m_values"], "geometry.m_values"))
        if not values or any(v < 2 for v in values):
            raise ConfigurationError("geometry.m_values: need sizes of at least 2")
        array = str(g.get("array", "ula"))
        if array not in ("ula", "ura"):
            raise ConfigurationError("geometry.array: expected ula or ura")
        geometry = GeometrySweep(values, array, _typed(g, "snr_db", float, "geometry"))
    snr = tuple(float(v) for v in _as_list(tree.get("snr_db", []), "snr_db"))
    kwargs = dict(
        scenario=scenario,
        snr_db=snr,
        trials=_typed(tree, "trials", int, "config", DEFAULT_TRIALS),
        seed=_typed(tree, "seed", int, "config", 0),
        sls_base=str(tree.get("sls_base", "standard")),
        redraw_symbols=_typed(tree, "redraw_symbols", bool, "config", True),
        noise_kind=str(noise.get("kind", "white_circular")),
        noncircularity=_typed(noise, "noncircularity", float, "noise", 0.0),
        workers=_typed(tree, "workers", int, "config", 1),
        mode=str(tree.get("mode", "geometry" if geometry is not None and not snr else "snr")),
        geometry=geometry,
        name=str(tree.get("name", "")),
    )
    if "variants" in tree:
        kwargs["variants"] = tuple(str(v) for v in _as_list(tree["variants"], "variants"))
    if "outputs" in tree:
        kwargs["outputs"] = tuple(str(v) for v in _as_list(tree["outputs"], "outputs"))
    return SweepConfig(**kwargs)


def load_config(path: str | Path) -> SweepConfig:
    """Read and validate a YAML sweep file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"{path}: {exc.strerror or exc}") from exc
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark is not None else ""
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigurationError(f"{path}: parse error{where}: {problem}") from exc
    if tree is None:
        raise ConfigurationError(f"{path}: empty configuration")
    try:
        return config_from_tree(tree)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc


def _trial_seed(seed: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(trial,))


def _unit_noise(rng: np.random.Generator, dims: tuple[int, ...], kappa: float) -> np.ndarray:
    """Unit-variance noise tensor with ``E[n n^T] = kappa I``."""
    re = rng.standard_normal(dims) * math.sqrt((1.0 + kappa) / 2.0)
    im = rng.standard_normal(dims) * math.sqrt((1.0 - kappa) / 2.0)
    return re + 1j * im


def _match_squared_error(mu_hat: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Per-(k, r) squared wrapped error after the best source permutation."""
    diff = np.angle(np.exp(1j * (mu_hat[:, None, :] - mu[None, :, :])))
    cost = np.sum(diff**2, axis=2)
    rows, cols = linear_sum_assignment(cost)
    out = np.empty_like(mu)
    out[cols] = diff[rows, cols] ** 2
    return out


def _variances(snr_db) -> np.ndarray:
    return 10.0 ** (-np.asarray(snr_db, dtype=float) / 10.0)


@dataclass
class _Point:
    """One geometry: the scenario and the SNR values evaluated on it."""

    scenario: Scenario
    variances: np.ndarray
    columns: list[int]


def _points(cfg: SweepConfig) -> list[_Point]:
    if cfg.mode == "geometry":
        g = cfg.geometry
        return [
            _Point(cfg.scenario.with_geometry(g.dims(m)), _variances([g.snr_db]), [i])
            for i, m in enumerate(g.m_values)
        ]
    return [_Point(cfg.scenario, _variances(cfg.snr_db), list(range(len(cfg.snr_db))))]


_FAILURES = (EspritError, np.linalg.LinAlgError, ValueError, FloatingPointError)


def _fixed_symbols(cfg: SweepConfig, s: Scenario) -> np.ndarray:
    return generate_symbols(s, np.random.default_rng(np.random.SeedSequence(cfg.seed)))


def _run_trial(cfg: SweepConfig, trial: int) -> tuple[np.ndarray, np.ndarray]:
    """Squared errors ``[variant + crb, x, kind, k, r]`` (NaN marks a failure) and timings."""
    variants = cfg.variants
    n_rows = len(variants) + 1
    d, R = cfg.scenario.d, cfg.scenario.R
    n_x = len(cfg.x_values)
    out = np.full((n_rows, n_x, len(OUTPUT_KINDS), d, R), np.nan)
    timing = np.zeros((n_rows, len(OUTPUT_KINDS)))
    kappa = cfg.noncircularity
    sym_seq, noise_seq = _trial_seed(cfg.seed, trial).spawn(2)
    for point in _points(cfg):
        s = point.scenario
        if cfg.redraw_symbols:
            symbols = generate_symbols(s, np.random.default_rng(sym_seq))
        else:
            symbols = _fixed_symbols(cfg, s)
        x0 = noiseless_tensor(s, symbols)
        unit = _unit_noise(np.random.default_rng(noise_seq), s.tensor_dims, kappa)
        for vi, variant in enumerate(variants):
            model = None
            if "semi_analytical" in cfg.outputs or "analytical" in cfg.outputs:
                try:
                    model = exact_model(s, symbols, variant, cfg.sls_base)
                except _FAILURES:
                    model = None
            if "empirical" in cfg.outputs:
                ki = OUTPUT_KINDS.index("empirical")
                t0 = time.perf_counter()
                for var, col in zip(point.variances, point.columns):
                    try:
                        mu_hat = estimate_tensor(x0 + math.sqrt(var) * unit, s.d, variant, cfg.sls_base).mu_hat
                        if np.all(np.isfinite(mu_hat)):
                            out[vi, col, ki] = _match_squared_error(mu_hat, s.mu)
                    except _FAILURES:
                        pass
                timing[vi, ki] += time.perf_counter() - t0
            if model is not None and "semi_analytical" in cfg.outputs:
                ki = OUTPUT_KINDS.index("semi_analytical")
                t0 = time.perf_counter()
                try:
                    unit_sq = dmu_first_order(unit, model).delta_mu ** 2
                    for var, col in zip(point.variances, point.columns):
                        out[vi, col, ki] = var * unit_sq
                except _FAILURES:
                    pass
                timing[vi, ki] += time.perf_counter() - t0
            if model is not None and "analytical" in cfg.outputs:
                ki = OUTPUT_KINDS.index("analytical")
                t0 = time.perf_counter()
                try:
                    z = projected_sensitivities(model)
                    unit_mse = np.array(
                        [[scaled_identity_mse(z[k, r], 1.0, kappa, model.fba) for r in range(R)] for k in range(d)]
                    )
                    for var, col in zip(point.variances, point.columns):
                        out[vi, col, ki] = var * unit_mse
                except _FAILURES:
                    pass
                timing[vi, ki] += time.perf_counter() - t0
        if "crb" in cfg.outputs:
            ki = OUTPUT_KINDS.index("crb")
            t0 = time.perf_counter()
            try:
                unit_crb = crb_deterministic(s, symbols, 1.0).crb
                for var, col in zip(point.variances, point.columns):
                    out[-1, col, ki] = var * unit_crb
            except _FAILURES:
                pass
            timing[-1, ki] += time.perf_counter() - t0
    return out, timing


def _run_chunk(cfg: SweepConfig, trials: range) -> tuple[np.ndarray, np.ndarray]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        results = [_run_trial(cfg, t) for t in trials]
    return np.stack([r[0] for r in results]), np.sum([r[1] for r in results], axis=0)


def _chunks(trials: int, workers: int) -> list[range]:
    size = math.ceil(trials / workers)
    return [range(i, min(i + size, trials)) for i in range(0, trials, size)]


def run_sweep(cfg: SweepConfig) -> list[SweepRecord]:
    """Run every trial and reduce to one record per (variant, x, kind).

    Trial ``t`` draws from its own stream derived from ``(seed, t)``, so the
    records do not depend on ``cfg.workers``.
    """
    if cfg.workers == 1:
        errors, timing = _run_chunk(cfg, range(cfg.trials))
    else:
        chunks = _chunks(cfg.trials, cfg.workers)
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(_run_chunk, [cfg] * len(chunks), chunks))
        errors = np.concatenate([p[0] for p in parts])
        timing = np.sum([p[1] for p in parts], axis=0)
    failed = np.any(np.isnan(errors), axis=(-2, -1))
    records = []
    rows = [(vi, v) for vi, v in enumerate(cfg.variants)] + [(len(cfg.variants), CRB_VARIANT)]
    for vi, variant in rows:
        kinds = [k for k in OUTPUT_KINDS if k != "crb"] if variant != CRB_VARIANT else ["crb"]
        for xi, x in enumerate(cfg.x_values):
            for kind in kinds:
                if kind not in cfg.outputs:
                    continue
                ki = OUTPUT_KINDS.index(kind)
                ok = ~failed[:, vi, xi, ki]
                n_ok = int(ok.sum())
                if n_ok:
                    per_kr = np.sum(errors[ok, vi, xi, ki], axis=0) / n_ok
                    total = float(np.sum(per_kr))
                else:
                    per_kr, total = None, float("nan")
                records.append(
                    SweepRecord(
                        variant=variant,
                        x=x,
                        kind=kind,
                        mse_total=total,
                        trials=cfg.trials,
                        fail_frac=1.0 - n_ok / cfg.trials,
                        wall_seconds=float(timing[vi, ki]) / len(cfg.x_values),
                        mse_per_kr=per_kr,
                    )
                )
    return records


def _format(value: float) -> str:
    if math.isnan(value):
        return "nan"
    return repr(float(value))


def emit_csv(records: list[SweepRecord], path: str | Path, x_column: str = "snr_db", timing: bool = True) -> None:
    """Write records in a fixed (variant, x, kind) order; ``timing=False`` zeroes ``wall_s``."""
    order = {k: i for i, k in enumerate(OUTPUT_KINDS)}
    variant_order = {v: i for i, v in enumerate(VARIANTS + (CRB_VARIANT,))}
    for r in sorted({r.variant for r in records} - set(variant_order)):
        variant_order[r] = len(variant_order)
    ordered = sorted(records, key=lambda r: (variant_order[r.variant], r.x, order.get(r.kind, len(order))))
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["variant", x_column, "kind", "mse_total", "trials", "fail_frac", "wall_s"])
            for r in ordered:
                x = str(int(r.x)) if x_column == "m_sensors" else _format(r.x)
                writer.writerow(
                    [
                        r.variant,
                        x,
                        r.kind,
                        _format(r.mse_total),
                        r.trials,
                        _format(r.fail_frac),
                        _format(r.wall_seconds if timing else 0.0),
                    ]
                )
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_csv(path: str | Path) -> list[dict]:
    """Parse a file written by :func:`emit_csv` back into typed rows."""
    rows = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            typed = dict(row)
            for key in ("snr_db", "m_sensors", "mse_total", "fail_frac", "wall_s"):
                if key in typed:
                    typed[key] = float(typed[key])
            typed["trials"] = int(typed["trials"])
            rows.append(typed)
    return rows
