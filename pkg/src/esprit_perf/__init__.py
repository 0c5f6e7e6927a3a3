"""R-D ESPRIT-type estimators with first-order analytical performance predictions."""

from .errors import (
    AlignmentError,
    ConditioningWarning,
    ConfigurationError,
    DegenerateGapError,
    DegenerateGeometryError,
    DimensionError,
    EspritError,
    IllPosedError,
    PairingWarning,
    UnsupportedVariantError,
)
from .esprit import VARIANTS, estimate, estimate_tensor
from .harness import SweepConfig, emit_csv, load_config, run_sweep
from .mse_analysis import (
    MseReport,
    analytical_mse,
    crb_deterministic,
    efficiency,
    single_source_closed_forms,
)
from .perturbation import dmu_first_order, exact_model
from .signal_model import NoiseSpec, Scenario, synthesize

__all__ = [
    "AlignmentError",
    "ConditioningWarning",
    "ConfigurationError",
    "DegenerateGapError",
    "DegenerateGeometryError",
    "DimensionError",
    "EspritError",
    "IllPosedError",
    "MseReport",
    "NoiseSpec",
    "PairingWarning",
    "Scenario",
    "SweepConfig",
    "UnsupportedVariantError",
    "VARIANTS",
    "analytical_mse",
    "crb_deterministic",
    "dmu_first_order",
    "efficiency",
    "emit_csv",
    "estimate",
    "estimate_tensor",
    "exact_model",
    "load_config",
    "run_sweep",
    "single_source_closed_forms",
    "synthesize",
]
