"""Gaussian-model simulator for two-pulse QND probing of a collective spin."""

__version__ = "0.1.0"

from .gaussian_core import (
    ATOM,
    GaussianState,
    ModeLabel,
    SingularConditioningError,
    SymplecticMap,
    apply_loss,
    apply_map,
    coherent_init,
    condition_on,
    marginal,
    pulse,
    qnd_map,
)
from .montecarlo import (
    RunResult,
    SequenceConfig,
    ShotRecord,
    run_kappa_sweep,
    run_sequence,
    sample_shot,
    shot_stream,
)
from .physics import (
    AtomicParams,
    DerivedCoupling,
    ParameterSheet,
    PulseParams,
    coupling_strength,
    derive_coupling,
    faraday_angle,
    kappa_from_angle,
    load_sheet,
    loss_parameter,
)
from .stats import (
    ConditionalResult,
    InsufficientDataError,
    VarianceSummary,
    binned_conditional,
    bootstrap_ci,
    exact_conditional,
    squeezing_db,
    variances,
)

__all__ = [
    "ATOM",
    "AtomicParams",
    "ConditionalResult",
    "DerivedCoupling",
    "GaussianState",
    "InsufficientDataError",
    "ModeLabel",
    "ParameterSheet",
    "PulseParams",
    "RunResult",
    "SequenceConfig",
    "ShotRecord",
    "SingularConditioningError",
    "SymplecticMap",
    "VarianceSummary",
    "apply_loss",
    "apply_map",
    "binned_conditional",
    "bootstrap_ci",
    "coherent_init",
    "condition_on",
    "coupling_strength",
    "derive_coupling",
    "exact_conditional",
    "faraday_angle",
    "kappa_from_angle",
    "load_sheet",
    "loss_parameter",
    "marginal",
    "pulse",
    "qnd_map",
    "run_kappa_sweep",
    "run_sequence",
    "sample_shot",
    "shot_stream",
    "squeezing_db",
    "variances",
]
