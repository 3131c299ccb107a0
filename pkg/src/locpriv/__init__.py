"""Client-side location privacy for high-frequency fix streams.

Geo-indistinguishable perturbation (planar Laplace and planar staircase
mechanisms), thresholded release with session budget accounting, an
evaluation harness (kNN inference attack, displacement and catchability
metrics, latency benchmarks), and an HTTP demo service.
"""
from .attack import (
    AttackDataset,
    KnnModel,
    RiskEstimate,
    build_attack_dataset,
    choose_k,
    estimate_bayes_risk,
    knn_predict,
    knn_predict_batch,
)
from .geo import EARTH_RADIUS_M, GeoPoint, PlanarPoint, Projection, distance
from .ingest import (
    Fix,
    Grid,
    LoadReport,
    Region,
    Trace,
    clip_and_subsample,
    load_trace_pairs,
    load_traces,
    synth_walk,
    write_traces,
)
from .mechanisms import (
    StaircaseParams,
    plm_radial_inverse_cdf,
    plm_radial_mean,
    plm_sample,
    plm_sample_many,
    psm_radial_cdf,
    psm_radial_inverse_cdf,
    psm_radial_mean,
    psm_radial_pdf,
    psm_sample,
    psm_sample_many,
)
from .metrics import LatencyReport, MneResult, SweepRow, bench_perturb, mne, sweep
from .objects import (
    ObjectFieldConfig,
    VirtualObject,
    accumulated_loss,
    catchable_fraction,
    catchable_split,
    generate_field,
)
from .pipeline import MechanismConfig, PerturbResult, make_perturber, perturb_points
from .session import (
    BudgetExhaustedError,
    BudgetTooSmallError,
    DecisionKind,
    ReleaseDecision,
    TrPsmConfig,
    TrPsmSession,
)

__version__ = "1.0.0"

__all__ = [
    "AttackDataset",
    "BudgetExhaustedError",
    "EARTH_RADIUS_M",
    "BudgetTooSmallError",
    "DecisionKind",
    "Fix",
    "GeoPoint",
    "Grid",
    "KnnModel",
    "LatencyReport",
    "LoadReport",
    "MechanismConfig",
    "MneResult",
    "ObjectFieldConfig",
    "PerturbResult",
    "PlanarPoint",
    "Projection",
    "Region",
    "ReleaseDecision",
    "RiskEstimate",
    "StaircaseParams",
    "SweepRow",
    "Trace",
    "TrPsmConfig",
    "TrPsmSession",
    "VirtualObject",
    "accumulated_loss",
    "bench_perturb",
    "build_attack_dataset",
    "catchable_fraction",
    "catchable_split",
    "choose_k",
    "clip_and_subsample",
    "distance",
    "estimate_bayes_risk",
    "generate_field",
    "knn_predict",
    "knn_predict_batch",
    "load_trace_pairs",
    "load_traces",
    "make_perturber",
    "mne",
    "perturb_points",
    "plm_radial_inverse_cdf",
    "plm_radial_mean",
    "plm_sample",
    "plm_sample_many",
    "psm_radial_cdf",
    "psm_radial_inverse_cdf",
    "psm_radial_mean",
    "psm_radial_pdf",
    "psm_sample",
    "psm_sample_many",
    "sweep",
    "synth_walk",
    "write_traces",
]
