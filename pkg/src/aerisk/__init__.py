"""Adverse-event risk under competing events and varying follow-up."""

from ._accel import backend_name
from .bootstrap import BootstrapConfig, BootstrapResult, bootstrap_ci
from .categorize import (
    CrossTab,
    EvidenceCategory,
    FrequencyCategory,
    crosstab,
    evidence_category,
    frequency_category,
)
from .data import (
    AnalysisSet,
    Arm,
    EventRecord,
    max_evaluation_time,
    parse_dataset,
    read_dataset,
    reclassify_ce,
    resolve_tau,
    split_by_arm,
    write_dataset,
)
from .errors import (
    AeriskError,
    BootstrapError,
    ConvergenceError,
    DataError,
    ExclusionError,
    MonotoneLikelihoodError,
    NumericalError,
    SummaryValidationError,
)
from .exchange import (
    MetaResult,
    TrialSummary,
    export_summary,
    pool_and_regress,
    summarize_trial,
    validate_summary,
)
from .one_sample import (
    HazardRate,
    Method,
    ProbabilityEstimate,
    StepCurve,
    aalen_johansen,
    all_estimates,
    incidence_density,
    incidence_proportion,
    one_minus_km,
    prob_transform_ignoring_ce,
    prob_transform_with_ce,
)
from .simulate import (
    ArmHazards,
    Censoring,
    SimConfig,
    run_bias_study,
    simulate_trial,
    true_ae_probability,
)
from .two_sample import (
    RelativeEffect,
    cox_hazard_ratio,
    incidence_density_ratio,
    risk_ratio,
    risk_ratios,
)

__version__ = "0.1.0"
