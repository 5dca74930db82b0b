"""E-value sensitivity analysis for treatments at multiple time points.

The package has three layers.  `evalue` holds the closed-form robustness
algebra: bias factors for joint unmeasured confounding, E-values for a
point estimate or confidence limit, the equal-split and single-timepoint
summaries, and the two-timepoint trade-off curve.  `estimation` and
`simulation` provide the validation engine: a marginal structural model
fit by stabilized inverse-probability weighting, and a fully specified
two-timepoint generating process with known truth.  `report` and `cli`
handle cohort CSV files, JSON reports, and curve export.
"""

__version__ = "0.1.0"

from .estimation import (
    BootstrapFailure,
    CohortRecord,
    EstimationError,
    FittedLogistic,
    MsmResult,
    PositivityViolation,
    SeparationWarning,
    SingularDesign,
    WeightDiagnosticWarning,
    bootstrap_ci,
    fit_logistic,
    fit_msm,
    stabilized_weights,
)
from .evalue import (
    BiasFactor,
    ConfounderStrength,
    EffectEstimate,
    EValueReport,
    Measure,
    NormalizedEstimate,
    TradeoffPoint,
    adjusted_rr,
    bias_factor,
    build_report,
    ci_evalue,
    combined_bias,
    equal_split_evalue,
    evalue_from_rr,
    normalize_estimate,
    residual_evalue,
    tradeoff_curve,
)
from .report import (
    CurveDocument,
    EmptyFile,
    MissingColumn,
    NonBinaryValue,
    curve_document,
    read_cohort_csv,
    write_cohort_csv,
    write_curve,
    write_report_json,
)
from .simulation import (
    ExperimentRecord,
    GeneratedCohort,
    ReplicationResult,
    SimulationParams,
    generate_cohort,
    run_experiment,
    run_replications,
    true_rr_enumerate,
    true_rr_mc,
)

__all__ = [
    "__version__",
    "BiasFactor",
    "BootstrapFailure",
    "CohortRecord",
    "ConfounderStrength",
    "CurveDocument",
    "EValueReport",
    "EffectEstimate",
    "EmptyFile",
    "EstimationError",
    "ExperimentRecord",
    "FittedLogistic",
    "GeneratedCohort",
    "Measure",
    "MissingColumn",
    "MsmResult",
    "NonBinaryValue",
    "NormalizedEstimate",
    "PositivityViolation",
    "ReplicationResult",
    "SeparationWarning",
    "SimulationParams",
    "SingularDesign",
    "TradeoffPoint",
    "WeightDiagnosticWarning",
    "adjusted_rr",
    "bias_factor",
    "bootstrap_ci",
    "build_report",
    "ci_evalue",
    "combined_bias",
    "curve_document",
    "equal_split_evalue",
    "evalue_from_rr",
    "fit_logistic",
    "fit_msm",
    "generate_cohort",
    "normalize_estimate",
    "read_cohort_csv",
    "residual_evalue",
    "run_experiment",
    "run_replications",
    "stabilized_weights",
    "tradeoff_curve",
    "true_rr_enumerate",
    "true_rr_mc",
    "write_cohort_csv",
    "write_curve",
    "write_report_json",
]
