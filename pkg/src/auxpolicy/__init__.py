"""Decision rules for unobserved long-term outcomes.

Estimates an optimal binary treatment rule from an experimental sample
whose long-term outcome is missing, imputing that outcome from an
auxiliary sample, maximizing an augmented inverse-propensity-weighted
value over unit-norm linear rules, and attaching an influence-function
confidence interval. A simulation engine reproduces the scenario studies.
"""

__version__ = "0.1.0"

from .basis import (
    BasisSpec,
    bspline_basis,
    expand,
    identity_spec,
    polynomial_spec,
    select_bspline_spec,
)
from .data import (
    AuxiliarySample,
    DataError,
    DimensionError,
    ExperimentalSample,
    ParseError,
    SampleError,
    SchemaError,
    load_auxiliary,
    load_experimental,
    read_schema,
    sample_ratio,
    save_auxiliary,
    save_experimental,
)
from .inference import (
    ConfidenceInterval,
    InfluenceComponents,
    compute_components,
    confidence_interval,
    estimate_sigma,
    normal_quantile,
)
from .nuisance import (
    AugmentedFit,
    OutcomeMeanFit,
    PositivityError,
    PropensityFit,
    augmented_term,
    fit_augmented,
    fit_outcome_mean,
    fit_propensity,
    impute_outcomes,
)
from .pipeline import AnalysisResult, evaluate_rule, run_analysis
from .search import SearchConfig, SearchResult, search_gear
from .simulation import (
    ReplicationReport,
    ScenarioSpec,
    TruthSpec,
    generate,
    optimal_true_value,
    rate_correct_decision,
    run_replications,
    scenario,
    sensitivity_sweep,
    true_value,
    truth_spec,
)
from .value import (
    DecisionRule,
    ValueEstimate,
    aipw_value,
    decide,
    ipw_value,
    sign_folded_distance,
)

__all__ = [
    "AnalysisResult",
    "AugmentedFit",
    "AuxiliarySample",
    "BasisSpec",
    "ConfidenceInterval",
    "DataError",
    "DecisionRule",
    "DimensionError",
    "ExperimentalSample",
    "InfluenceComponents",
    "OutcomeMeanFit",
    "ParseError",
    "PositivityError",
    "PropensityFit",
    "ReplicationReport",
    "SampleError",
    "ScenarioSpec",
    "SchemaError",
    "SearchConfig",
    "SearchResult",
    "TruthSpec",
    "ValueEstimate",
    "aipw_value",
    "augmented_term",
    "bspline_basis",
    "compute_components",
    "confidence_interval",
    "decide",
    "estimate_sigma",
    "evaluate_rule",
    "expand",
    "fit_augmented",
    "fit_outcome_mean",
    "fit_propensity",
    "generate",
    "identity_spec",
    "impute_outcomes",
    "ipw_value",
    "load_auxiliary",
    "load_experimental",
    "normal_quantile",
    "optimal_true_value",
    "polynomial_spec",
    "rate_correct_decision",
    "read_schema",
    "run_analysis",
    "run_replications",
    "sample_ratio",
    "save_auxiliary",
    "save_experimental",
    "scenario",
    "search_gear",
    "select_bspline_spec",
    "sensitivity_sweep",
    "sign_folded_distance",
    "true_value",
    "truth_spec",
]
