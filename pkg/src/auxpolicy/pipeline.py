"""End-to-end analysis: nuisance fits, rule search, and inference.

Two procedures are exposed through ``method``: a linear one (identity
bases everywhere) and a B-spline one (cross-validated spline bases for
the outcome mean, quadratic polynomial rule basis). The same driver
serves the command-line front end and the simulation harness.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .basis import (
    BasisSpec,
    OutOfSpanWarning,
    identity_spec,
    polynomial_spec,
    select_bspline_spec,
)
from .data import AuxiliarySample, ExperimentalSample, check_paired, sample_ratio
from .inference import (
    ConfidenceInterval,
    InfluenceComponents,
    compute_components,
    confidence_interval,
    estimate_sigma,
)
from .nuisance import (
    AugmentedFit,
    OutcomeMeanFit,
    PropensityFit,
    fit_augmented,
    fit_outcome_mean,
    fit_propensity,
    impute_outcomes,
)
from .search import SearchConfig, SearchResult, search_gear
from .value import (
    DecisionRule,
    aipw_value,
    constant_rule_value,
    decisions_for,
    ipw_value,
)

METHODS = ("gear-linear", "gear-bspline")
FATAL_FLAGS = ("ridge_fallback", "rank_deficient", "separation", "degenerate", "pinv")


@dataclass(frozen=True)
class AnalysisResult:
    """Fitted rule with its value, uncertainty, and diagnostics."""

    rule: DecisionRule
    value: float
    ipw: float
    sigma: float
    ci: ConfidenceInterval
    value_treat_none: float
    value_treat_all: float
    assigned_control: int
    assigned_treat: int
    ratio: float
    search: SearchResult
    propensity: PropensityFit
    outcome_mean: OutcomeMeanFit
    augmented: AugmentedFit
    components: InfluenceComponents
    flags: tuple
    clamped: bool

    @property
    def fatal_flags(self) -> tuple:
        return tuple(f for f in self.flags if f in FATAL_FLAGS)


def _select_bases(
    experimental: ExperimentalSample,
    auxiliary: AuxiliarySample,
    method: str,
    seed: int,
    continuous_dims,
    cv_degrees,
    cv_knot_counts,
    cv_folds: int,
):
    r = experimental.n_covariates
    s = experimental.n_intermediates
    if method == "gear-linear":
        return identity_spec(r), identity_spec(r), identity_spec(s)
    if method != "gear-bspline":
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    cont = tuple(continuous_dims) if continuous_dims is not None else tuple(range(r))
    selection = select_bspline_spec(
        auxiliary, cv_degrees, cv_knot_counts, folds=cv_folds, seed=seed
    )
    rule_basis = polynomial_spec(r, degree=2, continuous_dims=cont)
    return rule_basis, selection.basis_x, selection.basis_m


def run_analysis(
    experimental: ExperimentalSample,
    auxiliary: AuxiliarySample,
    method: str = "gear-linear",
    search: SearchConfig = SearchConfig(),
    propensity_mode: str = "logistic",
    ci_level: float = 0.95,
    aux_weight: str = "sqrt_ratio",
    seed: int = 0,
    continuous_dims=None,
    cv_degrees=(1, 2, 3),
    cv_knot_counts=(0, 1, 2),
    cv_folds: int = 5,
) -> AnalysisResult:
    """Fit everything, search for the rule, and attach the Wald interval."""
    check_paired(experimental, auxiliary)
    rule_basis, basis_x, basis_m = _select_bases(
        experimental, auxiliary, method, seed, continuous_dims,
        cv_degrees, cv_knot_counts, cv_folds,
    )
    clamped = False
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", OutOfSpanWarning)
        propensity = fit_propensity(experimental, rule_basis, propensity_mode)
        outcome_mean = fit_outcome_mean(auxiliary, basis_x, basis_m)
        imputed = impute_outcomes(outcome_mean, experimental)
        augmented = fit_augmented(experimental, imputed, rule_basis)
        result = search_gear(experimental, imputed, propensity, augmented,
                             rule_basis, search)
        rule = result.rule
        estimate = aipw_value(rule, experimental, imputed, propensity, augmented)
        ipw = ipw_value(rule, experimental, imputed, propensity)
        components = compute_components(
            rule, experimental, auxiliary, propensity, outcome_mean, augmented
        )
        v0 = constant_rule_value(0, experimental, imputed, propensity, augmented)
        v1 = constant_rule_value(1, experimental, imputed, propensity, augmented)
        clamped = any(issubclass(w.category, OutOfSpanWarning) for w in caught)
    ratio = sample_ratio(experimental, auxiliary)
    sigma = estimate_sigma(components, ratio, aux_weight)
    ci = confidence_interval(estimate.value, sigma, experimental.n, ci_level)
    decisions = decisions_for(rule, experimental.covariates)
    flags = tuple(sorted(set(
        propensity.flags + outcome_mean.flags + augmented.flags
        + result.flags + components.flags
    )))
    return AnalysisResult(
        rule=rule,
        value=estimate.value,
        ipw=ipw.value,
        sigma=sigma,
        ci=ci,
        value_treat_none=v0,
        value_treat_all=v1,
        assigned_control=int((decisions == 0).sum()),
        assigned_treat=int((decisions == 1).sum()),
        ratio=ratio,
        search=result,
        propensity=propensity,
        outcome_mean=outcome_mean,
        augmented=augmented,
        components=components,
        flags=flags,
        clamped=clamped,
    )


def evaluate_rule(
    experimental: ExperimentalSample,
    auxiliary: AuxiliarySample,
    beta,
    method: str = "gear-linear",
    propensity_mode: str = "logistic",
    ci_level: float = 0.95,
    aux_weight: str = "sqrt_ratio",
    seed: int = 0,
    continuous_dims=None,
) -> dict:
    """Value and interval for a user-supplied coefficient vector."""
    check_paired(experimental, auxiliary)
    rule_basis, basis_x, basis_m = _select_bases(
        experimental, auxiliary, method, seed, continuous_dims,
        (1, 2, 3), (0, 1, 2), 5,
    )
    beta = np.asarray(beta, dtype=float)
    rule = DecisionRule.from_vector(beta, rule_basis)
    propensity = fit_propensity(experimental, rule_basis, propensity_mode)
    outcome_mean = fit_outcome_mean(auxiliary, basis_x, basis_m)
    imputed = impute_outcomes(outcome_mean, experimental)
    augmented = fit_augmented(experimental, imputed, rule_basis)
    estimate = aipw_value(rule, experimental, imputed, propensity, augmented)
    components = compute_components(
        rule, experimental, auxiliary, propensity, outcome_mean, augmented
    )
    ratio = sample_ratio(experimental, auxiliary)
    sigma = estimate_sigma(components, ratio, aux_weight)
    ci = confidence_interval(estimate.value, sigma, experimental.n, ci_level)
    decisions = decisions_for(rule, experimental.covariates)
    return {
        "beta": rule.beta.tolist(),
        "value": estimate.value,
        "sigma": sigma,
        "sigma_value_scale": sigma / math.sqrt(experimental.n),
        "ci_lower": ci.lower,
        "ci_upper": ci.upper,
        "ci_level": ci.level,
        "assigned_control": int((decisions == 0).sum()),
        "assigned_treat": int((decisions == 1).sum()),
        "flags": sorted(set(
            propensity.flags + outcome_mean.flags + augmented.flags
            + components.flags
        )),
    }
