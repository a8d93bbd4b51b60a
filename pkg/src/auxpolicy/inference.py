"""Influence-function variance of the AIPW value and its Wald interval.

The per-row expansion splits into an experimental part (concordant-arm
payoff plus corrections for the estimated propensity and per-arm
augmentation coefficients) and an auxiliary part (outcome-regression
residuals propagated through the imputation). Their second moments are
combined with the sample-ratio weight to give the value's standard error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .basis import expand
from .data import AuxiliarySample, ExperimentalSample
from .nuisance import AugmentedFit, OutcomeMeanFit, PropensityFit, impute_outcomes
from .value import DecisionRule, concordance_denominator, decide

PINV_RCOND = 1e-10


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float
    sigma: float


@dataclass(frozen=True)
class InfluenceComponents:
    """Finite-sample plug-ins for the variance expansion at the fitted rule."""

    H1: np.ndarray
    H2: np.ndarray
    H3: np.ndarray
    H4: np.ndarray
    G1: np.ndarray
    G2: np.ndarray
    G3: np.ndarray
    G4: np.ndarray
    G5: np.ndarray
    xi_e: np.ndarray
    xi_u: np.ndarray
    value: float
    xi_e_base: np.ndarray
    xi_e_score: Optional[np.ndarray]
    xi_e_arm0: np.ndarray
    xi_e_arm1: np.ndarray
    flags: tuple = ()


def _solve(matrix: np.ndarray, vector: np.ndarray, flags: list) -> np.ndarray:
    try:
        out = np.linalg.solve(matrix, vector)
        if np.isfinite(out).all():
            return out
    except np.linalg.LinAlgError:
        pass
    flags.append("pinv")
    return np.linalg.pinv(matrix, rcond=PINV_RCOND) @ vector


def compute_components(
    rule: DecisionRule,
    experimental: ExperimentalSample,
    auxiliary: AuxiliarySample,
    propensity: PropensityFit,
    outcome_mean: OutcomeMeanFit,
    augmented: AugmentedFit,
) -> InfluenceComponents:
    """Assemble the per-row influence terms at the fitted rule."""
    flags: list = []
    n_e = experimental.n
    n_u = auxiliary.n
    a = experimental.treatments.astype(float)
    phi = expand(augmented.basis, experimental.covariates)
    d = decide(rule, expand(rule.basis, experimental.covariates)).astype(float)
    mu = impute_outcomes(outcome_mean, experimental)
    pi = propensity.probabilities(experimental)
    s = concordance_denominator(a, pi)
    r = (a == d).astype(float)
    q = (phi @ augmented.theta0) * (1.0 - d) + (phi @ augmented.theta1) * d
    base = r * (mu - q) / s + q
    value = float(base.mean())

    # per-arm Gram blocks and augmentation corrections
    H3 = phi.T @ (phi * (1.0 - a)[:, None]) / n_e
    H4 = phi.T @ (phi * a[:, None]) / n_e
    weight = 1.0 - r / s
    G4 = phi.T @ (weight * (1.0 - d)) / n_e
    G5 = phi.T @ (weight * d) / n_e
    res0 = (1.0 - a) * (mu - phi @ augmented.theta0)
    res1 = a * (mu - phi @ augmented.theta1)
    arm0 = (phi @ _solve(H3, G4, flags)) * res0
    arm1 = (phi @ _solve(H4, G5, flags)) * res1

    # propensity-estimation correction (absent when the score is by design)
    if propensity.mode == "logistic":
        pdot = pi * (1.0 - pi)
        H1 = phi.T @ (phi * pdot[:, None]) / n_e
        G1 = phi.T @ (r * (1.0 - 2.0 * a) * pdot * mu / s**2) / n_e
        G3 = phi.T @ (-r * (1.0 - 2.0 * a) * pdot * q / s**2) / n_e
        score = (phi @ _solve(H1, G1 + G3, flags)) * (a - pi)
    else:
        H1 = np.zeros((0, 0))
        G1 = np.zeros(0)
        G3 = np.zeros(0)
        score = None

    # auxiliary-side propagation through the outcome-mean coefficients
    psi_u = outcome_mean.design(auxiliary.covariates, auxiliary.intermediates)
    psi_e = outcome_mean.design(experimental.covariates, experimental.intermediates)
    H2 = psi_u.T @ psi_u / n_u
    G2 = psi_e.T @ (r / s) / n_e
    resid_u = auxiliary.outcomes - psi_u @ outcome_mean.lam
    xi_u = (psi_u @ _solve(H2, G2, flags)) * resid_u

    xi_e = base - value + arm0 + arm1
    if score is not None:
        xi_e = xi_e + score
    return InfluenceComponents(
        H1, H2, H3, H4, G1, G2, G3, G4, G5, xi_e, xi_u, value,
        xi_e_base=base, xi_e_score=score, xi_e_arm0=arm0, xi_e_arm1=arm1,
        flags=tuple(sorted(set(flags))),
    )


def estimate_sigma(
    components: InfluenceComponents,
    ratio: float,
    aux_weight: str = "sqrt_ratio",
) -> float:
    """Combine the two samples' second moments into the value's sigma.

    ``ratio`` is sqrt(N_E / N_U). The default weights the auxiliary block
    by the ratio itself; ``"ratio"`` uses its square instead.
    """
    sigma_e2 = float(np.mean(components.xi_e**2))
    sigma_u2 = float(np.mean(components.xi_u**2))
    if aux_weight == "sqrt_ratio":
        w = ratio
    elif aux_weight == "ratio":
        w = ratio * ratio
    else:
        raise ValueError(f"unknown aux_weight {aux_weight!r}")
    return math.sqrt(w * sigma_u2 + sigma_e2)


def normal_quantile(p: float) -> float:
    """Inverse standard-normal CDF via a rational approximation plus one
    Newton refinement; absolute error is far below 1e-9."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly between 0 and 1")
    a = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
    b = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01)
    c = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
         -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
    dd = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
          3.754408661907416e+00)
    p_low, p_high = 0.02425, 1.0 - 0.02425
    if p < p_low:
        z = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * z + c[1]) * z + c[2]) * z + c[3]) * z + c[4]) * z + c[5]) / \
            ((((dd[0] * z + dd[1]) * z + dd[2]) * z + dd[3]) * z + 1.0)
    elif p <= p_high:
        z = p - 0.5
        z2 = z * z
        x = (((((a[0] * z2 + a[1]) * z2 + a[2]) * z2 + a[3]) * z2 + a[4]) * z2 + a[5]) * z / \
            (((((b[0] * z2 + b[1]) * z2 + b[2]) * z2 + b[3]) * z2 + b[4]) * z2 + 1.0)
    else:
        z = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -(((((c[0] * z + c[1]) * z + c[2]) * z + c[3]) * z + c[4]) * z + c[5]) / \
            ((((dd[0] * z + dd[1]) * z + dd[2]) * z + dd[3]) * z + 1.0)
    # one Newton step against the exact CDF
    err = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    x -= err * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x


def confidence_interval(
    value: float, sigma: float, n_e: int, level: float = 0.95
) -> ConfidenceInterval:
    """Two-sided Wald interval for the value at the given coverage level."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie strictly between 0 and 1")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    z = normal_quantile(1.0 - (1.0 - level) / 2.0)
    half = z * sigma / math.sqrt(n_e)
    return ConfidenceInterval(value - half, value + half, level, sigma)
