"""Decision rules and the inverse-propensity value estimators."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisSpec, expand
from .data import ExperimentalSample
from .nuisance import AugmentedFit, PropensityFit, augmented_term

UNIT_NORM_TOL = 1e-10


@dataclass(frozen=True)
class DecisionRule:
    """Unit-norm coefficient vector over a basis; treat when the score is > 0."""

    beta: np.ndarray
    basis: BasisSpec

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim != 1 or beta.shape[0] != self.basis.width:
            raise ValueError(
                f"beta must have length {self.basis.width}, got shape {beta.shape}"
            )
        norm = float(np.linalg.norm(beta))
        if abs(norm - 1.0) > UNIT_NORM_TOL:
            raise ValueError(f"beta must be unit-norm, |beta| = {norm}")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)

    @classmethod
    def from_vector(cls, beta, basis: BasisSpec) -> "DecisionRule":
        """Normalize an arbitrary nonzero vector into a rule."""
        beta = np.asarray(beta, dtype=float)
        norm = float(np.linalg.norm(beta))
        if norm == 0.0 or not np.isfinite(norm):
            raise ValueError("cannot normalize a zero or non-finite vector")
        return cls(beta / norm, basis)


def decide(rule: DecisionRule, basis_matrix: np.ndarray) -> np.ndarray:
    """0/1 decisions; the boundary score 0 maps to action 0."""
    return (basis_matrix @ rule.beta > 0.0).astype(np.int64)


def decisions_for(rule: DecisionRule, covariates: np.ndarray) -> np.ndarray:
    return decide(rule, expand(rule.basis, covariates))


@dataclass(frozen=True)
class ValueEstimate:
    value: float
    estimator: str
    rule: DecisionRule


def concordance_denominator(treatments: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Probability of the arm actually received: A*pi + (1-A)*(1-pi)."""
    a = np.asarray(treatments)
    return a * probs + (1 - a) * (1.0 - probs)


def ipw_arm_terms(
    experimental: ExperimentalSample,
    imputed: np.ndarray,
    propensity: PropensityFit,
):
    """Per-row contributions (t0, t1) so the IPW value is mean(where(d, t1, t0))."""
    a = experimental.treatments
    s = concordance_denominator(a, propensity.probabilities(experimental))
    t1 = a * imputed / s
    t0 = (1 - a) * imputed / s
    return t0, t1


def aipw_arm_terms(
    experimental: ExperimentalSample,
    imputed: np.ndarray,
    propensity: PropensityFit,
    augmented: AugmentedFit,
    basis_matrix: np.ndarray,
):
    """Per-row contributions (t0, t1) so the AIPW value is mean(where(d, t1, t0))."""
    a = experimental.treatments
    s = concordance_denominator(a, propensity.probabilities(experimental))
    p0 = basis_matrix @ augmented.theta0
    p1 = basis_matrix @ augmented.theta1
    t0 = p0 + (1 - a) * (imputed - p0) / s
    t1 = p1 + a * (imputed - p1) / s
    return t0, t1


def ipw_value(
    rule: DecisionRule,
    experimental: ExperimentalSample,
    imputed: np.ndarray,
    propensity: PropensityFit,
) -> ValueEstimate:
    """Inverse-propensity value of the rule with the imputed outcome."""
    t0, t1 = ipw_arm_terms(experimental, imputed, propensity)
    d = decisions_for(rule, experimental.covariates)
    return ValueEstimate(float(np.where(d == 1, t1, t0).mean()), "ipw", rule)


def aipw_value(
    rule: DecisionRule,
    experimental: ExperimentalSample,
    imputed: np.ndarray,
    propensity: PropensityFit,
    augmented: AugmentedFit,
) -> ValueEstimate:
    """Augmented inverse-propensity value of the rule."""
    phi = expand(augmented.basis, experimental.covariates)
    d = decisions_for(rule, experimental.covariates)
    t0, t1 = aipw_arm_terms(experimental, imputed, propensity, augmented, phi)
    return ValueEstimate(float(np.where(d == 1, t1, t0).mean()), "aipw", rule)


def constant_rule_value(
    action: int,
    experimental: ExperimentalSample,
    imputed: np.ndarray,
    propensity: PropensityFit,
    augmented: AugmentedFit,
) -> float:
    """AIPW value of the rule that assigns every unit the same action."""
    phi = expand(augmented.basis, experimental.covariates)
    t0, t1 = aipw_arm_terms(experimental, imputed, propensity, augmented, phi)
    return float((t1 if action == 1 else t0).mean())


def sign_folded_distance(beta_hat: np.ndarray, beta_ref: np.ndarray) -> float:
    """L2 distance up to the sign ambiguity of a unit-norm boundary vector."""
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta_ref = np.asarray(beta_ref, dtype=float)
    return float(
        min(np.linalg.norm(beta_hat - beta_ref), np.linalg.norm(beta_hat + beta_ref))
    )
