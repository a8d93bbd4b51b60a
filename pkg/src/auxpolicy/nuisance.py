"""Nuisance fits: propensity score, auxiliary outcome mean, augmented term.

The propensity is either the empirical treated fraction (randomized
designs) or a logistic fit solved by Newton iterations on the score
equation. The outcome mean is an OLS fit of the auxiliary outcome on the
stacked covariate/intermediate basis; the augmented term is a pair of
per-arm OLS fits of the imputed outcome on the rule basis.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .basis import BasisSpec, expand, stacked_design
from .data import AuxiliarySample, ExperimentalSample

PROPENSITY_CLIP = 1e-3
SCORE_TOL = 1e-8
MAX_IRLS_ITER = 100
RIDGE_PENALTY = 1e-4
LSTSQ_RCOND = 1e-10


class PositivityError(ValueError):
    """Only one treatment arm is present; inverse weighting is undefined."""


def _expit(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -35.0, 35.0)))


def solve_least_squares(design: np.ndarray, y: np.ndarray):
    """OLS with a rank-revealing solve.

    Underdetermined systems fall back to a ridge penalty; rank-deficient
    overdetermined ones keep the minimum-norm solution. Returns (coef, flags).
    """
    n, p = design.shape
    if n <= p:
        gram = design.T @ design / n
        gram[np.diag_indices_from(gram)] += RIDGE_PENALTY
        coef = np.linalg.solve(gram, design.T @ y / n)
        return coef, ("ridge_fallback",)
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=LSTSQ_RCOND)
    if rank < p:
        return coef, ("rank_deficient",)
    return coef, ()


@dataclass(frozen=True)
class PropensityFit:
    """Fitted treatment-probability model with clipped predictions."""

    mode: str
    gamma: np.ndarray
    basis: Optional[BasisSpec] = None
    flags: tuple = ()

    def probabilities(self, sample_or_matrix) -> np.ndarray:
        """Clipped treatment probabilities for the given rows."""
        if isinstance(sample_or_matrix, ExperimentalSample):
            x = sample_or_matrix.covariates
            n = sample_or_matrix.n
        else:
            x = np.asarray(sample_or_matrix, dtype=float)
            n = x.shape[0]
        if self.mode == "constant":
            probs = np.full(n, float(self.gamma))
        else:
            probs = _expit(expand(self.basis, x) @ self.gamma)
        return np.clip(probs, PROPENSITY_CLIP, 1.0 - PROPENSITY_CLIP)


def _newton_logistic(phi: np.ndarray, a: np.ndarray, penalty: float):
    n, p = phi.shape
    gamma = np.zeros(p)
    for _ in range(MAX_IRLS_ITER):
        pi = _expit(phi @ gamma)
        score = phi.T @ (a - pi) / n - penalty * gamma
        if not np.isfinite(score).all():
            return gamma, False
        if np.max(np.abs(score)) < SCORE_TOL:
            return gamma, True
        w = pi * (1.0 - pi)
        hess = (phi * w[:, None]).T @ phi / n
        hess[np.diag_indices_from(hess)] += penalty
        try:
            step = np.linalg.solve(hess, score)
        except np.linalg.LinAlgError:
            return gamma, False
        gamma = gamma + step
        if not np.isfinite(gamma).all():
            return gamma, False
    return gamma, False


def fit_propensity(
    sample: ExperimentalSample,
    basis: Optional[BasisSpec] = None,
    mode: str = "logistic",
) -> PropensityFit:
    """Fit the treatment-probability model on the experimental sample."""
    a = sample.treatments.astype(float)
    n_treated = int(a.sum())
    if n_treated == 0 or n_treated == sample.n:
        raise PositivityError(
            f"both arms required: {n_treated} treated out of {sample.n}"
        )
    if mode == "constant":
        return PropensityFit("constant", np.asarray(a.mean()), None, ())
    if mode != "logistic":
        raise ValueError(f"unknown propensity mode {mode!r}")
    if basis is None:
        raise ValueError("logistic mode requires a basis")
    phi = expand(basis, sample.covariates)
    gamma, converged = _newton_logistic(phi, a, penalty=0.0)
    if converged:
        return PropensityFit("logistic", gamma, basis, ())
    # separation or other divergence: refit with a small ridge penalty
    gamma, _ = _newton_logistic(phi, a, penalty=RIDGE_PENALTY)
    return PropensityFit("logistic", gamma, basis, ("separation",))


@dataclass(frozen=True)
class OutcomeMeanFit:
    """OLS fit of the auxiliary outcome on [phi_X | phi_M sans intercept]."""

    lam: np.ndarray
    basis_x: BasisSpec
    basis_m: BasisSpec
    flags: tuple = ()

    def design(self, X, M) -> np.ndarray:
        return stacked_design(self.basis_x, self.basis_m, X, M)

    def predict(self, X, M) -> np.ndarray:
        return self.design(X, M) @ self.lam


def fit_outcome_mean(
    auxiliary: AuxiliarySample, basis_x: BasisSpec, basis_m: BasisSpec
) -> OutcomeMeanFit:
    """Regress the auxiliary outcome on the stacked basis."""
    design = stacked_design(basis_x, basis_m, auxiliary.covariates,
                            auxiliary.intermediates)
    lam, flags = solve_least_squares(design, auxiliary.outcomes)
    return OutcomeMeanFit(lam, basis_x, basis_m, flags)


def impute_outcomes(fit: OutcomeMeanFit, experimental: ExperimentalSample) -> np.ndarray:
    """Predicted long-term outcome for every experimental row."""
    return fit.predict(experimental.covariates, experimental.intermediates)


@dataclass(frozen=True)
class AugmentedFit:
    """Per-arm regressions of the imputed outcome on the rule basis."""

    theta0: np.ndarray
    theta1: np.ndarray
    basis: BasisSpec
    flags: tuple = ()


def fit_augmented(
    experimental: ExperimentalSample, imputed: np.ndarray, basis: BasisSpec
) -> AugmentedFit:
    """Fit the imputed outcome on the rule basis separately in each arm."""
    imputed = np.asarray(imputed, dtype=float)
    if imputed.shape[0] != experimental.n:
        raise ValueError("imputed vector length must match the sample size")
    a = experimental.treatments
    if a.sum() == 0 or a.sum() == experimental.n:
        raise PositivityError("both arms required to fit the augmented term")
    phi = expand(basis, experimental.covariates)
    theta0, f0 = solve_least_squares(phi[a == 0], imputed[a == 0])
    theta1, f1 = solve_least_squares(phi[a == 1], imputed[a == 1])
    return AugmentedFit(theta0, theta1, basis, tuple(sorted(set(f0 + f1))))


def augmented_term(
    fit: AugmentedFit, rule_decisions: np.ndarray, basis_matrix: np.ndarray
) -> np.ndarray:
    """Predicted outcome under the rule's assigned arm, row by row."""
    d = np.asarray(rule_decisions)
    if d.shape[0] != basis_matrix.shape[0]:
        raise ValueError("decision vector and basis matrix row counts differ")
    p0 = basis_matrix @ fit.theta0
    p1 = basis_matrix @ fit.theta1
    return np.where(d == 1, p1, p0)
