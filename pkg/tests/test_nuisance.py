import numpy as np
import pytest

import auxpolicy as ap
from auxpolicy.basis import expand, identity_spec
from auxpolicy.data import AuxiliarySample, ExperimentalSample
from auxpolicy.nuisance import (
    PROPENSITY_CLIP,
    PositivityError,
    augmented_term,
    fit_augmented,
    fit_outcome_mean,
    fit_propensity,
    impute_outcomes,
)
from auxpolicy.simulation import potential_outcomes

from conftest import BETA0_S1


def make_experimental(n, treatments, r=2, s=1, seed=0):
    rng = np.random.default_rng(seed)
    return ExperimentalSample(
        rng.uniform(-1, 1, (n, r)), treatments, rng.uniform(-1, 1, (n, s)))


def test_constant_propensity_is_treated_fraction():
    sample = make_experimental(4, [1, 1, 0, 1])
    fit = fit_propensity(sample, mode="constant")
    assert float(fit.gamma) == pytest.approx(0.75)
    assert fit.probabilities(sample) == pytest.approx(np.full(4, 0.75))


def test_actg_style_split():
    treatments = np.r_[np.ones(189), np.zeros(187)]
    sample = make_experimental(376, treatments, seed=1)
    fit = fit_propensity(sample, mode="constant")
    assert float(fit.gamma) == pytest.approx(0.503, abs=5e-4)


def test_single_arm_raises():
    with pytest.raises(PositivityError):
        fit_propensity(make_experimental(5, [1, 1, 1, 1, 1]), mode="constant")


def test_logistic_score_equation_holds(s1_fitted):
    fit = s1_fitted["propensity"]
    sample = s1_fitted["experimental"]
    phi = expand(fit.basis, sample.covariates)
    probs = fit.probabilities(sample)
    score = phi.T @ (sample.treatments - probs) / sample.n
    assert np.max(np.abs(score)) < 1e-8
    assert not fit.flags


def test_logistic_slopes_near_zero_under_independence():
    """Treatment independent of covariates: slopes within 3 SEs of zero,
    with the SEs read off the converged weighted-Gram information matrix."""
    rng = np.random.default_rng(42)
    n = 800
    sample = ExperimentalSample(
        rng.uniform(-1, 1, (n, 4)),
        (rng.random(n) < 0.5).astype(int),
        rng.uniform(-1, 1, (n, 2)))
    fit = fit_propensity(sample, identity_spec(4), "logistic")
    phi = expand(fit.basis, sample.covariates)
    probs = fit.probabilities(sample)
    info = (phi * (probs * (1 - probs))[:, None]).T @ phi
    ses = np.sqrt(np.diag(np.linalg.inv(info)))
    z = fit.gamma[1:] / ses[1:]
    assert np.max(np.abs(z)) < 3.0


def test_propensity_clipping_bounds():
    rng = np.random.default_rng(3)
    n = 60
    x = rng.uniform(-1, 1, (n, 1))
    # near-separated design pushes fitted probabilities to the boundary
    a = (x[:, 0] > 0).astype(int)
    a[:2] = 1 - a[:2]
    sample = ExperimentalSample(x, a, rng.uniform(-1, 1, (n, 1)))
    fit = fit_propensity(sample, identity_spec(1), "logistic")
    probs = fit.probabilities(sample)
    assert probs.min() >= PROPENSITY_CLIP
    assert probs.max() <= 1 - PROPENSITY_CLIP


def test_outcome_mean_recovers_noiseless_s1_coefficients():
    spec = ap.scenario("S1")
    rng = np.random.default_rng(11)
    X = rng.uniform(-1, 1, (200, 4))
    d = (rng.random(200) < 0.5).astype(int)
    M, Y = potential_outcomes(spec, X, d)  # noiseless generator
    aux = AuxiliarySample(X, M, Y)
    fit = fit_outcome_mean(aux, identity_spec(4), identity_spec(2))
    assert fit.lam == pytest.approx([-1, 0, 1, 0, 1, 1, 1], abs=1e-8)
    assert not fit.flags


def test_outcome_mean_constant_outcome():
    rng = np.random.default_rng(12)
    aux = AuxiliarySample(rng.uniform(-1, 1, (50, 2)),
                          rng.uniform(-1, 1, (50, 2)),
                          np.full(50, 7.5))
    fit = fit_outcome_mean(aux, identity_spec(2), identity_spec(2))
    assert fit.lam == pytest.approx([7.5, 0, 0, 0, 0], abs=1e-9)


def test_exact_interpolation_on_line():
    from auxpolicy.nuisance import solve_least_squares

    design = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]])
    coef, flags = solve_least_squares(design, np.array([0.0, 1.0, 2.0]))
    assert coef == pytest.approx([0.0, 1.0], abs=1e-12)
    assert flags == ()


def test_normal_equations_hold(s1_fitted):
    fit = s1_fitted["outcome_mean"]
    aux = s1_fitted["auxiliary"]
    design = fit.design(aux.covariates, aux.intermediates)
    resid = aux.outcomes - design @ fit.lam
    assert np.max(np.abs(design.T @ resid / aux.n)) < 1e-8


def test_impute_simple_cases():
    from auxpolicy.nuisance import OutcomeMeanFit

    # identity on the intermediate: stacked design (1, x, m), lam = (0, 0, 1)
    fit = OutcomeMeanFit(np.array([0.0, 0.0, 1.0]), identity_spec(1),
                         identity_spec(1))
    exp = ExperimentalSample(np.array([[0.0], [0.0]]), [0, 1],
                             np.array([[2.0], [5.0]]))
    assert impute_outcomes(fit, exp) == pytest.approx([2.0, 5.0], abs=1e-12)
    constant = OutcomeMeanFit(np.array([4.5, 0.0, 0.0]), identity_spec(1),
                              identity_spec(1))
    assert impute_outcomes(constant, exp) == pytest.approx([4.5, 4.5], abs=1e-12)


def test_impute_is_linear_in_coefficients(s1_fitted):
    fit = s1_fitted["outcome_mean"]
    exp = s1_fitted["experimental"]
    double = type(fit)(2.0 * fit.lam, fit.basis_x, fit.basis_m, fit.flags)
    assert np.allclose(impute_outcomes(double, exp),
                       2.0 * impute_outcomes(fit, exp))


def test_impute_matches_generator_on_noiseless_s1():
    spec = ap.scenario("S1")
    rng = np.random.default_rng(21)
    X = rng.uniform(-1, 1, (300, 4))
    d = (rng.random(300) < 0.5).astype(int)
    M, Y = potential_outcomes(spec, X, d)
    fit = fit_outcome_mean(AuxiliarySample(X, M, Y), identity_spec(4),
                           identity_spec(2))
    X2 = rng.uniform(-1, 1, (50, 4))
    d2 = (rng.random(50) < 0.5).astype(int)
    M2, Y2 = potential_outcomes(spec, X2, d2)
    held_out = ExperimentalSample(X2, d2, M2)
    assert impute_outcomes(fit, held_out) == pytest.approx(Y2, abs=1e-8)


def test_augmented_constant_imputations():
    sample = make_experimental(12, [0, 1] * 6, seed=5)
    fit = fit_augmented(sample, np.full(12, 5.0), identity_spec(2))
    assert fit.theta0 == pytest.approx([5, 0, 0], abs=1e-9)
    assert fit.theta1 == pytest.approx([5, 0, 0], abs=1e-9)
    assert not fit.flags


def test_augmented_per_arm_normal_equations(s1_fitted):
    fit = s1_fitted["augmented"]
    sample = s1_fitted["experimental"]
    imputed = s1_fitted["imputed"]
    phi = expand(fit.basis, sample.covariates)
    a = sample.treatments
    r0 = phi.T @ ((1 - a) * (imputed - phi @ fit.theta0)) / sample.n
    r1 = phi.T @ (a * (imputed - phi @ fit.theta1)) / sample.n
    assert np.max(np.abs(r0)) < 1e-8
    assert np.max(np.abs(r1)) < 1e-8


def test_augmented_term_examples():
    from auxpolicy.nuisance import AugmentedFit

    # intercept-only behavior: slope coordinates are zero
    fit = AugmentedFit(np.array([2.0, 0.0]), np.array([7.0, 0.0]),
                       identity_spec(1))
    phi = expand(identity_spec(1), np.zeros((2, 1)))
    assert augmented_term(fit, np.array([0, 1]), phi) == pytest.approx([2.0, 7.0])
    assert augmented_term(fit, np.array([1, 1]), phi) == pytest.approx([7.0, 7.0])
    equal = AugmentedFit(fit.theta0, fit.theta0, fit.basis)
    assert augmented_term(equal, np.array([0, 1]), phi) == pytest.approx(
        augmented_term(equal, np.array([1, 0]), phi))


def test_augmented_matches_stratified_means_on_s1():
    """Predicted per-arm means agree with direct stratified sample means,
    stratifying on the side of the optimal boundary."""
    spec = ap.scenario("S1")
    exp = ap.generate(spec, 800, seed=(31, 0))
    aux = ap.generate(spec, 2000, with_outcome=True, seed=(31, 1))
    om = fit_outcome_mean(aux, identity_spec(4), identity_spec(2))
    imputed = impute_outcomes(om, exp)
    fit = fit_augmented(exp, imputed, identity_spec(4))
    phi = expand(identity_spec(4), exp.covariates)
    side = (phi @ BETA0_S1 > 0).astype(int)
    a = exp.treatments
    for arm, theta in ((0, fit.theta0), (1, fit.theta1)):
        for s in (0, 1):
            rows = (a == arm) & (side == s)
            direct = imputed[rows].mean()
            modeled = (phi[rows] @ theta).mean()
            assert modeled == pytest.approx(direct, abs=0.1)


def test_ridge_fallback_flag_when_underdetermined():
    rng = np.random.default_rng(8)
    aux = AuxiliarySample(rng.uniform(-1, 1, (4, 4)), rng.uniform(-1, 1, (4, 2)),
                          rng.normal(size=4))
    fit = fit_outcome_mean(aux, identity_spec(4), identity_spec(2))
    assert "ridge_fallback" in fit.flags
