import numpy as np
import pytest

import auxpolicy as ap
from auxpolicy.basis import identity_spec
from auxpolicy.nuisance import (
    fit_augmented,
    fit_outcome_mean,
    fit_propensity,
    impute_outcomes,
)

BETA0_S1 = np.array([0.0, 0.5, -0.5, -0.5, 0.5])
BETA0_S6 = np.array([0.0, 1.0, -1.0]) / np.sqrt(2.0)


@pytest.fixture(scope="session")
def s1_fitted():
    """One fitted S1 setup shared by nuisance/value/inference tests."""
    spec = ap.scenario("S1")
    experimental = ap.generate(spec, 300, seed=(5150, 0))
    auxiliary = ap.generate(spec, 350, with_outcome=True, seed=(5150, 1))
    rule_basis = identity_spec(4)
    propensity = fit_propensity(experimental, rule_basis, "logistic")
    outcome_mean = fit_outcome_mean(auxiliary, identity_spec(4), identity_spec(2))
    imputed = impute_outcomes(outcome_mean, experimental)
    augmented = fit_augmented(experimental, imputed, rule_basis)
    return {
        "spec": spec,
        "experimental": experimental,
        "auxiliary": auxiliary,
        "rule_basis": rule_basis,
        "propensity": propensity,
        "outcome_mean": outcome_mean,
        "imputed": imputed,
        "augmented": augmented,
    }


def write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path
