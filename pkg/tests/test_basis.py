import numpy as np
import pytest

import auxpolicy as ap
from auxpolicy.basis import (
    OutOfSpanWarning,
    bspline_basis,
    bspline_spec,
    cv_score,
    expand,
    identity_spec,
    polynomial_spec,
    select_bspline_spec,
)


def test_identity_with_intercept():
    spec = identity_spec(2)
    out = expand(spec, np.array([[0.3, -0.2]]))
    assert out.tolist() == [[1.0, 0.3, -0.2]]
    assert spec.width == 3


def test_polynomial_degree_two_appends_squares():
    spec = polynomial_spec(2, degree=2)
    out = expand(spec, np.array([[2.0, 3.0]]))
    assert out.tolist() == [[1.0, 2.0, 3.0, 4.0, 9.0]]
    assert spec.width == 5


def test_polynomial_restricted_to_continuous_dims():
    spec = polynomial_spec(3, degree=2, continuous_dims=(0,))
    out = expand(spec, np.array([[2.0, 3.0, 4.0]]))
    # intercept, all linear terms, square of dim 0 only
    assert out.tolist() == [[1.0, 2.0, 3.0, 4.0, 4.0]]
    assert spec.width == 5


def linear_hat(x, left, mid, right):
    """Direct evaluation of the degree-1 hat function on [left, right]."""
    if x < left or x > right:
        return 0.0
    if x <= mid:
        return (x - left) / (mid - left) if mid > left else 0.0
    return (right - x) / (right - mid) if right > mid else 0.0


def test_degree_one_bspline_matches_hat_functions():
    # knots [-1, -1, 0, 1, 1]: three basis functions; evaluate vs direct hats
    full = bspline_basis(np.array([0.5]), 1, [0.0], (-1.0, 1.0))
    expected = [
        linear_hat(0.5, -1.0, -1.0, 0.0),  # falls to zero at the interior knot
        linear_hat(0.5, -1.0, 0.0, 1.0),
        linear_hat(0.5, 0.0, 1.0, 1.0),
    ]
    assert full.shape == (1, 3)
    assert full[0] == pytest.approx(expected, abs=1e-12)
    assert full[0] == pytest.approx([0.0, 0.5, 0.5], abs=1e-12)


@pytest.mark.parametrize("degree", [1, 2, 3])
@pytest.mark.parametrize("knots", [(), (0.0,), (-0.4, 0.3)])
def test_partition_of_unity(degree, knots):
    x = np.linspace(-1.0, 1.0, 101)
    full = bspline_basis(x, degree, list(knots), (-1.0, 1.0))
    assert full.shape[1] == len(knots) + degree + 1
    assert np.allclose(full.sum(axis=1), 1.0, atol=1e-12)
    assert (full >= -1e-12).all()


def test_bspline_clamps_and_warns():
    with pytest.warns(OutOfSpanWarning):
        outside = bspline_basis(np.array([2.0]), 2, [0.0], (-1.0, 1.0))
    boundary = bspline_basis(np.array([1.0]), 2, [0.0], (-1.0, 1.0))
    assert np.allclose(outside, boundary)


def test_expand_is_row_equivariant():
    rng = np.random.default_rng(0)
    data = rng.uniform(-1, 1, (40, 3))
    spec = bspline_spec(data, degree=2, n_knots=1)
    perm = rng.permutation(40)
    assert np.allclose(expand(spec, data)[perm], expand(spec, data[perm]))


def test_column_zero_is_one():
    rng = np.random.default_rng(1)
    data = rng.uniform(-1, 1, (25, 2))
    for spec in (identity_spec(2), polynomial_spec(2, 3),
                 bspline_spec(data, 2, 1)):
        out = expand(spec, data)
        assert np.all(out[:, 0] == 1.0)
        assert out.shape[1] == spec.width


def test_bspline_width_matches_expansion():
    rng = np.random.default_rng(2)
    data = rng.uniform(-1, 1, (30, 4))
    spec = bspline_spec(data, degree=3, n_knots=2)
    assert expand(spec, data).shape[1] == spec.width


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError, match="columns"):
        expand(identity_spec(3), np.zeros((4, 2)))


def test_select_forced_on_noiseless_linear_data():
    rng = np.random.default_rng(7)
    X = rng.uniform(-1, 1, (60, 2))
    M = rng.uniform(-1, 1, (60, 2))
    y = 1.0 + X @ [2.0, -1.0] + M @ [0.5, 3.0]
    aux = ap.AuxiliarySample(X, M, y)
    sel = select_bspline_spec(aux, (1, 2, 3), (0, 1), folds=5, seed=0)
    assert (sel.degree, sel.n_knots) == (1, 0)


def test_select_beats_identity_on_s5(s5_selection):
    sel, identity_err = s5_selection
    assert sel.cv_error < identity_err
    assert sel.degree >= 2  # the quadratic outcome surface needs curvature


@pytest.fixture(scope="module")
def s5_selection():
    aux = ap.generate(ap.scenario("S5"), 400, with_outcome=True, seed=(88, 1))
    sel = select_bspline_spec(aux, (1, 2, 3), (0, 1, 2), folds=5, seed=3)
    identity_err = cv_score(aux, identity_spec(4), identity_spec(2), folds=5, seed=3)
    return sel, identity_err


def test_selection_is_deterministic():
    aux = ap.generate(ap.scenario("S3"), 150, with_outcome=True, seed=(9, 1))
    a = select_bspline_spec(aux, (1, 2), (0, 1), folds=5, seed=11)
    b = select_bspline_spec(aux, (1, 2), (0, 1), folds=5, seed=11)
    assert (a.degree, a.n_knots, a.cv_error) == (b.degree, b.n_knots, b.cv_error)
    assert a.basis_x == b.basis_x
