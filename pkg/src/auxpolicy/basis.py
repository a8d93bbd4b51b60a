"""Basis expansions for the regressions and the decision-rule class.

Three kinds are supported: identity with an intercept, per-dimension
polynomials (no cross terms), and clamped B-splines with optional pairwise
tensor products among the continuous dimensions. Every expansion puts the
constant 1 in column 0.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import AuxiliarySample

IDENTITY = "identity-with-intercept"
POLYNOMIAL = "polynomial"
BSPLINE = "bspline-tensor"


class OutOfSpanWarning(UserWarning):
    """B-spline input fell outside the knot span and was clamped."""


@dataclass(frozen=True)
class BasisSpec:
    """Deterministic description of one expansion; width is derivable from it.

    ``knots`` and ``spans`` are per-continuous-dimension tuples (interior
    knots, and the boundary interval used for clamping). ``tensor_pairs``
    adds pairwise products between the B-spline blocks of distinct
    continuous dimensions.
    """

    kind: str
    input_dim: int
    degree: int = 1
    continuous_dims: tuple = ()
    knots: tuple = ()
    spans: tuple = ()
    tensor_pairs: bool = True

    def __post_init__(self):
        if self.kind not in (IDENTITY, POLYNOMIAL, BSPLINE):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if self.kind != IDENTITY and self.degree < 1:
            raise ValueError("degree must be >= 1")
        object.__setattr__(self, "continuous_dims", tuple(self.continuous_dims))
        object.__setattr__(
            self, "knots", tuple(tuple(float(k) for k in ks) for ks in self.knots)
        )
        object.__setattr__(
            self, "spans", tuple((float(a), float(b)) for a, b in self.spans)
        )
        if self.kind == BSPLINE:
            m = len(self.continuous_dims)
            if len(self.knots) != m or len(self.spans) != m:
                raise ValueError("bspline spec needs knots and spans per continuous dim")

    @property
    def width(self) -> int:
        """Number of expanded columns, intercept included."""
        if self.kind == IDENTITY:
            return 1 + self.input_dim
        if self.kind == POLYNOMIAL:
            return 1 + self.input_dim + (self.degree - 1) * len(self.continuous_dims)
        blocks = [len(ks) + self.degree for ks in self.knots]
        w = 1 + sum(blocks) + (self.input_dim - len(self.continuous_dims))
        if self.tensor_pairs:
            for i in range(len(blocks)):
                for j in range(i + 1, len(blocks)):
                    w += blocks[i] * blocks[j]
        return w

    def to_dict(self) -> dict:
        """JSON-ready description; reports embed it for reproducibility."""
        out = {"kind": self.kind, "input_dim": self.input_dim, "width": self.width}
        if self.kind != IDENTITY:
            out["degree"] = self.degree
            out["continuous_dims"] = list(self.continuous_dims)
        if self.kind == BSPLINE:
            out["knots"] = [list(ks) for ks in self.knots]
            out["spans"] = [list(sp) for sp in self.spans]
            out["tensor_pairs"] = self.tensor_pairs
        return out


def identity_spec(input_dim: int) -> BasisSpec:
    return BasisSpec(IDENTITY, input_dim)


def polynomial_spec(input_dim: int, degree: int = 2, continuous_dims=None) -> BasisSpec:
    if continuous_dims is None:
        continuous_dims = tuple(range(input_dim))
    return BasisSpec(POLYNOMIAL, input_dim, degree, tuple(continuous_dims))


def bspline_spec(
    data: np.ndarray,
    degree: int,
    n_knots: int,
    continuous_dims=None,
    tensor_pairs: bool = True,
) -> BasisSpec:
    """B-spline spec with interior knots at equispaced empirical quantiles."""
    data = np.asarray(data, dtype=float)
    dim = data.shape[1]
    if continuous_dims is None:
        continuous_dims = tuple(range(dim))
    knots = []
    spans = []
    for d in continuous_dims:
        col = data[:, d]
        lo, hi = float(col.min()), float(col.max())
        if hi <= lo:
            hi = lo + 1.0
        if n_knots > 0:
            qs = np.linspace(0.0, 1.0, n_knots + 2)[1:-1]
            ks = np.quantile(col, qs)
            # strictly interior, strictly increasing
            ks = np.clip(ks, lo + 1e-9 * (hi - lo), hi - 1e-9 * (hi - lo))
            ks = np.maximum.accumulate(ks)
            knots.append(tuple(float(k) for k in ks))
        else:
            knots.append(())
        spans.append((lo, hi))
    return BasisSpec(
        BSPLINE, dim, degree, tuple(continuous_dims), tuple(knots), tuple(spans),
        tensor_pairs,
    )


def bspline_basis(x, degree: int, knots, span) -> np.ndarray:
    """Evaluate the full clamped B-spline basis at x.

    Returns an (n, len(knots) + degree + 1) matrix whose rows sum to 1 on
    the span. Out-of-span inputs are clamped to the boundary values and an
    OutOfSpanWarning is emitted.
    """
    x = np.asarray(x, dtype=float)
    lo, hi = float(span[0]), float(span[1])
    if np.any(x < lo) or np.any(x > hi):
        warnings.warn(
            f"input outside knot span [{lo}, {hi}]; clamping to boundary",
            OutOfSpanWarning,
            stacklevel=2,
        )
        x = np.clip(x, lo, hi)
    t = np.concatenate([np.full(degree + 1, lo), np.asarray(knots, dtype=float),
                        np.full(degree + 1, hi)])
    n_basis = len(knots) + degree + 1
    n_t = len(t)
    # degree-0 seed: indicator of the half-open knot interval, right-closed at hi
    B = np.zeros((x.shape[0], n_t - 1))
    for j in range(n_t - 1):
        if t[j] < t[j + 1]:
            B[:, j] = (x >= t[j]) & (x < t[j + 1])
    last = n_t - degree - 2  # rightmost nonempty interval
    B[x == hi, last] = 1.0
    for d in range(1, degree + 1):
        nxt = np.zeros((x.shape[0], n_t - d - 1))
        for j in range(n_t - d - 1):
            den1 = t[j + d] - t[j]
            den2 = t[j + d + 1] - t[j + 1]
            term = 0.0
            if den1 > 0:
                term = (x - t[j]) / den1 * B[:, j]
            if den2 > 0:
                term = term + (t[j + d + 1] - x) / den2 * B[:, j + 1]
            nxt[:, j] = term
        B = nxt
    return B[:, :n_basis]


def expand(spec: BasisSpec, data) -> np.ndarray:
    """Expand rows of data under the spec; column 0 is identically 1."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.shape[1] != spec.input_dim:
        raise ValueError(
            f"data has {data.shape[1]} columns, spec expects {spec.input_dim}"
        )
    n = data.shape[0]
    ones = np.ones((n, 1))
    if spec.kind == IDENTITY:
        return np.hstack([ones, data])
    if spec.kind == POLYNOMIAL:
        cols = [ones, data]
        for power in range(2, spec.degree + 1):
            for d in spec.continuous_dims:
                cols.append(data[:, d:d + 1] ** power)
        return np.hstack(cols)
    # bspline-tensor: per-dimension blocks (first basis function dropped so the
    # block is not collinear with the intercept), pairwise products, pass-through
    blocks = []
    for d, ks, span in zip(spec.continuous_dims, spec.knots, spec.spans):
        full = bspline_basis(data[:, d], spec.degree, ks, span)
        blocks.append(full[:, 1:])
    cols = [ones] + blocks
    if spec.tensor_pairs:
        for i in range(len(blocks)):
            for j in range(i + 1, len(blocks)):
                prod = blocks[i][:, :, None] * blocks[j][:, None, :]
                cols.append(prod.reshape(n, -1))
    passthrough = [d for d in range(spec.input_dim) if d not in spec.continuous_dims]
    if passthrough:
        cols.append(data[:, passthrough])
    return np.hstack(cols)


def stacked_design(basis_x: BasisSpec, basis_m: BasisSpec, X, M) -> np.ndarray:
    """Design [phi_X(X) | phi_M(M) sans intercept] used for the outcome mean."""
    return np.hstack([expand(basis_x, X), expand(basis_m, M)[:, 1:]])


def _ols_ridge(design: np.ndarray, y: np.ndarray, ridge: float = 1e-4) -> np.ndarray:
    gram = design.T @ design / design.shape[0]
    gram[np.diag_indices_from(gram)] += ridge
    return np.linalg.solve(gram, design.T @ y / design.shape[0])


def cv_fold_slices(n: int, folds: int, seed: int):
    """Seeded uniform shuffle, then contiguous blocks."""
    rng = np.random.default_rng(np.random.SeedSequence((int(seed), 811)))
    perm = rng.permutation(n)
    bounds = np.linspace(0, n, folds + 1).astype(int)
    return [perm[bounds[k]:bounds[k + 1]] for k in range(folds)]


def cv_score(
    auxiliary: AuxiliarySample,
    basis_x: BasisSpec,
    basis_m: BasisSpec,
    folds: int = 5,
    seed: int = 0,
) -> float:
    """Mean out-of-fold squared error of the outcome regression."""
    design = stacked_design(basis_x, basis_m, auxiliary.covariates,
                            auxiliary.intermediates)
    y = auxiliary.outcomes
    n, p = design.shape
    scores = []
    for test_idx in cv_fold_slices(n, folds, seed):
        mask = np.ones(n, dtype=bool)
        mask[test_idx] = False
        train, test = design[mask], design[test_idx]
        y_train, y_test = y[mask], y[test_idx]
        if train.shape[0] <= p:
            coef = _ols_ridge(train, y_train)
        else:
            coef, _, rank, _ = np.linalg.lstsq(train, y_train, rcond=1e-10)
            if rank < p:
                coef = _ols_ridge(train, y_train)
        scores.append(float(np.mean((y_test - test @ coef) ** 2)))
    return float(np.mean(scores))


@dataclass(frozen=True)
class BsplineSelection:
    """Cross-validated (degree, knot count) choice with the resulting specs."""

    basis_x: BasisSpec
    basis_m: BasisSpec
    degree: int
    n_knots: int
    cv_error: float
    table: tuple = field(default=())


def select_bspline_spec(
    auxiliary: AuxiliarySample,
    candidate_degrees=(1, 2, 3),
    candidate_knot_counts=(0, 1, 2),
    folds: int = 5,
    seed: int = 0,
    tensor_pairs: bool = True,
) -> BsplineSelection:
    """Pick the (degree, knot count) minimizing out-of-fold squared error.

    Ties break toward smaller degree, then fewer knots; knots sit at
    equispaced empirical quantiles of the auxiliary sample.
    """
    degrees = sorted(set(int(d) for d in candidate_degrees))
    knot_counts = sorted(set(int(k) for k in candidate_knot_counts))
    if not degrees or not knot_counts:
        raise ValueError("candidate lists must be nonempty")
    if folds < 2 or auxiliary.n < folds:
        raise ValueError("need folds >= 2 and at least one row per fold")
    best = None
    rows = []
    for degree in degrees:
        for m in knot_counts:
            bx = bspline_spec(auxiliary.covariates, degree, m,
                              tensor_pairs=tensor_pairs)
            bm = bspline_spec(auxiliary.intermediates, degree, m,
                              tensor_pairs=tensor_pairs)
            err = cv_score(auxiliary, bx, bm, folds, seed)
            rows.append((degree, m, err))
            # ties (within rounding) keep the earlier, simpler candidate
            if best is None or err < best[2] - max(1e-12, 1e-9 * best[2]):
                best = (bx, bm, err, degree, m)
    bx, bm, err, degree, m = best
    return BsplineSelection(bx, bm, degree, m, err, tuple(rows))
