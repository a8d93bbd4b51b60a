"""Scenario generators, ground-truth values, and replication studies.

Covariates are uniform on [-1, 1]; treatment is a fair coin; intermediates
follow H^M(X) + A*C^M(X) plus Gaussian noise; the long-term outcome is
H^Y(X) + C^Y(X, M) plus noise and is attached to the auxiliary sample
only. Scenario S6 additionally supports a contamination parameter l that
corrupts the first recorded intermediate with a treatment-dependent term,
degrading the surrogacy of the collected data; the underlying outcome is
always generated from the uncontaminated intermediate.

Ground-truth values are Monte Carlo averages of potential outcomes pushed
through the noiseless generator (noise is mean-zero and enters every
reported truth additively, so this matches the reported targets while
minimizing Monte Carlo error).
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import pipeline
from .data import AuxiliarySample, ExperimentalSample
from .inference import estimate_sigma
from .search import SearchConfig
from .value import DecisionRule, decisions_for, sign_folded_distance

_SQ2 = math.sqrt(2.0)


@dataclass(frozen=True)
class _Generator:
    r: int
    s: int
    h_m: Callable
    c_m: Callable
    h_y: Callable
    c_y: Callable
    effect: Callable  # conditional treatment effect on the outcome, tau(X)
    beta0: Optional[np.ndarray]  # unit-norm boundary of the optimal rule, if linear


def _s1_hm(X):
    return np.stack([X[:, 2], X[:, 0]], axis=1)


def _s1_cm(X):
    return np.stack([4.0 * (X[:, 0] - X[:, 1]), 4.0 * (X[:, 3] - X[:, 2])], axis=1)


def _sum_m(X, M):
    return M[:, 0] + M[:, 1]


def _linear_effect(X):
    return 4.0 * (X[:, 0] - X[:, 1] - X[:, 2] + X[:, 3])


_BETA0_S1 = np.array([0.0, 0.5, -0.5, -0.5, 0.5])
_BETA0_S6 = np.array([0.0, 1.0 / _SQ2, -1.0 / _SQ2])

_GENERATORS = {
    "S1": _Generator(
        4, 2, _s1_hm, _s1_cm,
        h_y=lambda X: -1.0 + X[:, 1] + X[:, 3],
        c_y=_sum_m,
        effect=_linear_effect,
        beta0=_BETA0_S1,
    ),
    "S2": _Generator(
        4, 2,
        h_m=lambda X: np.stack(
            [X[:, 0] ** 2 * X[:, 2] + np.sin(X[:, 3]),
             X[:, 0] ** 3 - (X[:, 1] - X[:, 3]) ** 2], axis=1),
        c_m=_s1_cm,
        h_y=lambda X: -1.0 + X[:, 1] + X[:, 3],
        c_y=_sum_m,
        effect=_linear_effect,
        beta0=_BETA0_S1,
    ),
    "S3": _Generator(
        4, 2, _s1_hm, _s1_cm,
        h_y=lambda X: (X[:, 0] + X[:, 2]) * X[:, 0] ** 2 + np.sin(X[:, 3])
        - (X[:, 1] - X[:, 3]) ** 2,
        c_y=_sum_m,
        effect=_linear_effect,
        beta0=_BETA0_S1,
    ),
    "S4": _Generator(
        4, 2, _s1_hm, _s1_cm,
        h_y=lambda X: X[:, 0] ** 3 + X[:, 1] ** 2 + X[:, 2],
        c_y=lambda X, M: M[:, 0] + X[:, 3] * M[:, 1],
        effect=lambda X: 4.0 * (X[:, 0] - X[:, 1])
        + 4.0 * X[:, 3] * (X[:, 3] - X[:, 2]),
        beta0=None,
    ),
    "S5": _Generator(
        4, 2, _s1_hm, _s1_cm,
        h_y=lambda X: X[:, 1] - X[:, 3] ** 2,
        c_y=lambda X, M: 0.25 * (M[:, 0] - X[:, 2]) ** 2 + M[:, 1],
        effect=lambda X: 4.0 * (X[:, 0] - X[:, 1]) ** 2
        + 4.0 * (X[:, 3] - X[:, 2]),
        beta0=None,
    ),
    "S6": _Generator(
        2, 2,
        h_m=lambda X: np.stack([np.zeros(X.shape[0]), X[:, 0]], axis=1),
        c_m=lambda X: np.stack(
            [-0.5 + 0.4 * X[:, 0] - 0.6 * X[:, 1],
             0.5 + 0.6 * X[:, 0] - 0.4 * X[:, 1]], axis=1),
        h_y=lambda X: X[:, 1],
        c_y=_sum_m,
        effect=lambda X: X[:, 0] - X[:, 1],
        beta0=_BETA0_S6,
    ),
}


@dataclass(frozen=True)
class ScenarioSpec:
    """Named generator with its contamination and noise settings."""

    id: str
    contamination_l: float = 1.0
    noise: float = 0.5
    noise_param: str = "variance"  # how the 0.5 is read: variance or sd

    def __post_init__(self):
        if self.id not in _GENERATORS:
            raise ValueError(f"unknown scenario {self.id!r}")
        if not 0.0 <= self.contamination_l <= 1.0:
            raise ValueError("contamination_l must lie in [0, 1]")
        if self.noise_param not in ("variance", "sd"):
            raise ValueError("noise_param must be 'variance' or 'sd'")
        if self.id != "S6" and self.contamination_l != 1.0:
            raise ValueError("contamination applies to S6 only")

    @property
    def r(self) -> int:
        return _GENERATORS[self.id].r

    @property
    def s(self) -> int:
        return _GENERATORS[self.id].s

    @property
    def noise_sd(self) -> float:
        return math.sqrt(self.noise) if self.noise_param == "variance" else self.noise

    @property
    def beta0(self) -> Optional[np.ndarray]:
        return _GENERATORS[self.id].beta0


def scenario(scenario_id: str, **kwargs) -> ScenarioSpec:
    return ScenarioSpec(scenario_id, **kwargs)


@dataclass(frozen=True)
class TruthSpec:
    """Optimal-rule reference: boundary vector (when linear) and true value."""

    beta0: Optional[np.ndarray]
    true_value: float
    mc_size: int


def truth_spec(spec: "ScenarioSpec", mc_size: int = 1_000_000, seed=0) -> TruthSpec:
    """Reference boundary and Monte Carlo value of the optimal rule."""
    return TruthSpec(spec.beta0, optimal_true_value(spec, mc_size, seed), mc_size)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    entropy = seed if isinstance(seed, (tuple, list)) else (int(seed),)
    return np.random.default_rng(np.random.SeedSequence(tuple(int(v) for v in entropy)))


def _contaminate(spec: ScenarioSpec, M: np.ndarray, X, A) -> np.ndarray:
    if spec.id != "S6" or spec.contamination_l >= 1.0:
        return M
    out = M.copy()
    out[:, 0] += A * (1.0 - spec.contamination_l) * (-0.5 + 0.4 * X[:, 0])
    return out


def generate(spec: ScenarioSpec, n: int, with_outcome: bool = False, seed=0):
    """Draw one sample; auxiliary mode computes the outcome and hides treatment.

    The S6 corruption perturbs the recorded first intermediate at collection
    time: in the experimental sample it tracks the assigned treatment, while
    in the auxiliary source it is an independent coin (the collection
    process there is unrelated to the hidden treatment that produced the
    intermediates). The outcome is always driven by the true intermediates.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = _GENERATORS[spec.id]
    rng = _rng(seed)
    X = rng.uniform(-1.0, 1.0, (n, gen.r))
    A = (rng.random(n) < 0.5).astype(np.int64)
    sd = spec.noise_sd
    M = gen.h_m(X) + A[:, None] * gen.c_m(X) + rng.normal(0.0, sd, (n, gen.s))
    if not with_outcome:
        return ExperimentalSample(X, A, _contaminate(spec, M, X, A))
    Y = gen.h_y(X) + gen.c_y(X, M) + rng.normal(0.0, sd, n)
    contaminator = (rng.random(n) < 0.5).astype(np.int64)
    return AuxiliarySample(X, _contaminate(spec, M, X, contaminator), Y)


def potential_outcomes(spec: ScenarioSpec, X: np.ndarray, decisions: np.ndarray):
    """Noiseless intermediates and outcome had everyone followed the decisions."""
    gen = _GENERATORS[spec.id]
    d = np.asarray(decisions, dtype=float)
    M = gen.h_m(X) + d[:, None] * gen.c_m(X)
    Y = gen.h_y(X) + gen.c_y(X, M)
    return M, Y


def _decisions(spec: ScenarioSpec, rule, X: np.ndarray) -> np.ndarray:
    gen = _GENERATORS[spec.id]
    if isinstance(rule, str) and rule == "optimal":
        return (gen.effect(X) > 0.0).astype(np.int64)
    if isinstance(rule, DecisionRule):
        return decisions_for(rule, X)
    beta = np.asarray(rule, dtype=float)
    if beta.shape != (gen.r + 1,):
        raise ValueError(
            f"expected a rule, 'optimal', or a length-{gen.r + 1} vector"
        )
    return (beta[0] + X @ beta[1:] > 0.0).astype(np.int64)


def true_value(spec: ScenarioSpec, rule, mc_size: int = 1_000_000, seed=0) -> float:
    """Monte Carlo mean potential outcome under the rule."""
    if mc_size < 1:
        raise ValueError("mc_size must be >= 1")
    gen = _GENERATORS[spec.id]
    rng = _rng(seed)
    total = 0.0
    left = mc_size
    while left > 0:
        chunk = min(left, 1_000_000)
        X = rng.uniform(-1.0, 1.0, (chunk, gen.r))
        d = _decisions(spec, rule, X)
        _, Y = potential_outcomes(spec, X, d)
        total += float(Y.sum())
        left -= chunk
    return total / mc_size


def optimal_true_value(spec: ScenarioSpec, mc_size: int = 1_000_000, seed=0) -> float:
    """Value of the sign-of-effect rule; the coverage target for every scenario."""
    return true_value(spec, "optimal", mc_size, seed)


def rate_correct_decision(
    spec: ScenarioSpec, rule, mc_size: int = 100_000, seed=0
) -> float:
    """Agreement frequency between the rule and the optimal rule on fresh draws."""
    gen = _GENERATORS[spec.id]
    rng = _rng(seed)
    X = rng.uniform(-1.0, 1.0, (mc_size, gen.r))
    fitted = _decisions(spec, rule, X)
    optimal = (gen.effect(X) > 0.0).astype(np.int64)
    return float((fitted == optimal).mean())


@dataclass(frozen=True)
class ReplicationReport:
    """Aggregated Monte Carlo metrics for one study configuration."""

    scenario: str
    method: str
    n_e: int
    n_u: int
    replications: int
    excluded: int
    contamination_l: float
    true_value: float
    mean_value_hat: float
    se_value_hat: float
    mean_sigma_hat: float  # on the value scale, i.e. sigma / sqrt(N_E)
    value_of_rule: float
    coverage: float
    rcd: float
    l2_loss: float
    l2_median: float
    per_replication: tuple = field(default=(), repr=False)

    def to_row(self) -> dict:
        return {
            "scenario": self.scenario,
            "method": self.method,
            "n_e": self.n_e,
            "n_u": self.n_u,
            "replications": self.replications,
            "excluded": self.excluded,
            "contamination_l": self.contamination_l,
            "true_value": self.true_value,
            "mean_value_hat": self.mean_value_hat,
            "se_value_hat": self.se_value_hat,
            "mean_sigma_hat": self.mean_sigma_hat,
            "value_of_rule": self.value_of_rule,
            "coverage": self.coverage,
            "rcd": self.rcd,
            "l2_loss": self.l2_loss,
            "l2_median": self.l2_median,
        }


REPORT_COLUMNS = tuple(
    ReplicationReport(
        "S1", "gear-linear", 1, 1, 1, 0, 1.0, *([0.0] * 9)
    ).to_row().keys()
)


def _replicate(args) -> dict:
    (spec, n_e, n_u, method, config, seed, rep, ci_level, aux_weight,
     propensity_mode, rule_value_mc) = args
    experimental = generate(spec, n_e, seed=(seed, rep, 0))
    auxiliary = generate(spec, n_u, with_outcome=True, seed=(seed, rep, 1))
    rep_config = SearchConfig(
        population_size=config.population_size,
        generations=config.generations,
        box=config.box,
        polish_restarts=config.polish_restarts,
        seed=int(np.random.SeedSequence((seed, rep, 2)).generate_state(1)[0]),
        tolerance=config.tolerance,
    )
    result = pipeline.run_analysis(
        experimental, auxiliary,
        method=method, search=rep_config, propensity_mode=propensity_mode,
        ci_level=ci_level, aux_weight=aux_weight, seed=int(seed),
    )
    rule = result.rule
    sigma_other = estimate_sigma(
        result.components, result.ratio,
        "ratio" if aux_weight == "sqrt_ratio" else "sqrt_ratio",
    )
    out = {
        "value_hat": result.value,
        "sigma_hat": result.sigma / math.sqrt(n_e),
        "sigma_hat_other_weight": sigma_other / math.sqrt(n_e),
        "ci_lower": result.ci.lower,
        "ci_upper": result.ci.upper,
        "rule_value": true_value(spec, rule, rule_value_mc, seed=(seed, rep, 3)),
        "rcd": rate_correct_decision(spec, rule, 100_000, seed=(seed, rep, 4)),
        "flags": result.flags,
        "excluded": bool(result.fatal_flags),
    }
    beta0 = spec.beta0
    if beta0 is not None and rule.beta.shape == beta0.shape:
        out["l2"] = sign_folded_distance(rule.beta, beta0)
    else:
        out["l2"] = float("nan")
    return out


def worker_count(explicit=None) -> int:
    if explicit is not None:
        return max(1, int(explicit))
    env = os.environ.get("AUXPOLICY_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_replications(
    spec: ScenarioSpec,
    n_e: int,
    n_u: int,
    reps: int,
    method: str = "gear-linear",
    config: SearchConfig = SearchConfig(),
    seed: int = 0,
    ci_level: float = 0.95,
    aux_weight: str = "sqrt_ratio",
    propensity_mode: str = "logistic",
    truth_mc: int = 2_000_000,
    rule_value_mc: int = 200_000,
    workers=None,
) -> ReplicationReport:
    """Run the full pipeline over seeded replications and aggregate."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    truth = optimal_true_value(spec, truth_mc, seed=(seed, 999_983))
    tasks = [
        (spec, n_e, n_u, method, config, seed, rep, ci_level, aux_weight,
         propensity_mode, rule_value_mc)
        for rep in range(reps)
    ]
    n_workers = worker_count(workers)
    if n_workers > 1 and reps > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(_replicate, tasks, chunksize=4))
    else:
        rows = [_replicate(t) for t in tasks]

    kept = [row for row in rows if not row["excluded"]]
    excluded = len(rows) - len(kept)
    if not kept:
        raise RuntimeError("every replication was excluded by fatal fit flags")
    values = np.array([row["value_hat"] for row in kept])
    sigmas = np.array([row["sigma_hat"] for row in kept])
    rule_values = np.array([row["rule_value"] for row in kept])
    covers = np.array([
        row["ci_lower"] <= truth <= row["ci_upper"] for row in kept
    ])
    rcds = np.array([row["rcd"] for row in kept])
    l2s = np.array([row["l2"] for row in kept])
    return ReplicationReport(
        scenario=spec.id,
        method=method,
        n_e=n_e,
        n_u=n_u,
        replications=len(kept),
        excluded=excluded,
        contamination_l=spec.contamination_l,
        true_value=truth,
        mean_value_hat=float(values.mean()),
        se_value_hat=float(values.std(ddof=1)) if len(kept) > 1 else 0.0,
        mean_sigma_hat=float(sigmas.mean()),
        value_of_rule=float(rule_values.mean()),
        coverage=float(covers.mean()),
        rcd=float(rcds.mean()),
        l2_loss=float(np.nanmean(l2s)) if not np.isnan(l2s).all() else float("nan"),
        l2_median=float(np.nanmedian(l2s)) if not np.isnan(l2s).all() else float("nan"),
        per_replication=tuple(rows),
    )


def sensitivity_sweep(
    l_values,
    n_e: int,
    n_u: int,
    reps: int,
    seed: int = 0,
    method: str = "gear-linear",
    config: SearchConfig = SearchConfig(),
    **kwargs,
) -> list:
    """Replication studies on S6 across contamination levels, ordered by l."""
    reports = []
    for l in sorted(float(v) for v in l_values):
        if not 0.0 <= l <= 1.0:
            raise ValueError("contamination levels must lie in [0, 1]")
        spec = ScenarioSpec("S6", contamination_l=l)
        reports.append(
            run_replications(spec, n_e, n_u, reps, method, config, seed, **kwargs)
        )
    return reports


def write_report_csv(reports, path) -> None:
    """One row per configuration, in the layout of the summary tables."""
    rows = [r.to_row() for r in reports]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(REPORT_COLUMNS))
        writer.writeheader()
        writer.writerows(rows)
