"""Global maximization of the AIPW value over unit-norm linear rules.

The objective is piecewise constant in the coefficient vector (decisions
only change when the boundary crosses a data point), so the search is
derivative-free: a seeded evolutionary phase over raw vectors in a box,
followed by simplex descent from jittered starts around the incumbent.
Raw candidates are normalized to unit norm before evaluation; a raw zero
vector stands in for the first standard basis vector.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import BasisSpec, expand
from .data import ExperimentalSample
from .nuisance import AugmentedFit, PropensityFit
from .value import DecisionRule, aipw_arm_terms

STALL_GENERATIONS = 15
TOURNAMENT_SIZE = 3
MUTATION_RATE = 0.2
BLEND_ALPHA = 0.5


@dataclass(frozen=True)
class SearchConfig:
    population_size: int = 3000
    generations: int = 50
    box: float = 10.0
    polish_restarts: int = 5
    seed: int = 0
    tolerance: float = 1e-6

    def __post_init__(self):
        if min(self.population_size, self.generations, self.polish_restarts) < 1:
            raise ValueError("population, generations, and restarts must be positive")
        if self.box <= 0:
            raise ValueError("box half-width must be positive")


@dataclass(frozen=True)
class SearchResult:
    rule: DecisionRule
    value: float
    evaluations: int
    converged: bool
    flags: tuple = ()
    best_by_generation: tuple = field(default=(), repr=False)


def _normalize_rows(raw: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(raw, axis=1)
    out = np.empty_like(raw)
    zero = norms == 0.0
    out[~zero] = raw[~zero] / norms[~zero, None]
    if zero.any():
        e1 = np.zeros(raw.shape[1])
        e1[0] = 1.0
        out[zero] = e1
    return out


class _Objective:
    """Vectorized AIPW value of normalized candidate rows."""

    def __init__(self, phi: np.ndarray, t0: np.ndarray, t1: np.ndarray):
        self.phi = phi
        n = phi.shape[0]
        self.base = float(t0.mean())
        self.diff = (t1 - t0) / n
        self.evaluations = 0

    def batch(self, raw: np.ndarray) -> np.ndarray:
        beta = _normalize_rows(raw)
        decisions = (self.phi @ beta.T) > 0.0
        self.evaluations += raw.shape[0]
        return self.base + self.diff @ decisions

    def single(self, raw: np.ndarray) -> float:
        return float(self.batch(raw[None, :])[0])


def _pick_best(raw: np.ndarray, values: np.ndarray, anchor: np.ndarray) -> int:
    """Index of the max value; ties go to the candidate nearest the anchor."""
    best_value = values.max()
    tied = np.nonzero(values >= best_value)[0]
    if tied.size == 1:
        return int(tied[0])
    dist = np.linalg.norm(raw[tied] - anchor, axis=1)
    return int(tied[np.argmin(dist)])


def _nelder_mead_max(objective, x0: np.ndarray, scale: float, max_iter: int):
    """Simplex ascent on a piecewise-constant surface; stops on a flat simplex."""
    p = x0.shape[0]
    simplex = np.tile(x0, (p + 1, 1))
    for i in range(p):
        simplex[i + 1, i] += scale
    values = objective.batch(simplex)
    for _ in range(max_iter):
        order = np.argsort(values)[::-1]  # descending: best first
        simplex, values = simplex[order], values[order]
        if values[0] - values[-1] <= 0.0:
            break
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        reflected = centroid + (centroid - worst)
        f_r = objective.single(reflected)
        if f_r > values[0]:
            expanded = centroid + 2.0 * (centroid - worst)
            f_e = objective.single(expanded)
            if f_e > f_r:
                simplex[-1], values[-1] = expanded, f_e
            else:
                simplex[-1], values[-1] = reflected, f_r
        elif f_r > values[-2]:
            simplex[-1], values[-1] = reflected, f_r
        else:
            contracted = centroid + 0.5 * (worst - centroid)
            f_c = objective.single(contracted)
            if f_c > values[-1]:
                simplex[-1], values[-1] = contracted, f_c
            else:
                simplex[1:] = simplex[0] + 0.5 * (simplex[1:] - simplex[0])
                values[1:] = objective.batch(simplex[1:])
    k = int(np.argmax(values))
    return simplex[k], float(values[k])


def search_gear(
    experimental: ExperimentalSample,
    imputed: np.ndarray,
    propensity: PropensityFit,
    augmented: AugmentedFit,
    basis: BasisSpec,
    config: SearchConfig = SearchConfig(),
) -> SearchResult:
    """Maximize the AIPW value over unit-norm rules on the given basis."""
    phi = expand(basis, experimental.covariates)
    p = phi.shape[1]
    if p < 2:
        raise ValueError("rule search needs expanded dimension >= 2")
    t0, t1 = aipw_arm_terms(experimental, imputed, propensity, augmented, phi)
    objective = _Objective(phi, t0, t1)
    rng = np.random.default_rng(np.random.SeedSequence((int(config.seed), 4021)))

    pop = rng.uniform(-config.box, config.box, (config.population_size, p))
    pop[0] = 0.0  # zero start maps to the first basis vector on normalization
    values = objective.batch(pop)

    flags = ()
    if values.max() - values.min() == 0.0:
        beta = _normalize_rows(pop[:1])[0]
        rule = DecisionRule.from_vector(beta, basis)
        return SearchResult(rule, float(values[0]), objective.evaluations,
                            False, ("degenerate",), (float(values[0]),))

    best_idx = _pick_best(pop, values, np.zeros(p))
    best_raw, best_value = pop[best_idx].copy(), float(values[best_idx])
    history = [best_value]
    last_improvement = 0
    converged = False

    rows = np.arange(config.population_size)
    for gen in range(1, config.generations):
        # tournament selection over the current population
        draws = rng.integers(0, config.population_size,
                             (2, config.population_size, TOURNAMENT_SIZE))
        parents_a = draws[0][rows, np.argmax(values[draws[0]], axis=1)]
        parents_b = draws[1][rows, np.argmax(values[draws[1]], axis=1)]
        blend = rng.uniform(-BLEND_ALPHA, 1.0 + BLEND_ALPHA,
                            (config.population_size, p))
        children = blend * pop[parents_a] + (1.0 - blend) * pop[parents_b]
        mutate = rng.random((config.population_size, p)) < MUTATION_RATE
        noise = rng.normal(0.0, 0.1 * config.box, (config.population_size, p))
        children = np.clip(children + mutate * noise, -config.box, config.box)
        children[0] = best_raw  # elitism
        pop = children
        values = objective.batch(pop)

        gen_idx = _pick_best(pop, values, best_raw)
        if values[gen_idx] > best_value:
            # ties never displace the incumbent, so plateaus stay stable
            if values[gen_idx] > best_value + config.tolerance:
                last_improvement = gen
            best_raw, best_value = pop[gen_idx].copy(), float(values[gen_idx])
        history.append(best_value)
        if gen - last_improvement >= STALL_GENERATIONS:
            converged = True
            break

    # simplex polish from jittered copies of the incumbent
    polish_best_raw, polish_best = best_raw.copy(), best_value
    for k in range(config.polish_restarts):
        start = best_raw if k == 0 else best_raw + rng.normal(
            0.0, 0.05 * config.box, p)
        cand_raw, cand_value = _nelder_mead_max(
            objective, start, scale=0.05 * config.box, max_iter=80 * p)
        better = cand_value > polish_best + 1e-15
        same = abs(cand_value - polish_best) <= 1e-15
        closer = np.linalg.norm(cand_raw - best_raw) < np.linalg.norm(
            polish_best_raw - best_raw)
        if better or (same and closer):
            polish_best_raw, polish_best = cand_raw, cand_value
    history.append(polish_best)

    rule = DecisionRule.from_vector(_normalize_rows(polish_best_raw[None])[0], basis)
    final_value = objective.single(polish_best_raw)
    return SearchResult(rule, final_value, objective.evaluations,
                        converged, flags, tuple(history))
