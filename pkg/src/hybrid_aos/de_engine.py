"""Differential evolution host with four mutation strategies as operators.

Operators (index -> strategy):

    0  rand/1            v = x_r1 + F (x_r2 - x_r3)
    1  rand/2            v = x_r1 + F (x_r2 - x_r3) + F (x_r4 - x_r5)
    2  rand-to-best/2    v = x_r1 + F (x_best - x_r1) + F (x_r2 - x_r3) + F (x_r4 - x_r5)
    3  current-to-rand/1 u = x_i + K (x_r1 - x_i) + F (x_r2 - x_r3),  K ~ U(0, 1)

Strategies 0-2 are followed by binomial crossover with the target; strategy 3
is rotation-invariant and skips crossover. Every candidate is clamped to the
box before evaluation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .benchmarks import RealFunction, evaluate
from .core import ConfigError, Engine, SearchSnapshot

K_OPS = 4
OPERATOR_NAMES = ("rand/1", "rand/2", "rand-to-best/2", "current-to-rand/1")
_DONORS = (3, 5, 5, 3)


@dataclass(frozen=True)
class DeConfig:
    NP: int = 50
    F: float = 0.5
    CR: float = 0.9
    budget: int = 10_000

    def __post_init__(self):
        if self.NP < 5:
            raise ConfigError(f"NP must be >= 5 (rand/2 needs 5 donors), got {self.NP}")
        if not 0.0 < self.F <= 2.0:
            raise ConfigError(f"F must be in (0, 2], got {self.F}")
        if not 0.0 <= self.CR <= 1.0:
            raise ConfigError(f"CR must be in [0, 1], got {self.CR}")
        if self.budget < 1:
            raise ConfigError(f"budget must be >= 1, got {self.budget}")


@dataclass
class Population:
    members: np.ndarray  # (NP, d)
    objectives: np.ndarray  # (NP,)
    best_index: int

    def refresh_best(self) -> None:
        self.best_index = int(np.argmin(self.objectives))

    def copy(self) -> "Population":
        return Population(self.members.copy(), self.objectives.copy(), self.best_index)


class Survivor(enum.Enum):
    KEEP_TARGET = "keep"
    TAKE_TRIAL = "take"


def select_survivor(target_obj: float, trial_obj: float) -> Survivor:
    # ties go to the trial (lets the population drift across plateaus)
    return Survivor.TAKE_TRIAL if trial_obj <= target_obj else Survivor.KEEP_TARGET


def init_population(f: RealFunction, cfg: DeConfig, rng: np.random.Generator) -> Population:
    members = rng.uniform(f.lower, f.upper, size=(cfg.NP, f.dim))
    objectives = np.array([evaluate(f, x) for x in members])
    return Population(members, objectives, int(np.argmin(objectives)))


def distinct_donors(rng: np.random.Generator, n_pop: int, target: int, k: int) -> list[int]:
    """Draw ``k`` distinct indices from ``range(n_pop)`` excluding ``target``."""
    if n_pop - 1 < k:
        raise ConfigError(f"population of {n_pop} too small for {k} distinct donors")
    picked: list[int] = []
    while len(picked) < k:
        r = int(rng.integers(n_pop - 1))
        if r >= target:
            r += 1
        if r not in picked:
            picked.append(r)
    return picked


def mutate(op: int, pop: Population, target: int, donors, F: float, k_rand: float = 0.5) -> np.ndarray:
    """Mutant vector of strategy ``op`` for fixed donor indices (no crossover)."""
    X = pop.members
    if op == 0:
        r1, r2, r3 = donors[:3]
        return X[r1] + F * (X[r2] - X[r3])
    if op == 1:
        r1, r2, r3, r4, r5 = donors[:5]
        return X[r1] + F * (X[r2] - X[r3]) + F * (X[r4] - X[r5])
    if op == 2:
        r1, r2, r3, r4, r5 = donors[:5]
        best = X[pop.best_index]
        return X[r1] + F * (best - X[r1]) + F * (X[r2] - X[r3]) + F * (X[r4] - X[r5])
    if op == 3:
        r1, r2, r3 = donors[:3]
        xi = X[target]
        return xi + k_rand * (X[r1] - xi) + F * (X[r2] - X[r3])
    raise ConfigError(f"operator index {op} outside [0, {K_OPS})")


def binomial_crossover(target: np.ndarray, mutant: np.ndarray, CR: float, rng: np.random.Generator) -> np.ndarray:
    d = target.size
    mask = rng.random(d) < CR
    mask[int(rng.integers(d))] = True
    return np.where(mask, mutant, target)


def apply_operator(op: int, pop: Population, target: int, cfg: DeConfig, rng: np.random.Generator,
                   f: RealFunction) -> np.ndarray:
    """Build the clamped trial vector for ``target`` with strategy ``op``."""
    if not 0 <= op < K_OPS:
        raise ConfigError(f"operator index {op} outside [0, {K_OPS})")
    donors = distinct_donors(rng, len(pop.objectives), target, _DONORS[op])
    if op == 3:
        trial = mutate(op, pop, target, donors, cfg.F, k_rand=float(rng.random()))
    else:
        trial = binomial_crossover(pop.members[target], mutate(op, pop, target, donors, cfg.F), cfg.CR, rng)
    return f.clamp(trial)


class DeEngine(Engine):
    """Per-target DE loop driven one operator application at a time.

    Each call to :meth:`apply` handles the current target individual and
    advances to the next; a generation is NP consecutive applications. The
    budget counts evaluations, including the NP spent on initialisation.
    """

    k_ops = K_OPS

    def __init__(self, f: RealFunction, cfg: DeConfig, init_rng: np.random.Generator,
                 op_rng: np.random.Generator, population: Population | None = None):
        self.f = f
        self.cfg = cfg
        self.rng = op_rng
        self.pop = population.copy() if population is not None else init_population(f, cfg, init_rng)
        self.budget = cfg.budget
        self.evaluations = len(self.pop.objectives)
        self.target = 0
        self.generation = 0
        self.stagnation = 0
        self._best = float(self.pop.objectives[self.pop.best_index])
        self._best_x = self.pop.members[self.pop.best_index].copy()
        self._current = self._best
        self._dispersion = self._measure_dispersion()

    def _measure_dispersion(self) -> float:
        width = self.f.upper - self.f.lower
        return float(np.mean(np.std(self.pop.members, axis=0) / width))

    def apply(self, op: int) -> tuple[float, float]:
        pop, i = self.pop, self.target
        trial = apply_operator(op, pop, i, self.cfg, self.rng, self.f)
        y_trial = evaluate(self.f, trial)
        self.evaluations += 1
        y_target = float(pop.objectives[i])
        if select_survivor(y_target, y_trial) is Survivor.TAKE_TRIAL:
            pop.members[i] = trial
            pop.objectives[i] = y_trial
            b = pop.best_index
            if y_trial < pop.objectives[b] or (y_trial == pop.objectives[b] and i < b):
                pop.best_index = i
        if y_trial < self._best:
            self._best = y_trial
            self._best_x = trial.copy()
            self.stagnation = 0
        else:
            self.stagnation += 1
        self._current = y_trial
        self.target += 1
        if self.target == len(pop.objectives):
            self.target = 0
            self.generation += 1
            # dispersion is refreshed once per generation
            self._dispersion = self._measure_dispersion()
        return y_target, y_trial

    def snapshot(self) -> SearchSnapshot:
        return SearchSnapshot(self._current, self._best, self._dispersion, self.stagnation)

    @property
    def best_objective(self) -> float:
        return self._best

    @property
    def best_solution(self) -> np.ndarray:
        return self._best_x
