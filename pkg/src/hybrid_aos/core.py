"""Shared types for the AOS controller and its host meta-heuristics."""

from __future__ import annotations

import enum
import math
import zlib
from dataclasses import dataclass

import numpy as np


class HfAosError(Exception):
    """Base class for all package errors."""


class ConfigError(HfAosError, ValueError):
    pass


class DimensionError(HfAosError, ValueError):
    pass


class FormatError(HfAosError, ValueError):
    pass


class PlanError(HfAosError, ValueError):
    pass


class UnknownFunctionError(HfAosError, NameError, LookupError):
    pass


class Module(enum.Enum):
    STATELESS = "stateless"
    STATE_BASED = "state_based"
    RANDOM = "random"


def check_objective(y: float) -> float:
    y = float(y)
    if math.isnan(y):
        raise ValueError("objective value is NaN")
    return y


def improvement(y_prev: float, y_new: float) -> bool:
    """Strict improvement test for minimisation; ties are not improvements."""
    return check_objective(y_new) < check_objective(y_prev)


def rng_stream(seed: int, name: str = "") -> np.random.Generator:
    """Return an independent Philox stream for ``(seed, name)``.

    Philox is counter-based and its bit stream is platform independent, so
    equal ``(seed, name)`` pairs give equal draws everywhere. ``name`` selects
    a substream (e.g. "init", "choice") so that separate consumers of
    randomness never perturb each other.
    """
    if seed < 0 or seed >= 2**64:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed}")
    key = (zlib.crc32(name.encode("utf-8")),) if name else ()
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


@dataclass(slots=True)
class IterationLog:
    """One operator application. ``credit`` keeps the stateless record entry."""

    t: int
    module_used: Module
    op: int
    y_before: float
    y_after: float
    credit: float
    p_after: float
    best_so_far: float

    @property
    def improved(self) -> bool:
        return self.y_after < self.y_before


@dataclass(slots=True)
class SearchSnapshot:
    """What a host exposes to the state-feature extractor after each step."""

    current: float
    best: float
    dispersion: float
    stagnation: int


class Engine:
    """Host meta-heuristic seen from the controller.

    Subclasses implement ``apply`` (apply one operator to the current
    solution or target, evaluate it, do replacement) and keep the budget
    counters up to date.
    """

    k_ops: int = 0
    evaluations: int = 0
    budget: int = 0

    def apply(self, op: int) -> tuple[float, float]:
        """Apply ``op``; return (objective before, candidate objective)."""
        raise NotImplementedError

    def snapshot(self) -> SearchSnapshot:
        raise NotImplementedError

    @property
    def best_objective(self) -> float:
        raise NotImplementedError

    @property
    def best_solution(self):
        raise NotImplementedError

    @property
    def done(self) -> bool:
        return self.evaluations >= self.budget

    @property
    def budget_used(self) -> float:
        return min(1.0, self.evaluations / self.budget) if self.budget else 1.0
