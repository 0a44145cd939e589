"""Adaptive pursuit operator selection with fitness-improvement-rate credit."""

from __future__ import annotations

import numpy as np

from .core import ConfigError

CREDIT_EPS = 1e-12


def assign_credit(y_prev: float, y_new: float) -> float:
    """Relative improvement ``(y_prev - y_new) / |y_prev|``, clipped to [0, 1].

    The denominator is guarded by ``CREDIT_EPS`` so zero and negative
    objectives are handled; for ``y_prev >= CREDIT_EPS`` and improvements
    below 100% this is the plain improvement rate.
    """
    c = (y_prev - y_new) / max(abs(y_prev), CREDIT_EPS)
    return min(1.0, max(0.0, c))


class StatelessAos:
    """Quality estimates ``Q`` and selection probabilities ``P`` over K operators.

    ``Q`` starts at 0 and ``P`` at 1/K. After every application the quality
    of the applied operator is pulled toward its credit by ``alpha`` and the
    probabilities pursue the current argmax of ``Q``: the winner toward
    ``p_max``, every other operator toward ``(1 - p_max) / (K - 1)``, both at
    rate ``beta``.
    """

    def __init__(self, k: int, alpha: float = 0.01, beta: float = 0.01, p_max: float = 0.85):
        if k < 2:
            raise ConfigError("adaptive pursuit needs at least two operators")
        if not (0.0 < alpha < 1.0 and 0.0 < beta < 1.0):
            raise ConfigError("alpha and beta must lie in (0, 1)")
        if not 1.0 / k < p_max < 1.0:
            raise ConfigError(f"p_max must lie in (1/K, 1), got {p_max}")
        self.k = k
        self.alpha = alpha
        self.beta = beta
        self.p_max = p_max
        self.p_min = (1.0 - p_max) / (k - 1)
        self.P = np.full(k, 1.0 / k)
        self.Q = np.zeros(k)

    def update_quality(self, op: int, credit: float) -> None:
        if credit < 0:
            raise ValueError(f"credit must be >= 0, got {credit}")
        self.Q[op] = self.alpha * credit + (1.0 - self.alpha) * self.Q[op]

    def update_probabilities(self) -> None:
        winner = int(np.argmax(self.Q))  # first index on ties
        target = np.full(self.k, self.p_min)
        target[winner] = self.p_max
        self.P = self.beta * target + (1.0 - self.beta) * self.P

    def update(self, op: int, credit: float) -> None:
        self.update_quality(op, credit)
        self.update_probabilities()

    def sample(self, rng: np.random.Generator) -> int:
        """Inverse-CDF categorical draw from ``P`` using one uniform."""
        return self.sample_with(float(rng.random()))

    def sample_with(self, u: float) -> int:
        cdf = np.cumsum(self.P)
        i = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
        return min(i, self.k - 1)
