"""Paired Wilcoxon signed-rank test and the better/comparable/worse summary."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .core import ConfigError

EXACT_MAX_N = 12


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # min(W+, W-)
    w_plus: float
    w_minus: float
    p_value: float  # two-sided
    n: int  # non-zero differences
    method: str  # "exact", "normal" or "degenerate"

    @property
    def degenerate(self) -> bool:
        return self.method == "degenerate"


def signed_ranks(a, b) -> tuple[np.ndarray, np.ndarray]:
    """Midranks of |a - b| over the non-zero differences, and their signs."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d = d[d != 0.0]
    return rankdata(np.abs(d)), np.sign(d)


def exact_p_value(ranks: np.ndarray, w: float) -> float:
    """P(min(W+, W-) <= w) over all 2^n equally likely sign assignments.

    Midranks are multiples of 1/2, so the doubled rank sums are integers and
    the null distribution of W+ is counted exactly with a subset-sum table.
    """
    doubled = np.rint(2.0 * np.asarray(ranks)).astype(np.int64)
    total = int(doubled.sum())
    counts = [0] * (total + 1)
    counts[0] = 1
    reach = 0
    for r in doubled:
        r = int(r)
        for s in range(reach, -1, -1):
            if counts[s]:
                counts[s + r] += counts[s]
        reach += r
    w2 = int(round(2.0 * w))
    hits = sum(c for s, c in enumerate(counts) if min(s, total - s) <= w2)
    return min(1.0, hits / 2 ** len(doubled))


def normal_p_value(ranks: np.ndarray, w: float) -> float:
    """Two-sided normal approximation with tie and continuity corrections."""
    n = len(ranks)
    mean = n * (n + 1) / 4.0
    _, ties = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(ties**3 - ties)) / 48.0
    if var <= 0.0:
        return 1.0
    z = max(0.0, abs(w - mean) - 0.5) / math.sqrt(var)
    return min(1.0, math.erfc(z / math.sqrt(2.0)))


def wilcoxon_signed_rank(a, b, method: str = "auto") -> WilcoxonResult:
    """Two-sided paired test of ``a`` against ``b``.

    Zero differences are dropped. ``method="auto"`` is exact up to
    ``EXACT_MAX_N`` non-zero pairs and normal beyond that.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("need two paired samples of equal length >= 2")
    ranks, signs = signed_ranks(a, b)
    n = len(ranks)
    if n == 0:
        return WilcoxonResult(0.0, 0.0, 0.0, 1.0, 0, "degenerate")
    w_plus = float(ranks[signs > 0].sum())
    w_minus = float(ranks[signs < 0].sum())
    w = min(w_plus, w_minus)
    if method == "auto":
        method = "exact" if n <= EXACT_MAX_N else "normal"
    if method == "exact":
        p = exact_p_value(ranks, w)
    elif method == "normal":
        p = normal_p_value(ranks, w)
    else:
        raise ValueError(f"unknown method {method!r}")
    return WilcoxonResult(w, w_plus, w_minus, p, n, method)


@dataclass
class ComparisonCell:
    better: int = 0
    comparable: int = 0
    worse: int = 0

    def __str__(self) -> str:
        return f"{self.better}/{self.comparable}/{self.worse}"

    @property
    def total(self) -> int:
        return self.better + self.comparable + self.worse


def paired_samples(results, mode: str) -> dict[str, dict[int, float]]:
    by_problem: dict[str, dict[int, float]] = defaultdict(dict)
    for r in results:
        if r.mode == mode:
            by_problem[r.problem][r.trial] = r.best
    return by_problem


def build_comparison(results, mode_row: str, mode_col: str, alpha: float = 0.05,
                     detail: list | None = None) -> ComparisonCell:
    """Count problems where ``mode_row`` is significantly better/worse than ``mode_col``.

    "Better" means lower mean best objective with two-sided p < ``alpha``.
    If ``detail`` is a list, one ``(problem, WilcoxonResult, mean_row, mean_col)``
    tuple per problem is appended to it.
    """
    rows = paired_samples(results, mode_row)
    cols = paired_samples(results, mode_col)
    cell = ComparisonCell()
    for problem in sorted(set(rows) | set(cols)):
        ra, rb = rows.get(problem, {}), cols.get(problem, {})
        if sorted(ra) != sorted(rb):
            raise ConfigError(f"{problem}: {mode_row} and {mode_col} have different trial sets")
        trials = sorted(ra)
        a = np.array([ra[t] for t in trials])
        b = np.array([rb[t] for t in trials])
        res = wilcoxon_signed_rank(a, b)
        if detail is not None:
            detail.append((problem, res, float(a.mean()), float(b.mean())))
        if res.p_value < alpha and a.mean() < b.mean():
            cell.better += 1
        elif res.p_value < alpha and a.mean() > b.mean():
            cell.worse += 1
        else:
            cell.comparable += 1
    return cell


def comparison_table(results, modes: list[str], alpha: float = 0.05) -> dict[tuple[str, str], ComparisonCell]:
    """Upper-triangular table over ``modes`` (row precedes column)."""
    return {(modes[i], modes[j]): build_comparison(results, modes[i], modes[j], alpha)
            for i in range(len(modes)) for j in range(i + 1, len(modes))}


def render_table(table: dict[tuple[str, str], ComparisonCell], modes: list[str]) -> str:
    """Plain-text "+/~/-" table in the layout of the paper-style summaries."""
    cols = modes[1:]
    width = max([len(m) for m in modes] + [9]) + 2
    lines = ["(+/~/-)".ljust(width) + "".join(c.rjust(width) for c in cols)]
    for r in modes[:-1]:
        cells = [str(table[(r, c)]) if (r, c) in table else "-" for c in cols]
        lines.append(r.ljust(width) + "".join(x.rjust(width) for x in cells))
    return "\n".join(lines) + "\n"
