"""Classical real-valued test functions with optional random shift.

All functions are minimised. Each entry of ``REGISTRY`` records the closed
form, the default box, the minimum dimension, the unshifted optimum location
and its value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import DimensionError, UnknownFunctionError, rng_stream


def sphere(z):
    return float(np.dot(z, z))


def rosenbrock(z):
    return float(np.sum(100.0 * (z[1:] - z[:-1] ** 2) ** 2 + (1.0 - z[:-1]) ** 2))


def rastrigin(z):
    return float(10.0 * z.size + np.sum(z * z - 10.0 * np.cos(2.0 * np.pi * z)))


def ackley(z):
    # grouped so that f(0) is exactly 0.0
    d = z.size
    a = 20.0 * (1.0 - np.exp(-0.2 * np.sqrt(np.dot(z, z) / d)))
    b = np.e - np.exp(np.sum(np.cos(2.0 * np.pi * z)) / d)
    return float(a + b)


def griewank(z):
    i = np.arange(1, z.size + 1)
    return float(1.0 + np.dot(z, z) / 4000.0 - np.prod(np.cos(z / np.sqrt(i))))


def schwefel_1_2(z):
    c = np.cumsum(z)
    return float(np.dot(c, c))


def levy(z):
    w = 1.0 + (z - 1.0) / 4.0
    head = np.sin(np.pi * w[0]) ** 2
    mid = np.sum((w[:-1] - 1.0) ** 2 * (1.0 + 10.0 * np.sin(np.pi * w[:-1] + 1.0) ** 2))
    tail = (w[-1] - 1.0) ** 2 * (1.0 + np.sin(2.0 * np.pi * w[-1]) ** 2)
    return float(head + mid + tail)


def zakharov(z):
    s = np.dot(0.5 * np.arange(1, z.size + 1), z)
    return float(np.dot(z, z) + s**2 + s**4)


ST_ARGMIN = -2.903534027771178


def styblinski_tang(z):
    return float(0.5 * np.sum(z**4 - 16.0 * z**2 + 5.0 * z))


def schaffer_f7(z):
    s = np.sqrt(z[:-1] ** 2 + z[1:] ** 2)
    inner = np.sum(np.sqrt(s) * (np.sin(50.0 * s**0.2) + 1.0)) / (z.size - 1)
    return float(inner**2)


@dataclass(frozen=True)
class _Entry:
    fn: Callable[[np.ndarray], float]
    lo: float
    hi: float
    min_dim: int
    argmin: float  # every coordinate of the unshifted optimum


REGISTRY: dict[str, _Entry] = {
    "sphere": _Entry(sphere, -100.0, 100.0, 1, 0.0),
    "rosenbrock": _Entry(rosenbrock, -30.0, 30.0, 2, 1.0),
    "rastrigin": _Entry(rastrigin, -5.12, 5.12, 1, 0.0),
    "ackley": _Entry(ackley, -32.768, 32.768, 1, 0.0),
    "griewank": _Entry(griewank, -600.0, 600.0, 1, 0.0),
    "schwefel_1_2": _Entry(schwefel_1_2, -100.0, 100.0, 1, 0.0),
    "levy": _Entry(levy, -10.0, 10.0, 1, 1.0),
    "zakharov": _Entry(zakharov, -5.0, 10.0, 1, 0.0),
    "styblinski_tang": _Entry(styblinski_tang, -5.0, 5.0, 1, ST_ARGMIN),
    "schaffer_f7": _Entry(schaffer_f7, -100.0, 100.0, 2, 0.0),
}


@dataclass(frozen=True, eq=False)
class RealFunction:
    name: str
    dim: int
    lower: np.ndarray
    upper: np.ndarray
    optimum_x: np.ndarray
    optimum_value: float
    shift: np.ndarray | None = None
    _fn: Callable[[np.ndarray], float] = field(repr=False, default=sphere)

    @property
    def id(self) -> str:
        return f"{self.name}_d{self.dim}" + ("" if self.shift is None else "_shifted")

    def clamp(self, x: np.ndarray) -> np.ndarray:
        return np.minimum(np.maximum(x, self.lower), self.upper)

    def __call__(self, x) -> float:
        return evaluate(self, x)


def make_function(name: str, dim: int, shift_seed: int | None = None) -> RealFunction:
    """Build a registered function.

    With ``shift_seed`` the optimum is moved to a point drawn uniformly from
    the central 80% of the box, and the function is evaluated at ``x - shift``.
    """
    try:
        entry = REGISTRY[name]
    except KeyError:
        raise UnknownFunctionError(f"unknown function {name!r}; known: {sorted(REGISTRY)}") from None
    if dim < entry.min_dim:
        raise DimensionError(f"{name} needs dim >= {entry.min_dim}, got {dim}")
    lower = np.full(dim, entry.lo)
    upper = np.full(dim, entry.hi)
    base_opt = np.full(dim, entry.argmin)
    shift = None
    if shift_seed is not None:
        rng = rng_stream(shift_seed, f"shift/{name}/{dim}")
        width = entry.hi - entry.lo
        target = rng.uniform(entry.lo + 0.1 * width, entry.hi - 0.1 * width, size=dim)
        shift = target - base_opt
        opt_x = base_opt + shift
    else:
        opt_x = base_opt
    opt_value = entry.fn(base_opt)
    for arr in (lower, upper, opt_x) + (() if shift is None else (shift,)):
        arr.setflags(write=False)
    return RealFunction(name, dim, lower, upper, opt_x, opt_value, shift, entry.fn)


def evaluate(f: RealFunction, x) -> float:
    """Evaluate ``f`` at ``x`` after clamping ``x`` to the box."""
    x = np.asarray(x, dtype=float)
    if x.shape != (f.dim,):
        raise DimensionError(f"{f.name} expects shape ({f.dim},), got {x.shape}")
    z = f.clamp(x)
    if f.shift is not None:
        z = z - f.shift
    return f._fn(z)


def list_functions() -> list[str]:
    return sorted(REGISTRY)
