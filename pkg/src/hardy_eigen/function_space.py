"""Uniform grids, trapezoid quadrature, sampled functions and nodal counting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import AllZero, GridMismatch, ResourceLimit, ValidationError

MAX_LEVEL = 20


def check_exponent(p: float, name: str = "p") -> float:
    p = float(p)
    if not (math.isfinite(p) and p > 1.0):
        raise ValidationError(f"exponent {name} must lie in (1, inf), got {p}")
    return p


def conjugate(p: float) -> float:
    """Hoelder conjugate p' = p / (p - 1)."""
    return p / (p - 1.0)


def signed_power(t, p: float):
    """Odd power map ``|t|**(p-1) * sign(t)``; works on scalars and arrays."""
    if isinstance(t, np.ndarray):
        return np.sign(t) * np.abs(t) ** (p - 1.0)
    t = float(t)
    if t == 0.0:
        return 0.0
    return math.copysign(abs(t) ** (p - 1.0), t)


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValidationError("interval endpoints must be finite")
        if not self.a < self.b:
            raise ValidationError(f"need a < b, got [{self.a}, {self.b}]")

    @property
    def length(self) -> float:
        return self.b - self.a

    @classmethod
    def parse(cls, text: str) -> "Interval":
        try:
            a, b = (float(s) for s in text.split(","))
        except ValueError as exc:
            raise ValidationError(f"interval must look like 'a,b', got {text!r}") from exc
        return cls(a, b)


@dataclass(frozen=True)
class Grid:
    """Uniform grid with ``2**level + 1`` nodes and composite trapezoid weights."""

    interval: Interval
    level: int
    max_level: int = field(default=MAX_LEVEL, compare=False)

    def __post_init__(self):
        if self.level < 1:
            raise ValidationError("grid level must be >= 1")
        if self.level > self.max_level:
            raise ResourceLimit(f"grid level {self.level} exceeds maximum {self.max_level}")

    @property
    def size(self) -> int:
        return 2**self.level + 1

    @property
    def h(self) -> float:
        return self.interval.length / 2**self.level

    @cached_property
    def nodes(self) -> np.ndarray:
        x = self.interval.a + self.h * np.arange(self.size)
        x[-1] = self.interval.b
        x.flags.writeable = False
        return x

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.full(self.size, self.h)
        w[0] = w[-1] = 0.5 * self.h
        w.flags.writeable = False
        return w

    def refine(self) -> "Grid":
        return refine(self)

    def sample(self, fn) -> "SampledFunction":
        return SampledFunction(self, np.asarray(fn(np.asarray(self.nodes)), dtype=float) * np.ones(self.size))

    def locate(self, x: float) -> tuple[int, float]:
        """Cell index ``j`` and fraction ``t`` with ``x = nodes[j] + t*h``, ``0 <= t <= 1``."""
        s = (x - self.interval.a) / self.h
        j = min(max(int(math.floor(s)), 0), self.size - 2)
        return j, s - j


def refine(grid: Grid) -> Grid:
    """Next level: every old node is kept and a midpoint is added to each cell."""
    if grid.level + 1 > grid.max_level:
        raise ResourceLimit(f"refining would exceed {2**grid.max_level + 1} nodes")
    return Grid(grid.interval, grid.level + 1, grid.max_level)


@dataclass(frozen=True, eq=False)
class SampledFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise ValidationError(f"expected {self.grid.size} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("sampled values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    def like(self, values) -> "SampledFunction":
        return SampledFunction(self.grid, values)

    def __mul__(self, c: float) -> "SampledFunction":
        return self.like(self.values * c)

    __rmul__ = __mul__

    def __neg__(self) -> "SampledFunction":
        return self.like(-self.values)

    def __add__(self, other: "SampledFunction") -> "SampledFunction":
        same_grid(self, other)
        return self.like(self.values + other.values)

    def __sub__(self, other: "SampledFunction") -> "SampledFunction":
        same_grid(self, other)
        return self.like(self.values - other.values)


def same_grid(*funcs: SampledFunction) -> Grid:
    grid = funcs[0].grid
    for fn in funcs[1:]:
        if fn.grid != grid:
            raise GridMismatch(f"grid {fn.grid} differs from {grid}")
    return grid


def integrate(f: SampledFunction) -> float:
    return float(np.dot(f.grid.weights, f.values))


def lp_norm(f: SampledFunction, p: float) -> float:
    """Trapezoid approximation of ``(int |f|^p)^(1/p)``."""
    if p < 1:
        raise ValidationError("lp_norm needs p >= 1")
    a = np.abs(f.values)
    m = a.max()
    if m == 0.0:
        return 0.0
    # scale out the maximum to avoid overflow for large p
    return float(m * np.dot(f.grid.weights, (a / m) ** p) ** (1.0 / p))


def inner(f: SampledFunction, g: SampledFunction) -> float:
    same_grid(f, g)
    return float(np.dot(f.grid.weights, f.values * g.values))


@dataclass(frozen=True)
class NodalCountPolicy:
    """Discrete stand-in for counting zeros of a continuous function.

    Samples with ``|v| <= abs_floor * max|v|`` are treated as zero. Zero
    events (sign changes or touching zeros) whose positions lie within
    ``cluster_width`` nodes of each other are merged into one zero.
    """

    abs_floor: float = 1e-8
    cluster_width: int = 2

    def __post_init__(self):
        if not 0.0 < self.abs_floor <= 1e-3:
            raise ValidationError("abs_floor must lie in (0, 1e-3]")
        if self.cluster_width < 1:
            raise ValidationError("cluster_width must be >= 1")


DEFAULT_POLICY = NodalCountPolicy()


def _zero_clusters(values: np.ndarray, policy: NodalCountPolicy) -> list[tuple[int, int]]:
    """Interior zero clusters as ``(sign_before, sign_after)`` pairs."""
    v = np.asarray(values, dtype=float)
    m = np.abs(v).max() if v.size else 0.0
    if m == 0.0:
        raise AllZero("function vanishes at every node")
    s = np.where(np.abs(v) > policy.abs_floor * m, np.sign(v), 0.0).astype(int)
    nz = np.flatnonzero(s)
    if nz.size == 0:
        raise AllZero("every value is below the nodal floor")
    # events between consecutive nonzero samples: a sign change or a zero gap
    lo, hi = nz[:-1], nz[1:]
    mask = (s[lo] != s[hi]) | (hi - lo > 1)
    events = zip(lo[mask].tolist(), hi[mask].tolist())
    clusters: list[tuple[int, int]] = []
    start = None
    for i0, i1 in events:
        if start is not None and i0 - last_end < policy.cluster_width:
            last_end = i1
            continue
        if start is not None:
            clusters.append((int(s[start]), int(s[last_end])))
        start, last_end = i0, i1
    if start is not None:
        clusters.append((int(s[start]), int(s[last_end])))
    return clusters


def count_zeros(f: SampledFunction | np.ndarray, policy: NodalCountPolicy = DEFAULT_POLICY) -> int:
    """Number of distinct interior zeros, touching zeros included."""
    values = f.values if isinstance(f, SampledFunction) else f
    return len(_zero_clusters(values, policy))


def count_sign_changes(f: SampledFunction | np.ndarray, policy: NodalCountPolicy = DEFAULT_POLICY) -> int:
    """Number of strict sign alternations; never exceeds :func:`count_zeros`."""
    values = f.values if isinstance(f, SampledFunction) else f
    return sum(1 for before, after in _zero_clusters(values, policy) if before != after)


def sign_change_points(f: SampledFunction) -> np.ndarray:
    """Abscissae of the strict sign changes of ``f``, linearly interpolated.

    A run of exact zeros between opposite signs is reported at its midpoint.
    No floor is applied; meant for functions with clean simple zeros.
    """
    v = f.values
    x = f.grid.nodes
    nz = np.flatnonzero(v)
    pts = []
    for i0, i1 in zip(nz[:-1], nz[1:]):
        if v[i0] * v[i1] < 0:
            if i1 == i0 + 1:
                t = v[i0] / (v[i0] - v[i1])
                pts.append(x[i0] + t * (x[i1] - x[i0]))
            else:
                pts.append(0.5 * (x[i0 + 1] + x[i1 - 1]))
    return np.array(pts)
