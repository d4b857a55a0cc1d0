"""Discrete Hardy operator T, its adjoint, the anchored operator T+ and the rank-n approximant.

Cumulative integrals use trapezoid prefix sums. The last cell of the prefix
sum is closed with a left rectangle so that ``(T f)(b)`` does not see
``f(b)``; with that choice the adjoint taken in the trapezoid inner product
is again a (suffix) quadrature with ``(T* h)(b) = 0`` and the duality
``<T f, h> = <f, T* h>`` holds to rounding error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import AnchorOffGrid, GridMismatch, ValidationError, ZeroImage
from .function_space import (
    Grid,
    Interval,
    SampledFunction,
    check_exponent,
    conjugate,
)
from .weights import WeightPair, make_weight_pair


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """One instance of the spectral problem: interval, exponents, weights and grid."""

    interval: Interval
    p: float
    q: float
    weights: WeightPair
    grid: Grid
    u_text: str = field(default="", compare=False)
    v_text: str = field(default="", compare=False)

    def __post_init__(self):
        check_exponent(self.p, "p")
        check_exponent(self.q, "q")
        if self.weights.grid != self.grid or self.grid.interval != self.interval:
            raise GridMismatch("weights, grid and interval disagree")

    @classmethod
    def build(cls, p: float, q: float, u="1", v="1", interval=(0.0, 1.0), level: int = 10) -> "ProblemSpec":
        if not isinstance(interval, Interval):
            interval = Interval(*map(float, interval))
        grid = Grid(interval, level)
        weights = make_weight_pair(u, v, grid)
        from .weights import unparse

        u_text = u if isinstance(u, str) else unparse(u)
        v_text = v if isinstance(v, str) else unparse(v)
        return cls(interval, float(p), float(q), weights, grid, u_text, v_text)

    def with_level(self, level: int) -> "ProblemSpec":
        return ProblemSpec.build(self.p, self.q, self.weights.u, self.weights.v, self.interval, level)

    def with_exponents(self, p: float, q: float) -> "ProblemSpec":
        return ProblemSpec(self.interval, float(p), float(q), self.weights, self.grid, self.u_text, self.v_text)

    @property
    def p_conj(self) -> float:
        return conjugate(self.p)

    @property
    def q_conj(self) -> float:
        return conjugate(self.q)

    @property
    def r(self) -> float:
        return 1.0 / self.p_conj + 1.0 / self.q

    @cached_property
    def u(self) -> np.ndarray:
        return np.asarray(self.weights.samples_u.values)

    @cached_property
    def v(self) -> np.ndarray:
        return np.asarray(self.weights.samples_v.values)

    def describe(self) -> dict:
        return {
            "interval": [self.interval.a, self.interval.b],
            "p": self.p,
            "q": self.q,
            "u": self.u_text,
            "v": self.v_text,
            "grid_level": self.grid.level,
        }


# -- raw array kernels --------------------------------------------------------


def cumulative(y: np.ndarray, h: float) -> np.ndarray:
    """Prefix integrals ``int_a^{x_i} y``: trapezoid, last cell by left rectangle."""
    inc = np.empty_like(y)
    inc[0] = 0.0
    inc[1:-1] = 0.5 * h * (y[:-2] + y[1:-1])
    inc[-1] = h * y[-2]
    return np.cumsum(inc)


def cumulative_adjoint(z: np.ndarray, h: float) -> np.ndarray:
    """Transpose of the increment matrix of :func:`cumulative`."""
    out = np.zeros_like(z)
    out[:-2] += 0.5 * h * z[1:-1]
    out[1:-1] += 0.5 * h * z[1:-1]
    out[-2] += h * z[-1]
    return out


def suffix(y: np.ndarray, grid: Grid) -> np.ndarray:
    """``(1/w) * A^T (w y)``: the W-adjoint of :func:`cumulative`, a suffix quadrature."""
    w = grid.weights
    z = np.cumsum((w * y)[::-1])[::-1]
    return cumulative_adjoint(z, grid.h) / w


def cumulative_row(grid: Grid, m: int) -> np.ndarray:
    """Coefficient row of :func:`cumulative` at node ``m``."""
    h = grid.h
    row = np.zeros(grid.size)
    if m == 0:
        return row
    row[:m] = h
    row[0] = 0.5 * h
    if m < grid.size - 1:
        row[m] = 0.5 * h
    else:
        row[m - 1] = h if m - 1 > 0 else 0.5 * h
        row[m - 1] += 0.5 * h
    return row


def T_values(spec: ProblemSpec, f: np.ndarray) -> np.ndarray:
    return spec.v * cumulative(spec.u * f, spec.grid.h)


def T_star_values(spec: ProblemSpec, h: np.ndarray) -> np.ndarray:
    return spec.u * suffix(spec.v * h, spec.grid)


# -- public operations ---------------------------------------------------------


def _check(spec: ProblemSpec, f: SampledFunction) -> None:
    if f.grid != spec.grid:
        raise GridMismatch("function does not live on the problem grid")


def apply_T(spec: ProblemSpec, f: SampledFunction) -> SampledFunction:
    """``(T f)(x) = v(x) int_a^x f u``."""
    _check(spec, f)
    return f.like(T_values(spec, f.values))


def apply_T_star(spec: ProblemSpec, h: SampledFunction) -> SampledFunction:
    """``(T* h)(x) = u(x) int_x^b v h``."""
    _check(spec, h)
    return h.like(T_star_values(spec, h.values))


def apply_T_checked(spec: ProblemSpec, f: np.ndarray) -> np.ndarray:
    g = T_values(spec, f)
    if not np.any(g):
        raise ZeroImage("T f vanished identically")
    return g


@dataclass(frozen=True)
class ZeroAnchors:
    anchors: tuple[float, ...]

    def __post_init__(self):
        a = tuple(float(t) for t in self.anchors)
        if not a:
            raise ValidationError("need at least the anchor a_0 = a")
        if any(y <= x for x, y in zip(a, a[1:])):
            raise ValidationError("anchors must be strictly increasing")
        object.__setattr__(self, "anchors", a)

    def __len__(self):
        return len(self.anchors)


class AnchoredOperator:
    """T+ f = v * (F - F(a_i)) on block i, with F the prefix integral of u f.

    Blocks are described by a membership matrix ``C`` (blocks x nodes) whose
    columns sum to one; a node straddling a block boundary may be shared
    fractionally. ``F(a_i)`` is read off by linear interpolation of the prefix
    sums, so anchors need not be grid nodes. The rank-n part
    ``T_n = T - T+`` is ``f -> v * sum_i C_i F(a_i)``.
    """

    def __init__(self, spec: ProblemSpec, anchors: ZeroAnchors, membership: np.ndarray):
        self.spec = spec
        self.anchors = anchors
        grid = spec.grid
        a = anchors.anchors
        tol = 0.5 * grid.h
        if abs(a[0] - spec.interval.a) > 1e-12 * max(1.0, abs(spec.interval.a)):
            raise ValidationError("first anchor must be the left endpoint a")
        if a[-1] > spec.interval.b + tol or a[0] < spec.interval.a - tol:
            raise AnchorOffGrid("anchor lies outside the interval")
        self.membership = np.asarray(membership, dtype=float)
        if self.membership.shape != (len(a), grid.size):
            raise ValidationError("membership must be (anchors x nodes)")
        rows = []
        for t in a:
            j, s = grid.locate(min(max(t, spec.interval.a), spec.interval.b))
            rows.append((1 - s) * cumulative_row(grid, j) + s * cumulative_row(grid, j + 1))
        # functional F(a_i) acts on u*f
        self.rows = np.array(rows)

    @classmethod
    def from_anchors(
        cls,
        spec: ProblemSpec,
        anchors: ZeroAnchors | list[float],
        block_ends: list[float] | None = None,
        fractions: list[float] | None = None,
    ) -> "AnchoredOperator":
        """Blocks ``[a_i, a_{i+1})`` by default, or ``(b_i, b_{i+1})`` given ``block_ends``.

        ``block_ends`` lists the interior boundaries b_1 < ... < b_n. The node
        nearest each boundary is shared between its two blocks; ``fractions[i]``
        is the share given to the left block (default: the part of the node's
        cell that lies left of the boundary).
        """
        if not isinstance(anchors, ZeroAnchors):
            anchors = ZeroAnchors(tuple(anchors))
        grid = spec.grid
        x = grid.nodes
        nb = len(anchors)
        C = np.zeros((nb, grid.size))
        if block_ends is None:
            edges = list(anchors.anchors[1:])
            idx = np.searchsorted(edges, x, side="right")
            C[idx, np.arange(grid.size)] = 1.0
            return cls(spec, anchors, C)
        ends = [float(b) for b in block_ends]
        if len(ends) != nb - 1:
            raise ValidationError("need one interior block end per interior anchor")
        for i, b in enumerate(ends):
            if not anchors.anchors[i] < b < anchors.anchors[i + 1]:
                raise ValidationError("anchors and block ends must interleave")
        idx = np.searchsorted(ends, x, side="right")
        C[idx, np.arange(grid.size)] = 1.0
        for i, b in enumerate(ends):
            j = int(round((b - spec.interval.a) / grid.h))
            j = min(max(j, 0), grid.size - 1)
            if fractions is not None and fractions[i] is not None:
                theta = float(fractions[i])
            else:
                theta = float(np.clip((b - (x[j] - 0.5 * grid.h)) / grid.h, 0.0, 1.0))
            C[:, j] = 0.0
            C[i, j] += theta
            C[i + 1, j] += 1.0 - theta
        return cls(spec, anchors, C)

    def anchor_values(self, f: np.ndarray) -> np.ndarray:
        """Prefix integrals ``int_a^{a_i} u f`` at every anchor."""
        return self.rows @ (self.spec.u * f)

    def low_rank(self, f: np.ndarray) -> np.ndarray:
        return self.spec.v * (self.anchor_values(f) @ self.membership)

    def apply(self, f: np.ndarray) -> np.ndarray:
        return T_values(self.spec, f) - self.low_rank(f)

    def adjoint(self, h: np.ndarray) -> np.ndarray:
        spec = self.spec
        w = spec.grid.weights
        c = self.membership @ (w * spec.v * h)
        return T_star_values(spec, h) - spec.u * (c @ self.rows) / w

    def low_rank_adjoint(self, h: np.ndarray) -> np.ndarray:
        spec = self.spec
        w = spec.grid.weights
        c = self.membership @ (w * spec.v * h)
        return spec.u * (c @ self.rows) / w


@dataclass(frozen=True)
class RankApproximant:
    """Handle for ``T_n f = sum_i chi_{I_i} v int_a^{a_i} u f``."""

    op: AnchoredOperator

    @property
    def rank_bound(self) -> int:
        # a_0 = a contributes the zero functional
        return len(self.op.anchors) - 1

    def apply(self, f: SampledFunction) -> SampledFunction:
        _check(self.op.spec, f)
        return f.like(self.op.low_rank(f.values))

    def remainder(self, f: SampledFunction) -> SampledFunction:
        """``(T - T_n) f``, which is ``T+ f``."""
        _check(self.op.spec, f)
        return f.like(self.op.apply(f.values))


def apply_T_plus(
    spec: ProblemSpec, anchors: ZeroAnchors, f: SampledFunction, block_ends: list[float] | None = None
) -> SampledFunction:
    """Anchored operator; equals ``apply_T(f)`` whenever ``(T f)(a_i) = 0`` for all anchors."""
    _check(spec, f)
    return f.like(AnchoredOperator.from_anchors(spec, anchors, block_ends).apply(f.values))


def build_rank_n_approximant(
    spec: ProblemSpec, anchors: ZeroAnchors, block_ends: list[float] | None = None, fractions=None
) -> RankApproximant:
    return RankApproximant(AnchoredOperator.from_anchors(spec, anchors, block_ends, fractions))


def dense_T(spec: ProblemSpec) -> np.ndarray:
    """Dense matrix of T on the grid (columns are images of unit vectors)."""
    n = spec.grid.size
    A = np.empty((n, n))
    for m in range(n):
        A[m] = cumulative_row(spec.grid, m)
    return spec.v[:, None] * A * spec.u[None, :]
