"""Constructive fixed-point scheme for the nonlinear system g = T f, f_(p) = lam T*(g_(q)).

One step maps ``f_k`` (with ``||f_k||_p = 1``) to ``g_k = T f_k`` and
``f_{k+1} = (lam_k T*((g_k)_(q)))_(p')`` with ``lam_k`` fixed by
``||f_{k+1}||_p = 1``. Along the run ``lam_k`` does not increase and
``||g_k||_q`` does not decrease. Any linear operator with an exact discrete
adjoint may stand in for T (the anchored operator T+ is used this way).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotConverged, ValidationError, ZeroImage
from .function_space import (
    DEFAULT_POLICY,
    NodalCountPolicy,
    SampledFunction,
    count_zeros,
    signed_power,
)
from .operator import ProblemSpec, T_star_values, T_values

log = logging.getLogger(__name__)

STAGNATION_RTOL = 1e-15
STAGNATION_STEPS = 50


def weighted_norm(values: np.ndarray, w: np.ndarray, p: float) -> float:
    a = np.abs(values)
    m = a.max()
    if m == 0.0:
        return 0.0
    return float(m * np.dot(w, (a / m) ** p) ** (1.0 / p))


@dataclass(frozen=True)
class SignPattern:
    """Point of the l1 unit sphere in R^(n+1) selecting a starting sign function."""

    z: tuple[float, ...]

    def __post_init__(self):
        z = tuple(float(t) for t in self.z)
        s = sum(abs(t) for t in z)
        if not z or s == 0.0:
            raise ValidationError("sign pattern must not vanish")
        if abs(s - 1.0) > 1e-12:
            raise ValidationError(f"sign pattern must have l1 norm 1, got {s}")
        object.__setattr__(self, "z", z)

    @classmethod
    def normalized(cls, raw) -> "SignPattern":
        raw = [float(t) for t in raw]
        s = sum(abs(t) for t in raw)
        if s == 0.0:
            raise ValidationError("sign pattern must not vanish")
        return cls(tuple(t / s for t in raw))

    @classmethod
    def alternating(cls, n: int) -> "SignPattern":
        return cls.normalized([(-1) ** i for i in range(n + 1)])

    @property
    def n(self) -> int:
        return len(self.z) - 1

    def breakpoints(self) -> np.ndarray:
        """Interior block ends on [0, 1]: cumulative sums of ``|z_i|``."""
        return np.cumsum(np.abs(self.z))[:-1]


@dataclass(frozen=True, eq=False)
class SpectralTriple:
    g: SampledFunction
    f: SampledFunction
    lam: float
    nodal_count: int
    residual: float

    def summary(self, spec: ProblemSpec) -> dict:
        return {
            "lambda": self.lam,
            "nodal_count": self.nodal_count,
            "residual": self.residual,
            "g_norm_q": weighted_norm(self.g.values, spec.grid.weights, spec.q),
            "lambda_pow": self.lam ** (-1.0 / spec.q),
        }


@dataclass
class IterationTrace:
    lambdas: list[float] = field(default_factory=list)
    g_norms: list[float] = field(default_factory=list)
    nodal_counts: list[int] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    stop_reason: str = ""

    def monotone(self, slack: float = 1e-10) -> bool:
        lam = np.asarray(self.lambdas)
        gn = np.asarray(self.g_norms)
        return bool(np.all(np.diff(lam) <= slack) and np.all(np.diff(gn) >= -slack))


def initial_sign_function(spec: ProblemSpec, z: SignPattern, cell_average: bool = False) -> SampledFunction:
    """``f_0 = sgn(z_j)`` on the j-th block; block widths ``|z_j| (b - a)``.

    A node lying exactly on a block end takes the sign of the block to its
    right; blocks with ``z_j = 0`` are empty. With ``cell_average`` each node
    instead carries the mean of the step function over its quadrature cell,
    which makes ``f_0`` depend continuously on ``z``.
    """
    a, b = spec.interval.a, spec.interval.b
    x = spec.grid.nodes
    ends = a + (b - a) * np.cumsum(np.abs(z.z))
    if cell_average:
        # exact antiderivative of the step function, sampled at the cell edges
        knots = np.concatenate([[a], ends])
        knots[-1] = b
        prim = np.concatenate([[0.0], np.cumsum(np.sign(z.z) * np.diff(knots))])
        h = spec.grid.h
        lo = np.maximum(x - 0.5 * h, a)
        hi = np.minimum(x + 0.5 * h, b)
        vals = (np.interp(hi, knots, prim) - np.interp(lo, knots, prim)) / (hi - lo)
        return SampledFunction(spec.grid, vals)
    idx = np.searchsorted(ends, x, side="right")
    idx = np.minimum(idx, len(z.z) - 1)
    # the right endpoint belongs to the last non-empty block
    signs = np.sign(np.asarray(z.z))
    nonempty = np.flatnonzero(signs)
    vals = signs[idx]
    vals[-1] = signs[nonempty[-1]]
    # nodes inside empty blocks cannot occur (zero width); guard against rounding
    if np.any(vals == 0):
        for i in np.flatnonzero(vals == 0):
            k = idx[i]
            while k < len(signs) - 1 and signs[k] == 0:
                k += 1
            vals[i] = signs[k] if signs[k] != 0 else signs[nonempty[-1]]
    return SampledFunction(spec.grid, vals.astype(float))


class _Ops:
    """Operator pair used by the iteration: plain T or an anchored replacement."""

    def __init__(self, spec: ProblemSpec, op=None):
        self.spec = spec
        if op is None:
            self.apply = lambda f: T_values(spec, f)
            self.adjoint = lambda h: T_star_values(spec, h)
        else:
            self.apply = op.apply
            self.adjoint = op.adjoint


def _step(spec: ProblemSpec, ops: _Ops, f: np.ndarray):
    w = spec.grid.weights
    g = ops.apply(f)
    if not np.any(g):
        raise ZeroImage("T f vanished identically for a nonzero f")
    t = ops.adjoint(signed_power(g, spec.q))
    y = signed_power(t, spec.p_conj)
    norm = weighted_norm(y, w, spec.p)
    if norm == 0.0:
        raise ZeroImage("T*((T f)_(q)) vanished identically")
    lam = norm ** (-(spec.p - 1.0))
    return g, y / norm, lam


def iterate_once(spec: ProblemSpec, f_k: SampledFunction, op=None):
    """One step of the scheme: returns ``(g_k, f_next, lam_k)``."""
    if not np.any(f_k.values):
        raise ValidationError("f_k must be nonzero")
    g, f_next, lam = _step(spec, _Ops(spec, op), np.asarray(f_k.values))
    return f_k.like(g), f_k.like(f_next), lam


def _relative_defect(spec: ProblemSpec, f: np.ndarray, rhs_p: np.ndarray) -> float:
    """``||f_(p) - rhs_p||_{p'} / ||f_(p)||_{p'}``."""
    w = spec.grid.weights
    fp = signed_power(f, spec.p)
    den = weighted_norm(fp, w, spec.p_conj)
    return weighted_norm(fp - rhs_p, w, spec.p_conj) / den


def run_iteration(
    spec: ProblemSpec,
    f_0: SampledFunction,
    tol: float = 1e-12,
    max_iter: int = 10_000,
    res_tol: float = 1e-8,
    op=None,
    policy: NodalCountPolicy = DEFAULT_POLICY,
    raise_on_failure: bool = True,
) -> tuple[SpectralTriple, IterationTrace]:
    """Iterate from ``f_0`` until the relative change of lam_k is below ``tol``
    and the equation residual is below ``res_tol``.

    Raises:
        NotConverged: after ``max_iter`` steps, or on a lam plateau with a residual
            still above ``100 * res_tol``. The exception carries the partial trace.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    ops = _Ops(spec, op)
    w = spec.grid.weights
    f = np.asarray(f_0.values, dtype=float)
    nf = weighted_norm(f, w, spec.p)
    if nf == 0.0:
        raise ValidationError("f_0 must be nonzero")
    f = f / nf
    trace = IterationTrace()
    flat = 0
    lam_prev = math.inf
    g = f_next = None
    for k in range(max_iter):
        g, f_next, lam = _step(spec, ops, f)
        trace.lambdas.append(lam)
        trace.g_norms.append(weighted_norm(g, w, spec.q))
        trace.nodal_counts.append(count_zeros(g, policy))
        res = _relative_defect(spec, f, signed_power(f_next, spec.p))
        trace.residuals.append(res)
        trace.iterations = k + 1
        change = abs(lam - lam_prev) / lam
        if change <= tol and res <= res_tol:
            trace.converged, trace.stop_reason = True, "tol_met"
            break
        flat = flat + 1 if change < STAGNATION_RTOL else 0
        if flat >= STAGNATION_STEPS:
            trace.converged = res <= 100 * res_tol
            trace.stop_reason = "stagnation"
            break
        lam_prev = lam
        f = f_next
    else:
        trace.stop_reason = "max_iter"
    triple = SpectralTriple(
        g=f_0.like(g),
        f=f_0.like(f),
        lam=trace.lambdas[-1],
        nodal_count=trace.nodal_counts[-1],
        residual=trace.residuals[-1],
    )
    if not trace.converged and raise_on_failure:
        raise NotConverged(
            f"no convergence after {trace.iterations} steps ({trace.stop_reason}), residual {triple.residual:.3e}",
            trace,
            triple,
        )
    return triple, trace


def make_triple(spec: ProblemSpec, f: np.ndarray, lam: float | None = None, policy=DEFAULT_POLICY) -> SpectralTriple:
    """Normalize ``f`` and package it with ``g = T f``.

    Without ``lam`` the spectral number is taken from the identity
    ``lam^{-1} = ||g||_q^q / ||f||_p^p``.
    """
    w = spec.grid.weights
    f = np.asarray(f, dtype=float)
    f = f / weighted_norm(f, w, spec.p)
    g = T_values(spec, f)
    if lam is None:
        lam = weighted_norm(g, w, spec.q) ** (-spec.q)
    grid = spec.grid
    g_s, f_s = SampledFunction(grid, g), SampledFunction(grid, f)
    triple = SpectralTriple(g_s, f_s, float(lam), count_zeros(g, policy), 0.0)
    return SpectralTriple(g_s, f_s, float(lam), triple.nodal_count, residual(spec, triple))


def residual(spec: ProblemSpec, triple: SpectralTriple) -> float:
    """Relative defect of ``f_(p) = lam T*((T f)_(q))`` measured in L_{p'}."""
    f = np.asarray(triple.f.values)
    rhs = triple.lam * T_star_values(spec, signed_power(T_values(spec, f), spec.q))
    return _relative_defect(spec, f, rhs)


def dual_transform(spec: ProblemSpec, triple: SpectralTriple) -> tuple[SampledFunction, float]:
    """Map a primal pair to the dual one: ``s = (T f)_(q)``, ``lam* = lam_(p')``."""
    g = T_values(spec, np.asarray(triple.f.values))
    s = signed_power(g, spec.q)
    return triple.f.like(s), float(signed_power(triple.lam, spec.p_conj))


def dual_defect(spec: ProblemSpec, s: SampledFunction, lam_star: float) -> float:
    """Relative defect of ``s_(q') = lam* T((T* s)_(p'))`` in L_q."""
    w = spec.grid.weights
    sv = np.asarray(s.values)
    lhs = signed_power(sv, spec.q_conj)
    rhs = lam_star * T_values(spec, signed_power(T_star_values(spec, sv), spec.p_conj))
    return weighted_norm(lhs - rhs, w, spec.q) / weighted_norm(lhs, w, spec.q)


def dual_round_trip(spec: ProblemSpec, s: SampledFunction) -> SampledFunction:
    """``f = (T* s)_(p')`` normalized in L_p."""
    f = signed_power(T_star_values(spec, np.asarray(s.values)), spec.p_conj)
    return s.like(f / weighted_norm(f, spec.grid.weights, spec.p))
