"""Spectral triples in a prescribed nodal class and estimates of max/min sp_n.

The fixed-point scheme is attracted to the positive (n = 0) spectral function:
any start with a component along lower nodal classes loses zeros. Triples
with n > 0 are therefore obtained by a Newton solve of the discretized system
seeded with an n-node profile built from the sign pattern ``z``; the converged
triple is then fed back through one step of the scheme as a fixed-point check.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.linalg import solve_banded

from .errors import Empty, NodalCountMissed, NotConverged, ValidationError
from .function_space import DEFAULT_POLICY, count_sign_changes, count_zeros, signed_power
from .iteration import (
    SignPattern,
    SpectralTriple,
    initial_sign_function,
    iterate_once,
    make_triple,
    run_iteration,
    weighted_norm,
)
from .operator import ProblemSpec, T_values

log = logging.getLogger(__name__)

DISTINCT_RTOL = 1e-6
RESIDUAL_BOUND = 1e-8


@dataclass(frozen=True)
class SearchConfig:
    n: int = 0
    mode: str = "max"
    starts: int = 16
    rng_seed: int = 0
    inner_tol: float = 1e-12
    outer_tol: float = 1e-11
    max_outer: int = 60

    def __post_init__(self):
        if self.n < 0:
            raise ValidationError("n must be >= 0")
        if self.mode not in ("max", "min"):
            raise ValidationError("mode must be 'max' or 'min'")
        if self.starts < 1:
            raise ValidationError("starts must be >= 1")
        if self.inner_tol <= 0 or self.outer_tol <= 0:
            raise ValidationError("tolerances must be positive")


@dataclass
class SpectrumResult:
    n: int
    mode: str
    lambda_extreme: float
    best_triple: SpectralTriple
    all_found: list[tuple[float, tuple[float, ...]]] = field(default_factory=list)
    starts_used: int = 0
    starts_converged: int = 0

    def distinct(self) -> list[float]:
        return merge_distinct([lam for lam, _ in self.all_found])


def default_mode(p: float, q: float) -> str:
    """max for q < p, min for p < q; either for p = q."""
    return "min" if p < q else "max"


def merge_distinct(values, rtol: float = DISTINCT_RTOL) -> list[float]:
    out: list[float] = []
    for lam in sorted(values):
        if not out or abs(lam - out[-1]) > rtol * abs(lam):
            out.append(lam)
    return out


# -- seed profile -----------------------------------------------------------------


@lru_cache(maxsize=32)
def _reference_quarter(p: float, q: float, level: int = 11):
    """Positive spectral function of the unweighted problem on [0, 1].

    Its f falls from the peak at 0 to zero at 1: one quarter of an n-node profile.
    """
    ref = ProblemSpec.build(p, q, "1", "1", (0.0, 1.0), level)
    triple, _ = run_iteration(ref, initial_sign_function(ref, SignPattern((1.0,))), res_tol=1e-10)
    f = np.asarray(triple.f.values)
    return np.asarray(ref.grid.nodes), f / f.max()


def quarter_phases(n: int, z: SignPattern) -> np.ndarray:
    """Phase coordinates of the 2n+2 quarter ends.

    Block 0 holds one quarter, every later block two; ``|z_j|`` weights the
    per-quarter length of block j, so equal ``|z_j|`` give equal quarters.
    """
    if z.n != n:
        raise ValidationError(f"sign pattern has {z.n + 1} entries, need {n + 1}")
    zs = np.abs(np.asarray(z.z))
    mult = np.full(n + 1, 2.0)
    mult[0] = 1.0
    lengths = mult * zs
    lengths = lengths / lengths.sum() * (2 * n + 1)
    ends = [0.0]
    for j, L in enumerate(lengths):
        if j == 0:
            ends.append(ends[-1] + L)
        else:
            ends.extend([ends[-1] + 0.5 * L, ends[-1] + L])
    return np.array(ends)


def nodal_seed(spec: ProblemSpec, n: int, z: SignPattern) -> np.ndarray:
    """n-node starting profile for ``f`` on the grid of ``spec``.

    Quarters of the unweighted positive profile are laid out along the phase
    ``int (u v)^r``, alternating orientation and sign. For p != q the local
    balance of the two sides of the equation on a quarter of length
    ``~ (u v)^(-r)`` fixes the amplitude envelope ``(u v)^(-1/p)``.
    """
    xr, fr = _reference_quarter(spec.p, spec.q)
    rho = (spec.u * spec.v) ** spec.r
    h = spec.grid.h
    phase = np.concatenate([[0.0], np.cumsum(0.5 * h * (rho[1:] + rho[:-1]))])
    phase *= (2 * n + 1) / phase[-1]
    ends = quarter_phases(n, z)
    k = np.clip(np.searchsorted(ends, phase, side="right") - 1, 0, 2 * n)
    t = (phase - ends[k]) / np.maximum(ends[k + 1] - ends[k], 1e-300)
    t = np.clip(t, 0.0, 1.0)
    local = np.where(k % 2 == 0, t, 1.0 - t)
    sign = np.where(((k + 1) // 2) % 2 == 0, 1.0, -1.0)
    s0 = 1.0 if z.z[0] >= 0 else -1.0
    envelope = (spec.u * spec.v) ** (-1.0 / spec.p) if spec.p != spec.q else 1.0
    return s0 * sign * envelope * np.interp(local, xr, fr)


# -- Newton solve of the discrete system -------------------------------------------


class _Coupled:
    """Residual and Jacobian of the discrete system in differenced, banded form.

    Unknowns per node are ``alpha`` (f, or f_(p) when p <= 2), ``beta`` (g, or
    g_(q) when q < 2), the suffix sum ``Z_j = sum_{i>=j} w_i v_i s_i``, a copy
    ``Lam_j`` of lam and the running norm ``M_j = sum_{i<=j} w_i |f_i|^p``.
    Every pointwise power has exponent >= 1, and with the unknowns interleaved
    node by node the Jacobian is banded.
    """

    NVAR = 5

    def __init__(self, spec):
        self.spec = spec
        grid = spec.grid
        self.N = N = grid.size
        h = grid.h
        self.w = np.asarray(grid.weights)
        self.u, self.v = spec.u, spec.v
        rows = np.concatenate([np.arange(1, N - 1), np.arange(1, N - 1), [N - 1]])
        cols = np.concatenate([np.arange(0, N - 2), np.arange(1, N - 1), [N - 2]])
        vals = np.concatenate([np.full(N - 2, 0.5 * h), np.full(N - 2, 0.5 * h), [h]])
        self.A1 = sparse.csr_matrix((vals, (rows, cols)), shape=(N, N))
        self.A1T = self.A1.T.tocsr()
        self.alpha_is_f = spec.p > 2.0
        self.beta_is_g = spec.q >= 2.0
        D = sparse.diags([np.ones(N), -np.ones(N - 1)], [0, -1], shape=(N, N), format="csr")
        self.Dback = D  # x_i - x_{i-1}; row 0 is x_0
        self.Dfwd = D.T.tocsr()  # x_j - x_{j+1}; last row is x_N
        self.order = np.arange(self.NVAR * N).reshape(self.NVAR, N).T.ravel()

    # pointwise conversions and their derivatives
    def f_of(self, a):
        if self.alpha_is_f:
            return a, np.ones_like(a)
        pc = self.spec.p_conj
        return signed_power(a, pc), (pc - 1.0) * np.abs(a) ** (pc - 2.0)

    def phi_of(self, a):
        p = self.spec.p
        if self.alpha_is_f:
            return signed_power(a, p), (p - 1.0) * np.abs(a) ** (p - 2.0)
        return a, np.ones_like(a)

    def g_of(self, b):
        if self.beta_is_g:
            return b, np.ones_like(b)
        qc = self.spec.q_conj
        return signed_power(b, qc), (qc - 1.0) * np.abs(b) ** (qc - 2.0)

    def s_of(self, b):
        q = self.spec.q
        if self.beta_is_g:
            return signed_power(b, q), (q - 1.0) * np.abs(b) ** (q - 2.0)
        return b, np.ones_like(b)

    def pack(self, f: np.ndarray, lam: float) -> np.ndarray:
        spec = self.spec
        g = T_values(spec, f)
        s = signed_power(g, spec.q)
        a = f if self.alpha_is_f else signed_power(f, spec.p)
        b = g if self.beta_is_g else s
        Z = np.cumsum((self.w * self.v * s)[::-1])[::-1]
        M = np.cumsum(self.w * np.abs(f) ** spec.p)
        return np.concatenate([a, b, Z, np.full(self.N, lam), M])

    def unpack(self, x: np.ndarray):
        return x.reshape(self.NVAR, self.N)

    def lam(self, x: np.ndarray) -> float:
        return float(x[3 * self.N])

    def residual(self, x: np.ndarray) -> np.ndarray:
        a, b, Z, Lam, M = self.unpack(x)
        F, _ = self.f_of(a)
        Phi, _ = self.phi_of(a)
        G, _ = self.g_of(b)
        S, _ = self.s_of(b)
        w, u, v = self.w, self.u, self.v
        e1 = self.Dback @ (G / v) - self.A1 @ (u * F)
        e1[0] = b[0]  # g(a) = 0 exactly
        e2 = self.Dfwd @ Z - w * v * S
        e3 = w * Phi / u - Lam * (self.A1T @ Z)
        e3[-1] = a[-1]  # T* vanishes at b, so f(b) = 0 exactly
        e4 = self.Dback @ M - w * np.abs(F) ** self.spec.p
        e5 = self.Dfwd @ Lam
        e5[-1] = M[-1] - 1.0
        return np.concatenate([e1, e2, e3, e4, e5])

    @staticmethod
    def _slope(fn, t: np.ndarray, floor: float):
        """Derivative of an odd power map, held away from zero near t = 0.

        A node sitting on a zero of the unknown would otherwise freeze there
        (zero slope means an unbounded Newton correction). Only the Jacobian
        is modified, so converged solutions are unaffected.
        """
        _, d = fn(t)
        if floor > 0.0:
            m = np.abs(t).max()
            if m > 0.0:
                d = np.maximum(d, fn(np.array([floor * m]))[1][0])
        return d

    def jacobian(self, x: np.ndarray, floor: float = 1e-3):
        N = self.N
        a, b, Z, Lam, M = self.unpack(x)
        F, _ = self.f_of(a)
        dF = self._slope(self.f_of, a, floor)
        dPhi = self._slope(self.phi_of, a, floor)
        dG = self._slope(self.g_of, b, floor)
        dS = self._slope(self.s_of, b, floor)
        w, u, v = self.w, self.u, self.v
        p = self.spec.p
        e0 = sparse.csr_matrix(([1.0], ([0], [0])), shape=(N, N))
        eN = sparse.csr_matrix(([1.0], ([N - 1], [N - 1])), shape=(N, N))
        keep_last = sparse.diags(np.r_[np.ones(N - 1), 0.0])
        keep_first = sparse.diags(np.r_[0.0, np.ones(N - 1)])
        J11 = keep_first @ (-self.A1 @ sparse.diags(u * dF))
        J12 = keep_first @ self.Dback @ sparse.diags(dG / v) + e0
        J22 = sparse.diags(-w * v * dS)
        J23 = self.Dfwd
        J31 = keep_last @ sparse.diags(w * dPhi / u) + eN
        J33 = keep_last @ (-sparse.diags(Lam) @ self.A1T)
        J34 = keep_last @ sparse.diags(-(self.A1T @ Z))
        J41 = sparse.diags(-p * w * signed_power(F, p) * self.f_of(a)[1])
        J45 = self.Dback
        J54 = keep_last @ self.Dfwd
        J55 = eN
        return sparse.bmat(
            [
                [J11, J12, None, None, None],
                [None, J22, J23, None, None],
                [J31, None, J33, J34, None],
                [J41, None, None, None, J45],
                [None, None, None, J54, J55],
            ],
            format="csr",
        )

    def solve(self, x: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        perm = self.order
        J = self.jacobian(x)[perm][:, perm].tocoo()
        off = J.col - J.row
        lo, up = int(max(0, -off.min())), int(max(0, off.max()))
        ab = np.zeros((lo + up + 1, J.shape[0]))
        ab[up + J.row - J.col, J.col] = J.data
        y = solve_banded((lo, up), ab, rhs[perm], check_finite=False)
        out = np.empty_like(y)
        out[perm] = y
        return out


@dataclass(frozen=True, eq=False)
class _Stage:
    """Problem data along the continuation path (duck-types the parts of ProblemSpec used here)."""

    grid: object
    p: float
    q: float
    u: np.ndarray
    v: np.ndarray

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def q_conj(self) -> float:
        return self.q / (self.q - 1.0)

    @property
    def r(self) -> float:
        return 1.0 - 1.0 / self.p + 1.0 / self.q


def _stage(spec: ProblemSpec, tau: float, p0: float = 2.0, q0: float = 2.0) -> _Stage:
    """Blend from (p0, q0) with unit weights at tau = 0 to ``spec`` at tau = 1."""
    return _Stage(
        spec.grid,
        p0 + tau * (spec.p - p0),
        q0 + tau * (spec.q - q0),
        spec.u**tau,
        spec.v**tau,
    )


def _newton(stage, f0: np.ndarray, lam0: float | None, tol: float, max_iter: int):
    sys_ = _Coupled(stage)
    w = sys_.w
    f0 = np.asarray(f0, dtype=float)
    f0 = f0 / weighted_norm(f0, w, stage.p)
    if lam0 is None:
        lam0 = weighted_norm(T_values(stage, f0), w, stage.q) ** (-stage.q)
    x = sys_.pack(f0, lam0)
    r = sys_.residual(x)
    rn = np.linalg.norm(r)
    scale = stage.grid.h
    converged = False
    for it in range(max_iter):
        if np.max(np.abs(r)) <= tol * scale:
            converged = True
            break
        try:
            dx = sys_.solve(x, -r)
        except (RuntimeError, np.linalg.LinAlgError):
            log.debug("singular Jacobian at Newton step %d", it)
            break
        if not np.all(np.isfinite(dx)):
            break
        step = 1.0
        while True:
            xn = x + step * dx
            rr = sys_.residual(xn) if sys_.lam(xn) > 0 else None
            if rr is not None and np.all(np.isfinite(rr)) and np.linalg.norm(rr) < (1 - 1e-4 * step) * rn:
                break
            step *= 0.5
            if step < 1e-3:
                break
        if step < 1e-3:
            # stalled: give up rather than creep
            break
        x, r = xn, rr
        rn = np.linalg.norm(r)
    F, _ = sys_.f_of(sys_.unpack(x)[0])
    return F, sys_.lam(x), converged


def newton_polish(spec: ProblemSpec, f0: np.ndarray, lam0: float | None = None, tol: float = 1e-11, max_iter: int = 40):
    """Damped Newton on the discrete system from ``f0``; returns ``(f, lam, converged)``."""
    return _newton(spec, f0, lam0, tol, max_iter)


def _track(spec, n, f, lam, p0, q0, tol, min_step):
    tau, dtau = 0.0, 0.25
    while tau < 1.0:
        nxt = min(1.0, tau + dtau)
        stage = _stage(spec, nxt, p0, q0)
        f_new, lam_new, ok = _newton(stage, f, None, tol if nxt == 1.0 else 1e3 * tol, 25)
        if ok and count_zeros(T_values(stage, f_new)) == n:
            tau, f, lam = nxt, f_new, lam_new
            dtau = min(2 * dtau, 0.5)
        else:
            dtau *= 0.5
            if dtau < min_step:
                return f, lam, False
    return f, lam, True


def continuation_solve(spec: ProblemSpec, n: int, tol: float = 1e-11, min_step: float = 1.0 / 256):
    """Track the n-node solution from an unweighted problem to ``spec``.

    The path starts from the unweighted problem with the same exponents when
    Newton solves it from the n-node profile, and otherwise from p = q = 2,
    where the solution is ``cos((n + 1/2) pi (x - a) / (b - a))``. Each stage
    is solved by Newton from the previous one with an adaptive step in the
    path parameter. Returns ``(f, lam, converged)``.
    """
    a, L = spec.interval.a, spec.interval.length
    plain = _stage(spec, 0.0, spec.p, spec.q)
    f, lam, ok = _newton(plain, nodal_seed(plain, n, SignPattern.alternating(n)), None, tol, 40)
    if ok and count_zeros(T_values(plain, f)) == n:
        return _track(spec, n, f, lam, spec.p, spec.q, tol, min_step)
    x = np.asarray(spec.grid.nodes)
    f = np.cos((n + 0.5) * np.pi * (x - a) / L)
    f, lam, ok = _newton(_stage(spec, 0.0), f, ((n + 0.5) * np.pi / L) ** 2, tol, 40)
    if not ok:
        return f, lam, False
    return _track(spec, n, f, lam, 2.0, 2.0, tol, min_step)


# -- public operations ------------------------------------------------------------


@lru_cache(maxsize=64)
def _continued(spec: ProblemSpec, n: int, tol: float):
    # the continuation path does not depend on the sign pattern, so repeated
    # multistart calls on the same instance share one result
    return continuation_solve(spec, n, tol=tol)


def find_spectral_triple(
    spec: ProblemSpec, n: int, z0: SignPattern | None = None, config: SearchConfig | None = None
) -> SpectralTriple:
    """A spectral triple whose g has exactly ``n`` interior zeros.

    For n = 0 the fixed-point scheme is run from ``f_0(., z0)``. For n > 0 the
    n-node profile derived from ``z0`` is solved by Newton's method, falling
    back to continuation from an unweighted problem when that start fails.
    A result is accepted only with the right nodal count and a relative
    residual below ``RESIDUAL_BOUND``.

    Raises:
        NodalCountMissed: carrying the nodal count actually reached.
    """
    if n < 0:
        raise ValidationError("n must be >= 0")
    config = config or SearchConfig(n=n)
    z0 = z0 or SignPattern.alternating(n)
    if z0.n != n:
        raise ValidationError(f"sign pattern has {z0.n + 1} entries, need {n + 1}")
    if n == 0:
        try:
            triple, _ = run_iteration(spec, initial_sign_function(spec, z0), tol=config.inner_tol, res_tol=1e-9)
        except NotConverged as exc:
            raise NodalCountMissed(f"fixed-point run failed: {exc}", exc.triple.nodal_count if exc.triple else None) from exc
        if triple.nodal_count == 0:
            return triple
        raise NodalCountMissed(f"fixed-point limit has nodal count {triple.nodal_count}", triple.nodal_count)
    triple = None
    for route in ("seed", "continuation"):
        if route == "seed":
            f, lam, ok = newton_polish(spec, nodal_seed(spec, n, z0), tol=config.outer_tol)
        else:
            f, lam, ok = _continued(spec, n, config.outer_tol)
        triple = make_triple(spec, f, lam)
        log.debug("%s start %s: ok=%s count=%d residual=%.2e", route, z0.z, ok, triple.nodal_count, triple.residual)
        if ok and triple.nodal_count == n and triple.residual < RESIDUAL_BOUND:
            return triple
    raise NodalCountMissed(
        f"no solution with nodal count {n} from start {z0.z} "
        f"(reached count {triple.nodal_count}, residual {triple.residual:.2e})",
        triple.nodal_count,
    )


def sign_patterns(n: int, starts: int, rng_seed: int) -> list[SignPattern]:
    """Deterministic alternating pattern followed by seeded random perturbations."""
    out = [SignPattern.alternating(n)]
    rng = np.random.default_rng(rng_seed)
    signs = np.array([(-1) ** i for i in range(n + 1)], dtype=float)
    for _ in range(starts - 1):
        if n == 0:
            out.append(SignPattern((1.0,)))
            continue
        mags = rng.dirichlet(np.full(n + 1, 8.0))
        out.append(SignPattern.normalized(signs * mags))
    return out


def lambda_extremes(spec: ProblemSpec, config: SearchConfig) -> SpectrumResult:
    """Multistart estimate of max or min of sp_n.

    Raises:
        Empty: when no start reached nodal count n.
    """
    n = config.n
    found: list[tuple[float, tuple[float, ...], SpectralTriple]] = []
    used = 0
    for z in sign_patterns(n, config.starts, config.rng_seed):
        used += 1
        try:
            t = find_spectral_triple(spec, n, z, config)
        except NodalCountMissed:
            continue
        found.append((t.lam, z.z, t))
    if not found:
        raise Empty(f"no start reached nodal count {n}")
    # order-independent reduction on (lambda, z)
    key = (lambda e: (e[0], e[1])) if config.mode == "min" else (lambda e: (-e[0], e[1]))
    best = min(found, key=key)
    return SpectrumResult(
        n=n,
        mode=config.mode,
        lambda_extreme=best[0],
        best_triple=best[2],
        all_found=sorted(((lam, z) for lam, z, _ in found)),
        starts_used=used,
        starts_converged=len(found),
    )


def sign_change_comparison(
    spec: ProblemSpec, t1: SpectralTriple, t2: SpectralTriple, eps: float, policy=DEFAULT_POLICY
) -> tuple[int, int]:
    """Sign-change counts on both sides of the comparison for two spectral triples.

    ``lhs = P(T f1 - eps T f2)``,
    ``rhs = P(T f1 - eps^((p-1)/(q-1)) (lam2/lam1)^(1/(q-1)) T f2)``.
    """
    p, q = spec.p, spec.q
    g1 = T_values(spec, np.asarray(t1.f.values))
    g2 = T_values(spec, np.asarray(t2.f.values))
    c = eps ** ((p - 1.0) / (q - 1.0)) * (t2.lam / t1.lam) ** (1.0 / (q - 1.0))
    return count_sign_changes(g1 - eps * g2, policy), count_sign_changes(g1 - c * g2, policy)


def operator_norm_estimate(spec: ProblemSpec, config: SearchConfig | None = None) -> float:
    """``sup ||T f||_q`` over the unit ball of L_p, i.e. ``max sp_0 ** (-1/q)``."""
    config = config or SearchConfig(n=0, mode="max", starts=1)
    res = lambda_extremes(spec, SearchConfig(0, "max", config.starts, config.rng_seed, config.inner_tol))
    return res.lambda_extreme ** (-1.0 / spec.q)
