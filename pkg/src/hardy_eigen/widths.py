"""Numerical estimates of the widths that bracket the spectral numbers.

* Kolmogorov lower bound: the iterates ``g_k(., z)`` of the fixed-point
  scheme form a continuous odd image of the l1 sphere in R^(n+1), so
  ``min_z ||g_k(., z)||_q`` bounds ``d_n`` from below (the minimum is
  estimated by sampling and local refinement).
* Bernstein value: the spectral pair is cut at the zeros of g into n + 1
  pieces with disjoint supports; the infimum of ``||T f|| / ||f||`` over
  their span has a closed form.
* Approximation upper bound: the norm of the anchored operator T+ built from
  the zeros of g, which differs from T by a rank-n operator.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import DegenerateBlock, NodalCountMissed, ValidationError
from .function_space import SampledFunction, sign_change_points
from .iteration import (
    SignPattern,
    SpectralTriple,
    initial_sign_function,
    iterate_once,
    run_iteration,
    weighted_norm,
)
from .function_space import signed_power
from .operator import AnchoredOperator, ProblemSpec, cumulative
from .search import SearchConfig, lambda_extremes

log = logging.getLogger(__name__)


# -- Kolmogorov ----------------------------------------------------------------------


def _g_norm_after(spec: ProblemSpec, z: SignPattern, k_iters: int) -> float:
    """``||g_k||_q`` after ``k_iters`` steps from the cell-averaged ``f_0(., z)``."""
    f = initial_sign_function(spec, z, cell_average=True)
    nf = weighted_norm(f.values, spec.grid.weights, spec.p)
    if nf == 0.0:
        return np.inf
    f = f * (1.0 / nf)
    g = None
    for _ in range(k_iters):
        g, f, _ = iterate_once(spec, f)
    return weighted_norm(g.values, spec.grid.weights, spec.q)


def _pattern(signs: np.ndarray, logits: np.ndarray) -> SignPattern:
    m = np.exp(logits - logits.max())
    return SignPattern.normalized(signs * m / m.sum())


@dataclass
class KolmogorovTrace:
    """Running minima ``m_k`` of the continuation in k and where it stopped."""

    minima: list[float]
    stop_k: int
    stop_reason: str


def _continuation(spec, signs, logits, k_iters, maxfev):
    """Minimize ``||g_k||_q`` for k = 1, 2, ..., warm-starting each k from the previous minimizer.

    In exact arithmetic the minima increase with k and settle geometrically.
    In floating point the component along the leading spectral direction is
    amplified at every step, so past some k the minimizer cannot be resolved
    and the computed minima jump up. The run stops at the first k whose
    increment exceeds the previous one (or is below 1e-12 relative) and
    keeps the last trusted value.
    """
    minima: list[float] = []
    t = logits[1:] - logits[0]
    prev_inc = np.inf
    reason = "k_iters"
    for k in range(1, k_iters + 1):
        obj = lambda s, k=k: _g_norm_after(spec, _pattern(signs, np.concatenate([[0.0], s])), k)
        res = minimize(
            obj, t, method="Nelder-Mead",
            options={"xatol": 1e-13, "fatol": 1e-15, "maxfev": maxfev, "initial_simplex": _simplex(t, 0.05 / k)},
        )
        val = float(min(res.fun, obj(t)))
        if minima:
            inc = val - minima[-1]
            if inc > prev_inc:
                reason = "precision"
                break
            prev_inc = max(inc, 0.0)
            if prev_inc <= 1e-12 * val:
                minima.append(val)
                reason = "settled"
                break
        minima.append(val)
        if res.fun <= obj(t):
            t = np.asarray(res.x)
    return minima, reason


def _simplex(t: np.ndarray, step: float) -> np.ndarray:
    return np.vstack([t] + [t + step * e for e in np.eye(len(t))])


def kolmogorov_lower_bound(
    spec: ProblemSpec,
    n: int,
    k_iters: int = 50,
    samples: int = 64,
    rng_seed: int = 0,
    refine: bool = True,
    trace: list | None = None,
) -> float:
    """Estimate of ``min_z ||g_k(., z)||_q`` over the l1 sphere of R^(n+1).

    Candidates are the alternating equal-block pattern and ``samples - 1``
    seeded draws (random signs, Dirichlet magnitudes). Without ``refine``
    the minimum over these candidates at ``k = k_iters`` is returned; it is
    nondecreasing in ``k_iters``. With ``refine`` the best candidates are
    carried through a continuation in k with Nelder-Mead over the block
    widths (signs held fixed), stopped early once floating point can no
    longer resolve the minimizer. Either way the value is an estimate: the
    global minimum over the sphere is not certified.

    Args:
        trace: if a list is given, a :class:`KolmogorovTrace` per refined
            candidate is appended to it.
    """
    if k_iters < 1:
        raise ValidationError("k_iters must be >= 1")
    if n < 0:
        raise ValidationError("n must be >= 0")
    if samples < 1:
        raise ValidationError("samples must be >= 1")
    if n == 0:
        # the sphere is {+1, -1}; both give the same norm
        return _g_norm_after(spec, SignPattern((1.0,)), k_iters)
    rng = np.random.default_rng(rng_seed)
    alt = np.array([(-1.0) ** i for i in range(n + 1)])
    cands: list[tuple[np.ndarray, np.ndarray]] = [(alt, np.zeros(n + 1))]
    for _ in range(samples - 1):
        signs = rng.choice([-1.0, 1.0], size=n + 1)
        logits = np.log(rng.dirichlet(np.full(n + 1, 2.0)) + 1e-12)
        cands.append((signs, logits))
    if not refine:
        return float(min(_g_norm_after(spec, _pattern(s, l), k_iters) for s, l in cands))
    scored = sorted((_g_norm_after(spec, _pattern(s, l), 1), i) for i, (s, l) in enumerate(cands))
    best = np.inf
    for _, i in scored[:2]:
        signs, logits = cands[i]
        minima, reason = _continuation(spec, signs, logits, k_iters, 200 * n)
        if trace is not None:
            trace.append(KolmogorovTrace(minima, len(minima), reason))
        best = min(best, minima[-1])
    return float(best)


# -- Bernstein -----------------------------------------------------------------------


def _cell_masses(spec: ProblemSpec, values: np.ndarray, cuts: np.ndarray) -> np.ndarray:
    """Trapezoid masses of ``values`` split at ``cuts`` (fractional cells)."""
    grid = spec.grid
    x = np.asarray(grid.nodes)
    h = grid.h
    w = np.asarray(grid.weights)
    lo = np.maximum(x - 0.5 * h, spec.interval.a)
    hi = np.minimum(x + 0.5 * h, spec.interval.b)
    edges = np.concatenate([[spec.interval.a], np.asarray(cuts, dtype=float), [spec.interval.b]])
    out = np.empty(len(edges) - 1)
    for i in range(len(edges) - 1):
        share = np.clip(np.minimum(hi, edges[i + 1]) - np.maximum(lo, edges[i]), 0.0, None) / (hi - lo)
        out[i] = np.dot(w * share, values)
    return out


def _min_ratio(c: np.ndarray, d: np.ndarray, p: float, q: float) -> float:
    """``inf_alpha (sum |a_i|^q c_i)^(1/q) / (sum |a_i|^p d_i)^(1/p)``.

    With masses ``m_i = |a_i|^p d_i`` on the simplex the objective is
    ``(sum m_i^(q/p) k_i)^(1/q)``, ``k_i = c_i d_i^(-q/p)``: linear for p = q,
    concave for q < p (minimum at a vertex) and convex for q > p (interior
    minimum from the KKT conditions).
    """
    k = c * d ** (-q / p)
    if q <= p:
        return float(k.min() ** (1.0 / q))
    e = q / p
    # m_i proportional to k_i^(-1/(e-1)); in log space so e close to 1 cannot overflow
    log_m = -np.log(k) / (e - 1.0)
    m = np.exp(log_m - log_m.max())
    m /= m.sum()
    return float(np.dot(m**e, k) ** (1.0 / q))


def bernstein_value(spec: ProblemSpec, triple: SpectralTriple) -> float:
    """Infimum of ``||sum a_i g_i||_q / ||sum a_i f_i||_p`` over the pieces of the triple.

    Raises:
        DegenerateBlock: if a piece carries no mass.
    """
    g = np.asarray(triple.g.values)
    f = np.asarray(triple.f.values)
    cuts = _zeros_of_prefix(spec, f)
    c = _cell_masses(spec, np.abs(g) ** spec.q, cuts)
    d = _cell_masses(spec, np.abs(f) ** spec.p, cuts)
    if np.any(c <= 0) or np.any(d <= 0):
        raise DegenerateBlock("a block between zeros of g has zero mass")
    return _min_ratio(c, d, spec.p, spec.q)


# -- approximation numbers -------------------------------------------------------------


def _zeros_of_prefix(spec: ProblemSpec, f: np.ndarray) -> np.ndarray:
    """Interior zeros of ``int_a^x u f`` (the zeros of ``T f``)."""
    F = cumulative(spec.u * f, spec.grid.h)
    F[0] = 0.0
    return sign_change_points(SampledFunction(spec.grid, F))


def anchored_operator(spec: ProblemSpec, triple: SpectralTriple) -> AnchoredOperator:
    """T+ anchored at ``a`` and the zeros of g, with blocks cut at the zeros of f.

    The node at each cut is shared between its two blocks with the fraction
    that makes ``int_{I_i} v g_(q)`` vanish on every block, so the spectral
    function itself is reproduced by the T+ scheme.
    """
    f = np.asarray(triple.f.values)
    zeros = _zeros_of_prefix(spec, f)
    anchors = [spec.interval.a, *zeros.tolist()]
    if len(zeros) == 0:
        return AnchoredOperator.from_anchors(spec, anchors)
    g = np.asarray(triple.g.values)
    t = spec.grid.weights * spec.v * signed_power(g, spec.q)
    Z = np.cumsum(t[::-1])[::-1]
    x = np.asarray(spec.grid.nodes)
    ends, fractions = [], []
    for lo, hi in zip(anchors[:-1], anchors[1:]):
        idx = np.flatnonzero((x > lo) & (x < hi))
        idx = idx[idx < len(x) - 1]
        flips = [j for j in idx if Z[j] != 0 and Z[j] * Z[j + 1] <= 0]
        if not flips:
            raise NodalCountMissed("no zero of f between consecutive zeros of g")
        j = flips[len(flips) // 2]
        ends.append(float(x[j]))
        fractions.append(float(1.0 + Z[j + 1] / t[j]))
    return AnchoredOperator.from_anchors(spec, anchors, ends, fractions)


def approximation_upper_bound(
    spec: ProblemSpec, triple: SpectralTriple, tol: float = 1e-13, max_iter: int = 2000
) -> float:
    """``sup ||T+ f||_q`` over the unit ball of L_p, by the fixed-point scheme on T+.

    The scheme is monotone, so every start yields a lower estimate of the
    supremum. It is run from ``f = 1`` and from the triple's own ``f`` (a
    fixed point of the T+ scheme), and the larger value is returned. The
    second start matters: on the grid the shared boundary nodes couple the
    blocks slightly, which splits their equal norms into a close pair and
    slows the iteration from ``f = 1`` to a crawl.
    """
    op = anchored_operator(spec, triple)
    best = 0.0
    for start in (SampledFunction(spec.grid, np.ones(spec.grid.size)), triple.f):
        t, _ = run_iteration(spec, start, tol=tol, max_iter=max_iter, op=op, raise_on_failure=False)
        best = max(best, t.lam ** (-1.0 / spec.q))
    return best


# -- report ----------------------------------------------------------------------------


@dataclass
class WidthsReport:
    """The three width estimates next to the extreme spectral numbers with n zeros.

    ``lambda_hat_pow`` and ``lambda_check_pow`` are ``lam^(-1/q)`` for the
    largest and smallest spectral number found; ``union_hat_pow`` uses the
    largest spectral number over all nodal counts ``0..n``.
    """

    n: int
    p: float
    q: float
    kolmogorov_lb: float
    bernstein_val: float
    approx_ub: float
    lambda_hat_pow: float
    lambda_check_pow: float
    union_hat_pow: float

    def orderings(self, rel: float = 1e-6) -> dict[str, bool]:
        """The ordering relations that apply to this (p, q)."""
        out = {"kolmogorov_le_approx": self.kolmogorov_lb <= self.approx_ub * (1 + rel)}
        if self.p <= self.q:
            out["bernstein_ge_check"] = self.bernstein_val >= self.lambda_check_pow * (1 - rel)
        if self.q <= self.p:
            out["approx_le_hat"] = self.approx_ub <= self.lambda_hat_pow * (1 + rel)
            out["kolmogorov_le_union_hat"] = self.kolmogorov_lb <= self.union_hat_pow * (1 + rel)
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["orderings"] = self.orderings()
        return d

    def to_json(self, **extra) -> str:
        d = self.to_dict()
        d.update(extra)
        return json.dumps(d, indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        fields = [
            "n", "p", "q", "kolmogorov_lb", "bernstein_val", "approx_ub",
            "lambda_hat_pow", "lambda_check_pow", "union_hat_pow",
        ]
        w.writerow(fields)
        d = asdict(self)
        w.writerow([d["n"]] + [format(float(d[k]), ".17g") for k in fields[1:]])
        return buf.getvalue()


def widths_report(
    spec: ProblemSpec, n: int, config: SearchConfig | None = None, k_iters: int = 50, samples: int = 64
) -> WidthsReport:
    """Search for the extreme spectral numbers with n zeros and evaluate all three estimates."""
    config = config or SearchConfig(n=n)
    q = spec.q

    def search(m: int, mode: str):
        return lambda_extremes(
            spec,
            SearchConfig(m, mode, config.starts, config.rng_seed, config.inner_tol, config.outer_tol, config.max_outer),
        )

    hat = search(n, "max")
    check = search(n, "min") if spec.p != spec.q else hat
    union = max([hat.lambda_extreme] + [search(m, "max").lambda_extreme for m in range(n)])
    return WidthsReport(
        n=n,
        p=spec.p,
        q=spec.q,
        kolmogorov_lb=kolmogorov_lower_bound(spec, n, k_iters, samples, config.rng_seed),
        bernstein_val=bernstein_value(spec, check.best_triple),
        approx_ub=approximation_upper_bound(spec, hat.best_triple),
        lambda_hat_pow=hat.lambda_extreme ** (-1.0 / q),
        lambda_check_pow=check.lambda_extreme ** (-1.0 / q),
        union_hat_pow=union ** (-1.0 / q),
    )
