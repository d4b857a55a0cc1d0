"""Quick built-in consistency checks run by ``hardy_eigen selftest``.

The per-module checks replay the small closed-form examples of every module;
the remaining checks compare the solver with the independent reference
routes. The whole suite finishes in well under a minute on a laptop; the
pytest suite holds the thorough versions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import asymptotics, oracle, search, widths
from .errors import NotPositive, WeightSyntaxError
from .function_space import (
    Grid,
    Interval,
    SampledFunction,
    count_sign_changes,
    count_zeros,
    lp_norm,
    refine,
    signed_power,
)
from .iteration import (
    SignPattern,
    SpectralTriple,
    dual_defect,
    dual_transform,
    initial_sign_function,
    make_triple,
    residual,
    run_iteration,
    weighted_norm,
)
from .operator import (
    ProblemSpec,
    T_values,
    ZeroAnchors,
    apply_T,
    apply_T_plus,
    apply_T_star,
    build_rank_n_approximant,
)
from .weights import evaluate, evaluate_weight, parse_weight


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


def _run_examples(examples: dict[str, Callable[[], bool]]) -> tuple[bool, str]:
    failed = []
    for name, fn in examples.items():
        try:
            ok = bool(fn())
        except Exception as exc:  # report which example broke, keep going
            ok = False
            name = f"{name} ({type(exc).__name__})"
        if not ok:
            failed.append(name)
    if failed:
        return False, "failed: " + ", ".join(failed)
    return True, f"{len(examples)} examples"


def _raises(exc_type, fn) -> bool:
    try:
        fn()
    except exc_type:
        return True
    return False


def _unit(level: int = 10) -> Grid:
    return Grid(Interval(0.0, 1.0), level)


def check_function_space_examples() -> tuple[bool, str]:
    g = _unit()
    x = g.nodes
    sample = lambda values: SampledFunction(g, values)  # noqa: E731
    coarse = Grid(Interval(0.0, 1.0), 4)
    fine = refine(coarse)
    return _run_examples(
        {
            "signed power (-2, 3)": lambda: signed_power(-2.0, 3) == -4.0,
            "signed power p = 2": lambda: signed_power(0.37, 2) == 0.37,
            "signed power round trip": lambda: abs(signed_power(signed_power(0.7, 3), 1.5) - 0.7) <= 1e-15,
            "norm of 1": lambda: abs(lp_norm(sample(np.ones_like(x)), 2) - 1.0) <= 1e-14,
            "norm of 0": lambda: lp_norm(sample(0.0 * x), 2) == 0.0,
            "zeros of sin(3 pi x)": lambda: count_zeros(sample(np.sin(3 * np.pi * x))) == 2,
            "zeros of 1": lambda: count_zeros(sample(np.ones_like(x))) == 0,
            "touching zero counted": lambda: count_zeros(sample((x - 0.5) ** 2)) == 1,
            "sign changes of sin(3 pi x)": lambda: count_sign_changes(sample(np.sin(3 * np.pi * x))) == 2,
            "touching zero not a change": lambda: count_sign_changes(sample((x - 0.5) ** 2)) == 0,
            "two half blocks": lambda: count_sign_changes(sample(np.where(x < 0.5, 1.0, -1.0))) == 1,
            "refine 17 -> 33": lambda: coarse.size == 17 and fine.size == 33,
            "refine keeps ends": lambda: fine.nodes[0] == 0.0 and fine.nodes[-1] == 1.0,
            "weights sum": lambda: abs(fine.weights.sum() - 1.0) <= 1e-15,
        }
    )


def check_weight_examples() -> tuple[bool, str]:
    def offset_two() -> bool:
        try:
            parse_weight("1+*x")
        except WeightSyntaxError as exc:
            return exc.offset == 2
        return False

    g = _unit(4)
    return _run_examples(
        {
            "1+x at 0.5": lambda: float(evaluate(parse_weight("1+x"), 0.5)) == 1.5,
            "2*exp(-x) at 0": lambda: float(evaluate(parse_weight("2*exp(-x)"), 0.0)) == 2.0,
            "syntax error offset": offset_two,
            "x samples": lambda: np.array_equal(evaluate_weight(parse_weight("x"), g).values, g.nodes),
            "x-2 not positive": lambda: _raises(NotPositive, lambda: ProblemSpec.build(2, 2, u="x-2", level=6)),
            "sqrt(x) at 0.25": lambda: float(evaluate(parse_weight("sqrt(x)"), 0.25)) == 0.5,
        }
    )


def check_operator_examples() -> tuple[bool, str]:
    s = ProblemSpec.build(2, 2, level=10)
    x = s.grid.nodes
    one = s.grid.sample(np.ones_like)
    # 2t vanishes at 0, so the quadratic example is run on [1, 2], where g = x^2 - 1
    s2 = ProblemSpec.build(2, 2, u="2*x", interval=(1.0, 2.0), level=10)
    x2 = s2.grid.nodes

    def half_split() -> bool:
        g = apply_T_plus(s, ZeroAnchors((0.0, 0.5)), one).values
        left, right = x < 0.5, (x > 0.5) & (x < 1.0)
        return np.allclose(g[left], x[left], atol=1e-14) and np.allclose(g[right], x[right] - 0.5, atol=1e-14)

    return _run_examples(
        {
            "T 1 = x": lambda: np.allclose(apply_T(s, one).values, x, atol=1e-14),
            "T 1 = x^2 - 1 for u = 2t": lambda: np.allclose(apply_T(s2, s2.grid.sample(np.ones_like)).values, x2**2 - 1, atol=1e-12),
            # the end cells of the discrete adjoint carry an O(h) offset
            "T* 1 = 1 - x": lambda: np.allclose(apply_T_star(s, one).values, 1 - x, atol=s.grid.h),
            "T* 0 = 0": lambda: not np.any(apply_T_star(s, s.grid.sample(np.zeros_like)).values),
            "no interior anchor": lambda: np.allclose(
                apply_T_plus(s, ZeroAnchors((0.0,)), one).values, apply_T(s, one).values, atol=1e-15
            ),
            "anchor at 1/2": half_split,
            "rank 0 approximant": lambda: not np.any(build_rank_n_approximant(s, ZeroAnchors((0.0,))).apply(one).values),
        }
    )


def check_iteration_examples() -> tuple[bool, str]:
    s = ProblemSpec.build(2, 2, level=10)
    x = s.grid.nodes
    ones = s.grid.sample(np.ones_like)

    def pattern(z, expected) -> bool:
        f = initial_sign_function(s, SignPattern.normalized(z)).values
        inner = np.all(np.abs((x[:, None] - np.arange(1, len(z)) / len(z))) > 1e-9, axis=1)
        return np.array_equal(f[inner], expected[inner])

    triple, trace = run_iteration(s, ones, res_tol=1e-10)
    return _run_examples(
        {
            "halves": lambda: pattern([0.5, -0.5], np.where(x < 0.5, 1.0, -1.0)),
            "thirds": lambda: pattern([1, -1, 1], np.where((x < 1 / 3) | (x > 2 / 3), 1.0, -1.0)),
            "monotone trace": lambda: trace.monotone(1e-10),
            "converged residual": lambda: triple.residual <= 1e-9,
            "residual scale invariant": lambda: abs(
                residual(s, make_triple(s, 7.0 * np.asarray(triple.f.values), triple.lam)) - residual(s, triple)
            )
            <= 1e-6 * residual(s, triple) + 1e-14,
            "dual number for p = q = 2": lambda: dual_transform(s, triple)[1] == triple.lam,
        }
    )


def check_search_examples() -> tuple[bool, str]:
    s = ProblemSpec.build(2, 2, level=10)
    s32 = ProblemSpec.build(3, 2, level=9)

    def superset() -> bool:
        one = search.lambda_extremes(s32, search.SearchConfig(n=2, mode="max", starts=1)).lambda_extreme
        many = search.lambda_extremes(s32, search.SearchConfig(n=2, mode="max", starts=16)).lambda_extreme
        return many >= one

    def small_eps() -> bool:
        t1, t2 = search.find_spectral_triple(s32, 2), search.find_spectral_triple(s32, 1)
        lhs, rhs = search.sign_change_comparison(s32, t1, t2, 1e-9)
        return lhs == rhs == count_sign_changes(T_values(s32, np.asarray(t1.f.values)))

    def doubling_v() -> bool:
        a = search.operator_norm_estimate(ProblemSpec.build(2.5, 1.8, v="1+x", level=9))
        b = search.operator_norm_estimate(ProblemSpec.build(2.5, 1.8, v="2*(1+x)", level=9))
        return abs(b - 2 * a) <= 1e-9 * a

    return _run_examples(
        {
            "positive start": lambda: search.find_spectral_triple(s, 0, SignPattern((1.0,))).nodal_count == 0,
            "16 starts >= 1 start": superset,
            "eps -> 0": small_eps,
            "doubling v": doubling_v,
        }
    )


def check_asymptotics_examples() -> tuple[bool, str]:
    unit = ProblemSpec.build(2.5, 1.7, level=4)
    lin = ProblemSpec.build(2, 2, u="1+x", level=4)
    long = ProblemSpec.build(3, 2, interval=(0.0, 2.0), level=4)
    synthetic = [(n, float(n) ** 2) for n in range(1, 7)]

    def unsorted() -> bool:
        rows = asymptotics.asymptote_report(ProblemSpec.build(2, 2, level=4), synthetic[::-1]).rows
        return [n for n, _, _ in rows] == list(range(1, 7))

    return _run_examples(
        {
            "c22": lambda: abs(asymptotics.constant_cpq(2, 2) - 1 / math.pi) <= 1e-12,
            "unit weights": lambda: abs(asymptotics.weight_integral(unit) - 1.0) <= 1e-12,
            "u = 1 + x": lambda: abs(asymptotics.weight_integral(lin) - 1.5) <= 1e-12,
            "[0, 2]": lambda: abs(asymptotics.weight_integral(long) - 2.0 ** (1 / long.r)) <= 1e-12,
            "constant sequence": lambda: abs(
                asymptotics.asymptote_report(ProblemSpec.build(2, 2, level=4), synthetic).extrapolated_limit - 1.0
            )
            <= 1e-12,
            "unsorted rows": unsorted,
        }
    )


def check_widths_examples() -> tuple[bool, str]:
    s = ProblemSpec.build(2, 2, level=10)
    t0 = search.find_spectral_triple(s, 0)

    def monotone_k() -> bool:
        vals = [widths.kolmogorov_lower_bound(s, 1, k_iters=k, samples=8, refine=False) for k in (1, 2, 4)]
        return all(b >= a * (1 - 1e-12) for a, b in zip(vals, vals[1:]))

    def homogeneous() -> bool:
        c, d, a = np.array([[0.3, 1.2, 0.7], [1.1, 0.4, 2.0], [0.5, -1.5, 0.25]])

        def ratio(alpha):
            return np.dot(np.abs(alpha) ** 3, c) ** (1 / 3) / np.dot(np.abs(alpha) ** 2, d) ** 0.5

        return abs(ratio(7.5 * a) - ratio(a)) <= 1e-14 * ratio(a)

    def approx_vs_kolmogorov() -> bool:
        t = search.find_spectral_triple(s, 1)
        return widths.approximation_upper_bound(s, t) >= widths.kolmogorov_lower_bound(s, 1, k_iters=20, samples=8) * (1 - 1e-6)

    def regime(p, q, check) -> bool:
        sp = ProblemSpec.build(p, q, level=9)
        t = search.find_spectral_triple(sp, 2)
        return check(sp, t)

    return _run_examples(
        {
            "k monotone": monotone_k,
            "single block": lambda: abs(widths.bernstein_value(s, t0) - t0.lam ** -0.5) <= 1e-9 * t0.lam ** -0.5,
            "0-homogeneous": homogeneous,
            "n = 0 is the norm": lambda: abs(widths.approximation_upper_bound(s, t0) - search.operator_norm_estimate(s))
            <= 1e-9,
            "d_n <= a_n": approx_vs_kolmogorov,
            "p < q Bernstein bound": lambda: regime(2, 3, lambda sp, t: widths.bernstein_value(sp, t) >= t.lam ** (-1 / 3) * (1 - 1e-6)),
            "q < p approximation bound": lambda: regime(
                3, 2, lambda sp, t: widths.approximation_upper_bound(sp, t) <= t.lam ** -0.5 * (1 + 1e-6)
            ),
        }
    )


def check_oracle_examples() -> tuple[bool, str]:
    return _run_examples(
        {
            "[0, 2]": lambda: abs(oracle.classical_eigen_p2(0, (0.0, 2.0)) - math.pi**2 / 16) <= 1e-15,
            "slope invariance p = q": lambda: abs(
                oracle.shoot_pq_laplacian(3, 3, 1, y0=5.0) / oracle.shoot_pq_laplacian(3, 3, 1) - 1
            )
            <= 1e-8,
        }
    )


def check_constant_p2() -> tuple[bool, str]:
    err = abs(asymptotics.constant_cpq(2, 2) - 1 / math.pi)
    return err <= 1e-12, f"|c22 - 1/pi| = {err:.2e}"


def check_constant_pp() -> tuple[bool, str]:
    errs = [
        abs(asymptotics.constant_cpq(p, p) - (p - 1) ** (-1 / p) / asymptotics.pi_p(p)) for p in (1.5, 3.0, 5.0)
    ]
    return max(errs) <= 1e-10, f"max deviation {max(errs):.2e}"


def check_classical() -> tuple[bool, str]:
    spec = ProblemSpec.build(2, 2, level=11)
    errs = []
    for n in range(6):
        t = search.find_spectral_triple(spec, n)
        errs.append(_rel(t.lam, oracle.classical_eigen_p2(n)))
    return max(errs) <= 1e-4, f"max relative error n<=5: {max(errs):.2e}"


def check_svd_weighted() -> tuple[bool, str]:
    spec = ProblemSpec.build(2, 2, u="1+x", level=10)
    s = oracle.svd_eigen_p2(spec, 4)
    errs = [_rel(search.find_spectral_triple(spec, n).lam ** -0.5, s[n]) for n in range(4)]
    return max(errs) <= 1e-5, f"max relative gap to singular values: {max(errs):.2e}"


def check_shooting_p2() -> tuple[bool, str]:
    err = _rel(oracle.shoot_pq_laplacian(2, 2, 1), oracle.classical_eigen_p2(1))
    return err <= 1e-8, f"relative error {err:.2e}"


def check_monotone_trace() -> tuple[bool, str]:
    spec = ProblemSpec.build(3.0, 1.7, u="1+x", v="exp(-x)", level=10)
    f0 = initial_sign_function(spec, SignPattern.normalized([0.3, -0.2, 0.5]))
    triple, trace = run_iteration(spec, f0)
    identity = abs(triple.lam ** (-1 / spec.q) - weighted_norm(triple.g.values, spec.grid.weights, spec.q))
    ok = trace.monotone(1e-10) and identity <= 1e-6 * triple.lam ** (-1 / spec.q)
    return ok, f"{trace.iterations} steps, identity gap {identity:.2e}"


def check_dual() -> tuple[bool, str]:
    spec = ProblemSpec.build(2.5, 1.5, u="1+x", level=10)
    triple = search.find_spectral_triple(spec, 0)
    s, lam_star = dual_transform(spec, triple)
    d = dual_defect(spec, s, lam_star)
    return d <= 1e-5, f"dual defect {d:.2e}"


def check_not_positive() -> tuple[bool, str]:
    try:
        ProblemSpec.build(2, 2, u="x-2", level=6)
    except NotPositive:
        return True, "rejected"
    return False, "accepted a negative weight"


def check_widths_n0() -> tuple[bool, str]:
    spec = ProblemSpec.build(2, 2, level=10)
    rep = widths.widths_report(spec, 0, search.SearchConfig(n=0, starts=1))
    vals = [rep.kolmogorov_lb, rep.bernstein_val, rep.approx_ub]
    gap = max(_rel(v, 2 / math.pi) for v in vals)
    return gap <= 1e-4 and all(rep.orderings().values()), f"max gap to 2/pi {gap:.2e}"


def check_determinism() -> tuple[bool, str]:
    spec = ProblemSpec.build(3, 2, level=9)
    cfg = search.SearchConfig(n=2, mode="max", starts=4, rng_seed=7)
    a = search.lambda_extremes(spec, cfg)
    b = search.lambda_extremes(spec, cfg)
    return a.lambda_extreme == b.lambda_extreme and a.all_found == b.all_found, f"lambda {a.lambda_extreme!r}"


def check_adjoint() -> tuple[bool, str]:
    from .operator import T_star_values, T_values

    spec = ProblemSpec.build(2, 3, u="1+x", v="exp(x)", level=8)
    rng = np.random.default_rng(0)
    f, h = rng.standard_normal((2, spec.grid.size))
    w = spec.grid.weights
    lhs, rhs = np.dot(w, T_values(spec, f) * h), np.dot(w, f * T_star_values(spec, h))
    gap = abs(lhs - rhs) / max(abs(lhs), 1e-300)
    return gap <= 1e-12, f"<Tf, h> vs <f, T*h>: {gap:.2e}"


CHECKS: dict[str, Callable[[], tuple[bool, str]]] = {
    "function_space_examples": check_function_space_examples,
    "weight_examples": check_weight_examples,
    "operator_examples": check_operator_examples,
    "iteration_examples": check_iteration_examples,
    "search_examples": check_search_examples,
    "asymptotics_examples": check_asymptotics_examples,
    "widths_examples": check_widths_examples,
    "oracle_examples": check_oracle_examples,
    "constant_p2": check_constant_p2,
    "constant_pp": check_constant_pp,
    "adjoint": check_adjoint,
    "not_positive": check_not_positive,
    "classical_n_le_5": check_classical,
    "svd_weighted": check_svd_weighted,
    "shooting_p2": check_shooting_p2,
    "monotone_trace": check_monotone_trace,
    "dual_transform": check_dual,
    "widths_n0": check_widths_n0,
    "determinism": check_determinism,
}


def run_checks() -> list[CheckResult]:
    out = []
    for name, fn in CHECKS.items():
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed check, not a crashed suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, bool(ok), detail))
    return out
