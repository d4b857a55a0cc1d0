"""The asymptotic constant c_pq, the weight integral and limit tables for n * lam_n^(-1/q)."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

from scipy.integrate import quad

from .errors import InsufficientData, ValidationError
from .function_space import check_exponent, conjugate
from .operator import ProblemSpec
from .weights import evaluate

MONOTONE_NOISE = 1e-3


def log_beta(a: float, b: float) -> float:
    if a <= 0 or b <= 0:
        raise ValidationError("Beta arguments must be positive")
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def beta(a: float, b: float) -> float:
    return math.exp(log_beta(a, b))


def pi_p(p: float) -> float:
    """Half-period of the generalized sine: ``2 pi / (p sin(pi / p))``."""
    p = check_exponent(p)
    return 2.0 * math.pi / (p * math.sin(math.pi / p))


def constant_cpq(p: float, q: float) -> float:
    """``(p')^(1/q) q^(1/p') (p' + q)^(1/p - 1/q) / (2 B(1/q, 1/p'))``."""
    p, q = check_exponent(p, "p"), check_exponent(q, "q")
    pc = conjugate(p)
    log_c = (
        math.log(pc) / q
        + math.log(q) / pc
        + (1.0 / p - 1.0 / q) * math.log(pc + q)
        - math.log(2.0)
        - log_beta(1.0 / q, 1.0 / pc)
    )
    return math.exp(log_c)


def _integral(spec: ProblemSpec, power: float) -> float:
    u, v = spec.weights.u, spec.weights.v

    def integrand(x):
        return float((evaluate(u, x) * evaluate(v, x)) ** power)

    val, _ = quad(integrand, spec.interval.a, spec.interval.b, limit=200, epsabs=0.0, epsrel=1e-13)
    return val


def weight_integral(spec: ProblemSpec) -> float:
    """``(int_I (u v)^r)^(1/r)`` with ``r = 1/p' + 1/q``."""
    r = spec.r
    return _integral(spec, r) ** (1.0 / r)


def weight_integral_alt(spec: ProblemSpec) -> float:
    """``(int_I (u v)^(1/r))^r``: the other way the weight factor is sometimes written.

    Agrees with :func:`weight_integral` whenever r = 1 or ``u v`` is constant.
    """
    r = spec.r
    return _integral(spec, 1.0 / r) ** r


def richardson(n1: int, s1: float, n2: int, s2: float) -> float:
    """Limit of ``s_n = L + c/n`` through two points."""
    if n1 == n2:
        raise ValidationError("need two distinct n")
    return (n2 * s2 - n1 * s1) / (n2 - n1)


@dataclass
class AsymptoticsReport:
    rows: list[tuple[int, float, float]]
    c_pq: float
    weight_integral: float
    predicted_limit: float
    extrapolated_limit: float
    relative_gap: float
    weight_integral_alt: float | None = None
    monotone: bool = True
    trend: str = "increasing"
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "rows": [{"n": n, "lambda": lam, "n_lambda_pow": s} for n, lam, s in self.rows],
            "c_pq": self.c_pq,
            "weight_integral": self.weight_integral,
            "weight_integral_alt": self.weight_integral_alt,
            "predicted_limit": self.predicted_limit,
            "extrapolated_limit": self.extrapolated_limit,
            "relative_gap": self.relative_gap,
            "monotone": self.monotone,
            "trend": self.trend,
        }
        out.update(self.extra)
        return out

    def to_json(self, **extra) -> str:
        d = self.to_dict()
        d.update(extra)
        return json.dumps(d, indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "lambda", "n_lambda_pow", "predicted_limit", "extrapolated_limit"])
        for n, lam, s in self.rows:
            w.writerow([n, fmt(lam), fmt(s), fmt(self.predicted_limit), fmt(self.extrapolated_limit)])
        return buf.getvalue()


def fmt(x: float) -> str:
    """17 significant digits, '.' decimal point, no grouping."""
    return format(float(x), ".17g")


def _trend(values: list[float], noise: float) -> tuple[bool, str]:
    d = [b - a for a, b in zip(values, values[1:])]
    if all(t >= -noise for t in d):
        return True, "increasing"
    if all(t <= noise for t in d):
        return True, "decreasing"
    return False, "mixed"


def asymptote_report(spec: ProblemSpec, lambdas, noise: float = MONOTONE_NOISE) -> AsymptoticsReport:
    """Table of ``n lam_n^(-1/q)`` with a two-point extrapolated limit.

    The limit is fitted as ``L + c/n`` through the two largest n.

    Raises:
        InsufficientData: with fewer than 4 rows.
    """
    pairs = sorted((int(n), float(lam)) for n, lam in lambdas)
    if len(pairs) < 4:
        raise InsufficientData("need at least 4 (n, lambda) rows")
    if len({n for n, _ in pairs}) != len(pairs):
        raise ValidationError("duplicate n in the input")
    if any(lam <= 0 for _, lam in pairs):
        raise ValidationError("spectral numbers must be positive")
    rows = [(n, lam, n * lam ** (-1.0 / spec.q)) for n, lam in pairs]
    (n1, _, s1), (n2, _, s2) = rows[-2], rows[-1]
    limit = richardson(n1, s1, n2, s2)
    c = constant_cpq(spec.p, spec.q)
    wi = weight_integral(spec)
    predicted = c * wi
    monotone, trend = _trend([s for n, _, s in rows if n > 0], noise)
    return AsymptoticsReport(
        rows=rows,
        c_pq=c,
        weight_integral=wi,
        predicted_limit=predicted,
        extrapolated_limit=limit,
        relative_gap=abs(limit - predicted) / predicted,
        weight_integral_alt=weight_integral_alt(spec),
        monotone=monotone,
        trend=trend,
    )
