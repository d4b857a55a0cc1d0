import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hardy_eigen.asymptotics import (
    asymptote_report,
    beta,
    constant_cpq,
    pi_p,
    richardson,
    weight_integral,
    weight_integral_alt,
)
from hardy_eigen.errors import InsufficientData, ValidationError
from hardy_eigen.operator import ProblemSpec


def unit(p=2, q=2, **kw):
    return ProblemSpec.build(p, q, level=6, **kw)


class TestConstant:
    def test_p2(self):
        assert constant_cpq(2, 2) == pytest.approx(1 / math.pi, rel=0, abs=1e-15)

    def test_p3(self):
        assert constant_cpq(3, 3) == pytest.approx(0.328193, abs=5e-7)

    def test_q_below_p(self):
        assert constant_cpq(3, 2) == pytest.approx(0.3049365409635917, rel=1e-14)

    def test_p_below_q(self):
        assert constant_cpq(2, 3) == pytest.approx(0.33919019474354783, rel=1e-14)

    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 5.0])
    def test_diagonal_identity(self, p):
        # with B(1/p, 1/p') = pi / sin(pi/p) the constant reduces to (p-1)^(-1/p) / pi_p
        assert abs(constant_cpq(p, p) - (p - 1) ** (-1 / p) / pi_p(p)) <= 1e-10

    def test_beta_half(self):
        assert beta(0.5, 0.5) == pytest.approx(math.pi, rel=1e-15)

    @given(st.floats(0.05, 15), st.floats(0.05, 15))
    def test_beta_symmetric_and_matches_gamma(self, a, b):
        assert beta(a, b) == pytest.approx(beta(b, a), rel=1e-14)
        assert beta(a, b) == pytest.approx(math.gamma(a) * math.gamma(b) / math.gamma(a + b), rel=1e-11)

    def test_pi_2(self):
        assert pi_p(2) == pytest.approx(math.pi, rel=1e-15)

    def test_rejects_bad_exponent(self):
        with pytest.raises(ValidationError):
            constant_cpq(1.0, 2.0)


class TestWeightIntegral:
    @pytest.mark.parametrize("p,q", [(2, 2), (3, 2), (1.5, 4)])
    def test_unit(self, p, q):
        assert weight_integral(unit(p, q)) == pytest.approx(1.0, rel=1e-13)

    def test_linear(self):
        assert weight_integral(unit(u="1+x")) == pytest.approx(1.5, rel=1e-13)

    @pytest.mark.parametrize("p,q", [(2, 2), (3, 2), (1.5, 4)])
    def test_long_interval(self, p, q):
        s = ProblemSpec.build(p, q, interval=(0.0, 2.0), level=6)
        assert weight_integral(s) == pytest.approx(2 ** (1 / s.r), rel=1e-13)

    @given(st.floats(0.1, 10), st.floats(1.2, 4), st.floats(1.2, 4))
    def test_homogeneous(self, alpha, p, q):
        a = weight_integral(unit(p, q, u="1+x", v="exp(-x)"))
        b = weight_integral(unit(p, q, u=f"{alpha!r}*(1+x)", v="exp(-x)"))
        assert b == pytest.approx(alpha * a, rel=1e-11)

    def test_variants_agree_when_r_is_one(self):
        s = unit(u="1+x", v="exp(x)")
        assert weight_integral(s) == pytest.approx(weight_integral_alt(s), rel=1e-13)

    def test_variants_differ_otherwise(self):
        s = unit(3, 2, u="1+x", v="exp(x)")
        assert abs(weight_integral(s) - weight_integral_alt(s)) > 1e-3


class TestReport:
    def classical(self, nmax=20):
        return [(n, ((n + 0.5) * math.pi) ** 2) for n in range(nmax + 1)]

    def test_classical(self):
        rep = asymptote_report(unit(), self.classical())
        assert rep.extrapolated_limit == pytest.approx(1 / math.pi, rel=1e-3)
        assert rep.relative_gap <= 1e-3
        assert rep.monotone and rep.trend == "increasing"

    def test_classical_sequence_bounded(self):
        rows = asymptote_report(unit(), self.classical()).rows
        s = [r[2] for r in rows]
        assert all(b > a for a, b in zip(s, s[1:])) and max(s) < 1 / math.pi

    def test_synthetic_constant(self):
        rep = asymptote_report(unit(), [(n, float(n) ** 2) for n in range(1, 8)])
        assert rep.extrapolated_limit == pytest.approx(1.0, rel=1e-14)
        assert rep.relative_gap == pytest.approx(abs(1 - 1 / math.pi) / (1 / math.pi), rel=1e-12)

    def test_sorted(self):
        data = self.classical(6)[::-1]
        assert [r[0] for r in asymptote_report(unit(), data).rows] == list(range(7))

    def test_insufficient(self):
        with pytest.raises(InsufficientData):
            asymptote_report(unit(), self.classical(2))

    def test_duplicates(self):
        with pytest.raises(ValidationError):
            asymptote_report(unit(), self.classical(4) + [(4, 1.0)])

    def test_richardson_exact(self):
        assert richardson(10, 1 - 0.5 / 10, 20, 1 - 0.5 / 20) == pytest.approx(1.0, rel=1e-15)

    def test_csv_and_json(self):
        rep = asymptote_report(unit(), self.classical(5))
        lines = rep.to_csv().splitlines()
        assert lines[0] == "n,lambda,n_lambda_pow,predicted_limit,extrapolated_limit" and len(lines) == 7
        assert lines[1].split(",")[1] == format(math.pi**2 / 4, ".17g")
        assert '"c_pq"' in rep.to_json(tag="x") and '"tag": "x"' in rep.to_json(tag="x")
