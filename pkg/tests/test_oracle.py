import math

import numpy as np
import pytest

from hardy_eigen.asymptotics import pi_p
from hardy_eigen.errors import BracketFailed, NotApplicable, ResourceLimit, ValidationError
from hardy_eigen.oracle import ShootingConfig, classical_eigen_p2, shoot_pq_laplacian, svd_eigen_p2
from hardy_eigen.operator import ProblemSpec
from hardy_eigen.search import find_spectral_triple


class TestClassical:
    def test_ground(self):
        assert classical_eigen_p2(0) == pytest.approx(2.467401, abs=1e-6)

    def test_n3(self):
        assert classical_eigen_p2(3) == pytest.approx(120.9026, abs=1e-4)

    def test_interval_scaling(self):
        assert classical_eigen_p2(0, (0.0, 2.0)) == pytest.approx(math.pi**2 / 16, rel=1e-15)


class TestShooting:
    @pytest.mark.parametrize("n", [0, 4, 10])
    def test_matches_classical(self, n):
        assert shoot_pq_laplacian(2, 2, n) == pytest.approx(classical_eigen_p2(n), rel=1e-8)

    def test_generalized_sine(self):
        # ground state of the p = q = 3 problem: 2 (pi_3 / 2)^3
        closed = 2 * (pi_p(3) / 2) ** 3
        assert closed == pytest.approx(3.5361, abs=1e-4)
        assert shoot_pq_laplacian(3, 3, 0) == pytest.approx(closed, rel=1e-9)

    def test_slope_invariance_for_p_equals_q(self):
        a = shoot_pq_laplacian(3, 3, 1)
        b = shoot_pq_laplacian(3, 3, 1, y0=5.0)
        assert a == pytest.approx(b, rel=1e-9)

    def test_frozen_p_neq_q(self):
        assert shoot_pq_laplacian(3, 2, 2) == pytest.approx(67.21420683999136, rel=1e-9)
        assert shoot_pq_laplacian(2, 3, 2) == pytest.approx(400.3963946729752, rel=1e-9)

    def test_bracket_failure(self):
        with pytest.raises(BracketFailed):
            shoot_pq_laplacian(2, 2, 100_000, config=ShootingConfig(ode_steps=1000, batch=4))

    @pytest.mark.parametrize(
        "kw", [{"lambda_bracket": (2.0, 1.0)}, {"ode_steps": 10}, {"bracket_tol": 0.0}, {"batch": 2}]
    )
    def test_config_validation(self, kw):
        with pytest.raises(ValidationError):
            ShootingConfig(**kw)

    @pytest.mark.parametrize("p", [1.5, 3.0])
    def test_agrees_with_nonlinear_engine(self, p):
        s = ProblemSpec.build(p, p, level=12)
        for n in (0, 2, 5):
            assert find_spectral_triple(s, n).lam == pytest.approx(shoot_pq_laplacian(p, p, n), rel=1e-4)

    def test_engine_agreement_up_to_n10(self):
        # the grid error grows like (n h)^2; level 13 keeps n = 10 inside 1e-5
        s = ProblemSpec.build(3, 3, level=13)
        for n in (1, 10):
            assert find_spectral_triple(s, n).lam == pytest.approx(shoot_pq_laplacian(3, 3, n), rel=1e-5)


class TestSVD:
    def test_volterra_values(self):
        s = svd_eigen_p2(ProblemSpec.build(2, 2, level=11), 4)
        assert s[0] == pytest.approx(2 / math.pi, rel=1e-6)
        assert s[3] == pytest.approx(1 / (3.5 * math.pi), rel=1e-5)

    def test_decreasing_positive(self):
        s = svd_eigen_p2(ProblemSpec.build(2, 2, u="1+x", v="exp(x)", level=8), 30)
        assert all(a > b > 0 for a, b in zip(s, s[1:]))

    @pytest.mark.parametrize("u,v", [("1", "1"), ("1+x", "1"), ("exp(x)", "1")])
    def test_engine_agrees(self, u, v):
        s = ProblemSpec.build(2, 2, u=u, v=v, level=10)
        sv = svd_eigen_p2(s, 11)
        for n in range(11):
            assert find_spectral_triple(s, n).lam == pytest.approx(sv[n] ** -2, rel=1e-5)

    def test_not_applicable(self):
        with pytest.raises(NotApplicable):
            svd_eigen_p2(ProblemSpec.build(3, 2, level=6), 2)

    def test_resource_limit(self):
        with pytest.raises(ResourceLimit):
            svd_eigen_p2(ProblemSpec.build(2, 2, level=13), 2)
