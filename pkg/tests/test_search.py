import math

import numpy as np
import pytest

from hardy_eigen import search
from hardy_eigen.errors import Empty, NodalCountMissed, ValidationError
from hardy_eigen.function_space import count_sign_changes
from hardy_eigen.iteration import SignPattern, residual, weighted_norm
from hardy_eigen.operator import ProblemSpec, T_values
from hardy_eigen.oracle import svd_eigen_p2
from hardy_eigen.search import (
    SearchConfig,
    default_mode,
    find_spectral_triple,
    lambda_extremes,
    merge_distinct,
    operator_norm_estimate,
    sign_change_comparison,
    sign_patterns,
)

FROZEN = {
    (2.0, 3.0, "1", "1"): [3.2031731176695653, 86.4860976003043, 400.40252062213307, 1098.7206541041498],
    (3.0, 2.0, "1+x", "exp(x)"): [0.3018999963824787, 3.304429056072056, 9.311689689145968, 18.320806357623407],
    (1.5, 1.5, "1", "1"): [1.8804514731042725, 9.771139727372171, 21.024262504681825, 34.827031381454596],
    (2.5, 1.5, "1", "1"): [2.203947867369846, 11.45207500275921, 24.641054463910837, 40.81824444018688],
}


class TestFindSpectralTriple:
    def test_classical_n3(self, unit_p2_l12):
        t = find_spectral_triple(unit_p2_l12, 3, SignPattern.alternating(3))
        assert t.nodal_count == 3
        assert t.lam == pytest.approx((3.5 * math.pi) ** 2, rel=1e-3)

    def test_positive_start_gives_ground_state(self, unit_p2_l10):
        t = find_spectral_triple(unit_p2_l10, 0, SignPattern((1.0,)))
        assert t.nodal_count == 0

    def test_weighted_linear_oracle(self):
        s = ProblemSpec.build(2, 2, u="1+x", level=10)
        t = find_spectral_triple(s, 1)
        assert t.lam == pytest.approx(svd_eigen_p2(s, 2)[1] ** -2, rel=1e-5)

    @pytest.mark.parametrize("key", sorted(FROZEN))
    def test_frozen_values(self, key):
        p, q, u, v = key
        s = ProblemSpec.build(p, q, u=u, v=v, level=10)
        for n, expected in enumerate(FROZEN[key]):
            t = find_spectral_triple(s, n)
            assert t.nodal_count == n
            assert t.lam == pytest.approx(expected, rel=1e-8)

    def test_returned_triples_satisfy_identity(self):
        s = ProblemSpec.build(3, 2, u="1+x", level=10)
        for n in range(4):
            t = find_spectral_triple(s, n)
            gq = weighted_norm(t.g.values, s.grid.weights, s.q)
            assert abs(t.lam ** (-1 / s.q) - gq) <= 1e-6 * gq
            assert residual(s, t) < search.RESIDUAL_BOUND

    def test_pattern_length_checked(self, unit_p2_l10):
        with pytest.raises(ValidationError):
            find_spectral_triple(unit_p2_l10, 2, SignPattern.alternating(1))

    def test_nodal_count_missed(self, unit_p2_l10, monkeypatch):
        monkeypatch.setattr(search, "newton_polish", lambda spec, f0, **kw: (f0 * 0 + 1, None, False))
        monkeypatch.setattr(search, "_continued", lambda spec, n, tol: (np.ones(spec.grid.size), None, False))
        with pytest.raises(NodalCountMissed) as info:
            find_spectral_triple(unit_p2_l10, 2)
        assert info.value.achieved == 0


class TestLambdaExtremes:
    def test_p_equals_q_single_value(self):
        s = ProblemSpec.build(2, 2, u="1+x", level=10)
        res = lambda_extremes(s, SearchConfig(n=2, starts=8))
        assert len(res.distinct()) == 1 and res.starts_converged == 8

    def test_modes_agree_for_p_equals_q(self):
        s = ProblemSpec.build(3, 3, level=10)
        hi = lambda_extremes(s, SearchConfig(n=2, mode="max", starts=6)).lambda_extreme
        lo = lambda_extremes(s, SearchConfig(n=2, mode="min", starts=6)).lambda_extreme
        assert hi == pytest.approx(lo, rel=1e-8)

    def test_more_starts_never_lower_max(self):
        s = ProblemSpec.build(3, 2, level=10)
        single = find_spectral_triple(s, 2).lam
        many = [lambda_extremes(s, SearchConfig(n=2, mode="max", starts=k)).lambda_extreme for k in (1, 8, 16)]
        assert many[-1] >= single
        assert all(b >= a for a, b in zip(many, many[1:]))

    def test_deterministic(self):
        s = ProblemSpec.build(2, 3, level=9)
        cfg = SearchConfig(n=3, mode="min", starts=5, rng_seed=11)
        a, b = lambda_extremes(s, cfg), lambda_extremes(s, cfg)
        assert a.lambda_extreme == b.lambda_extreme and a.all_found == b.all_found

    def test_empty(self, unit_p2_l10, monkeypatch):
        def fail(*args, **kwargs):
            raise NodalCountMissed("forced", 0)

        monkeypatch.setattr(search, "find_spectral_triple", fail)
        with pytest.raises(Empty):
            lambda_extremes(unit_p2_l10, SearchConfig(n=1, starts=2))


class TestHelpers:
    def test_default_mode(self):
        assert default_mode(3, 2) == "max" and default_mode(2, 3) == "min" and default_mode(2, 2) == "max"

    def test_merge_distinct(self):
        assert merge_distinct([1.0, 1.0 + 1e-9, 2.0]) == [1.0, 2.0]

    def test_sign_patterns(self):
        pats = sign_patterns(3, 5, 0)
        assert pats[0] == SignPattern.alternating(3)
        assert len(pats) == 5 and all(p.n == 3 for p in pats)
        assert sign_patterns(3, 5, 0) == pats

    @pytest.mark.parametrize("kw", [{"n": -1}, {"mode": "mid"}, {"starts": 0}, {"inner_tol": 0.0}])
    def test_config_validation(self, kw):
        with pytest.raises(ValidationError):
            SearchConfig(**kw)


class TestSignChangeComparison:
    def test_classical_pair(self, unit_p2_l12):
        t0, t1 = find_spectral_triple(unit_p2_l12, 0), find_spectral_triple(unit_p2_l12, 1)
        lhs, rhs = sign_change_comparison(unit_p2_l12, t0, t1, 0.5)
        assert lhs <= rhs

    def test_small_eps_limit(self):
        s = ProblemSpec.build(3, 2, level=10)
        t1, t2 = find_spectral_triple(s, 2), find_spectral_triple(s, 1)
        lhs, rhs = sign_change_comparison(s, t1, t2, 1e-9)
        base = count_sign_changes(T_values(s, np.asarray(t1.f.values)))
        assert lhs == rhs == base


class TestOperatorNorm:
    def test_volterra(self, unit_p2_l12):
        assert operator_norm_estimate(unit_p2_l12) == pytest.approx(2 / math.pi, rel=1e-6)

    def test_homogeneous_in_v(self):
        a = operator_norm_estimate(ProblemSpec.build(2.5, 1.8, v="1+x", level=10))
        b = operator_norm_estimate(ProblemSpec.build(2.5, 1.8, v="2*(1+x)", level=10))
        assert b == pytest.approx(2 * a, rel=1e-10)

    def test_weighted_matches_svd(self):
        s = ProblemSpec.build(2, 2, u="1+x", level=11)
        assert operator_norm_estimate(s) == pytest.approx(svd_eigen_p2(s, 1)[0], rel=1e-6)
