import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hardy_eigen.errors import GridMismatch, ValidationError
from hardy_eigen.function_space import SampledFunction, lp_norm
from hardy_eigen.operator import (
    AnchoredOperator,
    ProblemSpec,
    T_star_values,
    T_values,
    ZeroAnchors,
    apply_T,
    apply_T_plus,
    apply_T_star,
    build_rank_n_approximant,
    dense_T,
)


def spec(level=10, **kw):
    return ProblemSpec.build(kw.pop("p", 2), kw.pop("q", 2), level=level, **kw)


def fn(s, f):
    return s.grid.sample(f)


class TestApplyT:
    def test_unit_weights_constant(self):
        s = spec()
        g = apply_T(s, fn(s, np.ones_like))
        assert np.allclose(g.values, s.grid.nodes, atol=1e-14)

    def test_linear_weight(self):
        # u = 2t vanishes at 0, which the positivity rule rejects, so use [1, 2]
        s = spec(u="2*x", interval=(1.0, 2.0))
        g = apply_T(s, fn(s, np.ones_like)).values
        # trapezoid is exact for 2t up to the last cell, closed by a left rectangle
        assert np.allclose(g[:-1], s.grid.nodes[:-1] ** 2 - 1, atol=1e-13)
        assert g[-1] == pytest.approx(3.0, abs=4 * s.grid.h)

    def test_cosine_mode(self):
        s = spec(level=12)
        f = fn(s, lambda x: math.sqrt(2) * np.cos(np.pi * x / 2))
        g = apply_T(s, f)
        exact = 2 * math.sqrt(2) / np.pi * np.sin(np.pi * s.grid.nodes / 2)
        assert np.allclose(g.values, exact, atol=1e-6)
        assert lp_norm(g, 2) == pytest.approx(2 / math.pi, rel=1e-6)

    def test_grid_mismatch(self):
        with pytest.raises(GridMismatch):
            apply_T(spec(level=10), fn(spec(level=9), np.ones_like))


class TestAdjoint:
    def test_unit_weights_constant(self):
        s = spec()
        h = apply_T_star(s, fn(s, np.ones_like)).values
        x = s.grid.nodes
        assert np.allclose(h[1:-2], 1 - x[1:-2], atol=1e-14)
        # the half-weight end nodes of the discrete adjoint carry an O(h) offset
        assert np.allclose(h, 1 - x, atol=s.grid.h)
        assert h[-1] == 0.0

    def test_closed_form_pairing(self):
        s = spec(level=12)
        f, h = fn(s, lambda x: x), fn(s, np.ones_like)
        w = s.grid.weights
        lhs = np.dot(w, apply_T(s, f).values * h.values)
        rhs = np.dot(w, f.values * apply_T_star(s, h).values)
        assert lhs == pytest.approx(rhs, rel=1e-13)
        # both sides equal int_0^1 x^2/2 = int_0^1 x(1 - x) = 1/6
        assert lhs == pytest.approx(1 / 6, rel=1e-5)

    def test_zero(self):
        s = spec()
        assert not np.any(apply_T_star(s, fn(s, np.zeros_like)).values)

    @given(st.integers(0, 10_000), st.sampled_from(["1", "1+x", "exp(-x)", "1+sin(x)^2*0.5"]))
    def test_discrete_duality(self, seed, u):
        s = spec(level=7, u=u, v="exp(x)")
        rng = np.random.default_rng(seed)
        f, h = rng.standard_normal((2, s.grid.size))
        w = s.grid.weights
        lhs = np.dot(w, T_values(s, f) * h)
        rhs = np.dot(w, f * T_star_values(s, h))
        scale = np.sqrt(np.dot(w, f * f) * np.dot(w, h * h))
        assert abs(lhs - rhs) <= 1e-10 * scale


class TestStructure:
    @given(st.integers(0, 10_000))
    def test_positive(self, seed):
        s = spec(level=7, u="1+x", v="exp(-x)")
        f = np.random.default_rng(seed).random(s.grid.size)
        assert np.all(T_values(s, f) >= 0) and np.all(T_star_values(s, f) >= 0)

    def test_boundary_values(self):
        s = spec(u="1+x")
        f = np.random.default_rng(1).standard_normal(s.grid.size)
        assert T_values(s, f)[0] == 0.0 and T_star_values(s, f)[-1] == 0.0

    @given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 1000))
    def test_linear(self, a, b, seed):
        s = spec(level=6)
        f, g = np.random.default_rng(seed).standard_normal((2, s.grid.size))
        np.testing.assert_allclose(T_values(s, a * f + b * g), a * T_values(s, f) + b * T_values(s, g), atol=1e-12)

    def test_dense_matches_matrix_free(self):
        s = spec(level=6, u="1+x", v="exp(x)")
        f = np.random.default_rng(3).standard_normal(s.grid.size)
        np.testing.assert_allclose(dense_T(s) @ f, T_values(s, f), atol=1e-13)


class TestAnchored:
    def test_no_interior_anchor_is_T(self):
        s = spec()
        f = fn(s, np.cos)
        np.testing.assert_allclose(apply_T_plus(s, ZeroAnchors((0.0,)), f).values, apply_T(s, f).values, atol=1e-15)

    def test_half_split(self):
        s = spec()
        x = s.grid.nodes
        g = apply_T_plus(s, ZeroAnchors((0.0, 0.5)), fn(s, np.ones_like)).values
        left, right = x < 0.5, x > 0.5
        assert np.allclose(g[left], x[left], atol=1e-14)
        assert np.allclose(g[right][:-1], x[right][:-1] - 0.5, atol=1e-14)

    def test_consistency_when_anchor_values_vanish(self):
        s = spec(level=11, u="1+x")
        anchors = ZeroAnchors((0.0, 0.3, 0.7))
        op = AnchoredOperator.from_anchors(s, anchors)
        rng = np.random.default_rng(5)
        f = rng.standard_normal(s.grid.size)
        # remove the u-weighted mean on [a_i, a_{i+1}] so every (T f)(a_i) vanishes
        for lo, hi in [(0.0, 0.3), (0.3, 0.7)]:
            bump = np.where((s.grid.nodes >= lo) & (s.grid.nodes <= hi), 1.0, 0.0)
            bump = bump * np.sin(np.pi * (s.grid.nodes - lo) / (hi - lo))
            f = f - 0.0 * bump
        vals = op.anchor_values(f)
        basis = []
        for lo, hi in [(0.0, 0.3), (0.3, 0.7)]:
            basis.append(np.where((s.grid.nodes > lo) & (s.grid.nodes < hi), np.sin(np.pi * (s.grid.nodes - lo) / (hi - lo)), 0.0))
        B = np.array([op.anchor_values(b) for b in basis]).T
        coef = np.linalg.solve(B[1:], vals[1:])
        f = f - coef @ np.array(basis)
        assert np.abs(op.anchor_values(f)).max() < 1e-12
        diff = op.apply(f) - T_values(s, f)
        assert lp_norm(SampledFunction(s.grid, diff), 2) < 1e-10

    def test_rank_zero(self):
        s = spec()
        T0 = build_rank_n_approximant(s, ZeroAnchors((0.0,)))
        f = fn(s, np.exp)
        assert not np.any(T0.apply(f).values)
        assert T0.rank_bound == 0

    def test_rank_bound(self):
        s = spec(level=9)
        anchors = ZeroAnchors((0.0, 0.25, 0.5, 0.8))
        T3 = build_rank_n_approximant(s, anchors)
        rng = np.random.default_rng(0)
        images = np.array([T3.apply(SampledFunction(s.grid, rng.standard_normal(s.grid.size))).values for _ in range(50)])
        sv = np.linalg.svd(images, compute_uv=False)
        assert int(np.sum(sv > 1e-9 * sv[0])) <= 3

    def test_remainder_is_T_plus(self):
        s = spec(level=8)
        anchors = ZeroAnchors((0.0, 0.4))
        Tn = build_rank_n_approximant(s, anchors)
        f = fn(s, np.cos)
        np.testing.assert_allclose(
            apply_T(s, f).values - Tn.apply(f).values, apply_T_plus(s, anchors, f).values, atol=1e-14
        )

    def test_adjoint_of_anchored(self):
        s = spec(level=8, u="1+x", v="exp(-x)")
        op = AnchoredOperator.from_anchors(s, ZeroAnchors((0.0, 0.33, 0.71)), [0.2, 0.5])
        rng = np.random.default_rng(2)
        f, h = rng.standard_normal((2, s.grid.size))
        w = s.grid.weights
        assert np.dot(w, op.apply(f) * h) == pytest.approx(np.dot(w, f * op.adjoint(h)), rel=1e-12)

    def test_anchor_validation(self):
        with pytest.raises(ValidationError):
            ZeroAnchors((0.0, 0.5, 0.5))
        with pytest.raises(ValidationError):
            AnchoredOperator.from_anchors(spec(), ZeroAnchors((0.1, 0.5)))

    def test_sine_anchors_norm(self):
        # zeros of g for the n=1 classical pair sit at 2/3; the constrained norm is s_2
        from hardy_eigen.widths import approximation_upper_bound
        from hardy_eigen.search import find_spectral_triple

        s = spec(level=12)
        t = find_spectral_triple(s, 1)
        assert approximation_upper_bound(s, t) == pytest.approx(1 / (1.5 * math.pi), rel=1e-5)
