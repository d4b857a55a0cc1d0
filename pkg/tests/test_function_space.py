import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hardy_eigen.errors import AllZero, ResourceLimit, ValidationError
from hardy_eigen.function_space import (
    Grid,
    Interval,
    NodalCountPolicy,
    SampledFunction,
    conjugate,
    count_sign_changes,
    count_zeros,
    lp_norm,
    refine,
    sign_change_points,
    signed_power,
)

UNIT = Interval(0.0, 1.0)


def sample(fn, level=10, interval=UNIT):
    return Grid(interval, level).sample(fn)


class TestSignedPower:
    def test_cube(self):
        assert signed_power(-2.0, 3) == -4.0

    def test_identity_at_two(self):
        assert signed_power(0.37, 2) == pytest.approx(0.37, rel=0, abs=0)

    def test_round_trip_example(self):
        assert signed_power(signed_power(0.7, 3), 1.5) == pytest.approx(0.7, rel=1e-15)

    def test_zero(self):
        assert signed_power(0.0, 2.5) == 0.0

    @given(st.floats(-10, 10), st.floats(1.1, 10))
    def test_odd(self, t, p):
        assert signed_power(-t, p) == -signed_power(t, p)

    # |t|^(p-1) must stay a normal double; below ~1e-30 it underflows for p near 10
    @given(st.one_of(st.just(0.0), st.floats(1e-30, 10), st.floats(-10, -1e-30)), st.floats(1.1, 10))
    def test_round_trip(self, t, p):
        back = signed_power(signed_power(t, p), conjugate(p))
        assert back == pytest.approx(t, rel=1e-12, abs=1e-300)

    def test_array_matches_scalar(self):
        t = np.linspace(-3, 3, 13)
        assert np.array_equal(signed_power(t, 2.7), [signed_power(float(s), 2.7) for s in t])


class TestNorms:
    def test_one(self):
        assert lp_norm(sample(lambda x: np.ones_like(x)), 2) == pytest.approx(1.0, rel=1e-14)

    def test_identity(self):
        # closed form int_0^1 x^2 = 1/3, trapezoid error O(h^2)
        assert lp_norm(sample(lambda x: x), 2) == pytest.approx(1 / math.sqrt(3), rel=1e-6)

    def test_zero(self):
        assert lp_norm(sample(lambda x: 0 * x), 3) == 0.0

    @given(st.floats(-50, 50).filter(lambda c: c != 0), st.floats(1.1, 8))
    def test_homogeneous(self, c, p):
        f = sample(lambda x: np.sin(3 * x) + 0.5, level=6)
        assert lp_norm(f * c, p) == pytest.approx(abs(c) * lp_norm(f, p), rel=1e-12)

    def test_quadrature_second_order(self):
        exact = 1 / math.sqrt(3)
        errs = [abs(lp_norm(sample(lambda x: x, level=L), 2) - exact) for L in (6, 8, 10)]
        orders = [math.log(errs[i] / errs[i + 1], 4) for i in range(2)]
        assert min(orders) > 1.9


class TestGrid:
    def test_refine_counts(self):
        g = Grid(UNIT, 4)
        assert g.size == 17 and refine(g).size == 33

    def test_endpoints_and_weights(self):
        g = refine(Grid(Interval(-1.0, 2.5), 4))
        assert g.nodes[0] == -1.0 and g.nodes[-1] == 2.5
        assert g.weights.sum() == pytest.approx(3.5, rel=1e-12)

    def test_refine_superset(self):
        g = Grid(UNIT, 5)
        assert np.allclose(refine(g).nodes[::2], g.nodes, rtol=0, atol=1e-15)

    def test_resource_limit(self):
        with pytest.raises(ResourceLimit):
            refine(Grid(UNIT, 6, max_level=6))

    @pytest.mark.parametrize("a,b", [(1.0, 1.0), (2.0, 1.0), (0.0, math.inf)])
    def test_bad_interval(self, a, b):
        with pytest.raises(ValidationError):
            Interval(a, b)


class TestNodalCounts:
    def test_sine_three(self):
        f = sample(lambda x: np.sin(3 * np.pi * x))
        assert count_zeros(f) == 2 and count_sign_changes(f) == 2

    def test_constant(self):
        assert count_zeros(sample(lambda x: 1 + 0 * x)) == 0

    def test_touching_zero(self):
        f = sample(lambda x: (x - 0.5) ** 2)
        assert count_zeros(f) == 1 and count_sign_changes(f) == 0

    def test_two_halves(self):
        f = sample(lambda x: np.where(x < 0.5, 1.0, -1.0))
        assert count_sign_changes(f) == 1

    def test_all_zero(self):
        with pytest.raises(AllZero):
            count_zeros(sample(lambda x: 0 * x))

    def test_policy_validation(self):
        with pytest.raises(ValidationError):
            NodalCountPolicy(abs_floor=0.5)

    @given(st.lists(st.floats(-1, 1), min_size=3, max_size=60))
    def test_sign_changes_bounded_by_zeros(self, vals):
        v = np.asarray(vals)
        if not np.any(np.abs(v) > 1e-8 * max(np.abs(v).max(), 1e-300)) or np.abs(v).max() == 0:
            return
        assert count_sign_changes(v) <= count_zeros(v)

    def test_sign_change_points(self):
        f = sample(lambda x: np.sin(3 * np.pi * x), level=12)
        assert np.allclose(sign_change_points(f), [1 / 3, 2 / 3], atol=1e-6)
