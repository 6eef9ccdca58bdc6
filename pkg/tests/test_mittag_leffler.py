import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracbessel.fractional import TimeOperator
from fracbessel.mittag_leffler import (MLNonConvergenceError, MLParams, ml_at_powers,
                                       ml_multinomial, ml_two_param, u0_bar)
from oracles import ml_brute


class TestMLParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            MLParams((), 1.0, ())
        with pytest.raises(ValueError):
            MLParams((1.0, 0.5), 1.0, (1.0,))
        with pytest.raises(ValueError):
            MLParams((0.0,), 1.0, (1.0,))
        with pytest.raises(ValueError):
            MLParams((1.0,), 0.0, (1.0,))

    def test_tol_floor(self):
        with pytest.raises(ValueError):
            ml_multinomial(MLParams((1.0,), 1.0, (1.0,)), tol=1e-16)


class TestMultinomial:
    def test_exponential_reduction(self):
        got = ml_multinomial(MLParams((1.0,), 1.0, (1.0,)), tol=1e-14)
        assert got.value == pytest.approx(math.e, rel=1e-14)
        assert got.tail_estimate <= 1e-14

    def test_zero_args_give_inverse_gamma(self):
        for exps, b in [((0.7, 1.5), 2.3), ((0.4,), 0.5), ((1.0, 1.0, 1.0), 1.7)]:
            got = ml_multinomial(MLParams(exps, b, (0.0,) * len(exps)))
            assert got.value == pytest.approx(1.0 / math.gamma(b), rel=1e-14)

    def test_brute_force_oracle(self):
        # frozen from a degree-400 extended-precision summation
        got = ml_multinomial(MLParams((0.7, 1.5), 1.5, (0.3, -2.0)))
        assert got.value == pytest.approx(0.50373650886961087425, rel=1e-11)

    def test_mixed_sign_brute(self):
        for exps, b, args in [
            ((0.9, 1.7), 1.7, (-0.17, -52.7)),
            ((0.5, 1.2, 2.0), 1.0, (0.4, -1.3, -20.0)),
            ((0.3,), 2.3, (-3.0,)),
        ]:
            got = ml_multinomial(MLParams(exps, b, args)).value
            want = ml_brute(exps, b, args)
            assert got == pytest.approx(want, rel=1e-11)

    def test_large_cancellation_cosine(self):
        got = ml_multinomial(MLParams((2.0,), 1.0, (-1600.0,)))
        assert got.value == pytest.approx(math.cos(40.0), abs=1e-12)

    def test_nonconvergence_error_payload(self):
        with pytest.raises(MLNonConvergenceError) as exc:
            ml_multinomial(MLParams((0.5,), 1.0, (-1e8,)))
        assert exc.value.layers_used >= 0
        assert "too large" in str(exc.value)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 5), st.booleans())
    def test_permutation_symmetry(self, shift, rev):
        exps = (0.4, 1.1, 1.8)
        args = (0.7, -2.2, -0.9)
        order = list(np.roll(np.arange(3), shift))
        if rev:
            order = order[::-1]
        base = ml_multinomial(MLParams(exps, 1.3, args)).value
        perm = ml_multinomial(MLParams(tuple(exps[i] for i in order), 1.3,
                                       tuple(args[i] for i in order))).value
        assert perm == pytest.approx(base, rel=1e-13)

    def test_layers_reported(self):
        got = ml_multinomial(MLParams((1.0,), 1.0, (1.0,)))
        assert 5 <= got.layers_used <= 60


class TestTwoParam:
    @pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
    def test_cosine(self, t):
        assert ml_two_param(2.0, 1.0, -t * t) == pytest.approx(math.cos(t), abs=1e-12)

    def test_exp_shift(self):
        assert ml_two_param(1.0, 2.0, 1.0) == pytest.approx(math.e - 1.0, rel=1e-13)

    def test_brute_force_oracle(self):
        # frozen from a 400-term extended-precision summation
        assert ml_two_param(0.5, 1.0, -1.0) == pytest.approx(0.42758357615580700441, rel=1e-12)

    def test_z_zero(self):
        assert ml_two_param(0.7, 1.3, 0.0) == pytest.approx(1.0 / math.gamma(1.3), rel=1e-14)

    def test_validation(self):
        with pytest.raises(ValueError):
            ml_two_param(0.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            ml_two_param(1.0, -1.0, 1.0)

    def test_nonconvergence(self):
        with pytest.raises(MLNonConvergenceError):
            ml_two_param(0.4, 1.0, -1e8)

    @pytest.mark.parametrize("a", [0.3, 0.8, 1.0, 1.7])
    @pytest.mark.parametrize("b", [0.5, 1.0, 2.3])
    def test_reduction_consistency(self, a, b):
        for z in (-3.0, -1.0, 0.0, 1.0, 3.0):
            v1 = ml_multinomial(MLParams((a,), b, (z,))).value
            v2 = ml_two_param(a, b, z)
            assert v1 == pytest.approx(v2, rel=1e-12, abs=1e-300)

    def test_irrational_exponent_falls_back(self):
        # exponent that does not rationalize with a small denominator
        a = 0.31830988618367  # ~1/pi truncated
        got = ml_two_param(a, 1.0, -6.0)
        want = ml_brute((a,), 1.0, (-6.0,))
        assert got == pytest.approx(want, rel=1e-10)


class TestU0Bar:
    @pytest.mark.parametrize("g,t", [(3.0, 0.7), (10.0, 1.3), (2.0, 0.0)])
    def test_wave_reduction(self, g, t):
        op = TimeOperator(alpha=2.0)
        want = math.cos(g * t)
        assert u0_bar(op, g * g, t) == pytest.approx(want, abs=1e-10)

    def test_t_zero_exact(self):
        op = TimeOperator(alpha=1.3, terms=((0.4, 0.6),))
        assert u0_bar(op, 7.0, 0.0) == 1.0

    def test_cross_call_consistency(self):
        # n=1, alpha=1, alpha_1=0.5, lambda_1=-1, gamma^2=4, t=0.7
        op = TimeOperator(alpha=1.0, terms=((-1.0, 0.5),))
        t = 0.7
        got = u0_bar(op, 4.0, t)
        p = MLParams((0.5, 1.0), 1.0, (-1.0 * t**0.5, -4.0 * t))
        direct = ml_multinomial(p).value
        assert got == pytest.approx(direct, rel=1e-12)
        assert got == pytest.approx(ml_brute((0.5, 1.0), 1.0, (-1.0 * t**0.5, -4.0 * t)),
                                    rel=1e-11)

    def test_domain(self):
        op = TimeOperator(alpha=1.5)
        with pytest.raises(ValueError):
            u0_bar(op, 4.0, -0.1)
        with pytest.raises(ValueError):
            u0_bar(op, -4.0, 0.1)

    def test_bounded_at_large_gamma(self):
        # consequence of the decay bound within the nonlocal formula
        op = TimeOperator(alpha=1.8, terms=((0.3, 0.9),))
        vals = [abs(u0_bar(op, gsq, 1.0)) for gsq in (1.0, 10.0, 100.0, 1000.0, 5000.0)]
        c = max(vals[:2]) * 1.5
        assert max(vals) <= c
        assert vals[-1] < vals[0]


class TestDecayBound:
    @pytest.mark.parametrize("rho_is_alpha", [True, False])
    def test_eq22_usage_pattern(self, rho_is_alpha):
        # |E_(..),rho(..)| * (1 + |z_eig|) bounded along the eigenvalue sweep;
        # constant fitted on a coarse sweep, asserted on a fine one
        alpha, a1, lam = 1.8, 0.9, 0.5
        t = 1.0
        exps = (alpha - a1, alpha)
        rho = alpha if rho_is_alpha else 1.0
        z1 = lam * t ** (alpha - a1)

        def weighted(zlast):
            val, _, _ = ml_at_powers(exps, rho, (lam, zlast), (alpha - a1, 0.0), t)
            return abs(val) * (1.0 + abs(zlast))

        coarse = [weighted(-x) for x in np.logspace(0, 4, 13)]
        c_fit = 1.6 * max(coarse)
        fine = [weighted(-x) for x in np.logspace(0, 4, 25)]
        assert max(fine) <= c_fit
        # decay regime: the weighted quantity does not grow along the tail
        assert fine[-1] <= 1.2 * max(fine[:13])


class TestPowerArgs:
    def test_vector_matches_scalar(self):
        exps = (0.9, 1.7)
        zs = np.array([0.05, 0.21, 0.3])
        vals, _, _ = ml_at_powers(exps, 1.7, (-0.5, -1000.0), exps, zs)
        for z, v in zip(zs, vals):
            u = (-0.5 * z**0.9, -1000.0 * z**1.7)
            direct = ml_multinomial(MLParams(exps, 1.7, tuple(u))).value
            assert v == pytest.approx(direct, rel=1e-9)

    def test_zero_node(self):
        vals, _, _ = ml_at_powers((1.5,), 1.5, (-4.0,), (1.5,), np.array([0.0, 0.5]))
        assert vals[0] == pytest.approx(1.0 / math.gamma(1.5), rel=1e-14)
