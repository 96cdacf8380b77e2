import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ramseyopt.errors import DomainError
from ramseyopt.signal import (FiveParam, PureDecay, Quadrature, QubitParams,
                              TwoParam, expectation, expectation_gradient,
                              free_parameters, signal_bound, with_values)

X, Y = Quadrature.X, Quadrature.Y


def two_param(omega=1.0, gamma=1.0):
    return TwoParam(QubitParams(omega, gamma))


class TestExpectation:
    def test_x_at_zero_is_one(self):
        assert expectation(two_param(), X, 0.0) == 1.0

    def test_x_at_one(self):
        # cos(1) * exp(-1), frozen from an independent high-precision evaluation
        assert expectation(two_param(), X, 1.0) == pytest.approx(0.198766, abs=1e-6)

    def test_y_at_one(self):
        # sin(1) * exp(-1)
        assert expectation(two_param(), Y, 1.0) == pytest.approx(0.309560, abs=1e-6)

    def test_five_param_reduces_to_two_param(self):
        five = FiveParam(A=1.0, B=0.0, phi=0.0, params=QubitParams(1.0, 1.0))
        t = np.linspace(0.0, 5.0, 101)
        np.testing.assert_allclose(expectation(five, X, t),
                                   expectation(two_param(), X, t), atol=1e-15)

    def test_pure_decay_ignores_quadrature(self):
        m = PureDecay(A=0.7, gamma=0.4)
        t = np.linspace(0.0, 4.0, 17)
        np.testing.assert_array_equal(expectation(m, X, t), expectation(m, Y, t))
        np.testing.assert_allclose(expectation(m, X, t), 0.7 * np.exp(-0.4 * t))

    def test_vectorized_matches_scalar(self):
        m = FiveParam(A=0.6, B=0.2, phi=0.3, params=QubitParams(-1.3, 0.8))
        ts = np.array([0.0, 0.5, 1.7, 3.2])
        vec = expectation(m, Y, ts)
        np.testing.assert_array_equal(vec, [expectation(m, Y, t) for t in ts])

    def test_negative_time_rejected(self):
        with pytest.raises(DomainError):
            expectation(two_param(), X, -0.1)

    def test_negative_gamma_rejected(self):
        with pytest.raises(DomainError):
            QubitParams(1.0, -0.5)
        with pytest.raises(DomainError):
            PureDecay(A=1.0, gamma=-1e-3)


class TestGradient:
    def test_two_param_x_at_one(self):
        g = expectation_gradient(two_param(), X, 1.0, ["omega", "gamma"])
        np.testing.assert_allclose(g, [-0.309560, -0.198766], atol=1e-6)

    def test_vanishes_at_zero_time(self):
        g = expectation_gradient(two_param(2.0, 0.3), Y, 0.0, ["omega", "gamma"])
        np.testing.assert_array_equal(g, [0.0, 0.0])

    def test_pure_decay_caller_order(self):
        m = PureDecay(A=1.0, gamma=1.0)
        g = expectation_gradient(m, X, 1.0, ["A", "gamma"])
        np.testing.assert_allclose(g, [np.exp(-1.0), -np.exp(-1.0)], rtol=1e-12)
        # reversed request reverses components
        g2 = expectation_gradient(m, X, 1.0, ["gamma", "A"])
        np.testing.assert_array_equal(g2, g[::-1])

    def test_unknown_parameter_rejected(self):
        with pytest.raises(DomainError):
            expectation_gradient(two_param(), X, 1.0, ["omega", "A"])

    def test_default_order_is_canonical(self):
        assert free_parameters(two_param()) == ("omega", "gamma")
        assert free_parameters(PureDecay(1.0, 1.0)) == ("gamma", "A")
        five = FiveParam(A=1.0, B=0.0, phi=0.0, params=QubitParams(1.0, 1.0))
        assert free_parameters(five) == ("omega", "gamma", "A", "B", "phi")

    def _fd(self, model, quad, t, names, h=1e-6):
        cols = []
        for n in names:
            base = model.value(n)
            hi = with_values(model, [n], [base + h])
            lo = with_values(model, [n], [base - h])
            cols.append((expectation(hi, quad, t) - expectation(lo, quad, t)) / (2 * h))
        return np.array(cols)

    def test_matches_finite_differences_on_random_grid(self):
        # 100 (omega, gamma, t) triples, both quadratures
        rng = np.random.default_rng(1234)
        for _ in range(100):
            w = rng.uniform(-3, 3)
            g = rng.uniform(0.1, 3)
            t = rng.uniform(0.0, 5.0)
            m = two_param(w, g)
            for quad in (X, Y):
                an = expectation_gradient(m, quad, t, ["omega", "gamma"])
                fd = self._fd(m, quad, t, ["omega", "gamma"])
                np.testing.assert_allclose(an, fd, rtol=1e-6, atol=5e-9)

    @given(A=st.floats(0.2, 1.0), B=st.floats(-0.3, 0.3),
           phi=st.floats(-1.5, 1.5), w=st.floats(-3, 3),
           g=st.floats(0.1, 3), t=st.floats(0.01, 5),
           quad=st.sampled_from([X, Y]))
    @settings(max_examples=60, deadline=None)
    def test_five_param_gradient_matches_fd(self, A, B, phi, w, g, t, quad):
        m = FiveParam(A=A, B=B, phi=phi, params=QubitParams(w, g))
        names = ["omega", "gamma", "A", "B", "phi"]
        an = expectation_gradient(m, quad, t, names)
        fd = self._fd(m, quad, t, names)
        np.testing.assert_allclose(an, fd, rtol=1e-5, atol=1e-8)


class TestIdentities:
    @given(w=st.floats(-3, 3), g=st.floats(0.0, 3), t=st.floats(0.0, 5))
    @settings(max_examples=200, deadline=None)
    def test_quadrature_sum_is_envelope(self, w, g, t):
        m = two_param(w, g)
        x = expectation(m, X, t)
        y = expectation(m, Y, t)
        assert x * x + y * y == pytest.approx(np.exp(-2 * g * t), abs=1e-12)

    @given(w=st.floats(-3, 3), g=st.floats(0.0, 3), t=st.floats(0.0, 5))
    @settings(max_examples=100, deadline=None)
    def test_sign_flip_antisymmetry(self, w, g, t):
        pos, neg = two_param(w, g), two_param(-w, g)
        assert expectation(pos, Y, t) == pytest.approx(-expectation(neg, Y, t), abs=1e-14)
        assert expectation(pos, X, t) == pytest.approx(expectation(neg, X, t), abs=1e-14)

    def test_signal_bound(self):
        assert signal_bound(two_param()) == 1.0
        assert signal_bound(FiveParam(0.8, -0.15, 0.0, QubitParams(1, 1))) == pytest.approx(0.95)
        assert signal_bound(PureDecay(0.9, 1.0)) == pytest.approx(0.9)


class TestWithValues:
    def test_round_trip(self):
        m = FiveParam(A=0.8, B=0.1, phi=0.2, params=QubitParams(1.5, 0.7))
        m2 = with_values(m, ["omega", "A"], [2.5, 0.6])
        assert m2.params.omega == 2.5
        assert m2.A == 0.6
        assert m2.params.gamma == 0.7
        assert m2.B == 0.1

    def test_unknown_name_rejected(self):
        with pytest.raises(DomainError):
            with_values(two_param(), ["A"], [0.5])
