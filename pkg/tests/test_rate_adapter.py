import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mho.rate_adapter import (
    EPS_UNITY,
    InsufficientIterationsError,
    NearUnityGainError,
    RateState,
    TimingSpec,
    alpha_estimate,
    contraction_terms,
    efficiency_gradient,
    ell,
    gain_gradient,
    ideal_q_oracle,
    response_time_gradient,
    update_q,
)
from mho.solver import SolveReport

REFERENCE_TIMING = TimingSpec(tau=0.002, tau_c=0.0005)


def report_from_trace(trace):
    trace = np.asarray(trace, dtype=float)
    q = len(trace) - 1
    return SolveReport(
        p_best=np.zeros(3),
        cost_trace=trace,
        J_star=float(trace[0]),
        J_best=float(trace[-1]),
        J_penultimate=float(trace[-2]),
        iterations_run=q,
    )


class TestEll:
    def test_reference_values(self):
        assert ell(20, REFERENCE_TIMING) == 6
        assert ell(1000, REFERENCE_TIMING) == 251

    def test_short_budget_gives_one(self):
        assert ell(1, REFERENCE_TIMING) == 1
        assert ell(3, REFERENCE_TIMING) == 1

    def test_matches_exact_rational_over_operating_range(self):
        # tau_c / tau = 1/4 exactly in the reference timing
        for q in range(1, 2001):
            assert ell(q, REFERENCE_TIMING) == q // 4 + 1

    @given(q=st.integers(1, 5000))
    def test_at_least_one(self, q):
        assert ell(q, REFERENCE_TIMING) >= 1

    @given(q=st.integers(1, 4999))
    def test_non_decreasing(self, q):
        assert ell(q + 1, REFERENCE_TIMING) >= ell(q, REFERENCE_TIMING)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            ell(0, REFERENCE_TIMING)


class TestContractionTerms:
    def test_reference_example(self):
        rep = report_from_trace([1.2, 0.9, 0.6])
        E, D, K = contraction_terms(rep, J_prev=1.0)
        assert E == pytest.approx(0.5, rel=1e-12)
        assert D == pytest.approx(1.2, rel=1e-12)
        assert K == pytest.approx(0.6, rel=1e-12)

    def test_no_improvement_gives_unit_efficiency(self):
        rep = report_from_trace([2.0, 2.0, 2.0])
        E, _, _ = contraction_terms(rep, J_prev=1.0)
        assert E == 1.0

    def test_ideal_case_unit_disturbance(self):
        rep = report_from_trace([1.0, 0.7, 0.5])
        _, D, _ = contraction_terms(rep, J_prev=1.0)
        assert D == 1.0


class TestAlphaEstimate:
    def test_reference_example(self):
        assert alpha_estimate(1.2, 1.0, 20) == pytest.approx(0.01, rel=1e-9)

    def test_zero_when_no_inflation(self):
        assert alpha_estimate(1.0, 1.0, 20) == 0.0

    def test_negative_allowed(self):
        assert alpha_estimate(0.9, 1.0, 10) < 0.0


class TestEfficiencyGradient:
    def test_reference_example(self):
        rep = report_from_trace([1.2] + [1.0] * 18 + [0.60, 0.58])
        val = efficiency_gradient(rep)
        assert val == pytest.approx((0.58 - 0.60) / 1.2, abs=1e-9)

    def test_stalled_last_iteration_gives_zero(self):
        rep = report_from_trace([1.2, 0.9, 0.9])
        assert efficiency_gradient(rep) == 0.0

    def test_requires_two_iterations(self):
        rep = report_from_trace([1.2, 0.9])
        with pytest.raises(InsufficientIterationsError):
            efficiency_gradient(rep)

    @settings(max_examples=50)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_never_positive_on_monotone_traces(self, seed):
        rng = np.random.default_rng(seed)
        steps = rng.uniform(0.0, 0.3, 10)
        trace = 5.0 - np.concatenate([[0.0], np.cumsum(steps)])
        rep = report_from_trace(trace)
        assert efficiency_gradient(rep) <= 0.0


class TestGainGradient:
    def test_reference_example(self):
        val = gain_gradient(E=0.5, D=1.2, dE_dq=-1.0 / 60.0, dD_dq=0.01)
        assert val == pytest.approx(-0.015, abs=1e-9)

    def test_zero_gradients(self):
        assert gain_gradient(0.5, 1.2, 0.0, 0.0) == 0.0

    def test_product_rule_against_finite_differences(self):
        # synthetic smooth E(q), D(q); product rule vs central differences
        def E(q):
            return 0.2 + 0.8 * math.exp(-q / 80.0)

        def dE(q):
            return -0.8 / 80.0 * math.exp(-q / 80.0)

        def D(q):
            return 1.0 + 2e-4 * q

        for q in np.linspace(10, 900, 15):
            got = gain_gradient(E(q), D(q), dE(q), 2e-4)
            h = 1e-4 * max(1.0, q)
            fd = (E(q + h) * D(q + h) - E(q - h) * D(q - h)) / (2 * h)
            assert got == pytest.approx(fd, rel=1e-6)


class TestResponseTimeGradient:
    def test_reference_example(self):
        val = response_time_gradient(K=0.6, q=20, dK_dq=-0.015)
        logK = math.log(0.6)
        exact = (-logK + (20 / 0.6) * (-0.015)) / logK**2
        assert val == pytest.approx(exact, rel=1e-12)
        assert val == pytest.approx(0.04139, abs=1e-4)

    def test_flat_gain_reduces_to_inverse_log(self):
        val = response_time_gradient(K=0.6, q=20, dK_dq=0.0)
        assert val == pytest.approx(-1.0 / math.log(0.6), rel=1e-12)
        assert val > 0.0

    def test_near_unity_signal(self):
        with pytest.raises(NearUnityGainError):
            response_time_gradient(K=1.0 - 1e-12, q=20, dK_dq=0.0)

    def test_rejects_nonpositive_gain(self):
        with pytest.raises(ValueError):
            response_time_gradient(K=0.0, q=20, dK_dq=0.0)

    def test_matches_finite_differences_of_response_time(self):
        def K(q):
            return 0.5 + 0.001 * q

        def dK(q):
            return 0.001

        for q in np.linspace(10, 400, 20):
            got = response_time_gradient(K(q), q, dK(q))
            h = 1e-4 * max(1.0, q)

            def f(qq):
                return qq / abs(math.log(K(qq)))

            fd = (f(q + h) - f(q - h)) / (2 * h)
            assert got == pytest.approx(fd, rel=1e-6)


class TestUpdateQ:
    def test_clamped_at_lower_bound(self):
        state = RateState(q=20, q_min=20, q_max=1000, delta=10)
        out = update_q(state, K=0.6, gamma_candidates=(-0.015, 0.041))
        assert out.q == 20

    def test_step_down_gradient(self):
        state = RateState(q=500, q_min=20, q_max=1000, delta=10)
        out = update_q(state, K=0.6, gamma_candidates=(0.1, -0.5))
        assert out.q == 510

    def test_zero_gradient_keeps_q(self):
        state = RateState(q=100, q_min=20, q_max=1000, delta=10)
        out = update_q(state, K=1.2, gamma_candidates=(0.0, None))
        assert out.q == 100

    def test_expanding_gain_uses_gain_gradient(self):
        state = RateState(q=100, q_min=20, q_max=1000, delta=10)
        out = update_q(state, K=1.5, gamma_candidates=(0.2, None))
        assert out.q == 90
        assert out.last_gamma == 0.2

    def test_near_unity_uses_gain_branch(self):
        state = RateState(q=100, q_min=20, q_max=1000, delta=10)
        out = update_q(state, K=1.0 - EPS_UNITY / 2, gamma_candidates=(-0.3, None))
        assert out.q == 110

    def test_contracting_gain_requires_rt_gradient(self):
        state = RateState(q=100, q_min=20, q_max=1000, delta=10)
        with pytest.raises(ValueError):
            update_q(state, K=0.5, gamma_candidates=(0.1, None))

    def test_zero_delta_never_moves(self):
        state = RateState(q=50, q_min=20, q_max=1000, delta=0)
        out = update_q(state, K=0.5, gamma_candidates=(0.1, 5.0))
        assert out.q == 50

    @settings(max_examples=50)
    @given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 300))
    def test_q_stays_in_bounds_under_random_streams(self, seed, n):
        rng = np.random.default_rng(seed)
        state = RateState(q=20, q_min=20, q_max=1000, delta=10)
        for _ in range(n):
            gamma = float(rng.normal())
            state = update_q(state, float(rng.uniform(0.2, 1.5)), (gamma, gamma))
            assert state.q_min <= state.q <= state.q_max

    def test_state_validation(self):
        with pytest.raises(ValueError):
            RateState(q=5, q_min=1, q_max=10)  # q_min below 2
        with pytest.raises(ValueError):
            RateState(q=1, q_min=2, q_max=10)  # q outside range


class TestIdealQOracle:
    def test_constant_contracting_gain_prefers_minimum(self):
        assert ideal_q_oracle(lambda q: 0.5, 2, 1000) == 2

    def test_expanding_gain_bowl(self):
        assert ideal_q_oracle(lambda q: 1.05 + (q - 137) ** 2 * 1e-5, 2, 1000) == 137

    def test_frozen_regression_value(self):
        # enumeration over {2..1000} for K(q) = 0.5 (1 + 0.01 q), computed
        # once with this oracle and pinned
        assert ideal_q_oracle(lambda q: 0.5 * (1.0 + 0.01 * q), 2, 1000) == 100

    def test_tie_breaks_to_smallest(self):
        assert ideal_q_oracle(lambda q: 2.0, 5, 50) == 5
