"""Run-time adaptation of the measurement inclusion rate ``q``.

``q`` is the number of optimizer iterations performed on a frozen
window before new measurements are included.  Each solve yields three
measured ratios of best costs:

* efficiency ``E = J_best / J_star`` in (0, 1]: contraction achieved by
  the ``q`` iterations;
* disturbance ``D = J_star / J_prev``: inflation caused by shifting the
  window under noise and model error, locally modeled as ``1 + alpha*q``;
* gain ``K = E * D``: the per-cycle contraction factor of the cost.

When ``K < 1`` the cost decays like ``K^(t / (ell*tau))``, so the time
to shrink it by a fixed factor is proportional to ``q / |log K|``; the
update law steps ``q`` by ``delta`` against the gradient of that
response time.  When ``K >= 1`` it steps against the gradient of ``K``
itself.  Every update is a handful of scalar operations regardless of
window size or budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Tuple

from .solver import SolveReport

EPS_UNITY = 1e-9


class InsufficientIterationsError(ValueError):
    """Gradient estimation needs at least two iterations per solve."""


class NearUnityGainError(ArithmeticError):
    """``log(K)`` is too close to zero for the response-time branch."""


@dataclass(frozen=True)
class TimingSpec:
    """Measurement acquisition period and per-iteration compute time."""

    tau: float
    tau_c: float

    def __post_init__(self):
        if self.tau <= 0.0 or self.tau_c <= 0.0:
            raise ValueError("tau and tau_c must be positive")


@dataclass(frozen=True)
class RateState:
    """Current budget ``q`` with its bounds, step size and diagnostics."""

    q: int
    q_min: int = 2
    q_max: int = 1000
    delta: int = 10
    last_E: Optional[float] = None
    last_D: Optional[float] = None
    last_K: Optional[float] = None
    last_alpha: Optional[float] = None
    last_gamma: Optional[float] = None

    def __post_init__(self):
        if self.q_min < 2:
            raise ValueError("q_min must be at least 2")
        if not self.q_min <= self.q <= self.q_max:
            raise ValueError(f"q={self.q} outside [{self.q_min}, {self.q_max}]")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative (0 disables updating)")


def ell(q: int, timing: TimingSpec) -> int:
    """Sampling periods consumed by ``q`` iterations: ``int(q*tau_c/tau) + 1``."""
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    return int(q * timing.tau_c / timing.tau) + 1


def contraction_terms(report: SolveReport, J_prev: float) -> Tuple[float, float, float]:
    """Measured ratios ``(E, D, K)`` for one updating cycle.

    ``J_prev`` is the best cost delivered by the previous cycle; the
    cost floor guarantees all denominators are positive.
    """
    E = report.J_best / report.J_star
    D = report.J_star / J_prev
    return E, D, E * D


def alpha_estimate(J_star: float, J_prev: float, q: int) -> float:
    """On-line identification of ``alpha`` in ``D = 1 + alpha*q``."""
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    return (J_star / J_prev - 1.0) / q


def efficiency_gradient(report: SolveReport) -> float:
    """Last-iteration change of the efficiency map, ``<= 0`` by construction."""
    if report.iterations_run < 2:
        raise InsufficientIterationsError(
            f"need >= 2 iterations, solve ran {report.iterations_run}"
        )
    return (report.J_best - report.J_penultimate) / report.J_star


def gain_gradient(E: float, D: float, dE_dq: float, dD_dq: float) -> float:
    """Product rule for ``dK/dq`` with ``K = E * D``."""
    return E * dD_dq + D * dE_dq


def response_time_gradient(K: float, q: int, dK_dq: float) -> float:
    """Gradient of ``q / |log K|`` w.r.t. ``q`` for a contracting gain.

    Raises :class:`NearUnityGainError` when ``|K - 1| < EPS_UNITY``; the
    caller must use the non-contracting branch there.
    """
    if K <= 0.0:
        raise ValueError(f"K must be positive, got {K}")
    if abs(K - 1.0) < EPS_UNITY:
        raise NearUnityGainError(f"K={K} too close to 1 for log-based gradient")
    logK = math.log(K)
    return (-logK + (q / K) * dK_dq) / (logK * logK)


def update_q(
    state: RateState, K: float, gamma_candidates: Tuple[float, Optional[float]]
) -> RateState:
    """One quantized gradient step on ``q``, clamped to its bounds.

    ``gamma_candidates`` is ``(dK_dq, dRT_dq)``: the gain gradient and
    the response-time gradient.  ``K >= 1`` (or within ``EPS_UNITY`` of
    it) selects the gain gradient, otherwise the response-time gradient,
    which must then be provided.  ``sign(0) = 0`` leaves ``q`` unchanged.
    """
    dK_dq, dRT_dq = gamma_candidates
    if K >= 1.0 or abs(K - 1.0) < EPS_UNITY:
        gamma = dK_dq
    else:
        if dRT_dq is None:
            raise ValueError("response-time gradient required for K < 1")
        gamma = dRT_dq
    sign = 0 if gamma == 0.0 else (1 if gamma > 0.0 else -1)
    q_new = max(state.q_min, min(state.q_max, state.q - state.delta * sign))
    return replace(state, q=q_new, last_K=K, last_gamma=gamma)


def ideal_q_oracle(K_model: Callable[[int], float], q_min: int, q_max: int) -> int:
    """Exhaustive minimizer of the two-branch objective, for testing.

    Scans every integer budget and evaluates ``q / |log K(q)|`` where
    ``K(q) < 1`` and ``K(q)`` elsewhere; ties break toward the smallest
    budget.  This is the reference the gradient-stepped update law is
    measured against; it is far too expensive to run in the loop.
    """
    if q_min > q_max:
        raise ValueError("empty budget range")
    best_q = q_min
    best_f = math.inf
    for q in range(q_min, q_max + 1):
        K = K_model(q)
        if K < 1.0:
            f = q / abs(math.log(K))
        else:
            f = K
        if f < best_f:
            best_f = f
            best_q = q
    return best_q
