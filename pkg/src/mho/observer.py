"""Moving-horizon observer with a budgeted solve per updating instant.

Time is counted in sample indices.  A solve that runs ``q`` iterations
occupies ``ell(q)`` sampling periods, so the decision variable is
refreshed only at updating instants ``t_k = t_{k-1} + ell(q)``.  The
solve delivered at ``t_k`` works on the newest window available when
the computation started, i.e. the one ending at ``t_{k-1}``; its warm
start is the previous solution propagated across the window shift.
Between updating instants, state estimates are produced wait-free by
propagating the last delivered solution through the model.

The observer idles (pure model prediction from the initial guess) until
the log holds one full window; the first solve fires at sample ``N``
on the window ``[0, N]`` with the initial guess as window-start state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

from .cost import CostSpec, WindowCost
from .dynamics import SystemModel, transition
from .measurement import MeasurementLog, WindowUnderflowError
from .rate_adapter import (
    EPS_UNITY,
    RateState,
    TimingSpec,
    alpha_estimate,
    contraction_terms,
    efficiency_gradient,
    ell,
    gain_gradient,
    response_time_gradient,
    update_q,
)
from .solver import BoxConstraint, SolveReport, minimize, project


@dataclass(frozen=True)
class CycleRecord:
    """Per-cycle log line: instant, budget, interval and the measured ratios."""

    t_index: int
    q: int
    ell: int
    J_star: float
    J_best: float
    E: float
    D: float
    K: float
    alpha: float
    gamma: float


def warm_start(
    model: SystemModel,
    p_prev: np.ndarray,
    ell_steps: int,
    u_seq: np.ndarray,
    dt: float,
    box: BoxConstraint,
) -> np.ndarray:
    """Propagate the previous solution across the window shift, then clamp.

    The result is both the initial guess of the budgeted solve and the
    arrival-cost anchor.
    """
    x = transition(model, ell_steps, p_prev, u_seq, dt)
    return project(x, box)


class MovingHorizonObserver:
    """One observer instance; owns its rate state and cycle records."""

    def __init__(
        self,
        model: SystemModel,
        box: BoxConstraint,
        cost_spec: CostSpec,
        timing: TimingSpec,
        rate: RateState,
        x_hat0,
    ):
        self.model = model
        self.box = box
        self.cost_spec = cost_spec
        self.timing = timing
        self.rate = rate
        self.p_current = project(np.asarray(x_hat0, dtype=float), box)
        self.t_index: Optional[int] = None
        self.window_end: Optional[int] = None
        self.last_J: Optional[float] = None
        self.last_report: Optional[SolveReport] = None
        self.records: List[CycleRecord] = []

    @property
    def adaptive(self) -> bool:
        return self.rate.delta > 0

    def next_update_index(self) -> int:
        """Sample index at which the next updating cycle is due."""
        if self.t_index is None:
            return self.cost_spec.N
        return self.t_index + ell(self.rate.q, self.timing)

    def update_cycle(self, log: MeasurementLog) -> CycleRecord:
        """Run one full updating cycle at the due instant.

        Requires the log to cover samples up to ``next_update_index()``.
        Solves the window ending at the previous updating instant with
        the current budget, measures the contraction ratios, steps ``q``
        (a step of zero when ``delta == 0``), and re-anchors the
        estimate to the new solution.
        """
        N = self.cost_spec.N
        t_new = self.next_update_index()
        if log.last_index < t_new:
            raise WindowUnderflowError(
                f"cycle due at sample {t_new}, log ends at {log.last_index}"
            )
        q_used = self.rate.q

        if self.t_index is None:
            # startup: solve the first full window with the initial guess
            end = t_new
            p_star = self.p_current
        else:
            end = self.t_index
            shift = end - self.window_end
            u_fwd = log.input_slice(self.window_end - N, shift)
            p_star = warm_start(
                self.model, self.p_current, shift, u_fwd, self.timing.tau, self.box
            )

        window = log.extract_window(end, N)
        wc = WindowCost(self.cost_spec, window, p_star)
        report = minimize(
            wc.value, p_star, self.box, q_used, value_and_grad=wc.value_and_grad
        )

        E = report.J_best / report.J_star
        D = K = alpha = gamma = math.nan
        if self.last_J is not None:
            E, D, K = contraction_terms(report, self.last_J)
            alpha = alpha_estimate(report.J_star, self.last_J, q_used)
            dE_dq = efficiency_gradient(report)
            dK_dq = gain_gradient(E, D, dE_dq, alpha)
            if K < 1.0 and abs(K - 1.0) >= EPS_UNITY:
                rt_grad = response_time_gradient(K, q_used, dK_dq)
            else:
                rt_grad = None
            diag = replace(self.rate, last_E=E, last_D=D, last_alpha=alpha)
            self.rate = update_q(diag, K, (dK_dq, rt_grad))
            gamma = self.rate.last_gamma

        self.p_current = report.p_best
        self.t_index = t_new
        self.window_end = end
        self.last_J = report.J_best
        self.last_report = report
        record = CycleRecord(
            t_index=t_new,
            q=q_used,
            ell=ell(q_used, self.timing),
            J_star=report.J_star,
            J_best=report.J_best,
            E=E,
            D=D,
            K=K,
            alpha=alpha,
            gamma=gamma,
        )
        self.records.append(record)
        return record

    def estimate_at(self, log: MeasurementLog, k: int) -> np.ndarray:
        """Wait-free state estimate at sample ``k``.

        Propagates the last delivered solution from its window-start
        anchor through the model; before the first cycle this is pure
        prediction from the initial guess.
        """
        anchor = 0 if self.window_end is None else self.window_end - self.cost_spec.N
        steps = k - anchor
        if steps < 0:
            raise ValueError(f"sample {k} precedes the estimate anchor {anchor}")
        us = log.input_slice(anchor, steps)
        return transition(self.model, steps, self.p_current, us, self.timing.tau)
