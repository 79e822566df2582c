"""Budgeted projected fast-gradient descent with adaptive restart.

One call runs exactly ``q`` accelerated projected-gradient iterations
and reports the best-so-far cost after each of them.  The step size is
found by backtracking against the quadratic upper-bound surrogate; the
momentum is reset to zero whenever a candidate's cost exceeds the
previous candidate's cost (function-value restart).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


class BudgetError(ValueError):
    """The iteration budget must be at least one."""


@dataclass(frozen=True)
class BoxConstraint:
    """Component-wise bounds ``lower <= p <= upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape:
            raise ValueError("bound shapes differ")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")


def project(p, box: BoxConstraint) -> np.ndarray:
    """Component-wise clamp of ``p`` into the box (idempotent)."""
    return np.minimum(np.maximum(np.asarray(p, dtype=float), box.lower), box.upper)


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one budgeted solve.

    ``cost_trace[i]`` is the best cost seen after ``i`` iterations, so
    the trace is non-increasing, ``J_star = cost_trace[0]`` is the cost
    of the initial guess and ``J_best = cost_trace[-1]`` the best value
    found.  ``iterates`` is populated only when requested.
    """

    p_best: np.ndarray
    cost_trace: np.ndarray
    J_star: float
    J_best: float
    J_penultimate: float
    iterations_run: int
    iterates: Optional[tuple] = None


def minimize(
    fun: Callable[[np.ndarray], float],
    p0,
    box: BoxConstraint,
    q: int,
    value_and_grad: Optional[Callable] = None,
    grad: Optional[Callable] = None,
    step0: float = 1.0,
    record_iterates: bool = False,
) -> SolveReport:
    """Run exactly ``q`` fast-gradient iterations from ``p0``.

    Either ``value_and_grad(p) -> (float, ndarray)`` or ``grad(p)`` must
    be supplied.  All iterates are projected into ``box``; the returned
    ``p_best`` is the feasible point with the lowest observed cost.
    """
    if q < 1:
        raise BudgetError(f"iteration budget must be >= 1, got {q}")
    if value_and_grad is None:
        if grad is None:
            raise ValueError("provide value_and_grad or grad")

        def value_and_grad(p):
            return fun(p), grad(p)

    p = project(p0, box)
    f_p = fun(p)
    best_p = p
    best_f = f_p
    trace = np.empty(q + 1)
    trace[0] = f_p
    iterates = [p] if record_iterates else None

    v = p
    t = 1.0
    step = step0
    f_prev_candidate = f_p
    for it in range(1, q + 1):
        fv, gv = value_and_grad(v)
        # backtracking on the quadratic surrogate around v
        s = step
        c = v
        fc = fv
        for _ in range(60):
            c = project(v - s * gv, box)
            fc = fun(c)
            d = c - v
            if np.isfinite(fc) and fc <= fv + float(gv @ d) + float(d @ d) / (2.0 * s):
                break
            s *= 0.5
        step = 2.0 * s

        if fc > f_prev_candidate:
            # function-value restart: drop the momentum
            t = 1.0
            v = c
        else:
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            v = c + ((t - 1.0) / t_next) * (c - p)
            t = t_next
        p = c
        f_prev_candidate = fc
        if fc < best_f:
            best_f = fc
            best_p = c
        trace[it] = best_f
        if record_iterates:
            iterates.append(c)

    return SolveReport(
        p_best=best_p,
        cost_trace=trace,
        J_star=float(trace[0]),
        J_best=float(trace[q]),
        J_penultimate=float(trace[q - 1]),
        iterations_run=q,
        iterates=tuple(iterates) if record_iterates else None,
    )
