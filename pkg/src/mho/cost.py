"""Window least-squares cost with arrival term and positivity floor.

For a window of ``N + 1`` measurements starting at the window-start
state ``p``::

    J(p) = floor_c + sum_i ||yhat_i(p) - y_i||^2 + rho * ||p - p_hat||^2

``floor_c > 0`` keeps every cost ratio well defined.  Trajectories that
stop being finite are mapped to a large finite sentinel (with a zero
gradient) so that line searches remain total functions.

The gradient propagates exact sensitivities of the discrete RK4 map
(forward chain rule) when the model provides a state Jacobian, and
falls back to forward finite differences otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._jit import njit
from .dynamics import IntegrationDivergenceError, SystemModel, integrate_step
from .measurement import ObservationWindow

SENTINEL_COST = 1e12

_FD_STEP = 1e-7


@dataclass(frozen=True)
class CostSpec:
    """Cost parameters: observer-side model, horizon and weights."""

    model: SystemModel
    N: int
    rho: float = 0.01
    floor_c: float = 1e-8

    def __post_init__(self):
        if self.floor_c <= 0.0:
            raise ValueError("floor_c must be positive")
        if self.rho < 0.0:
            raise ValueError("rho must be nonnegative")
        if self.N < 0:
            raise ValueError("window horizon must be nonnegative")


@njit(cache=True)
def _vdp_window_cost(p, us, ys, p_hat, a, h, rho, floor_c):
    """Scalar-output van der Pol window cost; sentinel on divergence."""
    n = ys.shape[0] - 1
    x1 = p[0]
    x2 = p[1]
    x3 = p[2]
    acc = 0.0
    for i in range(n + 1):
        r = x1 - ys[i]
        acc += r * r
        if i < n:
            u = us[i]
            k1_1 = x2
            k1_2 = -a * x1 + (1.0 - u * x3 * x1 * x1) * x2
            b1 = x1 + 0.5 * h * k1_1
            b2 = x2 + 0.5 * h * k1_2
            k2_1 = b2
            k2_2 = -a * b1 + (1.0 - u * x3 * b1 * b1) * b2
            c1 = x1 + 0.5 * h * k2_1
            c2 = x2 + 0.5 * h * k2_2
            k3_1 = c2
            k3_2 = -a * c1 + (1.0 - u * x3 * c1 * c1) * c2
            d1 = x1 + h * k3_1
            d2 = x2 + h * k3_2
            k4_1 = d2
            k4_2 = -a * d1 + (1.0 - u * x3 * d1 * d1) * d2
            x1 = x1 + (h / 6.0) * (k1_1 + 2.0 * k2_1 + 2.0 * k3_1 + k4_1)
            x2 = x2 + (h / 6.0) * (k1_2 + 2.0 * k2_2 + 2.0 * k3_2 + k4_2)
    e1 = p[0] - p_hat[0]
    e2 = p[1] - p_hat[1]
    e3 = p[2] - p_hat[2]
    acc += rho * (e1 * e1 + e2 * e2 + e3 * e3)
    if not np.isfinite(acc):
        return SENTINEL_COST + floor_c
    return floor_c + acc


@njit(cache=True)
def _vdp_window_cost_grad(p, us, ys, p_hat, a, h, rho, floor_c):
    """Fused cost value and gradient via forward sensitivity propagation.

    The sensitivity S = dx/dp is chained through the exact Jacobian of
    the discrete RK4 map.  The third state has zero time derivative, so
    the bottom sensitivity row stays (0, 0, 1) and is not stored.
    """
    n = ys.shape[0] - 1
    x1 = p[0]
    x2 = p[1]
    x3 = p[2]
    s11 = 1.0
    s12 = 0.0
    s13 = 0.0
    s21 = 0.0
    s22 = 1.0
    s23 = 0.0
    acc = 0.0
    g1 = 0.0
    g2 = 0.0
    g3 = 0.0
    for i in range(n + 1):
        r = x1 - ys[i]
        acc += r * r
        g1 += 2.0 * r * s11
        g2 += 2.0 * r * s12
        g3 += 2.0 * r * s13
        if i < n:
            u = us[i]
            k1_1 = x2
            k1_2 = -a * x1 + (1.0 - u * x3 * x1 * x1) * x2
            b1 = x1 + 0.5 * h * k1_1
            b2 = x2 + 0.5 * h * k1_2
            k2_1 = b2
            k2_2 = -a * b1 + (1.0 - u * x3 * b1 * b1) * b2
            c1 = x1 + 0.5 * h * k2_1
            c2 = x2 + 0.5 * h * k2_2
            k3_1 = c2
            k3_2 = -a * c1 + (1.0 - u * x3 * c1 * c1) * c2
            d1 = x1 + h * k3_1
            d2 = x2 + h * k3_2
            k4_1 = d2
            k4_2 = -a * d1 + (1.0 - u * x3 * d1 * d1) * d2
            nx1 = x1 + (h / 6.0) * (k1_1 + 2.0 * k2_1 + 2.0 * k3_1 + k4_1)
            nx2 = x2 + (h / 6.0) * (k1_2 + 2.0 * k2_2 + 2.0 * k3_2 + k4_2)

            # rhs Jacobian rows at the four stage points (row 1 is (0,1,0))
            a1_21 = -a - 2.0 * u * x3 * x1 * x2
            a1_22 = 1.0 - u * x3 * x1 * x1
            a1_23 = -u * x1 * x1 * x2
            # dk2 = A(b) (I + h/2 dk1)
            m21 = 0.5 * h * a1_21
            m22 = 1.0 + 0.5 * h * a1_22
            m23 = 0.5 * h * a1_23
            a2_21 = -a - 2.0 * u * x3 * b1 * b2
            a2_22 = 1.0 - u * x3 * b1 * b1
            a2_23 = -u * b1 * b1 * b2
            dk2_11 = m21
            dk2_12 = m22
            dk2_13 = m23
            dk2_21 = a2_21 + a2_22 * m21
            dk2_22 = a2_21 * 0.5 * h + a2_22 * m22
            dk2_23 = a2_22 * m23 + a2_23
            # dk3 = A(c) (I + h/2 dk2)
            n11 = 1.0 + 0.5 * h * dk2_11
            n12 = 0.5 * h * dk2_12
            n13 = 0.5 * h * dk2_13
            n21 = 0.5 * h * dk2_21
            n22 = 1.0 + 0.5 * h * dk2_22
            n23 = 0.5 * h * dk2_23
            a3_21 = -a - 2.0 * u * x3 * c1 * c2
            a3_22 = 1.0 - u * x3 * c1 * c1
            a3_23 = -u * c1 * c1 * c2
            dk3_11 = n21
            dk3_12 = n22
            dk3_13 = n23
            dk3_21 = a3_21 * n11 + a3_22 * n21
            dk3_22 = a3_21 * n12 + a3_22 * n22
            dk3_23 = a3_21 * n13 + a3_22 * n23 + a3_23
            # dk4 = A(d) (I + h dk3)
            o11 = 1.0 + h * dk3_11
            o12 = h * dk3_12
            o13 = h * dk3_13
            o21 = h * dk3_21
            o22 = 1.0 + h * dk3_22
            o23 = h * dk3_23
            a4_21 = -a - 2.0 * u * x3 * d1 * d2
            a4_22 = 1.0 - u * x3 * d1 * d1
            a4_23 = -u * d1 * d1 * d2
            dk4_11 = o21
            dk4_12 = o22
            dk4_13 = o23
            dk4_21 = a4_21 * o11 + a4_22 * o21
            dk4_22 = a4_21 * o12 + a4_22 * o22
            dk4_23 = a4_21 * o13 + a4_22 * o23 + a4_23
            # Phi = I + h/6 (dk1 + 2 dk2 + 2 dk3 + dk4)
            c6 = h / 6.0
            p11 = 1.0 + c6 * (2.0 * dk2_11 + 2.0 * dk3_11 + dk4_11)
            p12 = c6 * (1.0 + 2.0 * dk2_12 + 2.0 * dk3_12 + dk4_12)
            p13 = c6 * (2.0 * dk2_13 + 2.0 * dk3_13 + dk4_13)
            p21 = c6 * (a1_21 + 2.0 * dk2_21 + 2.0 * dk3_21 + dk4_21)
            p22 = 1.0 + c6 * (a1_22 + 2.0 * dk2_22 + 2.0 * dk3_22 + dk4_22)
            p23 = c6 * (a1_23 + 2.0 * dk2_23 + 2.0 * dk3_23 + dk4_23)
            t11 = p11 * s11 + p12 * s21
            t12 = p11 * s12 + p12 * s22
            t13 = p11 * s13 + p12 * s23 + p13
            t21 = p21 * s11 + p22 * s21
            t22 = p21 * s12 + p22 * s22
            t23 = p21 * s13 + p22 * s23 + p23
            s11 = t11
            s12 = t12
            s13 = t13
            s21 = t21
            s22 = t22
            s23 = t23
            x1 = nx1
            x2 = nx2
    e1 = p[0] - p_hat[0]
    e2 = p[1] - p_hat[1]
    e3 = p[2] - p_hat[2]
    acc += rho * (e1 * e1 + e2 * e2 + e3 * e3)
    g1 += 2.0 * rho * e1
    g2 += 2.0 * rho * e2
    g3 += 2.0 * rho * e3
    g = np.zeros(3)
    if not (np.isfinite(acc) and np.isfinite(g1) and np.isfinite(g2) and np.isfinite(g3)):
        return SENTINEL_COST + floor_c, g
    g[0] = g1
    g[1] = g2
    g[2] = g3
    return floor_c + acc, g


def _evaluate_generic(spec, p, window, p_hat):
    model = spec.model
    x = p
    acc = 0.0
    n = window.horizon
    try:
        for i in range(n + 1):
            r = np.asarray(model.output_map(x, window.us[i]), dtype=float).ravel() - np.atleast_1d(
                window.ys[i]
            )
            acc += float(r @ r)
            if i < n:
                x = integrate_step(model, x, window.us[i], window.tau)
    except IntegrationDivergenceError:
        return SENTINEL_COST + spec.floor_c
    e = p - p_hat
    acc += spec.rho * float(e @ e)
    if not np.isfinite(acc):
        return SENTINEL_COST + spec.floor_c
    return spec.floor_c + acc


def _gradient_generic(spec, p, window, p_hat):
    model = spec.model
    if model.rhs_jac is None or model.output_jac is None:
        # forward-difference fallback for models without Jacobians
        f0 = _evaluate_generic(spec, p, window, p_hat)
        g = np.zeros_like(p)
        for j in range(len(p)):
            step = _FD_STEP * max(1.0, abs(p[j]))
            pj = p.copy()
            pj[j] += step
            g[j] = (_evaluate_generic(spec, pj, window, p_hat) - f0) / step
        return f0, g

    n = window.horizon
    dim = model.state_dim
    x = p
    S = np.eye(dim)
    acc = 0.0
    g = np.zeros(dim)
    h = window.tau
    try:
        for i in range(n + 1):
            u = window.us[i]
            r = np.asarray(model.output_map(x, u), dtype=float).ravel() - np.atleast_1d(window.ys[i])
            H = np.asarray(model.output_jac(x, u), dtype=float)
            acc += float(r @ r)
            g += 2.0 * (r @ H @ S)
            if i < n:
                k1 = model.rhs(x, u)
                xb = x + 0.5 * h * k1
                k2 = model.rhs(xb, u)
                xc = x + 0.5 * h * k2
                k3 = model.rhs(xc, u)
                xd = x + h * k3
                k4 = model.rhs(xd, u)
                I = np.eye(dim)
                dk1 = model.rhs_jac(x, u)
                dk2 = model.rhs_jac(xb, u) @ (I + 0.5 * h * dk1)
                dk3 = model.rhs_jac(xc, u) @ (I + 0.5 * h * dk2)
                dk4 = model.rhs_jac(xd, u) @ (I + h * dk3)
                Phi = I + (h / 6.0) * (dk1 + 2.0 * dk2 + 2.0 * dk3 + dk4)
                x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                if not np.all(np.isfinite(x)):
                    raise IntegrationDivergenceError("diverged")
                S = Phi @ S
    except IntegrationDivergenceError:
        return SENTINEL_COST + spec.floor_c, np.zeros(dim)
    e = p - p_hat
    acc += spec.rho * float(e @ e)
    g += 2.0 * spec.rho * e
    if not (np.isfinite(acc) and np.all(np.isfinite(g))):
        return SENTINEL_COST + spec.floor_c, np.zeros(dim)
    return spec.floor_c + acc, g


def evaluate(spec: CostSpec, p, window: ObservationWindow, p_hat) -> float:
    """Cost of the window-start state ``p``; always ``>= floor_c``."""
    p = np.asarray(p, dtype=float)
    p_hat = np.asarray(p_hat, dtype=float)
    if spec.model.tag == "vdp":
        return float(
            _vdp_window_cost(
                p, window.us, window.ys, p_hat,
                spec.model.param_a, window.tau, spec.rho, spec.floor_c,
            )
        )
    return _evaluate_generic(spec, p, window, p_hat)


def value_and_gradient(spec: CostSpec, p, window: ObservationWindow, p_hat):
    """Cost and its gradient w.r.t. ``p`` in one trajectory pass."""
    p = np.asarray(p, dtype=float)
    p_hat = np.asarray(p_hat, dtype=float)
    if spec.model.tag == "vdp":
        v, g = _vdp_window_cost_grad(
            p, window.us, window.ys, p_hat,
            spec.model.param_a, window.tau, spec.rho, spec.floor_c,
        )
        return float(v), g
    return _gradient_generic(spec, p, window, p_hat)


def gradient(spec: CostSpec, p, window: ObservationWindow, p_hat) -> np.ndarray:
    return value_and_gradient(spec, p, window, p_hat)[1]


class WindowCost:
    """Cost spec bound to one observation window and one arrival anchor.

    This is the callable bundle handed to the solver: ``value`` for line
    searches, ``value_and_grad`` for descent steps.
    """

    def __init__(self, spec: CostSpec, window: ObservationWindow, p_hat):
        if window.horizon != spec.N:
            raise ValueError(
                f"window has horizon {window.horizon}, cost expects {spec.N}"
            )
        self.spec = spec
        self.window = window
        self.p_hat = np.asarray(p_hat, dtype=float)

    def value(self, p) -> float:
        return evaluate(self.spec, p, self.window, self.p_hat)

    def value_and_grad(self, p):
        return value_and_gradient(self.spec, p, self.window, self.p_hat)
