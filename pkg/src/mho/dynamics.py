"""Continuous-time system models and fixed-step propagation.

States are plain float ndarrays.  Input sequences are arrays ordered
oldest first; sample ``i`` of a sequence drives the step from instant
``i`` to ``i + 1`` under a zero-order hold.  Integration is classical
fourth-order Runge-Kutta with one step per sampling period.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial
from typing import Callable, Optional

import numpy as np

from ._jit import njit
from .measurement import WindowUnderflowError


class IntegrationDivergenceError(RuntimeError):
    """A propagated state stopped being finite."""


@dataclass(frozen=True)
class SystemModel:
    """Deterministic continuous-time model with a measured output.

    ``rhs(x, u)`` returns the state derivative, ``output_map(x, u)`` the
    measurement.  ``rhs_jac``/``output_jac`` (Jacobians w.r.t. the state)
    are optional; when present they enable exact sensitivity propagation
    in the cost gradient.  ``tag`` selects compiled fast paths and must
    be left at ``"generic"`` for user-supplied models.
    """

    state_dim: int
    param_a: Optional[float]
    rhs: Callable[[np.ndarray, float], np.ndarray]
    output_map: Callable[[np.ndarray, float], np.ndarray]
    rhs_jac: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    output_jac: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    output_dim: int = 1
    tag: str = "generic"


def vdp_rhs(x: np.ndarray, u: float, a: float) -> np.ndarray:
    """Modified van der Pol right-hand side.

    ``xdot = (x2, -a*x1 + (1 - u*x3*x1^2)*x2, 0)``; the third state is a
    constant (an uncertain plant parameter carried in the state vector).
    """
    x1, x2, x3 = x
    return np.array([x2, -a * x1 + (1.0 - u * x3 * x1 * x1) * x2, 0.0])


def vdp_rhs_jac(x: np.ndarray, u: float, a: float) -> np.ndarray:
    x1, x2, x3 = x
    return np.array(
        [
            [0.0, 1.0, 0.0],
            [-a - 2.0 * u * x3 * x1 * x2, 1.0 - u * x3 * x1 * x1, -u * x1 * x1 * x2],
            [0.0, 0.0, 0.0],
        ]
    )


def vdp_output(x: np.ndarray, u: float) -> np.ndarray:
    return np.array([x[0]])


def vdp_output_jac(x: np.ndarray, u: float) -> np.ndarray:
    return np.array([[1.0, 0.0, 0.0]])


def van_der_pol(a: float) -> SystemModel:
    """Van der Pol instance; ``a`` is the (possibly misestimated) stiffness."""
    return SystemModel(
        state_dim=3,
        param_a=a,
        rhs=partial(vdp_rhs, a=a),
        output_map=vdp_output,
        rhs_jac=partial(vdp_rhs_jac, a=a),
        output_jac=vdp_output_jac,
        output_dim=1,
        tag="vdp",
    )


@njit(cache=True)
def _vdp_rk4_steps(p: np.ndarray, us: np.ndarray, n: int, a: float, h: float) -> np.ndarray:
    """Propagate a van der Pol state ``n`` RK4 steps; ``us[i]`` drives step i."""
    x1 = p[0]
    x2 = p[1]
    x3 = p[2]
    for i in range(n):
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
    out = np.empty(3)
    out[0] = x1
    out[1] = x2
    out[2] = x3
    return out


def integrate_step(model: SystemModel, x: np.ndarray, u: float, dt: float) -> np.ndarray:
    """One classical RK4 step with the input held constant over ``dt``."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    k1 = model.rhs(x, u)
    k2 = model.rhs(x + 0.5 * dt * k1, u)
    k3 = model.rhs(x + 0.5 * dt * k2, u)
    k4 = model.rhs(x + dt * k3, u)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise IntegrationDivergenceError(f"state diverged at x={x}, u={u}")
    return out


def transition(
    model: SystemModel, M: int, x0: np.ndarray, u_seq: np.ndarray, dt: float
) -> np.ndarray:
    """Apply ``M`` integration steps driven by ``u_seq[0..M-1]``.

    ``M = 0`` returns ``x0`` unchanged.  Extra trailing inputs are
    ignored (sequences are sized by context).
    """
    if M < 0:
        raise ValueError(f"step count must be nonnegative, got {M}")
    u_seq = np.asarray(u_seq, dtype=float)
    if len(u_seq) < M:
        raise WindowUnderflowError(f"{M} steps need {M} inputs, got {len(u_seq)}")
    x0 = np.asarray(x0, dtype=float)
    if M == 0:
        return x0.copy()
    if model.tag == "vdp":
        out = _vdp_rk4_steps(x0, u_seq, M, model.param_a, dt)
        if not np.all(np.isfinite(out)):
            raise IntegrationDivergenceError("state diverged during propagation")
        return out
    x = x0
    for i in range(M):
        x = integrate_step(model, x, u_seq[i], dt)
    return x


def predict_outputs(
    model: SystemModel, p: np.ndarray, u_seq: np.ndarray, N: int, dt: float
) -> np.ndarray:
    """Model outputs along the trajectory started at ``p``.

    Returns an ``(N + 1, output_dim)`` array; row ``i`` is the output at
    the i-th sample of the prediction window.  ``u_seq`` must supply
    ``N + 1`` samples (the last one only feeds the final output map).
    """
    u_seq = np.asarray(u_seq, dtype=float)
    if len(u_seq) < N + 1:
        raise WindowUnderflowError(f"prediction over {N} steps needs {N + 1} inputs")
    x = np.asarray(p, dtype=float)
    ys = np.empty((N + 1, model.output_dim))
    for i in range(N + 1):
        ys[i] = model.output_map(x, u_seq[i])
        if i < N:
            x = integrate_step(model, x, u_seq[i], dt)
    return ys
