"""Feedback-linearization voltage law on the tip-deflection output.

The tip deflection y = sum_j phi_j(L) p_j has relative degree two with
respect to the piezo voltage, so cancelling the modeled flexural dynamics
through the input leaves ydd + k1*yd + k0*y = 0 in closed loop.
"""

from dataclasses import dataclass

import numpy as np

from .dynamics import cubic_force


class ControlAuthorityError(RuntimeError):
    def __init__(self, beta):
        super().__init__(f"loss of control authority: decoupling gain {beta:.3g} "
                         "below tolerance (output weights nearly orthogonal to F1)")
        self.beta = beta


def design_gains(omega_cl, zeta_cl):
    """Closed-loop polynomial s^2 + k1*s + k0 from (bandwidth, damping)."""
    if omega_cl <= 0 or zeta_cl <= 0:
        raise ValueError("closed-loop frequency and damping must be > 0")
    return omega_cl ** 2, 2.0 * zeta_cl * omega_cl


@dataclass
class ControllerConfig:
    k0: float
    k1: float
    output_weights: np.ndarray
    v_max: float = None
    authority_tolerance: float = 1e-12

    def __post_init__(self):
        if self.k0 <= 0 or self.k1 <= 0:
            raise ValueError("closed-loop polynomial must be Hurwitz (k0, k1 > 0)")
        self.output_weights = np.asarray(self.output_weights, dtype=float)
        if not np.any(self.output_weights):
            raise ValueError("output weights must not all be zero")


def output(x, weights):
    """(y, ydot) of the weighted flexural output."""
    c = np.asarray(weights, dtype=float)
    n = c.size
    return float(c @ x[:n]), float(c @ x[2 * n:3 * n])


def control_voltage(x, t, mats, ctrl, omega):
    """Linearizing voltage; the measured disturbance is not fed forward."""
    n = mats.n
    c = ctrl.output_weights
    p, qd, pd = x[:n], x[3 * n:], x[2 * n:3 * n]
    h = (-(mats.CB @ pd)
         - omega * (mats.C1 @ qd)
         - mats.K1 @ p - omega ** 2 * (mats.D1 @ p)
         - cubic_force(mats.G1, p))
    a = float(c @ mats.solve_M1(h))
    beta = float(c @ mats.solve_M1(mats.F1))
    if abs(beta) < ctrl.authority_tolerance:
        raise ControlAuthorityError(beta)
    y, yd = output(x, c)
    v = (-ctrl.k0 * y - ctrl.k1 * yd - a) / beta
    if ctrl.v_max is not None:
        v = float(np.clip(v, -ctrl.v_max, ctrl.v_max))
    return v


def make_policy(mats, ctrl, omega):
    """Voltage policy closure for the simulator (state, t) -> volts."""
    def policy(x, t):
        return control_voltage(x, t, mats, ctrl, omega)
    return policy
