"""Right-hand side, time stepping and energy oracle for the modal equations.

State layout is fixed: x = [p; q; pdot; qdot], length 4n, with p the flexural
and q the torsional modal coordinates.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import linear_frequencies


class IntegrationBlowupError(RuntimeError):
    def __init__(self, t):
        super().__init__(f"non-finite state at t = {t:.6g} s")
        self.t = t


@dataclass
class State:
    p: np.ndarray
    q: np.ndarray
    pdot: np.ndarray
    qdot: np.ndarray

    def to_vector(self):
        return np.concatenate([self.p, self.q, self.pdot, self.qdot])

    @classmethod
    def from_vector(cls, x, n):
        x = np.asarray(x, dtype=float)
        if x.size != 4 * n:
            raise ValueError(f"state vector length {x.size} != 4n = {4 * n}")
        return cls(p=x[:n].copy(), q=x[n:2 * n].copy(),
                   pdot=x[2 * n:3 * n].copy(), qdot=x[3 * n:].copy())

    @classmethod
    def zero(cls, n):
        return cls(*(np.zeros(n) for _ in range(4)))


@dataclass(frozen=True)
class Disturbance:
    """Additive harmonic generalized force on one flexural modal equation."""

    amplitude: float = 0.001
    frequency: float = 24.0  # Hz
    target: int = 1          # 1-based flexural equation index

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("Disturbance.amplitude must be >= 0")
        if self.frequency <= 0:
            raise ValueError("Disturbance.frequency must be > 0")
        if self.target < 1:
            raise ValueError("Disturbance.target must be >= 1")

    def force(self, t):
        return self.amplitude * math.sin(2.0 * math.pi * self.frequency * t)


@dataclass
class SimConfig:
    Omega: float = 20.0
    dt: float = 2e-5
    t_final: float = 2.0
    initial_state: State = None
    disturbance: Disturbance = None
    controller_on: bool = False

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("SimConfig.dt must be > 0")
        if self.t_final < 0:
            raise ValueError("SimConfig.t_final must be >= 0")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray          # (N, 4n)
    tip_w: np.ndarray
    tip_theta: np.ndarray
    voltage: np.ndarray
    metrics: dict = field(default_factory=dict)


def cubic_force(G1, p):
    """g_i = sum_jkl G1_ijkl p_j p_k p_l."""
    return np.einsum("ijkl,j,k,l->i", G1, p, p, p)


def rhs(x, t, v_p, mats, omega, disturbance=None):
    """Time derivative of the stacked state under piezo voltage v_p."""
    if not np.all(np.isfinite(x)):
        raise IntegrationBlowupError(t)
    n = mats.n
    p, q = x[:n], x[n:2 * n]
    pd, qd = x[2 * n:3 * n], x[3 * n:]
    h1 = (mats.F1 * v_p
          - mats.CB @ pd
          - omega * (mats.C1 @ qd)
          - mats.K1 @ p - omega ** 2 * (mats.D1 @ p)
          - cubic_force(mats.G1, p))
    if disturbance is not None:
        h1 = h1.copy()
        h1[disturbance.target - 1] += disturbance.force(t)
    h2 = -(mats.CT @ qd) - omega * (mats.C2 @ pd) - mats.K2 @ q
    if not (np.all(np.isfinite(h1)) and np.all(np.isfinite(h2))):
        raise IntegrationBlowupError(t)
    out = np.empty_like(x)
    out[:2 * n] = x[2 * n:]
    out[2 * n:3 * n] = mats.solve_M1(h1)
    out[3 * n:] = mats.solve_M2(h2)
    return out


def rk4_step(f, x, t, dt):
    """One classical Runge-Kutta step of x' = f(x, t)."""
    k1 = f(x, t)
    k2 = f(x + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = f(x + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = f(x + dt * k3, t + dt)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step(x, t, dt, mats, omega, policy=None, disturbance=None):
    """One RK4 step; the voltage policy is re-evaluated at every stage."""
    def f(xs, ts):
        v = policy(xs, ts) if policy is not None else 0.0
        return rhs(xs, ts, v, mats, omega, disturbance)

    out = rk4_step(f, x, t, dt)
    if not np.all(np.isfinite(out)):
        raise IntegrationBlowupError(t + dt)
    return out


def energy(x, mats):
    """Mechanical energy of the Omega-independent part of the model.

    Conserved along undamped, unforced trajectories at Omega = 0; the
    rigid-rotation and gyroscopic contributions are deliberately excluded.
    """
    n = mats.n
    p, q = x[:n], x[n:2 * n]
    pd, qd = x[2 * n:3 * n], x[3 * n:]
    quartic = 0.25 * np.einsum("ijkl,i,j,k,l->", mats.G1, p, p, p, p)
    return (0.5 * pd @ mats.M1 @ pd + 0.5 * qd @ mats.M2 @ qd
            + 0.5 * p @ mats.K1 @ p + 0.5 * q @ mats.K2 @ q + quartic)


def _settling_time(times, tip_w, period1):
    """Earliest time after which |tip_w| stays below 1% of its peak for at
    least five first-mode periods; None if never sustained."""
    peak = np.max(np.abs(tip_w))
    if peak == 0.0:
        return 0.0
    thr = 0.01 * peak
    above = np.abs(tip_w) >= thr
    if not above.any():
        t_last = times[0]
    else:
        t_last = times[np.nonzero(above)[0][-1]]
    if times[-1] - t_last >= 5.0 * period1:
        return float(t_last)
    return None


def compute_metrics(times, tip_w, voltage, period1):
    """Scalar summary metrics; recomputable from the CSV columns alone."""
    half = times >= 0.5 * times[-1] if times.size > 1 else slice(None)
    return {
        "settling_time_s": _settling_time(times, tip_w, period1),
        "peak_tip_m": float(np.max(np.abs(tip_w))),
        "rms_tip_after_transient_m": float(np.sqrt(np.mean(tip_w[half] ** 2))),
        "peak_voltage_V": float(np.max(np.abs(voltage))),
    }


def simulate(config, mats, basis, controller=None):
    """Fixed-step RK4 run; returns the sampled Trajectory with metrics."""
    n = mats.n
    om_f, om_t = linear_frequencies(mats, 0.0)
    f_max = max(om_f[-1], om_t[-1]) / (2.0 * math.pi)
    if config.dt > 1.0 / (20.0 * f_max):
        raise ValueError(f"SimConfig.dt = {config.dt} too coarse for highest "
                         f"retained frequency {f_max:.1f} Hz (need dt <= {1.0 / (20.0 * f_max):.3g})")

    policy = None
    if config.controller_on:
        if controller is None:
            raise ValueError("controller_on set but no control policy supplied")
        policy = controller

    x0 = (config.initial_state or State.zero(n)).to_vector()
    nsteps = int(math.floor(config.t_final / config.dt + 1e-9))
    times = np.arange(nsteps + 1) * config.dt
    states = np.empty((nsteps + 1, 4 * n))
    voltage = np.zeros(nsteps + 1)
    x = x0
    for i in range(nsteps + 1):
        states[i] = x
        voltage[i] = policy(x, times[i]) if policy is not None else 0.0
        if i < nsteps:
            try:
                x = step(x, times[i], config.dt, mats, config.Omega,
                         policy=policy, disturbance=config.disturbance)
            except IntegrationBlowupError:
                raise
    phiL = basis.flexural_tip_values()
    psiL = basis.torsional_tip_values()
    tip_w = states[:, :n] @ phiL
    tip_theta = states[:, n:2 * n] @ psiL
    metrics = compute_metrics(times, tip_w, voltage, 2.0 * math.pi / om_f[0])
    return Trajectory(times=times, states=states, tip_w=tip_w,
                      tip_theta=tip_theta, voltage=voltage, metrics=metrics)
