"""Batch front end: config loading, the two shipped scenarios, CSV/JSON output.

Scenarios:
  free         release from an initial tip deflection, no external forcing
  disturbance  zero initial state, harmonic force on the first flexural
               modal equation (default 0.001 amplitude at 24 Hz)

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 loss of
control authority.
"""

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass

import numpy as np
import yaml

from .assembly import (BeamSpec, PiezoSpec, assemble, export_matrices,
                       linear_frequencies, SpinDestabilizedError)
from .basis import ModalBasis
from .control import ControlAuthorityError, ControllerConfig, design_gains, make_policy
from .dynamics import (Disturbance, IntegrationBlowupError, SimConfig, State,
                       compute_metrics, simulate)

SCENARIOS = ("free", "disturbance")


class ConfigError(Exception):
    pass


@dataclass
class AppConfig:
    beam: BeamSpec
    piezo: PiezoSpec
    n_modes: int
    Omega: float
    dt: float
    t_final: float
    tip_w0: float
    dist_amplitude: float
    dist_frequency: float
    dist_target: int
    ctrl_omega_cl: float  # None -> first flexural frequency at Omega = 0
    ctrl_zeta_cl: float
    ctrl_v_max: float

    def as_dict(self):
        d = {
            "beam": {k: getattr(self.beam, k) for k in
                     ("L", "t_b", "b", "rho_b", "E_b", "G_b")},
            "piezo": {k: getattr(self.piezo, k) for k in
                      ("l1", "l2", "t_p", "w_p", "E_p", "G_p", "rho_p", "d31", "v_max")},
            "sim": {"n_modes": self.n_modes, "Omega": self.Omega, "dt": self.dt,
                    "t_final": self.t_final, "tip_w0": self.tip_w0},
            "disturbance": {"amplitude": self.dist_amplitude,
                            "frequency": self.dist_frequency,
                            "target": self.dist_target},
            "controller": {"omega_cl": self.ctrl_omega_cl,
                           "zeta_cl": self.ctrl_zeta_cl, "v_max": self.ctrl_v_max},
        }
        d["beam"]["zeta_flex"] = list(self.beam.zeta_flex)
        d["beam"]["zeta_tors"] = list(self.beam.zeta_tors)
        return d


def _section(raw, name):
    sec = raw.get(name, {})
    if sec is None:
        sec = {}
    if not isinstance(sec, dict):
        raise ConfigError(f"config section '{name}' must be a mapping")
    return sec


def _get(sec, secname, key, default, kind=float):
    if key not in sec or sec[key] is None:
        return default
    try:
        return kind(sec[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{secname}.{key}: cannot parse {sec[key]!r}")


def load_config(path=None):
    """Build the fully resolved configuration; every field has a documented
    default (beam values from the reference parameter set)."""
    raw = {}
    if path is not None:
        try:
            with open(path) as fh:
                raw = yaml.safe_load(fh) or {}
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except yaml.YAMLError as exc:
            raise ConfigError(f"config parse error: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("top-level config must be a mapping")

    b = _section(raw, "beam")
    p = _section(raw, "piezo")
    s = _section(raw, "sim")
    d = _section(raw, "disturbance")
    c = _section(raw, "controller")

    def listf(sec, secname, key, default):
        val = sec.get(key, default)
        try:
            return tuple(float(v) for v in val)
        except (TypeError, ValueError):
            raise ConfigError(f"{secname}.{key}: must be a list of numbers")

    try:
        beam = BeamSpec(
            L=_get(b, "beam", "L", 0.15),
            t_b=_get(b, "beam", "t_b", 0.8e-3),
            b=_get(b, "beam", "b", 1.5e-2),
            rho_b=_get(b, "beam", "rho_b", 3960.0),
            E_b=_get(b, "beam", "E_b", 70e9),
            G_b=_get(b, "beam", "G_b", 30e9),
            zeta_flex=listf(b, "beam", "zeta_flex", (0.01, 0.0016)),
            zeta_tors=listf(b, "beam", "zeta_tors", (0.01, 0.0033)),
        )
        width = beam.b
        piezo = PiezoSpec(
            l1=_get(p, "piezo", "l1", 0.01),
            l2=_get(p, "piezo", "l2", 0.06),
            t_p=_get(p, "piezo", "t_p", 0.4e-3),
            w_p=_get(p, "piezo", "w_p", width),
            E_p=_get(p, "piezo", "E_p", 62e9),
            G_p=_get(p, "piezo", "G_p", 23e9),
            rho_p=_get(p, "piezo", "rho_p", 7500.0),
            d31=_get(p, "piezo", "d31", -320e-12),
            v_max=_get(p, "piezo", "v_max", 200.0),
        )
    except ValueError as exc:
        raise ConfigError(str(exc))

    if piezo.l2 > beam.L:
        raise ConfigError("piezo.l2: patch end beyond beam length")

    cfg = AppConfig(
        beam=beam,
        piezo=piezo,
        n_modes=_get(s, "sim", "n_modes", 2, int),
        Omega=_get(s, "sim", "Omega", 20.0),
        dt=_get(s, "sim", "dt", 2e-5),
        t_final=_get(s, "sim", "t_final", 2.0),
        tip_w0=_get(s, "sim", "tip_w0", 5e-3),
        dist_amplitude=_get(d, "disturbance", "amplitude", 0.001),
        dist_frequency=_get(d, "disturbance", "frequency", 24.0),
        dist_target=_get(d, "disturbance", "target", 1, int),
        ctrl_omega_cl=_get(c, "controller", "omega_cl", None),
        ctrl_zeta_cl=_get(c, "controller", "zeta_cl", 0.8),
        ctrl_v_max=_get(c, "controller", "v_max", piezo.v_max),
    )
    if cfg.n_modes < 1:
        raise ConfigError("sim.n_modes: must be >= 1")
    if cfg.dt <= 0:
        raise ConfigError("sim.dt: must be > 0")
    if cfg.t_final < 0:
        raise ConfigError("sim.t_final: must be >= 0")
    if cfg.dist_amplitude < 0:
        raise ConfigError("disturbance.amplitude: must be >= 0")
    if cfg.dist_frequency <= 0:
        raise ConfigError("disturbance.frequency: must be > 0")
    if not 1 <= cfg.dist_target <= cfg.n_modes:
        raise ConfigError("disturbance.target: outside 1..n_modes")
    if len(beam.zeta_flex) < cfg.n_modes or len(beam.zeta_tors) < cfg.n_modes:
        raise ConfigError("beam.zeta_flex/zeta_tors: need one damping ratio per mode")
    if cfg.ctrl_zeta_cl <= 0:
        raise ConfigError("controller.zeta_cl: must be > 0")
    return cfg


def build_model(cfg):
    """(basis, matrices) for a resolved configuration."""
    basis = ModalBasis.build(cfg.n_modes, cfg.beam.L)
    mats = assemble(cfg.beam, cfg.piezo, basis)
    return basis, mats


def _build_controller(cfg, mats, basis):
    om_f, _ = linear_frequencies(mats, 0.0)
    omega_cl = cfg.ctrl_omega_cl if cfg.ctrl_omega_cl else om_f[0]
    k0, k1 = design_gains(omega_cl, cfg.ctrl_zeta_cl)
    return ControllerConfig(k0=k0, k1=k1, output_weights=basis.flexural_tip_values(),
                            v_max=cfg.ctrl_v_max)


def _sim_config(cfg, scenario, controller_on):
    n = cfg.n_modes
    ic = State.zero(n)
    dist = None
    if scenario == "free":
        basis = ModalBasis.build(n, cfg.beam.L)
        ic.p[0] = cfg.tip_w0 / basis.flexural_tip_values()[0]
    else:
        dist = Disturbance(amplitude=cfg.dist_amplitude,
                           frequency=cfg.dist_frequency, target=cfg.dist_target)
    return SimConfig(Omega=cfg.Omega, dt=cfg.dt, t_final=cfg.t_final,
                     initial_state=ic, disturbance=dist, controller_on=controller_on)


def write_csv(path, traj, n):
    cols = (["t"] + [f"p{i}" for i in range(1, n + 1)]
            + [f"q{i}" for i in range(1, n + 1)]
            + [f"dp{i}" for i in range(1, n + 1)]
            + [f"dq{i}" for i in range(1, n + 1)]
            + ["w_tip", "theta_tip", "v_p"])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(traj.times.size):
            row = ([traj.times[i]] + list(traj.states[i])
                   + [traj.tip_w[i], traj.tip_theta[i], traj.voltage[i]])
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def run_scenario(name, cfg, out_dir, controller_on=True):
    """Run one scenario, writing manifest, CSV trajectory and metrics JSON.

    For the disturbance scenario with the controller on, an uncontrolled
    companion run is performed and exported alongside so the attenuation
    figure is reproducible from the written files.
    """
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; expected one of {SCENARIOS}")
    out_dir.mkdir(parents=True, exist_ok=True)
    basis, mats = build_model(cfg)
    tag = f"{name}_{'on' if controller_on else 'off'}"
    csv_path = out_dir / f"{tag}.csv"
    metrics_path = out_dir / f"{tag}_metrics.json"
    manifest_path = out_dir / f"{tag}_manifest.json"

    manifest = {
        "scenario": name,
        "controller": "on" if controller_on else "off",
        "config": cfg.as_dict(),
        "matrices_sha256": hashlib.sha256(mats.tobytes()).hexdigest(),
        "outputs": {"csv": csv_path.name, "metrics": metrics_path.name},
    }
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)

    controller = make_policy(mats, _build_controller(cfg, mats, basis), cfg.Omega) \
        if controller_on else None
    traj = simulate(_sim_config(cfg, name, controller_on), mats, basis,
                    controller=controller)
    write_csv(csv_path, traj, cfg.n_modes)

    metrics = dict(traj.metrics)
    if name == "disturbance" and controller_on:
        companion = simulate(_sim_config(cfg, name, False), mats, basis)
        write_csv(out_dir / f"{name}_off.csv", companion, cfg.n_modes)
        rms_off = companion.metrics["rms_tip_after_transient_m"]
        rms_on = metrics["rms_tip_after_transient_m"]
        metrics["attenuation_db"] = (20.0 * math.log10(rms_off / rms_on)
                                     if rms_on > 0 else float("inf"))
    with open(metrics_path, "w") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
    return metrics


def recompute_metrics_from_csv(csv_path, period1):
    """Re-derive the metrics from a written trajectory CSV (no hidden state)."""
    data = np.genfromtxt(csv_path, delimiter=",", names=True)
    return compute_metrics(np.atleast_1d(data["t"]), np.atleast_1d(data["w_tip"]),
                           np.atleast_1d(data["v_p"]), period1)


def make_parser():
    ap = argparse.ArgumentParser(
        prog="piezobeam",
        description="Rotating piezo-actuated cantilever: batch vibration "
                    "simulation and active control scenarios.")
    ap.add_argument("--config", type=str, default=None, help="YAML config file")
    ap.add_argument("--scenario", choices=list(SCENARIOS) + ["all"], default="free")
    ap.add_argument("--controller", choices=["on", "off"], default="on")
    ap.add_argument("--out", type=str, default="out", help="output directory")
    ap.add_argument("--dt", type=float, default=None, help="time step override [s]")
    ap.add_argument("--tfinal", type=float, default=None, help="duration override [s]")
    ap.add_argument("--omega", type=float, default=None, help="base rotation override [rad/s]")
    ap.add_argument("--modes", type=int, default=None, help="mode count per field")
    ap.add_argument("--seed", type=int, default=None,
                    help="reserved; runs are deterministic")
    ap.add_argument("--export-matrices", type=str, default=None,
                    help="write assembled matrices to a plain-text file and exit")
    return ap


def main(argv=None):
    from pathlib import Path

    args = make_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.dt is not None:
            cfg.dt = args.dt
        if args.tfinal is not None:
            cfg.t_final = args.tfinal
        if args.omega is not None:
            cfg.Omega = args.omega
        if args.modes is not None:
            cfg.n_modes = args.modes
            if len(cfg.beam.zeta_flex) < cfg.n_modes:
                raise ConfigError("beam.zeta_flex: need one damping ratio per mode")
        if cfg.dt <= 0:
            raise ConfigError("sim.dt: must be > 0")

        if args.export_matrices:
            _, mats = build_model(cfg)
            export_matrices(mats, args.export_matrices)
            return 0

        names = SCENARIOS if args.scenario == "all" else (args.scenario,)
        for name in names:
            metrics = run_scenario(name, cfg, Path(args.out),
                                   controller_on=args.controller == "on")
            print(f"{name} [controller {args.controller}]: "
                  + json.dumps(metrics, sort_keys=True))
        return 0
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (IntegrationBlowupError, SpinDestabilizedError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ControlAuthorityError as exc:
        print(f"control failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
