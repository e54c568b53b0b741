import json
import math

import numpy as np
import pytest

from piezobeam.cli import (ConfigError, load_config, main,
                           recompute_metrics_from_csv, run_scenario)


def write(tmp_path, text, name="config.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestLoadConfig:
    def test_empty_file_gives_defaults(self, tmp_path):
        cfg = load_config(write(tmp_path, ""))
        assert cfg.beam.L == 0.15
        assert cfg.beam.t_b == 0.8e-3
        assert cfg.beam.b == 1.5e-2
        assert cfg.beam.rho_b == 3960
        assert cfg.beam.E_b == 70e9
        assert cfg.beam.G_b == 30e9
        assert cfg.beam.zeta_flex == (0.01, 0.0016)
        assert cfg.beam.zeta_tors == (0.01, 0.0033)
        assert cfg.Omega == 20.0
        assert cfg.n_modes == 2

    def test_no_file_gives_defaults(self):
        cfg = load_config(None)
        assert cfg.beam.L == 0.15

    def test_damping_out_of_range(self, tmp_path):
        path = write(tmp_path, "beam:\n  zeta_flex: [1.5, 0.0016]\n")
        with pytest.raises(ConfigError, match="damping ratio out of"):
            load_config(path)

    def test_bad_patch_interval(self, tmp_path):
        path = write(tmp_path, "piezo:\n  l1: 0.08\n  l2: 0.02\n")
        with pytest.raises(ConfigError, match="l1"):
            load_config(path)

    def test_patch_beyond_beam(self, tmp_path):
        path = write(tmp_path, "piezo:\n  l2: 0.2\n")
        with pytest.raises(ConfigError, match="l2"):
            load_config(path)

    def test_unparseable_field_named(self, tmp_path):
        path = write(tmp_path, "sim:\n  dt: fast\n")
        with pytest.raises(ConfigError, match="sim.dt"):
            load_config(path)

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            load_config("/nonexistent/nope.yaml")

    def test_zero_spin_propagates_to_decoupling(self, tmp_path):
        from piezobeam.cli import _sim_config, build_model
        from piezobeam.dynamics import simulate
        cfg = load_config(write(tmp_path, "sim:\n  Omega: 0\n  t_final: 0.05\n"))
        basis, mats = build_model(cfg)
        tr = simulate(_sim_config(cfg, "free", False), mats, basis)
        assert np.max(np.abs(tr.tip_theta)) < 1e-14


@pytest.fixture(scope="module")
def short_cfg(tmp_path_factory):
    # small release keeps the controller useful under the 200 V saturation
    path = tmp_path_factory.mktemp("cfg") / "short.yaml"
    path.write_text("sim:\n  t_final: 0.5\n  tip_w0: 0.5e-3\n")
    return load_config(str(path))


class TestRunScenario:
    def test_free_controller_shrinks_settling(self, short_cfg, tmp_path):
        m_off = run_scenario("free", short_cfg, tmp_path / "off", controller_on=False)
        m_on = run_scenario("free", short_cfg, tmp_path / "on", controller_on=True)
        t_off = m_off["settling_time_s"] or math.inf
        t_on = m_on["settling_time_s"] or math.inf
        assert t_on < t_off

    def test_csv_format_and_row_count(self, short_cfg, tmp_path):
        run_scenario("free", short_cfg, tmp_path, controller_on=False)
        lines = (tmp_path / "free_off.csv").read_text().splitlines()
        header = lines[0].split(",")
        assert header == ["t", "p1", "p2", "q1", "q2", "dp1", "dp2",
                          "dq1", "dq2", "w_tip", "theta_tip", "v_p"]
        n_expected = math.floor(short_cfg.t_final / short_cfg.dt + 1e-9) + 1
        assert len(lines) - 1 == n_expected
        t = np.array([float(l.split(",", 1)[0]) for l in lines[1:]])
        dt = np.diff(t)
        assert np.all(dt > 0)
        assert np.max(np.abs(dt - short_cfg.dt)) < 1e-12

    def test_manifest_written_and_determinism(self, short_cfg, tmp_path):
        run_scenario("free", short_cfg, tmp_path / "a", controller_on=True)
        run_scenario("free", short_cfg, tmp_path / "b", controller_on=True)
        csv_a = (tmp_path / "a" / "free_on.csv").read_bytes()
        csv_b = (tmp_path / "b" / "free_on.csv").read_bytes()
        assert csv_a == csv_b
        man_a = json.loads((tmp_path / "a" / "free_on_manifest.json").read_text())
        man_b = json.loads((tmp_path / "b" / "free_on_manifest.json").read_text())
        assert man_a == man_b
        assert man_a["matrices_sha256"]
        assert man_a["config"]["beam"]["L"] == 0.15

    def test_metrics_recomputable_from_csv(self, short_cfg, tmp_path):
        from piezobeam.assembly import linear_frequencies
        from piezobeam.cli import build_model
        metrics = run_scenario("free", short_cfg, tmp_path, controller_on=True)
        _, mats = build_model(short_cfg)
        om_f, _ = linear_frequencies(mats, 0.0)
        redo = recompute_metrics_from_csv(tmp_path / "free_on.csv",
                                          2 * math.pi / om_f[0])
        for key, val in redo.items():
            assert metrics[key] == val

    def test_disturbance_attenuation_and_fft_peak(self, short_cfg, tmp_path):
        metrics = run_scenario("disturbance", short_cfg, tmp_path, controller_on=True)
        assert metrics["attenuation_db"] > 0
        # dominant FFT peak of the uncontrolled companion sits at 24 Hz
        data = np.genfromtxt(tmp_path / "disturbance_off.csv",
                             delimiter=",", names=True)
        w = data["w_tip"] * np.hanning(data["w_tip"].size)
        spec = np.abs(np.fft.rfft(w))
        freqs = np.fft.rfftfreq(w.size, d=short_cfg.dt)
        f_peak = freqs[np.argmax(spec[1:]) + 1]
        assert abs(f_peak - 24.0) < 1.5 * freqs[1] + 0.5

    def test_unknown_scenario(self, short_cfg, tmp_path):
        with pytest.raises(ConfigError):
            run_scenario("bogus", short_cfg, tmp_path)


class TestMainExitCodes:
    def test_success(self, tmp_path, capsys):
        cfg = write(tmp_path, "sim:\n  t_final: 0.02\n  tip_w0: 0.2e-3\n")
        rc = main(["--config", cfg, "--scenario", "free", "--controller", "off",
                   "--out", str(tmp_path / "out")])
        assert rc == 0
        assert "free" in capsys.readouterr().out

    def test_config_error(self, tmp_path, capsys):
        cfg = write(tmp_path, "beam:\n  zeta_flex: [2.0, 0.1]\n")
        assert main(["--config", cfg, "--out", str(tmp_path / "o")]) == 2

    def test_numeric_failure(self, tmp_path, capsys):
        # absurd release amplitude blows up the fixed-step integrator
        cfg = write(tmp_path, "sim:\n  t_final: 0.3\n  tip_w0: 0.5\n  dt: 3.0e-5\n")
        rc = main(["--config", cfg, "--scenario", "free", "--controller", "off",
                   "--out", str(tmp_path / "o")])
        assert rc == 3

    def test_authority_failure(self, tmp_path, capsys):
        # degenerate patch: F1 = 0, the controller has no authority
        cfg = write(tmp_path, "piezo:\n  l1: 0.03\n  l2: 0.03\n"
                              "sim:\n  t_final: 0.01\n")
        rc = main(["--config", cfg, "--scenario", "free", "--controller", "on",
                   "--out", str(tmp_path / "o")])
        assert rc == 4

    def test_export_matrices(self, tmp_path):
        out = tmp_path / "mats.txt"
        rc = main(["--export-matrices", str(out)])
        assert rc == 0
        text = out.read_text()
        assert text.startswith("# modal system matrices, n = 2")
        assert "K1 2 2" in text and "F1 2" in text

    def test_override_flags(self, tmp_path, capsys):
        rc = main(["--scenario", "free", "--controller", "off",
                   "--tfinal", "0.01", "--omega", "0", "--modes", "2",
                   "--out", str(tmp_path / "o")])
        assert rc == 0
        data = np.genfromtxt(tmp_path / "o" / "free_off.csv",
                             delimiter=",", names=True)
        assert np.max(np.abs(data["theta_tip"])) < 1e-14
