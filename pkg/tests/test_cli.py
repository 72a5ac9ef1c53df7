import json
import math
import shutil
import subprocess
import sys

import numpy as np
import pytest
from scipy.optimize import brentq

import rdstab as r
from rdstab.cli import EXPERIMENT_PRESETS, export, fit_decay_rate, main, run_experiment
from rdstab.errors import FitError, InvalidParameterError


def synthetic_trajectory(nt=101, tmax=1.0, rate=2.0, amp=3.0, noise=None):
    t = np.linspace(0.0, tmax, nt)
    l2 = amp * np.exp(-rate * t)
    if noise is not None:
        rng = np.random.default_rng(5)
        l2 = l2 * (1.0 + noise * rng.uniform(-1, 1, nt))
    return r.Trajectory(
        times=t,
        states=np.zeros((nt, 3)),
        controls=np.zeros(nt),
        l2_norms=l2,
        h1_norms=2.0 * l2,
        newton_iters=np.zeros(nt, dtype=int),
    )


class TestFitDecayRate:
    def test_exact_exponential(self):
        fit = fit_decay_rate(synthetic_trajectory())
        assert fit.rate == pytest.approx(2.0, abs=1e-10)
        assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-10)
        assert fit.r_squared > 1.0 - 1e-12
        assert fit.window == (0.3, 0.9)

    def test_h1_channel(self):
        fit = fit_decay_rate(synthetic_trajectory(), norm="h1")
        assert fit.rate == pytest.approx(2.0, abs=1e-10)
        assert fit.intercept == pytest.approx(math.log(6.0), abs=1e-10)
        with pytest.raises(InvalidParameterError):
            fit_decay_rate(synthetic_trajectory(), norm="sup")

    def test_explicit_window(self):
        fit = fit_decay_rate(synthetic_trajectory(), window=(0.1, 0.4))
        assert fit.window == (0.1, 0.4)
        assert fit.rate == pytest.approx(2.0, abs=1e-10)

    def test_constant_history(self):
        traj = synthetic_trajectory(rate=0.0)
        fit = fit_decay_rate(traj)
        assert fit.rate == pytest.approx(0.0, abs=1e-12)
        assert fit.r_squared == 1.0

    def test_noise_tolerance(self):
        fit = fit_decay_rate(synthetic_trajectory(nt=401, noise=0.01))
        assert fit.rate == pytest.approx(2.0, abs=0.05)
        assert fit.r_squared < 1.0

    def test_window_validation(self):
        with pytest.raises(InvalidParameterError):
            fit_decay_rate(synthetic_trajectory(), window=(0.5, 1.5))
        with pytest.raises(InvalidParameterError):
            fit_decay_rate(synthetic_trajectory(), window=(0.9, 0.3))

    def test_too_few_samples(self):
        with pytest.raises(FitError):
            fit_decay_rate(synthetic_trajectory(), window=(0.50, 0.55))

    def test_zero_norm_rejected(self):
        traj = synthetic_trajectory()
        dead = traj.l2_norms.copy()
        dead[60:] = 0.0
        bad = r.Trajectory(
            times=traj.times, states=traj.states, controls=traj.controls,
            l2_norms=dead, h1_norms=traj.h1_norms, newton_iters=traj.newton_iters,
        )
        with pytest.raises(FitError):
            fit_decay_rate(bad)

    def test_to_dict(self):
        d = fit_decay_rate(synthetic_trajectory()).to_dict()
        assert set(d) == {"rate", "intercept", "r_squared", "window"}
        json.dumps(d)


class TestRunExperiment:
    def test_presets_cover_both_experiments(self):
        assert set(EXPERIMENT_PRESETS) == {
            "exp1", "exp1_uncontrolled", "exp2", "exp2_uncontrolled"
        }

    def test_exp1_small(self, tmp_path):
        traj, report, fit = run_experiment("exp1", nx=100, nt=100, out_dir=str(tmp_path))
        assert report.gamma == pytest.approx(math.pi**2 - 9.0)
        assert fit.rate > 0
        assert traj.l2_norms[-1] < traj.l2_norms[0]
        names = {p.name for p in tmp_path.iterdir()}
        assert names == {"norms.csv", "design.json", "fit.json", "manifest.json"}

    def test_unknown_preset(self):
        with pytest.raises(InvalidParameterError):
            run_experiment("exp3")


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("exp")
    traj, report, fit = run_experiment(
        "exp1", nx=60, nt=80, out_dir=str(out), full_state=True
    )
    return out, traj, report, fit


class TestExport:
    def test_norms_csv_round_trip(self, bundle):
        out, traj, _, _ = bundle
        text = (out / "norms.csv").read_text().splitlines()
        assert text[0] == "t,g,l2_norm,h1_norm"
        assert len(text) == 1 + traj.nt
        data = np.loadtxt(out / "norms.csv", delimiter=",", skiprows=1)
        assert np.array_equal(data[:, 0], traj.times)
        assert np.array_equal(data[:, 1], traj.controls)
        assert np.array_equal(data[:, 2], traj.l2_norms)
        assert np.array_equal(data[:, 3], traj.h1_norms)

    def test_state_csv_round_trip(self, bundle):
        out, traj, _, _ = bundle
        data = np.loadtxt(out / "state.csv", delimiter=",")
        assert data.shape == (traj.nt, 1 + traj.states.shape[1])
        assert np.array_equal(data[:, 0], traj.times)
        assert np.array_equal(data[:, 1:], traj.states)

    def test_design_json_matches_report(self, bundle):
        out, _, report, _ = bundle
        loaded = json.loads((out / "design.json").read_text())
        assert loaded["gamma"] == report.gamma
        assert loaded["scheme"] == "fixed"
        assert loaded["n_modes"] == 1

    def test_fit_json_matches(self, bundle):
        out, _, _, fit = bundle
        loaded = json.loads((out / "fit.json").read_text())
        assert loaded["rate"] == fit.rate
        assert loaded["r_squared"] == fit.r_squared

    def test_manifest(self, bundle):
        out, _, _, _ = bundle
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["version"] == r.__version__
        assert manifest["files"] == sorted(
            ["norms.csv", "state.csv", "design.json", "fit.json"]
        )
        assert manifest["config"]["nu"] == 1.0
        assert manifest["config"]["u0"] == "exp1"
        assert "timestamp" not in json.dumps(manifest).lower()

    def test_export_is_deterministic(self, tmp_path):
        traj, report, fit = run_experiment("exp1", nx=50, nt=60)
        a, b = tmp_path / "a", tmp_path / "b"
        export(traj, report, fit, str(a), full_state=False)
        export(traj, report, fit, str(b), full_state=False)
        for name in ("norms.csv", "design.json", "fit.json", "manifest.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()


def run_cli(*argv):
    return subprocess.run(
        [sys.executable, "-m", "rdstab.cli", *argv],
        capture_output=True, text=True, timeout=300,
    )


class TestMainInProcess:
    def test_design_rapid(self, capsys):
        rc = main(["design", "--rate", "2", "--nu", "1", "--alpha", "12"])
        assert rc == 0
        report = json.loads(capsys.readouterr().out)
        assert report["scheme"] == "rapid"
        assert report["gamma"] >= 2.0

    def test_design_minimal_stable(self, capsys):
        rc = main(["design", "--minimal", "--alpha", "2"])
        assert rc == 0
        assert json.loads(capsys.readouterr().out)["scheme"] == "stable"

    def test_design_writes_file(self, tmp_path, capsys):
        rc = main(["design", "--minimal", "--alpha", "12", "--out", str(tmp_path)])
        assert rc == 0
        on_disk = json.loads((tmp_path / "design.json").read_text())
        assert on_disk == json.loads(capsys.readouterr().out)

    def test_simulate_with_flags(self, tmp_path, capsys):
        rc = main([
            "simulate", "--alpha", "12", "--mu", "6", "--nx", "60", "--nt", "40",
            "--tmax", "0.5", "--dynamics", "paper", "--control", "feedback",
            "--u0", "exp1", "--out", str(tmp_path),
        ])
        assert rc == 0
        out = capsys.readouterr().out
        assert "levels: 40" in out
        assert "fitted rate:" in out
        assert (tmp_path / "norms.csv").exists()
        assert not (tmp_path / "state.csv").exists()

    def test_simulate_full_state(self, tmp_path, capsys):
        rc = main([
            "simulate", "--alpha", "3", "--nx", "30", "--nt", "20",
            "--control", "off", "--dynamics", "plant", "--out", str(tmp_path),
            "--full-state",
        ])
        assert rc == 0
        assert (tmp_path / "state.csv").exists()

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({
            "nu": 1.0, "alpha": 12.0, "mu": 6.0, "nx": 60, "nt": 40,
            "tmax": 0.5, "dynamics": "paper_faithful", "control": "feedback",
        }))
        rc = main(["simulate", "--config", str(cfg), "--nt", "25"])
        assert rc == 0
        assert "levels: 25" in capsys.readouterr().out

    def test_config_u0_samples(self, tmp_path, capsys):
        u0 = [0.0] + [0.1] * 10 + [0.0]
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({
            "nu": 1.0, "alpha": 0.0, "nx": 12, "nt": 12, "tmax": 0.1,
            "dynamics": "plant", "control": "off", "u0": u0,
        }))
        assert main(["simulate", "--config", str(cfg)]) == 0
        capsys.readouterr()

    def test_experiment_verb(self, tmp_path, capsys):
        rc = main(["experiment", "exp1", "--nx", "60", "--nt", "60",
                   "--out", str(tmp_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "gamma:" in out and "fitted rate:" in out
        assert (tmp_path / "norms.csv").exists()

    def test_scan_verb(self, capsys):
        rc = main(["scan-admissibility", "--mu-min", "1", "--mu-max", "3",
                   "--steps", "3", "--nx", "60"])
        assert rc == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "mu,a_1,admissible"
        assert len(lines) == 4
        assert all(line.endswith(",1") for line in lines[1:])

    def test_kernel_dump(self, tmp_path, capsys):
        rc = main(["kernel-dump", "--mu", "6", "--nx", "60", "--out", str(tmp_path)])
        assert rc == 0
        assert "series order: 9" in capsys.readouterr().out
        data = np.loadtxt(tmp_path / "kernel.csv", delimiter=",")
        assert data.shape == (60, 61)


class TestExitCodes:
    def test_invalid_parameters(self, capsys):
        assert main(["simulate", "--nx", "2"]) == 2
        assert "error:" in capsys.readouterr().err

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"viscosity": 1.0}))
        assert main(["simulate", "--config", str(cfg)]) == 2
        capsys.readouterr()

    def test_config_not_object(self, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text("[1, 2]")
        assert main(["simulate", "--config", str(cfg)]) == 2
        capsys.readouterr()

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == 2
        capsys.readouterr()

    def test_inadmissible_pair_exit_3(self, capsys):
        # locate a mu where 1 + a_1 crosses zero, then ask for that design
        g = r.make_grid(1.0, 80)
        basis = r.modal_basis(g, 1)

        def one_plus_a1(mu):
            U = r.upsilon_matrix(r.kernel_table(g, mu, 1.0))
            _, scalars = r.phi_matrix(U, basis, floor=0.0)
            return 1.0 + scalars[0]

        root = brentq(one_plus_a1, 25.0, 35.0, xtol=1e-10)
        rc = main([
            "simulate", "--alpha", "30", "--mu", repr(root), "--nx", "80",
            "--nt", "10", "--tmax", "0.1", "--dynamics", "paper",
            "--control", "feedback",
        ])
        assert rc == 3
        assert "error:" in capsys.readouterr().err

    def test_newton_divergence_exit_4(self, tmp_path, capsys):
        cfg = tmp_path / "hard.json"
        cfg.write_text(json.dumps({
            "nu": 1.0, "alpha": 15.0, "model": "nonlinear", "dynamics": "plant",
            "control": "off", "u0": "exp2", "nx": 60, "nt": 30, "tmax": 1.0,
            "newton_max_iter": 1,
        }))
        assert main(["simulate", "--config", str(cfg)]) == 4
        assert "error:" in capsys.readouterr().err


class TestSubprocess:
    def test_version(self):
        proc = run_cli("--version")
        assert proc.returncode == 0
        assert proc.stdout.strip() == r.__version__

    def test_missing_verb_is_usage_error(self):
        proc = run_cli()
        assert proc.returncode == 2

    def test_console_script_installed(self):
        exe = shutil.which("rdstab")
        assert exe is not None
        proc = subprocess.run([exe, "--version"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert proc.stdout.strip() == r.__version__

    def test_byte_identical_reruns(self, tmp_path):
        args = ("simulate", "--alpha", "12", "--mu", "6", "--nx", "50",
                "--nt", "30", "--tmax", "0.4", "--dynamics", "paper",
                "--control", "feedback")
        a, b = tmp_path / "a", tmp_path / "b"
        p1 = run_cli(*args, "--out", str(a))
        p2 = run_cli(*args, "--out", str(b))
        assert p1.returncode == 0 and p2.returncode == 0
        assert p1.stdout == p2.stdout
        assert (a / "norms.csv").read_bytes() == (b / "norms.csv").read_bytes()

    def test_scan_reports_bracket_on_stderr(self):
        proc = run_cli(
            "scan-admissibility", "--mu-min", "25", "--mu-max", "35",
            "--steps", "6", "--nx", "80",
        )
        assert proc.returncode == 0
        assert "sign change of 1 + a_1" in proc.stderr
