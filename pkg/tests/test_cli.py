import json

import numpy as np
import pytest

from delaywave import cli, green


def run(tmp_path, *args):
    return cli.main(list(args) + ["--out", str(tmp_path)])


def test_green_nodelay_csv(tmp_path):
    assert run(tmp_path, "green", "--a", "1", "--b", "2", "--r", "0") == 0
    names, data = cli.read_csv(tmp_path / "green.csv")
    assert names == ["t", "G"]
    assert np.allclose(data[:, 1], green.green_nodelay(1.0, 2.0, data[:, 0]), atol=1e-12)
    assert (tmp_path / "plot_green.py").exists()


def test_header_lines(tmp_path):
    run(tmp_path, "green", "--a", "1", "--b", "2")
    lines = (tmp_path / "green.csv").read_text().splitlines()
    assert lines[0].startswith("# delaywave")
    assert lines[1].startswith("# units:") and lines[2] == "t,G"


def test_output_is_deterministic_without_metadata(tmp_path):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        assert run(d, "green", "--a", "1", "--b", "2", "--r", "0.01", "--no-metadata") == 0
        outs.append((d / "green.csv").read_bytes())
    assert outs[0] == outs[1]
    assert not outs[0].startswith(b"# delaywave")


def test_bz_speed_guard(tmp_path, capsys):
    code = run(tmp_path, "solve", "--model", "bz", "--c", "2", "--b", "2", "--r", "0.25")
    assert code == 2
    assert "c > 2" in capsys.readouterr().err


def test_usage_errors(tmp_path, capsys):
    assert cli.main([]) == 1
    assert run(tmp_path, "solve", "--bogus", "1") == 1
    assert run(tmp_path, "solve", "--model", "fisher") == 1  # no --c
    assert run(tmp_path, "verify", "--model", "fisher", "--c", "2.5", "--b", "2") == 1
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"model": "fisher", "c": 2.5, "speed": 3}))
    assert run(tmp_path, "verify", "--config", str(cfg)) == 1
    assert "unknown config keys: speed" in capsys.readouterr().err


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"command": "verify", "model": "fisher", "c": 1.5}))
    assert run(tmp_path, "verify", "--config", str(cfg)) == 2  # c > 2 fails
    assert run(tmp_path, "verify", "--config", str(cfg), "--c", "2.5") == 0
    doc = json.loads((tmp_path / "verify.json").read_text())
    assert doc["schema"] == "delaywave.verification/1"
    assert doc["model"]["c"] == 2.5 and doc["upper"]["passed"] and doc["lower"]["passed"]


def test_roots(tmp_path):
    assert run(tmp_path, "roots", "--a", "1", "--b", "2", "--r", "0.01,0.05") == 0
    names, data = cli.read_csv(tmp_path / "roots.csv")
    assert names == ["r", "eta1", "eta2"]
    assert data[0, 1] == pytest.approx(2.0272443305407074, rel=1e-10)
    names, counts = cli.read_csv(tmp_path / "strips.csv")
    assert counts[:, 1:].tolist() == [[1, 1], [1, 1]]


def test_solve_and_simulate(tmp_path, capsys):
    code = run(tmp_path, "solve", "--model", "fisher", "--c", "2.5", "--theta", "0.5", "--k", "2",
               "--tau1", "0.004", "--tau2", "0.004", "--tol", "1e-6")
    assert code == 0
    names, data = cli.read_csv(tmp_path / "profile.csv")
    assert names == ["t", "phi_1"]
    assert np.min(np.diff(data[:, 1])) >= -1e-9
    report = json.loads((tmp_path / "iteration.json").read_text())
    assert report["schema"] == "delaywave.iteration/1" and report["deltas"][-1] <= 1e-6
    script = (tmp_path / "plot_profile.py").read_text()
    compile(script, "plot_profile.py", "exec")
    assert "profile.csv" in script

    sim = tmp_path / "sim"
    code = cli.main(["simulate", "--model", "fisher", "--c", "2.5", "--tau1", "0.004", "--tau2", "0.004",
                     "--profile", str(tmp_path / "profile.json"), "--T", "1", "--out", str(sim)])
    assert code == 0
    summary = json.loads((sim / "simulation.json").read_text())
    assert summary["speed"] == pytest.approx(2.5, rel=0.01)
    names, _ = cli.read_csv(sim / "trajectory.csv")
    assert names == ["t", "x", "u_1"]
    assert "measured speed" in capsys.readouterr().out


def test_numerical_failure_exit_code(tmp_path):
    code = run(tmp_path, "solve", "--model", "fisher", "--c", "2.5", "--tau1", "0.004",
               "--tau2", "0.004", "--upper", "classical", "--max-iter", "2")
    assert code == 3
