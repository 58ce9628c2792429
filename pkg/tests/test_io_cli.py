import json
import os
import subprocess
import sys

import numpy as np
import pytest

from qanalog import __version__, circuits
from qanalog import io as qio
from qanalog.cli import EXIT_OK, EXIT_RESOURCE, EXIT_USAGE, EXIT_VERIFY, main, table1_rows


def run(argv, out):
    return main(list(argv) + ["--output-dir", str(out)])


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


# --- io helpers ------------------------------------------------------------------------

def test_fmt_is_17_digits():
    assert qio.fmt(0.1) == "0.10000000000000001"
    assert qio.fmt(np.float32(2.5)) == "2.5"


def test_json_is_sorted_and_numpy_safe():
    text = qio.dumps({"b": np.arange(3), "a": np.float64(1.5), "c": np.bool_(True)})
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert json.loads(text) == {"a": 1.5, "b": [0, 1, 2], "c": True}


def test_config_hash_ignores_key_order():
    assert qio.config_hash({"x": 1, "y": 2}) == qio.config_hash({"y": 2, "x": 1})
    assert qio.config_hash({"x": 1}) != qio.config_hash({"x": 2})


def test_csv_round_trip(tmp_path):
    meta = qio.provenance({"a": 1}, 3)
    p = qio.write_csv(str(tmp_path / "x.csv"), ["t", "v"], [[0.0, 1 / 3], [1.0, -2.0]], meta)
    with open(p) as fh:
        first = fh.readline()
    assert first.startswith(f"# qanalog {__version__} seed=3 config_hash=")
    cols, data = qio.read_csv(p)
    assert cols == ["t", "v"] and data[0, 1] == 1 / 3


def test_read_config_file(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# comment\nhurst = 0.7\nshift-correction = true  # trailing\n\n")
    assert qio.read_config_file(str(p)) == {"hurst": "0.7", "shift_correction": "true"}
    p.write_text("nonsense\n")
    with pytest.raises(ValueError):
        qio.read_config_file(str(p))


def test_output_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv(qio.OUTPUT_ENV, str(tmp_path / "env"))
    assert qio.output_dir(None) == str(tmp_path / "env")
    assert os.path.isdir(tmp_path / "env")
    assert qio.output_dir(str(tmp_path / "flag")) == str(tmp_path / "flag")


# --- trajectory ---------------------------------------------------------------------------

TRAJ = ["trajectory", "--hurst", "0.5", "--terms", "256", "--steps", "4096", "--count", "10",
        "--seed", "7"]


def test_trajectory_smoke(tmp_path, capsys):
    assert run(TRAJ, tmp_path) == EXIT_OK
    cols, data = qio.read_csv(str(tmp_path / "trajectories.csv"))
    assert cols == ["t"] + [f"value_{i}" for i in range(10)]
    # interior grid points t_i = i pi / T, i = 1..T-1 (the bridge is pinned at both ends)
    assert data.shape == (4095, 11)
    assert np.allclose(data[:, 0], np.arange(1, 4096) * np.pi / 4096)
    meta = read_json(tmp_path / "trajectories.meta.json")
    assert meta["seed"] == 7 and meta["version"] == __version__ and meta["schema"] == qio.SCHEMA_VERSION
    assert meta["config"]["terms"] == 256
    assert "trajectories.csv" in capsys.readouterr().out


def test_trajectory_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(TRAJ, a) == EXIT_OK
    assert run(TRAJ, b) == EXIT_OK
    for name in ("trajectories.csv", "trajectories.meta.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_trajectory_thread_count_does_not_change_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    small = ["trajectory", "--terms", "16", "--steps", "64", "--count", "6", "--seed", "2"]
    assert run(small + ["--threads", "1"], a) == EXIT_OK
    assert run(small + ["--threads", "3"], b) == EXIT_OK
    assert (a / "trajectories.csv").read_bytes() == (b / "trajectories.csv").read_bytes()


def test_trajectory_json_and_dense(tmp_path):
    argv = ["trajectory", "--terms", "8", "--steps", "32", "--count", "2", "--path", "dense",
            "--format", "json"]
    assert run(argv, tmp_path) == EXIT_OK
    d = read_json(tmp_path / "trajectories.json")
    assert len(d["trajectories"]) == 2 and len(d["t"]) == 31


def test_hurst_zero_is_rejected(tmp_path, capsys):
    assert run(["trajectory", "--hurst", "0"], tmp_path) == EXIT_USAGE
    err = capsys.readouterr().err
    assert "diverg" in err and "trajectory" in err


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("QANALOG_OUTPUT_DIR", str(tmp_path / "envout"))
    assert main(["trajectory", "--terms", "4", "--steps", "16"]) == EXIT_OK
    assert (tmp_path / "envout" / "trajectories.csv").exists()


# --- config precedence -------------------------------------------------------------------------

def test_config_file_then_flags(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("terms = 8\nsteps = 32\ncount = 3\nhurst = 0.7\n")
    assert run(["trajectory", "--config", str(cfg)], tmp_path / "a") == EXIT_OK
    meta = read_json(tmp_path / "a" / "trajectories.meta.json")
    assert meta["config"]["terms"] == 8 and meta["config"]["hurst"] == 0.7
    assert run(["trajectory", "--config", str(cfg), "--hurst", "0.6"], tmp_path / "b") == EXIT_OK
    meta = read_json(tmp_path / "b" / "trajectories.meta.json")
    assert meta["config"]["hurst"] == 0.6 and meta["config"]["count"] == 3


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert run(["trajectory", "--config", str(cfg)], tmp_path) == EXIT_USAGE


# --- table1 / verify ------------------------------------------------------------------------------

def test_table1_cells():
    rows = {(r["epsilon"], r["hurst"]): r for r in table1_rows()}
    assert rows[(1e-3, 0.5)]["terms"] == 1000 and rows[(1e-3, 0.5)]["relative_deviation"] == 0
    assert rows[(1e-3, 0.65)]["terms"] == 204 and rows[(1e-3, 0.65)]["relative_deviation"] < 0.01
    assert rows[(1e-2, 0.8)]["terms"] == 18 and rows[(1e-2, 0.8)]["relative_deviation"] < 0.15
    assert len(rows) == 9


def test_table1_command(tmp_path):
    assert run(["table1"], tmp_path) == EXIT_OK
    cols, data = qio.read_csv(str(tmp_path / "table1.csv"))
    assert cols[:4] == ["epsilon", "hurst", "terms", "reference"]
    assert data.shape == (9, 5)


def test_verify_passes(tmp_path, capsys):
    assert run(["verify", "--quick"], tmp_path) == EXIT_OK
    report = read_json(tmp_path / "verify.json")
    assert report["pass"] and report["failed"] == []
    for c in report["checks"]:
        assert {"name", "measured", "tolerance", "pass"} <= set(c)
    assert "PASS dst_circuit_vs_matrix" in capsys.readouterr().err


def test_verify_catches_dst_normalisation_bug(tmp_path, monkeypatch, capsys):
    good = circuits.dst_apply

    def bad(state, n, *a, **k):
        out = good(state, n, *a, **k)
        # wrong normalisation: sqrt(1/N) instead of sqrt(2/N)
        return type(out)(out.num_qubits, out.amplitudes / np.sqrt(2))

    monkeypatch.setattr(circuits, "dst_apply", bad)
    assert run(["verify", "--quick"], tmp_path) == EXIT_VERIFY
    assert "FAIL dst_circuit_vs_matrix" in capsys.readouterr().err
    assert read_json(tmp_path / "verify.json")["failed"] == ["dst_circuit_vs_matrix"]


# --- module commands ------------------------------------------------------------------------------

def test_qmc_smoke(tmp_path):
    argv = ["qmc", "--mode", "direct", "--hurst", "0.8", "--epsilon", "0.05", "--window", "0.25:0.75"]
    assert run(argv, tmp_path) == EXIT_OK
    d = read_json(tmp_path / "qmc.json")
    for key in ("estimate", "error_bound", "queries", "shots", "method", "spec"):
        assert key in d
    assert d["meta"]["seed"] == 0
    assert abs(d["estimate"]) <= 0.05


def test_qmc_strict_budget_is_resource_error(tmp_path):
    argv = ["qmc", "--mode", "classical", "--samples", "100", "--strict-budget"]
    assert run(argv, tmp_path) == EXIT_RESOURCE


def test_levy_smoke(tmp_path):
    assert run(["levy", "--kind", "cpoisson", "--rate", "2.0", "--steps", "256"], tmp_path) == EXIT_OK
    cols, data = qio.read_csv(str(tmp_path / "levy_integral.csv"))
    assert cols == ["step", "noise", "classical", "quantum_rescaled"] and data.shape == (256, 4)
    log = read_json(tmp_path / "levy_acceptance.json")
    assert log["cosine_similarity"] > 1 - 1e-8
    assert log["attempts"] >= 1
    assert log["flag_probability"] >= log["spectrum_ratio_squared"] - 1e-12


def test_tamsd_smoke(tmp_path):
    argv = ["tamsd", "--h-test", "0.5", "--h-alt", "0.8", "--trials", "1000"]
    assert run(argv, tmp_path) == EXIT_OK
    d = read_json(tmp_path / "tamsd.json")
    assert d["power"] > 0.8
    q = d["quantiles"]
    assert q["Q_low"] < q["Q_high"] and q["band_low"] < q["band_high"]


def test_swap_smoke(tmp_path):
    assert run(["swap"], tmp_path) == EXIT_OK
    assert read_json(tmp_path / "swap.json")["estimate"] == pytest.approx(np.pi**2 / 6, abs=1e-9)


# --- exit codes -------------------------------------------------------------------------------------

def test_usage_errors(tmp_path):
    assert run(["bogus"], tmp_path) == EXIT_USAGE
    assert run(["qmc", "--window", "0.5"], tmp_path) == EXIT_USAGE
    assert main([]) == EXIT_USAGE


def test_resource_guard(tmp_path):
    argv = ["trajectory", "--path", "dense", "--terms", "512", "--steps", "1024"]
    assert run(argv, tmp_path) == EXIT_RESOURCE


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "qanalog.cli", "table1", "--output-dir", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "table1.csv" in proc.stdout
