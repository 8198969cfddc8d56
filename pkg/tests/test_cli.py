import json
import math
import subprocess
import sys

import numpy as np
import pytest

from gaudin.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def write_config(tmp_path, eps, field, name="cfg.json"):
    path = tmp_path / name
    bx, by, bz = field
    path.write_text(json.dumps({"epsilons": eps, "field": {"bx": bx, "by": by, "bz": bz}}))
    return str(path)


def test_spectrum_single_spin(tmp_path, capsys):
    cfg = write_config(tmp_path, [0.0], (0, 0, 1))
    code, out, _ = run(capsys, "spectrum", "--config", cfg)
    assert code == 0
    records = json.loads(out)
    assert [r["label"] for r in records] == ["0", "1"]
    assert sorted(r["charges"][0] for r in records) == pytest.approx([-0.5, 0.5])


def test_spectrum_three_spins(tmp_path, capsys):
    cfg = write_config(tmp_path, [0, 1, 2.3], (0.3, 0.4, 0.5))
    code, out, _ = run(capsys, "spectrum", "--config", cfg, "--weights", "1,0.5,0.2")
    records = json.loads(out)
    assert code == 0 and len(records) == 8
    assert max(max(r["residuals"].values()) for r in records) < 1e-12
    r = records[3]
    assert r["energy"] == pytest.approx(float(np.dot([1, 0.5, 0.2], r["charges"])))


def test_duplicate_epsilon_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, [0, 0], (1, 0, 0))
    code, out, err = run(capsys, "spectrum", "--config", cfg)
    assert code == 2 and out == ""
    assert json.loads(err)["code"] == "DuplicateEpsilon"


def test_missing_config(tmp_path, capsys):
    code, _, err = run(capsys, "spectrum", "--config", str(tmp_path / "nope.json"))
    assert code == 2
    assert json.loads(err)["code"] == "ConfigError"


def test_verify_demo(capsys):
    code, out, _ = run(capsys, "verify")
    report = json.loads(out)
    assert code == 0 and report["pass"]
    assert {c["name"] for c in report["checks"]} == {
        "ed_match",
        "residual_rotated",
        "residual_common",
        "charge_commutators",
        "charge_sum_rule",
    }


def test_verify_negative_control(capsys):
    code, out, err = run(capsys, "verify", "--perturb", "0.1")
    assert code == 4
    report = json.loads(out)
    failed = [c for c in report["checks"] if not c["pass"]]
    assert {c["name"] for c in failed} >= {"ed_match", "residual_common"}
    assert "0000" in json.loads(err)["message"]


def test_verify_single_spin(capsys):
    code, out, _ = run(capsys, "verify", "--nmax", "1")
    report = json.loads(out)
    assert code == 0
    assert [c["name"] for c in report["checks"]] == ["single_spin_lambda", "single_spin_charge"]


def test_verify_nmax_bounds(capsys):
    assert run(capsys, "verify", "--nmax", "3")[0] == 2
    assert run(capsys, "verify", "--nmax", "11")[0] == 2


def test_quench_rabi(tmp_path, capsys):
    cfg = write_config(tmp_path, [0.0], (1, 0, 0))
    code, out, _ = run(capsys, "quench", "--config", cfg, "--initial", "1", "--tmax", "10", "--steps", "51")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "t,value"
    t, v = np.array([[float(x) for x in line.split(",")] for line in lines[1:]]).T
    assert np.abs(v - 0.5 * np.cos(t)).max() < 1e-9


def test_quench_single_step(capsys):
    code, out, _ = run(capsys, "quench", "--initial", "1000", "--steps", "1", "--t0", "2.5")
    lines = out.splitlines()
    assert code == 0 and len(lines) == 2
    assert float(lines[1].split(",")[0]) == 2.5


def test_quench_check_and_manifest(tmp_path, capsys):
    out = tmp_path / "series.csv"
    code, _, _ = run(capsys, "quench", "--initial", "1010", "--check", "--steps", "21", "--out", str(out))
    assert code == 0
    manifest = json.loads((tmp_path / "series.csv.manifest.json").read_text())
    assert manifest["command"] == "quench"
    assert manifest["outputs"] == [str(out)]
    assert manifest["extra"]["oracle_deviation"] < 1e-8
    assert manifest["extra"]["weight_sum_deviation"] < 1e-9
    assert manifest["extra"]["resolved_config"]["epsilons"] == [0.0, 1.0, 2.3, 3.1]


def test_quench_zero_transverse_field(tmp_path, capsys):
    cfg = write_config(tmp_path, [0.0, 1.0], (0, 0, 1))
    code, _, err = run(capsys, "quench", "--config", cfg, "--initial", "10")
    assert code == 5
    assert json.loads(err)["code"] == "ZeroInPlaneField"


def test_quench_bad_bits(capsys):
    code, _, err = run(capsys, "quench", "--initial", "10")
    assert code == 2
    assert json.loads(err)["code"] == "BadUpSet"


def test_roots_explicit(capsys):
    cfg_code, out, _ = run(capsys, "roots", "--lambdas", "1,2,3,4")
    data = json.loads(out)
    assert cfg_code == 0
    assert data["round_trip"] < 1e-8
    assert len(data["roots"]) == 4 and len(data["roots"][0]) == 2


def test_roots_all_states(tmp_path, capsys):
    cfg = write_config(tmp_path, [0, 1, 2.3], (0.3, 0.4, 0.5))
    code, out, _ = run(capsys, "roots", "--config", cfg)
    records = json.loads(out)
    assert code == 0 and len(records) == 8
    assert max(r["gamma_residual"] for r in records) < 1e-7


def test_overlap_and_projection(tmp_path, capsys):
    cfg = write_config(tmp_path, [0.0], (1, 0, 0))
    code, out, _ = run(capsys, "overlap", "--config", cfg, "--lambdas-a", "-0.5", "--lambdas-b", "-0.3333333333333333")
    data = json.loads(out)
    assert code == 0
    value = complex(data["value_re"], data["value_im"]) * math.exp(data["log_scale"])
    assert value == pytest.approx(5 / 6)
    code, out, _ = run(capsys, "project", "--config", cfg, "--lambdas", "-0.5", "--up", "1")
    data = json.loads(out)
    assert complex(data["value_re"], data["value_im"]) * math.exp(data["log_scale"]) == pytest.approx(0.5)


def test_overlap_by_label(capsys):
    code, out, _ = run(capsys, "overlap", "--label-a", "0000", "--label-b", "1000")
    assert code == 0
    assert set(json.loads(out)) >= {"value_re", "value_im", "log_scale"}
    code, _, err = run(capsys, "overlap", "--label-a", "0000")
    assert code == 2
    code, _, err = run(capsys, "project", "--label", "00", "--up", "0000")
    assert code == 2


def test_bad_threads(capsys):
    assert run(capsys, "spectrum", "--threads", "0")[0] == 2


def test_output_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(capsys, "spectrum", "--out", str(a))
    run(capsys, "spectrum", "--out", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "gaudin", "verify", "--nmax", "1"], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["pass"]
