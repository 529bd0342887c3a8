import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from branchsim.cli import fmt, main, read_trace_csv
from branchsim.errors import DomainError
from branchsim.fitting import model_damped


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def parse_csv(text):
    rows = list(csv.reader(text.splitlines()))
    return rows[0], rows[1:]


def write_trace(path, t, p):
    lines = ["t,p_g,p_e"] + [f"{fmt(a)},{fmt(b)},{fmt(1 - b)}" for a, b in zip(t, p)]
    path.write_text("\n".join(lines) + "\n")


# --- splitter ----------------------------------------------------------------

def test_splitter_all_methods_agree(capsys):
    code, out, _ = run(capsys, "splitter", "--n", "3", "--r", "0.5", "--method", "all")
    assert code == 0
    header, rows = parse_csv(out)
    assert header[:2] == ["method", "n"]
    assert [r[0] for r in rows] == ["closed", "binomial", "multinomial", "enumerate"]
    values = np.array([[float(v) for v in r[5:]] for r in rows])
    np.testing.assert_allclose(values, np.tile(values[0], (4, 1)), rtol=1e-12, atol=1e-15)


def test_splitter_single_photon_has_no_pairs(capsys):
    code, out, _ = run(capsys, "splitter", "--n", "1", "--r", "0.3")
    header, rows = parse_csv(out)
    assert float(rows[0][header.index("mean_rt")]) == 0.0


def test_splitter_lossy_asymmetry_json(capsys):
    code, out, _ = run(capsys, "splitter", "--n", "5", "--r", "0.5", "--eps-r", "0.1",
                       "--eps-t", "0.2", "--convention", "scattered", "--method", "multinomial",
                       "--format", "json")
    doc = json.loads(out)
    st = doc["results"]["multinomial"]
    assert st["var_r"] != st["var_t"]
    assert st["var_r"] == pytest.approx(5 * 0.45 * (0.40 + 0.15), abs=1e-12)
    assert doc["params"]["convention"] == "scattered"


def test_splitter_usage_and_resource_codes(capsys):
    assert run(capsys, "splitter", "--n", "3", "--r", "1.5")[0] == 2
    assert run(capsys, "splitter", "--n", "3")[0] == 2
    assert run(capsys, "splitter", "--n", "3", "--r", "0.5", "--eps-r", "0.2",
               "--method", "closed")[0] == 2
    code, _, err = run(capsys, "splitter", "--n", "20", "--r", "0.5", "--method", "enumerate")
    assert code == 3 and "error" in err


def test_splitter_lossy_all_skips_lossless_routes(capsys):
    code, out, _ = run(capsys, "splitter", "--n", "4", "--r", "0.5", "--eps-r", "0.1",
                       "--method", "all")
    assert code == 0
    assert [r[0] for r in parse_csv(out)[1]] == ["multinomial", "enumerate"]


def test_bad_choice_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["splitter", "--n", "3", "--r", "0.5", "--method", "bogus"])
    assert exc.value.code == 2


# --- rabi-trace --------------------------------------------------------------

def test_trace_closed_rows(capsys):
    code, out, _ = run(capsys, "rabi-trace", "--model", "closed", "--omega", "1",
                       "--t-max", repr(math.pi), "--samples", "3")
    assert code == 0
    assert out.splitlines()[0] == "t,p_g,p_e"
    header, rows = parse_csv(out)
    vals = np.array(rows, dtype=float)
    np.testing.assert_allclose(vals, [[0, 0, 1], [math.pi / 2, 1, 0], [math.pi, 0, 1]],
                               atol=1e-12)


def test_trace_csv_round_trips(tmp_path, capsys):
    out = tmp_path / "trace.csv"
    code = main(["rabi-trace", "--model", "indist", "--omega", "1", "--dt", "0.7",
                 "--beta", "0.995", "--t-max", "20", "--samples", "101", "--out", str(out)])
    assert code == 0
    raw = out.read_bytes()
    assert b"\r" not in raw
    tr = read_trace_csv(out)
    rows = np.array(parse_csv(raw.decode())[1], dtype=float)
    assert np.all((rows[:, 1] >= 0) & (rows[:, 1] <= 1))
    np.testing.assert_array_equal(tr.p, rows[:, 1])
    for line in raw.decode().splitlines()[1:]:
        for cell in line.split(","):
            assert float(fmt(float(cell))) == float(cell)


def test_trace_requires_model_parameters(capsys):
    assert run(capsys, "rabi-trace", "--model", "indist", "--dt", "0.7", "--t-max", "5")[0] == 2
    assert run(capsys, "rabi-trace", "--model", "dist", "--dt", "0.1", "--beta", "0.9",
               "--t-max", "5")[0] == 2
    assert run(capsys, "rabi-trace", "--model", "dist", "--dt", "1e-5", "--eta", "0.9",
               "--t-max", "5")[0] == 3


# --- fit ---------------------------------------------------------------------

def test_fit_synthetic(tmp_path, capsys):
    t = np.linspace(0, 40, 801)
    path = tmp_path / "syn.csv"
    write_trace(path, t, model_damped(1.0, 0.05, t))
    code, out, _ = run(capsys, "fit", "--input", str(path), "--omega", "1")
    doc = json.loads(out)
    assert code == 0
    assert doc["gamma_over_omega"] == pytest.approx(0.05, abs=1e-6)
    assert set(doc) >= {"gamma", "gamma_over_omega", "rms", "window", "converged", "params"}
    assert doc["window"] == {"t_min": 0.0, "t_max": 40.0}


def test_fit_flat_trace_exit_4(tmp_path, capsys):
    t = np.linspace(0, 40, 401)
    path = tmp_path / "flat.csv"
    write_trace(path, t, np.full_like(t, 0.5))
    code, out, _ = run(capsys, "fit", "--input", str(path), "--omega", "1")
    assert code == 4
    assert json.loads(out)["converged"] is False


@pytest.mark.parametrize("body", ["t,p\n0,0\n", "t,p_g,p_e\n0,abc,1\n", "t,p_g,p_e\n0,0\n",
                                  "t,p_g,p_e\n1,0,1\n0,0,1\n", ""])
def test_fit_malformed_csv_exit_2(tmp_path, capsys, body):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    assert run(capsys, "fit", "--input", str(path), "--omega", "1")[0] == 2


def test_read_trace_missing_file(tmp_path):
    with pytest.raises(DomainError):
        read_trace_csv(tmp_path / "nope.csv")


# --- eid ---------------------------------------------------------------------

def test_eid_single_level(capsys):
    code, out, err = run(capsys, "eid", "--dt", "1.0", "--levels", "0")
    assert code == 0
    doc = json.loads(out)
    assert doc["levels"][0]["ratio"] == 1.0
    assert doc["exponent"] is None
    assert "warning" in err


def test_eid_isolated_exit_4(capsys):
    code, _, err = run(capsys, "eid", "--dt", "1.0", "--beta", "1", "--levels", "0..2")
    assert code == 4 and "no damping" in err


def test_eid_csv_and_windows(capsys):
    code, out, err = run(capsys, "eid", "--dt", "1.0", "--levels", "0,1", "--format", "csv",
                         "--window", "1:0:40")
    assert code == 0
    header, rows = parse_csv(out)
    assert header == ["level", "omega_n", "gamma_n", "ratio"]
    assert float(rows[0][3]) == 1.0
    assert "exponent" in err


def test_eid_bad_window(capsys):
    assert run(capsys, "eid", "--dt", "1.0", "--window", "1:0")[0] == 2


# --- config files ------------------------------------------------------------

def test_config_equals_flags(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"model": "approx", "omega": 1.0, "dt": 0.05, "beta": 0.99,
                               "t_max": 30.0, "samples": 50}))
    a = run(capsys, "rabi-trace", "--config", str(cfg))
    b = run(capsys, "rabi-trace", "--model", "approx", "--omega", "1", "--dt", "0.05",
            "--beta", "0.99", "--t-max", "30", "--samples", "50")
    assert a == b and a[0] == 0


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 4, "r": 0.2, "format": "json"}))
    doc = json.loads(run(capsys, "splitter", "--config", str(cfg), "--r", "0.5")[1])
    assert doc["params"]["r"] == 0.5
    assert doc["results"]["multinomial"]["mean_r"] == pytest.approx(2.0)


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 4, "r": 0.2, "colour": "red"}))
    assert run(capsys, "splitter", "--config", str(cfg))[0] == 2


def test_eid_config_windows(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dt": 1.0, "levels": [0, 1], "window": {"1": [0, 40]}}))
    a = run(capsys, "eid", "--config", str(cfg))
    b = run(capsys, "eid", "--dt", "1", "--levels", "0,1", "--window", "1:0:40")
    assert a == b and a[0] == 0


# --- verify ------------------------------------------------------------------

def test_verify_quick(capsys):
    code, out, _ = run(capsys, "verify", "--quick")
    assert code == 0
    assert len(out.splitlines()) == 8
    assert all(line.startswith("PASS") for line in out.splitlines())


def test_verify_injected_fault(capsys):
    code, out, err = run(capsys, "verify", "--quick", "--inject-fault", "depth-one")
    assert code == 1
    assert "FAIL depth-one" in out and "depth-one" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "branchsim", "splitter", "--n", "2", "--r",
                           "0.5"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.startswith("method,n,")
