import csv
import hashlib
import json
import subprocess
import sys

import pytest

from modaldisp import __version__
from modaldisp.cli import EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, run

SCENARIO = {
    "profile": {"synthetic": {"step_um": 1.0}},
    "wavelength_um": 0.85,
    "length_m": 1.0,
    "launch": {"kind": "gaussian", "fwhm_um": 8.0, "offset_y_um": 5},
    "scan": {"x_um": [-10, 10, 5], "y_um": [0, 10, 5]},
    "loss": {"cutoff_index": 12},
}

CONFIGS = {
    "modes": {k: SCENARIO[k] for k in ("profile", "wavelength_um")} | {"solver": {"max_modes": 30}},
    "fiber-modes": {"fiber": {"a_um": 25, "na": 0.2}, "wavelength_um": 0.85},
    "scan": SCENARIO,
    "simulate": SCENARIO,
    "fit-pulse": {
        "trace": {"synthetic": {"shape": "gaussian", "ac_fwhm_ps": 28.28, "snr_db": 30, "samples": 1001}},
        "b2b": {"synthetic": {"shape": "gaussian", "ac_fwhm_ps": 1.414, "samples": 1001}},
    },
    "budget": {"launch_power": 6, "nep": 38, "rx_bandwidth": 60, "wg_loss": 0.04, "length": 100},
}


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


def invoke(tmp_path, command, cfg, *extra, out="out"):
    path = write(tmp_path, f"{command}.json", cfg)
    dest = tmp_path / out
    code = run([command, str(path), "-o", str(dest), "--seed", "3", *extra])
    return code, dest


def digest(p):
    return hashlib.sha256(p.read_bytes()).hexdigest()


@pytest.mark.parametrize("command", sorted(CONFIGS))
def test_deterministic(tmp_path, command):
    code1, a = invoke(tmp_path, command, CONFIGS[command], out="a")
    code2, b = invoke(tmp_path, command, CONFIGS[command], out="b")
    assert code1 == code2 == EXIT_OK
    assert a.stat().st_size > 0
    assert digest(a) == digest(b)


def test_scan_threads_do_not_change_output(tmp_path):
    _, a = invoke(tmp_path, "scan", SCENARIO, "--threads", "1", out="a")
    _, b = invoke(tmp_path, "scan", SCENARIO, "--threads", "4", out="b")
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.DictReader(a.open()))
    assert len(rows) == 15
    assert list(rows[0]) == ["offset_x_um", "offset_y_um", "f3db_ghz", "blp_ghz_m", "coupled_power_db"]


def test_fit_loss_recovers_scan(tmp_path):
    _, scan = invoke(tmp_path, "scan", SCENARIO, out="scan.csv")
    measured = tmp_path / "measured.csv"
    with scan.open() as src, measured.open("w", newline="") as dst:
        w = csv.writer(dst)
        w.writerow(["offset_x_um", "offset_y_um", "power_db"])
        for r in csv.DictReader(src):
            w.writerow([r["offset_x_um"], r["offset_y_um"], r["coupled_power_db"]])
    cfg = dict(SCENARIO, measured="measured.csv")
    cfg.pop("loss")
    code, out = invoke(tmp_path, "fit-loss", cfg)
    assert code == EXIT_OK
    report = json.loads(out.read_text())
    assert report["rmse_db"] < 1e-9
    assert report["rmse_by_cutoff_db"][11] < 1e-9


def test_budget_report(tmp_path):
    code, out = invoke(tmp_path, "budget", CONFIGS["budget"])
    assert code == EXIT_OK
    r = json.loads(out.read_text())
    assert (r["budget_db"], r["path_loss_db"], r["margin_db"], r["feasible"]) == (9.0, 4.0, 5.0, True)


def test_fit_pulse_report(tmp_path):
    code, out = invoke(tmp_path, "fit-pulse", CONFIGS["fit-pulse"])
    assert code == EXIT_OK
    r = json.loads(out.read_text())
    assert r["shape"] == "gaussian" and r["b2b"]["shape"] == "gaussian"
    assert r["pulse_fwhm_ps"] == pytest.approx(20.0, rel=0.02)
    assert r["link_f3db_ghz"] == pytest.approx(22.09, rel=0.03)


def test_simulate_report(tmp_path):
    code, out = invoke(tmp_path, "simulate", SCENARIO)
    assert code == EXIT_OK
    r = json.loads(out.read_text())
    assert r["offset_y_um"] == 5 and r["loss_cutoff_index"] == 12
    assert len(r["impulse_response"]["t_ps"]) == len(r["impulse_response"]["h"])


def test_modes_fields(tmp_path):
    fields = tmp_path / "fields"
    code, out = invoke(tmp_path, "modes", CONFIGS["modes"], "--fields", str(fields))
    assert code == EXIT_OK
    n = len(out.read_text().splitlines()) - 1
    assert n > 0 and len(list(fields.glob("mode_*.csv"))) == n


def test_stdout_default(tmp_path, capsys):
    path = write(tmp_path, "b.json", CONFIGS["budget"])
    assert run(["budget", str(path)]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["margin_db"] == 5.0


def test_missing_required_key(tmp_path, capsys):
    cfg = dict(CONFIGS["simulate"])
    del cfg["wavelength_um"]
    code, _ = invoke(tmp_path, "simulate", cfg)
    assert code == EXIT_INVALID
    assert "wavelength_um" in capsys.readouterr().err


def test_unknown_key_reports_path(tmp_path, capsys):
    cfg = json.loads(json.dumps(CONFIGS["simulate"]))
    cfg["launch"]["fwhm"] = 3
    code, _ = invoke(tmp_path, "simulate", cfg)
    assert code == EXIT_INVALID
    assert "launch.fwhm" in capsys.readouterr().err


def test_wrong_type(tmp_path, capsys):
    code, _ = invoke(tmp_path, "budget", dict(CONFIGS["budget"], nep="lots"))
    assert code == EXIT_INVALID
    assert "nep" in capsys.readouterr().err


def test_unknown_subcommand(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run(["transmogrify", str(write(tmp_path, "x.json", {}))])
    assert exc.value.code == EXIT_INVALID


def test_missing_file(tmp_path):
    assert run(["budget", str(tmp_path / "nope.json")]) == EXIT_INVALID


def test_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert run(["budget", str(p)]) == EXIT_INVALID


def test_numerical_failure(tmp_path, capsys):
    trace = tmp_path / "flat.csv"
    trace.write_text("delay_ps,amplitude\n" + "".join(f"{i},1.0\n" for i in range(32)))
    code, _ = invoke(tmp_path, "fit-pulse", {"trace": {"file": "flat.csv"}})
    assert code == EXIT_NUMERICAL
    assert "numerical" in capsys.readouterr().err


def test_inputs_not_modified(tmp_path):
    path = write(tmp_path, "scan.json", SCENARIO)
    before = digest(path)
    assert run(["scan", str(path), "-o", str(tmp_path / "o.csv")]) == EXIT_OK
    assert digest(path) == before


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    path = write(tmp_path, "b.json", CONFIGS["budget"])
    proc = subprocess.run([sys.executable, "-m", "modaldisp", "budget", str(path)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["margin_db"] == 5.0
