import csv
import json

import pytest

from cmaxwell import cli
from cmaxwell.errors import ConfigError
from cmaxwell.scenario import OUTPUT_ROOT_ENV, bundled_scenarios, load_config, parse_config

MINIMAL = """
[grid]
n = [8, 8, 8]

[initial]
kind = "plane_wave"

[integrator]
steps = 3
"""


def write(tmp_path, name, text):
    p = tmp_path / f"{name}.toml"
    p.write_text(text)
    return p


def csv_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# parsing ---------------------------------------------------------------------------------

def test_defaults_are_echoed():
    sc = parse_config(MINIMAL)
    cfg = sc.config
    assert cfg["integrator"]["scheme"] == "leapfrog" and cfg["integrator"]["cfl"] == 0.5
    assert cfg["gauge"]["mode"] == "lambda_zero" and cfg["monitor"]["cadence"] == 1
    assert cfg["initial"]["polarization"] == [0.0, 1.0, 0.0] and cfg["metric"] == {"family": "minkowski"}
    assert cfg["grid"]["length"] == [1.0, 1.0, 1.0]


@pytest.mark.parametrize("drop, key", [("n = [8, 8, 8]", "grid.n"), ('kind = "plane_wave"', "initial.kind"),
                                       ("steps = 3", "integrator.steps")])
def test_missing_required_key_is_named(drop, key):
    with pytest.raises(ConfigError) as exc:
        parse_config(MINIMAL.replace(drop, ""))
    assert key in str(exc.value)


def test_parse_error_cites_line():
    with pytest.raises(ConfigError) as exc:
        parse_config("[grid]\nn = [8, 8, 8]\nlength = = 2\n")
    assert exc.value.line == 3 and "line 3" in str(exc.value)


def test_bad_value_cites_line_of_key():
    text = MINIMAL.replace("steps = 3", "steps = 3\ncfl = -1.0")
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert "integrator.cfl" in str(exc.value) and exc.value.line == text.splitlines().index("cfl = -1.0") + 1


def test_polarization_must_be_transverse():
    text = MINIMAL.replace('kind = "plane_wave"', 'kind = "plane_wave"\nmode = [1, 0, 0]\npolarization = [1, 0, 0]')
    with pytest.raises(ConfigError, match="perpendicular"):
        parse_config(text)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="grid.spacing"):
        parse_config(MINIMAL.replace("n = [8, 8, 8]", "n = [8, 8, 8]\nspacing = 2"))


def test_dt_from_cfl_and_t_end():
    sc = parse_config(MINIMAL)
    grid, metric, state, _, _ = sc.build()
    assert sc.timestep(state, metric) == (pytest.approx(0.5 / 8), 3)
    sc = parse_config(MINIMAL.replace("steps = 3", "t_end = 0.2"))
    grid, metric, state, _, _ = sc.build()
    dt, steps = sc.timestep(state, metric)
    assert dt * steps == pytest.approx(0.2) and dt <= 0.5 / 8


def test_bundled_scenarios_validate():
    names = bundled_scenarios()
    assert {"vacuum_wave", "gauss_blob", "gaussian_pulse", "curved_blob", "current_pulse"} <= set(names)
    for name in names:
        load_config(name).build()


# command line ---------------------------------------------------------------------------

def test_run_vacuum_wave(tmp_path, capsys):
    out = tmp_path / "vw"
    assert cli.main(["run", "vacuum_wave", "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    rows = csv_rows(out / "monitor.csv")
    assert len(rows) == man["steps"] + 1
    assert man["version"].startswith("v") and man["wall_time_s"] >= 0
    assert man["config"]["integrator"]["cfl"] == 0.5
    assert "vacuum_wave" in capsys.readouterr().out


def test_gauss_blob_manifest_matches_csv(tmp_path):
    out = tmp_path / "gb"
    assert cli.main(["run", "gauss_blob", "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    last = csv_rows(out / "monitor.csv")[-1]
    assert man["final_gauss_residual"] == float(last["gauss_max"])


def test_missing_key_exit_2(tmp_path, capsys):
    p = write(tmp_path, "bad", MINIMAL.replace('kind = "plane_wave"', ""))
    assert cli.main(["run", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "initial.kind" in capsys.readouterr().err
    assert cli.main(["validate", str(p)]) == 2


def test_usage_error_exit_2():
    assert cli.main(["frobnicate"]) == 2
    assert cli.main(["run", "no_such_scenario"]) == 2


def test_runtime_failure_exit_3(tmp_path, capsys):
    p = write(tmp_path, "fast", MINIMAL.replace("steps = 3", "steps = 3\ndt = 1.0"))
    assert cli.main(["run", str(p), "--out", str(tmp_path / "o")]) == 3
    assert "CFLViolation" in capsys.readouterr().err


def test_validate_prints_effective_config(capsys):
    assert cli.main(["validate", "vacuum_wave"]) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["gauge"]["mode"] == "lambda_zero" and cfg["name"] == "vacuum_wave"


def test_output_root_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "root"))
    p = write(tmp_path, "tiny", MINIMAL)
    assert cli.main(["run", str(p)]) == 0
    assert (tmp_path / "root" / "runs" / "tiny" / "manifest.json").is_file()


def test_snapshots_recorded_in_manifest(tmp_path):
    p = write(tmp_path, "snap", MINIMAL + "\n[monitor]\nsnapshot_every = 2\n")
    out = tmp_path / "o"
    assert cli.main(["run", str(p), "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["snapshots"] == ["snapshots/snap_000000.bin", "snapshots/snap_000002.bin",
                                "snapshots/snap_000003.bin"]
    sidecar = json.loads((out / "snapshots" / "snap_000003.bin.json").read_text())
    assert sidecar["scenario"] == "snap" and sidecar["step"] == 3


# report ------------------------------------------------------------------------------------

def _ladder(tmp_path, ns):
    base = load_config("vacuum_wave").text
    dirs = []
    for n in ns:
        p = write(tmp_path, f"vw{n}", base.replace("n = [16, 16, 16]", f"n = [{n}, {n}, {n}]"))
        out = tmp_path / f"run{n}"
        assert cli.main(["run", str(p), "--out", str(out)]) == 0
        dirs.append(str(out))
    return dirs


def test_report_single_run(tmp_path):
    dirs = _ladder(tmp_path, [8])
    assert cli.main(["report", *dirs, "--out", str(tmp_path / "rep")]) == 0
    digest = (tmp_path / "rep" / "digest.txt").read_text()
    assert "1 run(s)" in digest and "max rel dev" in digest
    assert csv_rows(tmp_path / "rep" / "convergence.csv") == []
    assert len(csv_rows(tmp_path / "rep" / "summary.csv")) == 1


def test_report_two_runs_has_order_column(tmp_path):
    dirs = _ladder(tmp_path, [8, 16])
    assert cli.main(["report", *dirs, "--out", str(tmp_path / "rep")]) == 0
    rows = csv_rows(tmp_path / "rep" / "convergence.csv")
    assert len(rows) == 1 and rows[0]["order_exact_error"] != ""


def test_report_ladder_order(tmp_path):
    dirs = _ladder(tmp_path, [16, 32, 64])
    assert cli.main(["report", *dirs, "--out", str(tmp_path / "rep")]) == 0
    rows = csv_rows(tmp_path / "rep" / "convergence.csv")
    orders = [float(r["order_exact_error"]) for r in rows]
    assert all(1.9 <= o <= 2.1 for o in orders)
    assert 1.9 <= float(rows[-1]["richardson_order_hamiltonian"]) <= 2.1


def test_report_missing_manifest_exit_2(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    assert cli.main(["report", str(tmp_path / "empty"), "--out", str(tmp_path / "rep")]) == 2
    assert "manifest" in capsys.readouterr().err
