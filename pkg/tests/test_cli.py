import csv
import hashlib
import json

import pytest
import yaml

from irsdetect import cli
from irsdetect.errors import ConfigurationError

MINIMAL = "M: 4\nK: 6\nL: 16\n"


def _write(tmp_path, text, name="c.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_minimal_document_gets_defaults():
    cfg = cli.parse_config(MINIMAL)
    s = cfg.system
    assert (s.M, s.K, s.L, s.N) == (4, 6, 16, 16)
    assert s.nakagami_m == 2.0 and s.reflection_amplitude == 0.8
    assert s.power_range_mw == (10.0, 50.0)
    assert cfg.settings["trials"] == 100_000
    assert cfg.resolved["noise"]["model"] == "iid"


def test_round_trip():
    cfg = cli.parse_config(MINIMAL + "noise: {model: correlated, rho: 0.3}\ndetector: T2\n")
    again = cli.parse_config(cli.serialize_config(cfg))
    assert again.system == cfg.system
    assert again.resolved == cfg.resolved


@pytest.mark.parametrize("text, key", [
    ("M: 0\nK: 6\nL: 16\n", "M"),
    ("K: 6\nL: 16\n", "M"),
    (MINIMAL + "snr: 3\n", "snr"),
    (MINIMAL + "noise: {modle: iid}\n", "noise.modle"),
    (MINIMAL + "noise: {model: pink}\n", "noise.model"),
    (MINIMAL + "detector: T9\n", "detector"),
    (MINIMAL + "target_pfa: 1.5\n", "target_pfa"),
    (MINIMAL + "pfa_grid: [0.5, 0.1]\n", "pfa_grid"),
    (MINIMAL + "trials: 0\n", "trials"),
    (MINIMAL + "sweep: {axis: Q}\n", "sweep.axis"),
    (MINIMAL + "fading: sometimes\n", "fading"),
    ("M: [unclosed\n", "<document>"),
    ("- 1\n- 2\n", "<document>"),
])
def test_rejections_name_the_key(text, key):
    with pytest.raises(ConfigurationError) as exc:
        cli.parse_config(text)
    assert exc.value.key == key
    if key == "M" and "0" in text:
        assert ">= 1" in str(exc.value)


def test_roc_two_point_grid(tmp_path):
    cfg = _write(tmp_path, MINIMAL + "pfa_grid: [0.05, 0.2]\n")
    out = tmp_path / "o"
    assert cli.main(["roc", "--config", cfg, "--out", str(out), "--trials", "2000"]) == 0
    rows = _rows(out / "roc.csv")
    assert len(rows) == 2
    assert tuple(rows[0]) == cli.CSV_COLUMNS
    assert all(r["schema_version"] == "1" and r["seed"] == "2024" for r in rows)


def test_manifest_digests_and_determinism(tmp_path):
    cfg = _write(tmp_path, MINIMAL + "pfa_grid: [0.1]\ntarget_pfa: 0.1\n")
    for d in ("a", "b"):
        assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / d),
                         "--trials", "1000", "--seed", "7"]) == 0
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["seed"] == 7 and man["trials"] == 1000 and man["command"] == "simulate"
    assert man["config"]["N"] == 16  # defaults recorded
    for name, digest in man["files"].items():
        data = (tmp_path / "a" / name).read_bytes()
        assert hashlib.sha256(data).hexdigest() == digest
        assert data == (tmp_path / "b" / name).read_bytes()
    assert (tmp_path / "a" / "manifest.json").read_bytes() == \
        (tmp_path / "b" / "manifest.json").read_bytes()


@pytest.mark.parametrize("detector", ["Opt", "T1", "T2", "T3Rao", "T3Glrt"])
def test_analytic_command(tmp_path, detector):
    cfg = _write(tmp_path, MINIMAL + f"detector: {detector}\npfa_grid: [0.01, 0.1, 0.5]\n")
    assert cli.main(["analytic", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rows = _rows(tmp_path / "o" / "analytic.csv")
    assert [float(r["axis_value"]) for r in rows] == [0.01, 0.1, 0.5]
    for r in rows:
        assert float(r["pfa"]) == pytest.approx(float(r["axis_value"]), rel=1e-6)
    pds = [float(r["pd"]) for r in rows]
    assert pds == sorted(pds)


def test_analytic_printed_rao_law(tmp_path):
    cfg = _write(tmp_path, MINIMAL + "detector: T3Rao\nrao_law: printed\npfa_grid: [0.1]\n")
    assert cli.main(["analytic", "--config", cfg, "--out", str(tmp_path / "o")]) == 0


@pytest.mark.parametrize("extra", ["detector: T1LowSnr\n", "fading: per_trial\n"])
def test_analytic_without_closed_form_is_config_error(tmp_path, extra):
    cfg = _write(tmp_path, MINIMAL + extra)
    assert cli.main(["analytic", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_sweep_outputs(tmp_path):
    cfg = _write(tmp_path, MINIMAL + "target_pfa: 0.1\n"
                 "sweep: {axis: L, values: [8, 16], snr_grid: [-15, -10, -5, 0]}\n")
    assert cli.main(["sweep", "--config", cfg, "--out", str(tmp_path / "o"),
                     "--trials", "1000"]) == 0
    for v in (8, 16):
        rows = _rows(tmp_path / "o" / f"sweep_L_{v}.csv")
        assert [float(r["axis_value"]) for r in rows] == [-15, -10, -5, 0]
    summary = yaml.safe_load((tmp_path / "o" / "sweep_L_summary.yaml").read_text())
    assert summary["axis"] == "L" and set(summary["snr_at_target_db"]) == {"8", "16"}


def test_errors_report_coordinates(tmp_path, capsys):
    cfg = _write(tmp_path, "M: 2\nK: 1\nL: 8\ndetector: T3Rao\ntarget_pfa: 0.1\n"
                 "sweep: {axis: M, values: [2, 8], snr_grid: [0]}\n")
    code = cli.main(["sweep", "--config", cfg, "--out", str(tmp_path / "o"), "--trials", "1000"])
    assert code == 2
    err = capsys.readouterr().err
    assert "axis_value=8" in err and "seed=2024" in err


@pytest.mark.parametrize("argv_extra, text, code", [
    ([], "M: 0\nK: 1\nL: 4\n", 2),
    (["--trials", "0"], MINIMAL, 2),
    (["--seed", "-1"], MINIMAL, 2),
    (["--trials", "50"], MINIMAL + "target_pfa: 0.01\n", 2),  # too few to calibrate
])
def test_exit_codes(tmp_path, argv_extra, text, code):
    cfg = _write(tmp_path, text)
    assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")] + argv_extra) == code


def test_missing_config_file(tmp_path):
    assert cli.main(["roc", "--config", str(tmp_path / "nope.yaml"), "--out", str(tmp_path)]) == 2


def test_numeric_error_exit_code(tmp_path, monkeypatch):
    from irsdetect.errors import NumericError

    def boom(*a, **k):
        raise NumericError("series diverged")

    monkeypatch.setitem(cli.HANDLERS, "roc", boom)
    cfg = _write(tmp_path, MINIMAL)
    assert cli.main(["roc", "--config", cfg, "--out", str(tmp_path / "o")]) == 3


def test_validate_exit_status_follows_report(tmp_path, monkeypatch):
    from irsdetect import validation

    rows = [validation.CheckResult("1", "always", True)]
    monkeypatch.setattr(validation, "run_checks", lambda trials, seed: rows)
    cfg = _write(tmp_path, MINIMAL)
    assert cli.main(["validate", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    rows.append(validation.CheckResult("2", "never", False))
    assert cli.main(["validate", "--config", cfg, "--out", str(tmp_path / "b")]) == 1
    rep = yaml.safe_load((tmp_path / "b" / "validation_report.yaml").read_text())
    assert rep["failed"] == 1 and rep["passed"] == 1


def test_unknown_command_rejected(tmp_path):
    with pytest.raises(SystemExit):
        cli.main(["plot", "--config", "x", "--out", "y"])


def test_report_details_are_yaml_safe():
    import numpy as np
    from irsdetect import validation

    rows = [validation.CheckResult("9", "x", np.bool_(True), {"n": np.int64(3), "v": [np.float64(1.5)],
                                                              "d": {1: np.arange(2)}})]
    rep = validation.format_report(rows, 10)
    assert yaml.safe_load(yaml.safe_dump(rep))["checks"][0]["detail"] == {"n": 3, "v": [1.5],
                                                                          "d": {"1": [0, 1]}}
