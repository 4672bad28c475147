import csv
import io
import json

import pytest

from sspickands.cli import (
    BOUNDS_COLUMNS,
    ESTIMATE_COLUMNS,
    EXCEEDANCE_COLUMNS,
    OUTPUT_DIR_ENV,
    main,
)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def parse_csv(text):
    lines = text.splitlines()
    assert lines[0].startswith("# ")
    header = json.loads(lines[0][2:])
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    return header, rows


def test_info(capsys):
    code, out, _ = run(capsys, "info", "dual", "--alpha", "1")
    assert code == 0
    _, rows = parse_csv(out)
    assert (float(rows[0]["alpha"]), float(rows[0]["kappa"]), float(rows[0]["c_Y"])) == (1.0, 2.0, 0.5)


def test_bounds_time_average(capsys):
    code, out, _ = run(capsys, "bounds", "time-average", "--alpha", "2", "--R", "1")
    assert code == 0
    header, rows = parse_csv(out)
    assert list(rows[0]) == BOUNDS_COLUMNS
    assert float(rows[0]["upper"]) == pytest.approx(1.20711, abs=1e-5)
    assert header["artifact"] == "sspickands" and header["config"]["command"] == "bounds"


def test_bounds_symbolic_column(capsys):
    code, out, _ = run(capsys, "bounds", "bifractional", "--alpha", "1", "--K", "0.5", "--R", "2")
    assert code == 0
    _, rows = parse_csv(out)
    assert rows[0]["upper"].startswith("H_B0.5^")


def test_estimate_rows_and_flags(capsys):
    code, out, err = run(capsys, "estimate", "fbm", "--alpha", "1", "--R", "1,2", "--T", "2",
                         "--paths", "2000", "--density", "4", "--levels", "2")
    assert code == 0 and "R=1:" in err
    _, rows = parse_csv(out)
    assert list(rows[0]) == ESTIMATE_COLUMNS
    assert len(rows) == 2 * 3  # two levels plus the extrapolated row, per R
    extra = [r for r in rows if "extrapolated" in r["flags"]]
    assert len(extra) == 2 and all(r["log_mean"] == "" for r in extra)
    for r in rows:
        assert float(r["value"]) > 1.0 and r["seed"] == "0"


@pytest.mark.parametrize(
    "argv",
    [
        ["estimate", "sub-fractional", "--alpha", "1.2", "--R", "0.5", "--T", "3", "--paths", "3000",
         "--density", "4", "--method", "tilted"],
        ["exceedance", "fbm", "--alpha", "1", "--b", "1", "--T", "1", "--u-list", "2,2.5",
         "--budget", "50000", "--reference-paths", "3000", "--density", "4"],
        ["pickands-curve", "fbm", "--alpha", "1", "--T-list", "1,2", "--paths", "2000", "--density", "4",
         "--levels", "1"],
    ],
)
def test_byte_identical_across_workers(capsys, tmp_path, argv):
    outs = []
    for w in ("1", "8"):
        path = tmp_path / f"out{w}.csv"
        assert main(argv + ["--seed", "7", "--workers", w, "--output", str(path)]) == 0
        outs.append(path.read_bytes())
    capsys.readouterr()
    assert outs[0] == outs[1]


def test_exceedance_columns(capsys):
    code, out, _ = run(capsys, "exceedance", "fbm", "--alpha", "1", "--b", "1", "--T", "1",
                       "--u-list", "2", "--budget", "50000", "--reference-paths", "2000", "--density", "4")
    assert code == 0
    _, rows = parse_csv(out)
    assert list(rows[0]) == EXCEEDANCE_COLUMNS


def test_exceedance_refusal_is_a_validation_error(capsys):
    code, _, err = run(capsys, "exceedance", "fbm", "--alpha", "1", "--b", "1", "--T", "5",
                       "--u-list", "4.5", "--budget", "1000", "--reference-paths", "1000", "--density", "2")
    assert code == 1 and "n_paths >=" in err


def test_json_output(capsys):
    code, out, _ = run(capsys, "info", "fbm", "--alpha", "0.5", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["rows"][0]["kappa"] == 0.5 and "columns" in doc and doc["version"]


def test_config_file_and_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("process:\n  family: dual\n  alpha: 1.0\nR: [2.0]\n")
    code, out, _ = run(capsys, "bounds", "--config", str(cfg))
    assert code == 0
    _, rows = parse_csv(out)
    assert float(rows[0]["R"]) == 2.0
    code, out, _ = run(capsys, "bounds", "--config", str(cfg), "--R", "0.5")
    assert float(parse_csv(out)[1][0]["R"]) == 0.5


def test_config_rejects_unknown_keys(capsys, tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("process:\n  family: fbm\n  alpha: 1.0\n  hurst: 0.5\n")
    code, _, err = run(capsys, "info", "--config", str(cfg))
    assert code == 1 and "hurst" in err
    cfg.write_text("process: [1, 2\n")
    code, _, err = run(capsys, "info", "--config", str(cfg))
    assert code == 1 and "bad.yaml:" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["info", "fbm", "--alpha", "3"],
        ["info", "brownian-sheet", "--alpha", "1"],
        ["info", "fbm"],
        ["bounds", "fbm", "--alpha", "1", "--R", "0"],
        ["estimate", "fbm", "--alpha", "1", "--R", "x"],
        ["estimate", "fbm", "--alpha", "1", "--paths", "many"],
    ],
)
def test_validation_exit_code(capsys, argv):
    code, _, _ = run(capsys, *argv)
    assert code == 1


def test_output_dir_env(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
    code, out, _ = run(capsys, "info", "fbm", "--alpha", "1")
    assert code == 0 and "(alpha, kappa, c_Y)" in out
    assert (tmp_path / "info.csv").exists()
    code, _, _ = run(capsys, "info", "fbm", "--alpha", "1", "--output", "sub/x.csv")
    assert (tmp_path / "sub" / "x.csv").exists()


def test_verify_exit_code(capsys, monkeypatch):
    code, out, _ = run(capsys, "verify")
    assert code == 0
    _, rows = parse_csv(out)
    assert rows and all(r["passed"] == "True" for r in rows)

    from sspickands import cli
    from sspickands.verify import CheckResult

    monkeypatch.setattr(cli, "run_checks", lambda seed=0: [CheckResult("x", "y", False, "forced")])
    code, _, _ = run(capsys, "verify")
    assert code == 3
