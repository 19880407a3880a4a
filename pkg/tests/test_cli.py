import csv
import json
import subprocess
import sys

import pytest

from cliffpi.cli import main
from cliffpi.suites import SuiteConfig, UsageError, emit_report, run_suite


def test_clifford_report_schema(tmp_path):
    out = tmp_path / "r.json"
    assert main(["clifford", "--n", "3", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["schema"] == 1 and d["suite"] == "clifford"
    assert set(d) >= {"config_echo", "checks", "convergence"}
    for c in d["checks"]:
        assert set(c) == {"name", "value", "bound", "pass"}


def test_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["borel-pompeiu", "--resolution", "8", "--resolution", "10", "--seed", "3"]
    main(args + ["--out", str(a)])
    main(args + ["--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_csv_rows(tmp_path):
    out = tmp_path / "r.csv"
    main(["clifford", "--format", "csv", "--out", str(out)])
    rows = list(csv.reader(out.open()))
    d = run_suite("clifford").to_dict()
    assert len(rows) == len(d["checks"]) + 1


def test_exit_codes(tmp_path):
    assert main(["nosuch"]) == 2
    assert main(["clifford", "--manifold", "torus"]) == 2
    assert main(["clifford", "--out", str(tmp_path / "missing" / "r.json")]) == 3
    # a deliberately impossible tolerance fails checks but still writes the report
    out = tmp_path / "fail.json"
    assert main(["clifford", "--tol", "-1", "--out", str(out)]) == 1
    assert json.loads(out.read_text())["checks"]
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["clifford", str(bad)]) == 2


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"manifold": {"kind": "euclid", "n": 2}, "resolutions": [8, 10], "seed": 1}))
    out = tmp_path / "r.json"
    main(["borel-pompeiu", str(cfg), "--seed", "2", "--out", str(out)])
    d = json.loads(out.read_text())
    assert d["config_echo"]["seed"] == 2 and d["config_echo"]["resolutions"] == [8, 10]
    assert len(d["convergence"]) == 2


def test_config_validation():
    with pytest.raises(UsageError):
        SuiteConfig.from_dict("isometry", {"resolutions": [16, 8]})
    with pytest.raises(UsageError):
        SuiteConfig.from_dict("isometry", {"colour": "red"})
    with pytest.raises(UsageError):
        run_suite("nosuch")


def test_isometry_suite_reports_defect_column(tmp_path):
    r = run_suite("isometry", {"resolutions": [8, 12], "samples": 3})
    defects = [row["residual"] for row in r.convergence]
    assert defects[1] < defects[0]
    emit_report(r, tmp_path / "iso.csv", "csv")


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cliffpi.cli", "clifford", "--n", "2"], capture_output=True,
                          text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["suite"] == "clifford"
