import json
import subprocess
import sys

import numpy as np
import pytest

from randeq.cli import PGM_MAX, main, parse_counts, read_map_csv, read_pgm
from randeq.scenario import builtin_document


def _write(tmp_path, doc, name="s.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def _small(name="linear1", cells=24, n=2000):
    doc = builtin_document(name)
    doc["grid"]["cells"] = [cells] * len(doc["grid"]["cells"])
    doc["sampling"]["n"] = n
    return doc


def test_parse_counts():
    assert parse_counts("3x8") == [3] * 8
    assert parse_counts("3x8,5x2") == [3] * 8 + [5] * 2
    assert parse_counts("2,4") == [2, 4]


def test_run_is_byte_identical(tmp_path):
    path = _write(tmp_path, _small())
    for out in ("a", "b"):
        assert main(["run", path, "--out", str(tmp_path / out)]) == 0
    for f in ("map.csv", "map.pgm"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert ma["scenario_hash"] == mb["scenario_hash"]


def test_seed_override_changes_map(tmp_path):
    path = _write(tmp_path, _small())
    main(["run", path, "--out", str(tmp_path / "a")])
    main(["run", path, "--out", str(tmp_path / "b"), "--seed", "5"])
    assert (tmp_path / "a" / "map.csv").read_bytes() != (tmp_path / "b" / "map.csv").read_bytes()
    assert json.loads((tmp_path / "b" / "manifest.json").read_text())["seed"] == 5


def test_pgm_matches_csv(tmp_path):
    path = _write(tmp_path, _small("linear2x2", cells=20))
    main(["run", path, "--out", str(tmp_path)])
    imap = read_map_csv(tmp_path / "map.csv")
    levels, maxval = read_pgm(tmp_path / "map.pgm")
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert maxval == PGM_MAX and levels.shape == (20, 20)
    lo, hi = man["pgm_min"], man["pgm_max"]
    recon = lo + levels / PGM_MAX * (hi - lo)
    assert np.max(np.abs(recon - imap.values)) <= (hi - lo) / PGM_MAX
    assert imap.values.sum() * imap.grid.cell_volume == pytest.approx(1.0, abs=1e-9)
    assert man["kind"] == "posterior"


def test_run_posterior_linear2x2(tmp_path, capsys):
    doc = builtin_document("linear2x2")
    doc["sampling"]["n"] = 5000
    main(["run", _write(tmp_path, doc), "--out", str(tmp_path), "--modes"])
    imap = read_map_csv(tmp_path / "map.csv")
    assert imap.values.size == 4096
    assert imap.values.sum() * imap.grid.cell_volume == pytest.approx(1.0, abs=1e-9)
    modes = (tmp_path / "modes.csv").read_text().splitlines()
    assert modes[0] == "x1,x2" and len(modes) == 65
    assert "argmax" in capsys.readouterr().out


def test_schema_error_exit_code(tmp_path, capsys):
    doc = _small()
    doc["grid"]["cells"] = [0, 4]
    assert main(["run", _write(tmp_path, doc), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "/grid/cells" in err
    assert not (tmp_path / "map.csv").exists()


def test_missing_and_invalid_files(tmp_path):
    assert main(["run", str(tmp_path / "none.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", str(bad)]) == 2


def test_overflow_exit_code(tmp_path):
    path = _write(tmp_path, builtin_document("linear2x2"))
    assert main(["oracle", "mode-solutions", path, "--cap", "10", "--out", str(tmp_path)]) == 3


def test_zero_posterior_exit_code(tmp_path):
    doc = _small()
    doc["grid"] = {"lo": [50.0, 50.0], "hi": [60.0, 60.0], "cells": [8, 8]}
    assert main(["run", _write(tmp_path, doc), "--out", str(tmp_path)]) == 4


def test_count_output(capsys):
    assert main(["count", "--la", "3x8", "--lb", "5x2"]) == 0
    assert "164025" in capsys.readouterr().out
    main(["count", "--la", "4", "--lb", "4", "--partitioned", "--r", "3", "--kr", "3"])
    out = capsys.readouterr().out
    assert "16777216" in out and "distinct equations: 768" in out


def test_cost_output(capsys):
    assert main(["cost", "--L", "2", "3", "--range", "2", "50"]) == 0
    out = capsys.readouterr().out
    assert "L=3: +0.0%" in out and "minimum over L in [2, 50]: L=3" in out


def test_exact_map_oracle(tmp_path):
    path = _write(tmp_path, builtin_document("linear2x2"))
    assert main(["oracle", "exact-map", path, "--cells", "16", "--out", str(tmp_path)]) == 0
    imap = read_map_csv(tmp_path / "map.csv")
    assert imap.kind == "likelihood" and imap.values.shape == (16, 16)


def test_eigen_histogram_oracle(tmp_path, capsys):
    path = _write(tmp_path, builtin_document("eigen"))
    assert main(["oracle", "eigen-histogram", path, "--m", "20000", "--out", str(tmp_path)]) == 0
    assert "mass inside grid" in capsys.readouterr().out
    other = _write(tmp_path, builtin_document("linear1"), "l.json")
    assert main(["oracle", "eigen-histogram", other, "--out", str(tmp_path)]) == 2


def test_demo_linear2x2_writes_modes(tmp_path):
    assert main(["demo", "linear2x2", "--samples", "2000", "--cells", "16", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "modes.csv").exists()
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["kind"] == "likelihood" and man["modes"]["solved"] == 64


def test_demo_portfolio_manifest(tmp_path):
    assert main(["demo", "portfolio", "--samples", "500", "--cells", "16", "--out", str(tmp_path)]) == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert sum(man["allocation"]) == pytest.approx(1.0)
    assert man["return_density"]["components"] == 216


def test_demo_control_cap(tmp_path):
    assert main(["demo", "control", "--samples", "200", "--cells", "8", "--cap", "100",
                 "--out", str(tmp_path)]) == 3


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "randeq.cli", "count", "--la", "3x2"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and "systems: 9" in res.stdout
