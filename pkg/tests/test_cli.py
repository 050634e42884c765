import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from dexcal import gauge
from dexcal.cli import main
from dexcal.lattice_forms import Lattice


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_verify_passes_and_is_deterministic(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "--seed", "7")
    assert code == 0
    lines = out.splitlines()
    checks = [line for line in lines if line.startswith(("PASS", "FAIL"))]
    assert len(checks) >= 40 and all(line.startswith("PASS") for line in checks)
    assert lines[-1] == f"{len(checks)}/{len(checks)} checks passed"
    target = tmp_path / "report.txt"
    assert main(["verify", "--seed", "7", "--out", str(target)]) == 0
    assert target.read_text() == out


def test_verify_mutation_names_hodge_identity(capsys):
    code, out, err = run(capsys, "verify", "--inject-hodge-sign-flip")
    assert code == 1
    assert "check failed: hodge_d_identity" in err
    assert "first failure: hodge_d_identity" in out


def test_verify_tolerance_override(capsys):
    code, _, err = run(capsys, "verify", "--tol", "-1")
    assert code == 1 and "check failed" in err


def _csv(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.mark.parametrize("operator,expected", [("dk", 1), ("naive", 2)])
def test_spectrum(capsys, operator, expected):
    code, out, _ = run(capsys, "spectrum", "--dim", "1", "--size", "16", "--operator", operator)
    assert code == 0
    rows = _csv(out)
    assert len(rows) == 16 and set(rows[0]) == {"k0", "min_abs_eig", "zero_flag"}
    assert sum(int(r["zero_flag"]) for r in rows) == expected


def test_spectrum_with_metric_file(capsys, tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"kind": "diagonal", "data": [1.0, 1.0]}))
    code, out, _ = run(capsys, "spectrum", "--dim", "2", "--size", "4", "--operator", "dk", "--metric", str(path))
    assert code == 0 and sum(int(r["zero_flag"]) for r in _csv(out)) == 1


def test_spectrum_bad_metric_file(capsys, tmp_path):
    path = tmp_path / "m.json"
    path.write_text("{not json")
    code, _, err = run(capsys, "spectrum", "--dim", "2", "--size", "4", "--operator", "dk", "--metric", str(path))
    assert code == 2 and "parse error" in err


def test_wilson(capsys, tmp_path, rng):
    cfg = gauge.GaugeConfig.random(Lattice((4, 4)), gauge.SU2, rng)
    path = tmp_path / "cfg.csv"
    gauge.save_config(cfg, path)
    code, out, _ = run(capsys, "wilson", "--config", str(path), "--bins", "5")
    assert code == 0
    head, *rest = out.splitlines()
    assert float(head.split("=")[1]) == pytest.approx(gauge.wilson_action(cfg))
    rows = _csv("\n".join(rest))
    assert len(rows) == 5 and sum(int(r["count"]) for r in rows) == 16


def test_wilson_missing_config(capsys, tmp_path):
    code, _, err = run(capsys, "wilson", "--config", str(tmp_path / "absent.csv"))
    assert code == 2 and err


@pytest.mark.parametrize("profile", ["lightcone", "zero"])
def test_wave_exact_profiles(capsys, profile):
    code, out, _ = run(capsys, "wave", "--profile", profile)
    assert code == 0
    rows = _csv(out)
    assert len(rows) == 256 and set(rows[0]) == {"x", "t", "residual"}
    assert max(float(r["residual"]) for r in rows) <= 1e-12
    if profile == "zero":
        assert all(float(r["residual"]) == 0 for r in rows)


def test_wave_generic_profile(capsys):
    code, out, _ = run(capsys, "wave", "--profile", "generic", "--size", "8")
    assert code == 0
    assert max(float(r["residual"]) for r in _csv(out)) >= 1e-3


def test_graph_command(capsys, tmp_path):
    path = tmp_path / "g.json"
    path.write_text(json.dumps({"nodes": 4, "edges": [[0, 1], [1, 3], [0, 2], [2, 3]]}))
    code, out, _ = run(capsys, "graph", str(path))
    assert code == 0
    assert json.loads(out) == {"dims": [4, 4, 1], "has_intermediate": False, "has_opposite": False}


def test_graph_fig_right_and_empty(capsys, tmp_path):
    path = tmp_path / "g.json"
    path.write_text(json.dumps({"nodes": 3, "edges": [[0, 1], [0, 2]]}))
    assert run(capsys, "graph", str(path))[1].strip() == json.dumps(
        {"dims": [3, 2], "has_intermediate": False, "has_opposite": False}
    )
    path.write_text(json.dumps({"nodes": 0}))
    assert json.loads(run(capsys, "graph", str(path))[1])["dims"] == [0]


def test_graph_parse_error_reports_line(capsys, tmp_path):
    path = tmp_path / "g.json"
    path.write_text('{\n  "nodes": 2,\n  "edges": [[0 1]]\n}')
    code, _, err = run(capsys, "graph", str(path))
    assert code == 2 and "line 3" in err


def test_graph_invalid_edge(capsys, tmp_path):
    path = tmp_path / "g.json"
    path.write_text(json.dumps({"nodes": 2, "edges": [[0, 0]]}))
    code, _, err = run(capsys, "graph", str(path))
    assert code == 2 and "self-loop" in err


def test_hodge_demo_diamond(capsys):
    code, out, _ = run(capsys, "hodge-demo", "--metric", "diamond")
    assert code == 0
    data = json.loads(out)
    rows = {tuple(r["input"]): r for r in data["basis"]}
    assert rows[(1,)]["metric_operator"] == [{"index": [2], "coefficient": -1.0, "translation": [0, 0]}]
    assert rows[()]["star"][0]["index"] == [1, 2] and rows[()]["star"][0]["coefficient"] == -1.0
    assert data["volume_at_origin"][0]["coefficient"] == -1.0
    neg = json.loads(run(capsys, "hodge-demo", "--metric", "diamond", "--c", "-1")[1])
    assert neg["volume_at_origin"][0]["coefficient"] == 1.0


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["spectrum", "--dim", "1"])
    assert exc.value.code == 2


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "dexcal", "graph", "-"],
        input='{"nodes": 2, "edges": [[0, 1]]}',
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0 and json.loads(proc.stdout)["dims"] == [2, 1]


def test_spectrum_is_reproducible(capsys):
    a = run(capsys, "spectrum", "--dim", "2", "--size", "4", "--operator", "naive")[1]
    b = run(capsys, "spectrum", "--dim", "2", "--size", "4", "--operator", "naive")[1]
    assert a == b
    assert np.isfinite([float(r["min_abs_eig"]) for r in _csv(a)]).all()
