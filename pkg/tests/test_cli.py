from __future__ import annotations

import json

import numpy as np
import pytest

from brownian_average import cli
from brownian_average.io import read_density_csv, read_ensemble_csv
from brownian_average.paths import Path, TimeGrid, time_average


def run(args):
    return cli.main([str(a) for a in args])


def _density(tmp_path, name, *extra):
    out = tmp_path / name
    code = run(["density", "--process", "meander", "--c-min", 0, "--c-max", 3, "--dc", 0.05,
                "--n", 20_000, "--seed", 42, "--n-chunks", 2, "--output", out, *extra])
    return code, out


def test_density_table(tmp_path):
    code, out = _density(tmp_path, "d.csv")
    assert code == 0
    table = read_density_csv(out)
    assert len(table) == 61
    assert table.c_values[0] == 0.0 and table.densities[0] == 0.0
    assert table.c_values[-1] == pytest.approx(3.0)
    text = out.read_text()
    assert "# n_chunks=2" in text and "# seed=42" in text
    assert "c,density,std_error,n_paths" in text


def test_density_byte_identical(tmp_path):
    _, a = _density(tmp_path, "a.csv")
    _, b = _density(tmp_path, "b.csv")
    assert a.read_bytes() == b.read_bytes()


def test_density_json(tmp_path):
    code, out = _density(tmp_path, "d.json", "--format", "json")
    assert code == 0
    payload = json.loads(out.read_text())
    assert payload["config"]["seed"] == 42
    assert set(payload["rows"][0]) == {"c", "density", "std_error", "n_paths"}


@pytest.mark.parametrize("bad", [["--c-min", -1], ["--dc", 0], ["--c-min", 2, "--c-max", 1], ["--n", 0], ["--grid-n", 1]])
def test_density_usage_errors(tmp_path, bad):
    out = tmp_path / "bad.csv"
    with pytest.raises(SystemExit) as exc:
        run(["density", "--process", "meander", "--n", 100, "--output", out, *bad])
    assert exc.value.code == 2
    assert not out.exists()


def test_seed_env(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.SEED_ENV, "77")
    out = tmp_path / "e.csv"
    run(["density", "--process", "excursion", "--n", 2000, "--dc", 0.5, "--n-chunks", 1, "--output", out])
    assert "# seed=77" in out.read_text()


def test_sample_excursion(tmp_path):
    out = tmp_path / "s.csv"
    code = run(["sample", "--process", "excursion", "--c", 0.7, "--n", 10_000, "--seed", 7, "--n-chunks", 2, "--output", out])
    assert code == 0
    times, values, w = read_ensemble_csv(out)
    body = [line for line in out.read_text().splitlines() if line[:1].isdigit()]
    ids = np.array([int(line.split(",")[0]) for line in body])
    # one contiguous block per path
    assert np.all(np.diff(ids) >= 0)
    avg = time_average(Path(TimeGrid(times), values))
    assert np.max(np.abs(avg - 0.7)) <= 1e-8
    assert values.min() >= 0
    assert w.shape[0] == values.shape[0]
    assert abs(w.sum() - 1) <= 1e-12
    header = out.read_text().split("path,t,value")[0]
    assert "# ess=" in header and "# n_chunks=2" in header


def test_sample_json(tmp_path):
    out = tmp_path / "s.json"
    assert run(["sample", "--process", "meander", "--c", 1.0, "--n", 500, "--grid-n", 32, "--format", "json", "--output", out]) == 0
    payload = json.loads(out.read_text())
    assert abs(sum(payload["weights"]) - 1) <= 1e-12
    assert len(payload["paths"]) == len(payload["weights"])
    assert payload["ess"]


@pytest.mark.parametrize("c", ["0", "-0.5"])
def test_sample_rejects_nonpositive_c(tmp_path, capsys, c):
    out = tmp_path / "s.csv"
    with pytest.raises(SystemExit) as exc:
        run(["sample", "--process", "meander", "--c", c, "--output", out])
    assert exc.value.code == 2
    assert "c > 0" in capsys.readouterr().err
    assert not out.exists()


def test_sample_all_zero_weights(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code = run(["sample", "--process", "meander", "--c", 50, "--n", 10, "--grid-n", 16, "--output", out])
    assert code == 1
    assert "weights are zero" in capsys.readouterr().err
    assert not out.exists()


def test_verify_only_inde(tmp_path):
    out = tmp_path / "v.json"
    assert run(["verify", "--only", "inde", "--output", out]) == 0
    reports = json.loads(out.read_text())
    assert len(reports) == 4
    assert all(abs(r["lhs"]) <= 1e-10 and r["pass"] for r in reports)
    assert all({"description", "lhs", "rhs", "combined_se", "pass"} <= set(r) for r in reports)


def test_verify_unknown_group():
    with pytest.raises(SystemExit) as exc:
        run(["verify", "--only", "nonsense"])
    assert exc.value.code == 2


def test_verify_quick(tmp_path):
    out = tmp_path / "q.json"
    code = run(["verify", "--quick", "--seed", 3, "--n-chunks", 1, "--output", out])
    reports = json.loads(out.read_text())
    assert code == 0, [r for r in reports if not r["pass"]]
    assert {r["check"] for r in reports} >= {"inde", "constants", "structure", "change_of_measure", "bins", "rejection"}


def test_module_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "brownian_average", "verify", "--only", "inde,constants"], capture_output=True, text=True)
    assert res.returncode == 0
    assert len(json.loads(res.stdout)) == 10


def test_verify_rejects_csv():
    with pytest.raises(SystemExit) as exc:
        run(["verify", "--only", "inde", "--format", "csv"])
    assert exc.value.code == 2
