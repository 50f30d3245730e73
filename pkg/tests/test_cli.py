import csv
import json
import subprocess
import sys

import pytest

from coagfrag import equilibrium as eq
from coagfrag.cli import main
from coagfrag.validation import ANALYTIC, CHECKS, SIMULATION


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_equilibrium_csv_and_header(tmp_path):
    out = tmp_path / "eq5.csv"
    assert main(["equilibrium", "--n", "5", "--out", str(out)]) == 0
    rows = _rows(out)
    assert rows[0] == ["k", "c_k", "p_k", "kc_k"]
    state = eq.equilibrium_state(5)
    assert float(rows[1][1]) == state.c[0]
    assert len(rows) - 1 == state.K
    head = json.loads((tmp_path / "eq5.json").read_text())
    assert head["q_n"] == state.q_n and head["K"] == state.K


def test_equilibrium_json_stable(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["equilibrium", "--n", "7", "--format", "json", "--out", str(a)]) == 0
    assert main(["equilibrium", "--n", "7", "--format", "json", "--out", str(b), "--threads", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert list(doc) == sorted(doc)


def test_limits(tmp_path):
    out = tmp_path / "lim.csv"
    assert main(["limits", "--xmin", "0.01", "--xmax", "10", "--points", "25", "--out", str(out)]) == 0
    rows = _rows(out)
    assert rows[0] == ["x", "c", "xc", "cdf", "ell_of_x"]
    assert len(rows) == 26
    cdf = [float(r[3]) for r in rows[1:]]
    assert cdf == sorted(cdf) and 0 < cdf[0] < cdf[-1] < 1
    # 17 significant digits round-trip the binary64 values
    assert all(len(r[0].replace("-", "").replace(".", "").split("e")[0].lstrip("0")) <= 17 for r in rows[1:])


@pytest.mark.parametrize(
    "args",
    [
        ["--kind", "gw", "--n", "5", "--samples", "3000"],
        ["--kind", "sbgw", "--n", "3", "--samples", "2000"],
        ["--kind", "gamma", "--samples", "200"],
        ["--kind", "psiex", "--samples", "1000", "--m", "1024"],
        ["--kind", "diffusion", "--samples", "200", "--dt", "1e-3"],
    ],
)
def test_simulate_deterministic_across_threads(tmp_path, args):
    one, two = tmp_path / "one", tmp_path / "two"
    assert main(["simulate", *args, "--seed", "4", "--out", str(one)]) == 0
    assert main(["simulate", *args, "--seed", "4", "--threads", "2", "--out", str(two)]) == 0
    assert (tmp_path / "one.csv").read_bytes() == (tmp_path / "two.csv").read_bytes()
    assert (tmp_path / "one.json").read_bytes() == (tmp_path / "two.json").read_bytes()
    json.loads((tmp_path / "one.json").read_text())


def test_simulate_summary_to_stdout(capsys):
    assert main(["simulate", "--kind", "gw", "--n", "5", "--samples", "500"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert isinstance(doc, dict) and doc


def test_exit_codes(tmp_path, capsys):
    assert main(["simulate", "--kind", "gw", "--samples", "10"]) == 2
    assert main(["limits", "--xmin", "5", "--xmax", "1"]) == 2
    assert main(["equilibrium", "--n", "5", "--eps-tail", "1e-20"]) == 2
    assert main(["equilibrium", "--n", "5", "--threads", "0"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--kind", "nope"])
    assert exc.value.code == 2
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["equilibrium", "--n", "5", "--out", str(blocker / "sub" / "eq.csv")]) == 3


def test_module_entry_point(tmp_path):
    out = tmp_path / "eq.csv"
    r = subprocess.run([sys.executable, "-m", "coagfrag", "equilibrium", "--n", "3", "--out", str(out)], capture_output=True)
    assert r.returncode == 0
    assert out.exists()


def test_criterion_ids_cover_all():
    assert sorted(CHECKS, key=lambda c: int(c[1:])) == [f"C{i}" for i in range(1, 14)]
    assert set(ANALYTIC) | set(SIMULATION) == set(CHECKS)
    assert not set(ANALYTIC) & set(SIMULATION)


def test_validate_analytic_suite(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    code = main(["validate", "--suite", "analytic", "--out", str(a)])
    doc = json.loads(a.read_text())
    ids = [c["id"] for c in doc["criteria"]]
    assert ids == list(ANALYTIC)
    assert code == (0 if all(c["passed"] for c in doc["criteria"]) else 1)
    assert main(["validate", "--suite", "analytic", "--out", str(b)]) == code
    strip = lambda d: [{k: v for k, v in c.items() if k != "runtime_seconds"} for c in d["criteria"]]
    assert strip(doc) == strip(json.loads(b.read_text()))
    err = capsys.readouterr().err
    assert "C1" in err and "C13" in err
