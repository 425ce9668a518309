import csv
import io

import numpy as np
import pytest

from tdroute.bounds import generate_invariant
from tdroute.cli import main
from tdroute.instgen import write_instance
from tdroute.pwl import PwlFunction, StepFunction
from tdroute.tdgraph import TdGraph


def run(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out=out)
    return code, out.getvalue()


def kv(text):
    return dict(line.split("=", 1) for line in text.strip().splitlines())


@pytest.fixture
def invariant_file(tmp_path):
    b = StepFunction([0, 1, 2, 3], [1.0, 2.0, 0.7, 1.5])
    g = generate_invariant(5, b, np.random.default_rng(3).uniform(0.3, 1.0, (5, 5)).round(3), T=4.0)
    p = tmp_path / "inv.td"
    write_instance(p, g)
    return p


def test_gen_writes_instance(tmp_path):
    p = tmp_path / "g.td"
    code, out = run("gen", "--n", 6, "--pattern", "B", "--delta", 0.8, "--seed", 7, "--out", p)
    assert code == 0 and p.read_text().startswith("#")
    assert out.strip().split(",")[:4] == [str(p), "6", "B", "0.8"]
    code, text = run("gen", "--n", 6, "--pattern", "B", "--delta", 0.8, "--seed", 7)
    assert code == 0 and text == p.read_text()


def test_gen_rejects_bad_delta(capsys):
    assert run("gen", "--n", 5, "--delta", 1.5)[0] == 2
    assert "error" in capsys.readouterr().err


def test_argparse_usage_errors():
    with pytest.raises(SystemExit) as e:
        run("solve")
    assert e.value.code == 2
    with pytest.raises(SystemExit):
        run("check", "x.td", "--grid", "fine")


def test_check_desk(tmp_path, desk_graph):
    p = tmp_path / "desk.td"
    write_instance(p, desk_graph)
    code, out = run("check", p, "--grid", "exact")
    assert code == 0 and kv(out)["invariant"] == "yes"


def test_check_invariant_and_not(tmp_path, invariant_file):
    assert run("check", invariant_file)[0] == 0
    p = tmp_path / "cross.td"
    write_instance(p, TdGraph(2, {(0, 1): PwlFunction.constant(1.0), (1, 0): PwlFunction([0, 2], [1, 3])}, 5.0))
    code, out = run("check", p, "--grid", "exact", "--engine", "simplex")
    assert code == 1 and kv(out)["invariant"] == "no"


def test_bound_and_plot(tmp_path, invariant_file):
    plot = tmp_path / "plot.csv"
    code, out = run("bound", invariant_file, "--plot-csv", plot, "--samples", 5)
    d = kv(out)
    assert code == 0 and float(d["lb"]) <= float(d["ub"]) * (1 + 1e-12)
    assert len(plot.read_text().splitlines()) == 1 + 20 * 5


def test_solve_invariant_at_root(invariant_file):
    code, out = run("solve", invariant_file, "--no-timing")
    d = kv(out)
    assert code == 0 and d["status"] == "optimal" and d["nodes"] == "1"
    code, out = run("solve", invariant_file, "--csv", "--no-timing")
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0][0] == "instance" and rows[1][1] == "1"


def test_bench(tmp_path):
    files = []
    for s in range(5):
        p = tmp_path / f"i{s}.td"
        assert run("gen", "--n", 5, "--seed", s + 1, "--out", p)[0] == 0
        files.append(p)
    out_csv = tmp_path / "bench.csv"
    code, _ = run("bench", *files, "--out", out_csv, "--no-timing")
    rows = list(csv.reader(open(out_csv)))
    assert code == 0 and len(rows) == 1 + 5 + 1
    assert rows[-1][0] == "ALL" and rows[-1][1] == "5"
    assert [r[0] for r in rows[1:6]] == [f.name for f in files]


def test_bad_file_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.td"
    p.write_text("TDTSP 2 5 0\narc 0 1 2 0 1\n")
    assert run("solve", p)[0] == 3
    assert "bad.td:2:" in capsys.readouterr().err
    assert run("check", tmp_path / "missing.td")[0] == 3
