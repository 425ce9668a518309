import math

import numpy as np
import pytest

from conftest import desk_tau
from tdroute.instgen import (
    GenSpec,
    ParseError,
    SplitMix64,
    crosses_box,
    decompose,
    format_instance,
    generate,
    manifest_row,
    parse_instance,
    read_instance,
    write_instance,
    write_manifest,
)
from tdroute.pwl import FifoError
from tdroute.tdgraph import TdGraph


def test_splitmix64_reference_vector():
    r = SplitMix64(1234567)
    assert [r.next_u64() for _ in range(5)] == [
        6457827717110365317,
        3203168211198807973,
        9817491932198370423,
        4593380528125082431,
        16408922859458223821,
    ]
    u = SplitMix64(1)
    xs = [u.random() for _ in range(1000)]
    assert 0.0 <= min(xs) and max(xs) < 1.0


def test_spec_validation():
    assert GenSpec(n=16).T == 4.0
    for bad in (dict(n=1), dict(n=5, pattern="C"), dict(n=5, delta=1.5), dict(n=5, delta=0.0),
                dict(n=5, periods=1), dict(n=5, T=-1.0), dict(n=5, rush=1.0)):
        with pytest.raises(ValueError):
            GenSpec(**bad)


def test_crosses_box():
    assert crosses_box((0, 0), (1, 1), 1 / 3, 2 / 3)
    assert not crosses_box((0, 0), (1, 0), 1 / 3, 2 / 3)
    assert crosses_box((0.5, 0), (0.5, 1), 1 / 3, 2 / 3)
    assert not crosses_box((0, 0.9), (0.2, 0.1), 1 / 3, 2 / 3)


def test_deterministic_bytes():
    spec = GenSpec(n=15, pattern="B", delta=0.9, seed=42)
    assert format_instance(generate(spec)) == format_instance(generate(spec))
    assert format_instance(generate(GenSpec(n=15, pattern="B", delta=0.9, seed=43))) != format_instance(generate(spec))


def _decomp(spec):
    rng = SplitMix64(spec.seed)
    pts = np.array([[rng.random(), rng.random()] for _ in range(spec.n)])
    return decompose(spec, rng, pts)


@pytest.mark.parametrize("pattern", ["A", "B"])
@pytest.mark.parametrize("delta", [0.7, 0.8, 0.9])
def test_speed_decomposition(pattern, delta):
    sd = _decomp(GenSpec(n=8, pattern=pattern, delta=delta, seed=3))
    D = np.array([sd.delta[a] for a in sorted(sd.delta)])
    assert D.min() == pytest.approx(delta)
    assert D.max() == 1.0 and np.all(D > 0)
    # f_h is the best congestion factor of each period
    assert np.allclose(D.max(axis=0), 1.0)
    assert np.all((0 < sd.f) & (sd.f <= 1))
    assert all(0.8 <= u <= 1.0 for u in sd.u.values())


def test_pattern_b_is_heavier():
    a = _decomp(GenSpec(n=10, pattern="A", delta=0.7, seed=5))
    b = _decomp(GenSpec(n=10, pattern="B", delta=0.7, seed=5))
    mean = lambda sd: np.mean([sd.delta[k] for k in sd.delta])  # noqa: E731
    assert mean(b) < mean(a)


def test_delta_one_means_no_degradation():
    sd = _decomp(GenSpec(n=6, delta=1.0, seed=2))
    assert all(np.all(d == 1.0) for d in sd.delta.values())


def test_uncongested_is_constant():
    spec = GenSpec(n=6, delta=1.0, rush=0.0, seed=2)
    g = generate(spec)
    rng = SplitMix64(spec.seed)
    pts = np.array([[rng.random(), rng.random()] for _ in range(spec.n)])
    sd = _decomp(spec)
    for (i, j), tau in g.arcs.items():
        assert tau.times.size == 1
        length = max(math.hypot(*(pts[i] - pts[j])), 1e-3)
        assert tau.values[0] == pytest.approx(length / sd.u[(i, j)], rel=1e-11)


def test_generated_graphs_are_fifo_and_complete():
    g = generate(GenSpec(n=7, pattern="B", delta=0.7, seed=11))
    assert g.is_complete and g.T == pytest.approx(math.sqrt(7), rel=1e-11)
    assert all(tau.is_fifo() for tau in g.arcs.values())


def test_round_trip(tmp_path):
    g = TdGraph(2, {(0, 1): desk_tau()}, 5.0)
    p = tmp_path / "desk.td"
    write_instance(p, g, ("desk",))
    h = read_instance(p)
    assert h.arcs == g.arcs and h.T == g.T and h.n == 2
    big = generate(GenSpec(n=15, pattern="B", delta=0.9, seed=1))
    write_instance(p, big)
    back = read_instance(p)
    assert back.arcs == big.arcs
    assert format_instance(back) == format_instance(big)


@pytest.mark.parametrize(
    "text, line",
    [
        ("TDTSP 2 5 0\narc 0 1 2 0 1\n", 2),
        ("# c\n\nTDTSP 2 5\n", 3),
        ("TDTSP 2 5 0\narc 0 1 1 0 1\narc 0 1 1 0 2\n", 3),
        ("TDTSP 2 5 0\nedge 0 1 1 0 1\n", 2),
        ("TDTSP 2 5 0\narc 0 1 1 0 x\n", 2),
    ],
)
def test_parse_errors_report_line(text, line):
    with pytest.raises(ParseError) as e:
        parse_instance(text, "f.td")
    assert e.value.lineno == line
    assert f"f.td:{line}:" in str(e.value)


def test_missing_header():
    with pytest.raises(ParseError):
        parse_instance("# nothing\n")


def test_fifo_violation_on_read():
    with pytest.raises(FifoError):
        parse_instance("TDTSP 2 5 0\narc 0 1 2 0 3 1 1\narc 1 0 1 0 1\n")


def test_manifest(tmp_path):
    spec = GenSpec(n=5, pattern="B", delta=0.8, seed=3)
    row = manifest_row("a.td", spec)
    assert list(row) == ["file", "n", "pattern", "delta", "periods", "T", "seed"]
    path = tmp_path / "m.csv"
    write_manifest(path, [row])
    assert path.read_text().splitlines()[0] == "file,n,pattern,delta,periods,T,seed"
