import csv
import json

import numpy as np
import pytest

from tpcsim.cli import main
from tpcsim.pipeline import load_depos, read_grid, write_grid
from tpcsim.spectral import fft

CONFIG = {"grid": {"n_wires": 40, "n_ticks": 200, "pad_wires": 4, "pad_ticks": 60},
          "rng": {"mode": "pool", "seed": 3}}


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "cfg.json").write_text(json.dumps(CONFIG))
    assert main(["gen-depos", "--n", "50", "--seed", "1", "--config", "cfg.json", "--out", "d.csv"]) == 0
    return tmp_path


def test_gen_depos(workdir):
    assert len(load_depos("d.csv")) == 50


def test_simulate_and_overrides(workdir):
    assert main(["simulate", "--config", "cfg.json", "--depos", "d.csv", "--out", "a.bin",
                 "--timing-out", "t.json", "--charge-out", "q.bin"]) == 0
    assert main(["simulate", "--config", "cfg.json", "--depos", "d.csv", "--out", "b.bin",
                 "--workers", "2", "--dispatch", "per_depo", "--rng", "substream", "--seed", "3"]) == 0
    a, b = read_grid("a.bin"), read_grid("b.bin")
    assert a.shape == (48, 320) and a.dtype == np.int64
    assert np.array_equal(a, b)
    assert json.loads((workdir / "t.json").read_text())["rng_mode"] == "pool"
    assert read_grid("q.bin").sum() == sum(d.q for d in load_depos("d.csv"))


def test_simulate_inline_parallel_rejected(workdir, capsys):
    rc = main(["simulate", "--config", "cfg.json", "--depos", "d.csv", "--out", "a.bin",
               "--rng", "inline", "--workers", "2"])
    assert rc == 2
    assert "inline" in capsys.readouterr().err


def test_bench(workdir):
    assert main(["bench", "--config", "cfg.json", "--depos", "d.csv", "--variants", "inline", "pool:2",
                 "--repeats", "1", "--out", "b.json"]) == 0
    doc = json.loads((workdir / "b.json").read_text())
    assert len(doc["records"]) == 2


def test_gen_response(workdir):
    assert main(["gen-response", "--config", "cfg.json", "--out", "r.bin"]) == 0
    assert main(["gen-response", "--config", "cfg.json", "--out", "h.bin", "--time-domain"]) == 0
    r, h = read_grid("r.bin"), read_grid("h.bin")
    assert r.dtype == np.complex128 and h.dtype == np.float64
    assert h.sum() == pytest.approx(14.0)


def test_sigproc(workdir):
    x = np.random.default_rng(0).normal(size=(10, 32))
    write_grid(fft(x, axis=1), "in.bin")
    write_grid(np.ones((1, 32)), "f.bin")
    assert main(["sigproc", "--in", "in.bin", "--filter", "f.bin", "--pad", "2", "--rows", "6",
                 "--out", "o.bin", "--medians", "m.txt"]) == 0
    out = read_grid("o.bin")
    assert np.abs(out - x[2:8]).max() < 1e-12
    med = np.loadtxt("m.txt")
    assert np.array_equal(med, np.median(out, axis=1))


def test_scatter_scaling(workdir):
    assert main(["scatter-scaling", "--config", "cfg.json", "--n", "500", "--workers", "1", "2",
                 "--repeats", "1", "--out", "s.csv"]) == 0
    rows = list(csv.DictReader(open("s.csv")))
    assert [r["workers"] for r in rows] == ["1", "2"]


def test_missing_file(workdir, capsys):
    assert main(["simulate", "--depos", "nope.csv", "--out", "x.bin"]) == 2
    assert "nope.csv" in capsys.readouterr().err
