import csv
import json

import numpy as np
import pytest

from cachesim.cli import main
from cachesim.config import load_config
from cachesim.errors import ConfigError
from cachesim.experiments import CURVE_HEADER

BASE = {
    "network": {"K": 3, "M": [1.0]},
    "library": {"N": 4, "variances": {"kind": "uniform", "low": 0.7, "high": 1.6}},
    "demand": {"alpha": 0.6},
    "budget": {"R": [1.0]},
    "seed": 5,
}


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def _rows(path):
    with open(path) as f:
        return list(csv.reader(f))


@pytest.mark.parametrize("cmd,scheme", [("lcu-curve", "lcu"), ("ccm-curve", "ccm")])
def test_one_point_config_gives_one_row(tmp_path, cmd, scheme):
    out = tmp_path / "o.csv"
    assert main([cmd, "--config", _write(tmp_path, BASE), "--out", str(out)]) == 0
    rows = _rows(out)
    assert tuple(rows[0]) == CURVE_HEADER and len(rows) == 2 and rows[1][0] == scheme
    meta = json.loads((tmp_path / "o.csv.meta.json").read_text())
    assert meta["seed"] == 5 and meta["variance_seed"] == 5 and len(meta["config_hash"]) == 64


def test_symmetric_lcu_column(tmp_path):
    cfg = {
        "network": {"K": 20, "M": [10, 50, 70]},
        "library": {"N": 100, "variances": {"kind": "constant", "value": 1.5}},
        "budget": {"R": [10]},
        "lcu": {"trials": 64},
    }
    out = tmp_path / "l.csv"
    assert main(["lcu-curve", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 0
    D = [float(r[3]) for r in _rows(out)[1:]]
    assert D == sorted(D, reverse=True)
    assert D[1] == pytest.approx(0.375, rel=1e-12)


def test_seed_flag_overrides_config(tmp_path):
    path = _write(tmp_path, BASE)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["ccm-curve", "--config", path, "--out", str(a), "--seed", "6"])
    main(["ccm-curve", "--config", path, "--out", str(b)])
    assert _rows(a)[1][-1] == "6" and _rows(b)[1][-1] == "5"
    assert _rows(a)[1][3] != _rows(b)[1][3]  # variances redrawn


def test_thread_count_from_environment(tmp_path, monkeypatch):
    cfg = dict(BASE, network={"K": 3, "M": [0.5, 1.0, 2.0]}, budget={"R": [0.5, 1.0]})
    path = _write(tmp_path, cfg)
    outs = []
    for n in ("1", "3"):
        monkeypatch.setenv("CACHESIM_THREADS", n)
        out = tmp_path / f"t{n}.csv"
        assert main(["ccm-curve", "--config", path, "--out", str(out)]) == 0
        outs.append(out.read_bytes())
        assert json.loads((tmp_path / f"t{n}.csv.meta.json").read_text())["threads"] == int(n)
    assert outs[0] == outs[1]


def test_config_errors_exit_2(tmp_path, capsys):
    bad = dict(BASE, library={"N": 4, "surprise": 1})
    assert main(["lcu-curve", "--config", _write(tmp_path, bad)]) == 2
    assert "library.surprise" in capsys.readouterr().err
    assert main(["lcu-curve", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["nonsense"]) == 2


def test_infeasible_design_exit_4(tmp_path):
    cfg = dict(BASE, sim={"design": {"p": [[1.0]] * 3, "mu": [2.0] * 3, "omega": [[1.0]] * 3}, "demand": [0, 0, 0]})
    cfg["library"] = {"N": 1}
    assert main(["simulate", "--config", _write(tmp_path, cfg)]) == 4


def test_simulate_rows(tmp_path):
    cfg = {
        "network": {"K": 2, "M": [1.0]},
        "library": {"N": 2},
        "budget": {"R": [1.0]},
        "sim": {
            "tau": 200, "T": 1, "trials": 5, "demand": [0, 1],
            "design": {"p": [[0.5, 0.5], [0.5, 0.5]], "mu": [1.0, 1.0], "omega": [[1.0, 1.0], [1.0, 1.0]]},
        },
    }
    out = tmp_path / "s.csv"
    assert main(["simulate", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 0
    rows = _rows(out)
    assert len(rows) == 6 and all(r[rows[0].index("decodable")] == "1" for r in rows[1:])


def test_simulate_with_optimized_design(tmp_path):
    cfg = dict(BASE, sim={"tau": 50, "T": 1, "trials": 3})
    out = tmp_path / "s.csv"
    assert main(["simulate", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 0
    assert len(_rows(out)) == 4


def test_bounds_command(tmp_path, capsys):
    cfg = dict(BASE, sim={"demand": [0, 1, 2]})
    assert main(["bounds", "--config", _write(tmp_path, cfg)]) == 0
    text = capsys.readouterr().out
    assert text.startswith("quantity,demand,bound") and "expected_symmetric" in text and "per_demand" in text


def test_config_validation_messages():
    with pytest.raises(ConfigError, match="demand.alpha"):
        load_config(dict(BASE, demand={"alpha": [0.1, 0.2]}))
    with pytest.raises(ConfigError, match="library.variances"):
        load_config(dict(BASE, library={"N": 4, "variances": {"kind": "list", "values": [1.0]}}))
    with pytest.raises(ConfigError, match="kind"):
        load_config(dict(BASE, library={"N": 4, "variances": {"kind": "gamma"}}))
    cfg = load_config(BASE)
    assert cfg.variances().size == 4 and np.allclose(cfg.demand_matrix().sum(axis=1), 1)
