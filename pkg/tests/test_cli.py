"""Command-line interface: outputs, determinism, and exit codes."""

import csv
import json

import pytest

from platooncoord.cli import main, parse_arrival_spec
from platooncoord import Constant, DiscreteRandom, Exponential


GRID = "--grid=-50,150,1"


_counter = iter(range(10**6))


def run(tmp_path, *argv):
    out = tmp_path / f"out{next(_counter)}.json"
    code = main([*argv, "-o", str(out)])
    return code, out


def test_parse_arrival_specs():
    assert parse_arrival_spec("exponential:0.02") == Exponential(0.02)
    assert parse_arrival_spec("constant:10") == Constant(10.0)
    assert parse_arrival_spec("discrete:15:0.4,8:0.6") == DiscreteRandom(
        atoms=((15.0, 0.4), (8.0, 0.6))
    )


def test_parse_arrival_spec_errors(capsys):
    code = main(["solve", "--solver", "ra", "--arrivals", "weibull:1"])
    assert code == 1
    assert "error" in json.loads(capsys.readouterr().err)


def test_solve_poisson_json(tmp_path):
    code, out = run(
        tmp_path, "solve", "--solver", "poisson", "--arrivals", "exponential:0.02"
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["theta"] == pytest.approx(24.708, abs=1e-3)
    assert doc["c"] == pytest.approx(-35.996, abs=1e-3)
    assert doc["Z"] == pytest.approx(3.1196, abs=1e-3)
    assert doc["residual_norm"] <= 1e-8
    assert "version" in doc and "config_hash" in doc


def test_solve_poisson_requires_exponential(capsys):
    code = main(["solve", "--solver", "poisson", "--arrivals", "constant:10"])
    assert code == 1


def test_solve_ra_vs_bvi_constant(tmp_path):
    _, ra_out = run(
        tmp_path, "solve", "--solver", "ra", "--arrivals", "constant:10",
        GRID,
    )
    ra = json.loads(ra_out.read_text())
    code, bvi_out = run(
        tmp_path, "solve", "--solver", "bvi", "--arrivals", "constant:10",
        GRID,
    )
    assert code == 0
    bvi = json.loads(bvi_out.read_text())
    assert abs(ra["theta"] - bvi["theta"]) <= 1.0 + 1e-9
    assert abs(ra["c"] - bvi["c"]) <= 1.0 + 1e-9


def test_solve_bvi_discrete(tmp_path):
    code, out = run(
        tmp_path, "solve", "--solver", "bvi",
        "--arrivals", "discrete:15:0.4,8:0.6", GRID,
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["theta"] > doc["c"]
    assert doc["grid"] == {"m": -50.0, "n": 150.0, "step": 1.0}


def test_solve_bad_grid_exit_code(capsys):
    code = main(
        ["solve", "--solver", "bvi", "--arrivals", "exponential:0.02",
         "--grid=0,20,1"]
    )
    assert code == 1


def test_solve_numerical_failure_exit_code(capsys):
    # Near-undiscounted iteration cannot shrink its updates below an absurd
    # epsilon within the sweep cap, which must surface as exit code 2.
    code = main(
        ["solve", "--solver", "bvi", "--arrivals", "exponential:0.02",
         "--grid=-2,30,1", "--epsilon", "1e-12", "--gamma", "0.9999"]
    )
    assert code == 2
    assert json.loads(capsys.readouterr().err)["kind"] == "numerical"


def test_simulate_deterministic(tmp_path):
    args = [
        "simulate", "--policy", "rts", "--scale", "0.01", "--seed", "7",
        "--duration", "7200",
    ]
    _, out_a = run(tmp_path, *args)
    doc_a = json.loads(out_a.read_text())
    _, out_b = run(tmp_path, *args)
    doc_b = json.loads(out_b.read_text())
    assert doc_a == doc_b
    assert doc_a["seed"] == 7
    assert doc_a["rng"] == "pcg64"


def test_simulate_policy_ordering_paired_seed(tmp_path):
    common = ["--avg-flow", "173", "--seed", "3", "--duration", "14400"]
    _, base_out = run(tmp_path, "simulate", "--policy", "baseline", *common)
    _, rts_out = run(tmp_path, "simulate", "--policy", "rts", *common)
    base = json.loads(base_out.read_text())
    rts = json.loads(rts_out.read_text())
    assert rts["avg_cost"] < base["avg_cost"]


def test_simulate_emit_vehicles(tmp_path):
    vehicles = tmp_path / "vehicles.csv"
    code, out = run(
        tmp_path, "simulate", "--policy", "baseline", "--scale", "0.02",
        "--seed", "1", "--duration", "14400", "--emit-vehicles", str(vehicles),
    )
    assert code == 0
    doc = json.loads(out.read_text())
    rows = vehicles.read_text().strip().splitlines()
    assert len(rows) - 1 == doc["n_vehicles"]


def test_simulate_policy_b_requires_thresholds(capsys):
    code = main(["simulate", "--policy", "b", "--scale", "0.02"])
    assert code == 1


def test_simulate_seed_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("PLATOON_DP_SEED", "11")
    _, out = run(
        tmp_path, "simulate", "--policy", "baseline", "--scale", "0.02",
        "--duration", "3600",
    )
    assert json.loads(out.read_text())["seed"] == 11


def test_compare_table(tmp_path):
    out = tmp_path / "table.csv"
    code = main(
        ["compare", "--scales", "0.01", "0.02", "--seeds", "0",
         "--duration", "14400", "-o", str(out)]
    )
    assert code == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6  # three policies x two scales
    by_scale = {}
    for row in rows:
        by_scale.setdefault(row["avg_flow_vph"], {})[row["policy"]] = float(row["AC"])
    for policies in by_scale.values():
        assert policies["rts"] <= policies["baseline"] + 1e-9


def test_sweep_single_value(tmp_path):
    out = tmp_path / "sweep.csv"
    code = main(
        ["sweep", "--param", "gamma", "--values", "0.9", "--seeds", "0",
         "--duration", "7200", "-o", str(out)]
    )
    assert code == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert rows[0]["metric"] == "AC"
    assert float(rows[0]["mean"]) > 0.0


def test_sweep_unknown_param(capsys):
    code = main(["sweep", "--param", "eta", "--values", "0.1"])
    assert code == 1


def test_bench_report(tmp_path):
    out = tmp_path / "bench.csv"
    code = main(
        ["bench", "--arrivals", "exponential:0.02", "constant:10",
         GRID, "-o", str(out)]
    )
    assert code == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert rows[0]["grid"] == "[-50.0,150.0]/1.0"
    assert float(rows[0]["poisson_s"]) > 0.0
    assert rows[1]["poisson_s"] == ""  # closed form needs exponential arrivals
