import csv
import json

import numpy as np
import pytest

import spatial_pricing as sp
from spatial_pricing.cli import EXIT_BUDGET, EXIT_OK, EXIT_VALIDATION, compare, run
from spatial_pricing.model_one import profit_from_prices
from spatial_pricing.scenario import ScenarioError, load_scenario


def write_scenario(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def quadratic_reference_scenario(n=41):
    x = np.linspace(0, 1, n)
    return {
        "model": "one",
        "region": {"dimension": 1, "n": n, "bounds": [0, 1]},
        "cost": {"kind": "quadratic"},
        "measure": {"kind": "uniform"},
        "prices": {"p0": {"kind": "per_point", "values": list(x - x**2 / 2)}},
        "solver": {"method": "quadratic_reference"},
    }


def window_scenario(p0=0.4, n=101):
    return {
        "model": "two",
        "region": {"dimension": 1, "n": n, "bounds": [0, 1], "fixed_window": [0.0, 1.0]},
        "cost": {"kind": "metric_power", "alpha": 1.0},
        "measure": {"kind": "uniform"},
        "fixed_price": {"kind": "constant", "value": p0},
        "solver": {"method": "one_d"},
    }


def read_series(out_dir):
    with open(out_dir / "series.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


class TestRun:
    def test_quadratic_reference_series(self, tmp_path):
        path = write_scenario(tmp_path, "quad.json", quadratic_reference_scenario())
        out = tmp_path / "out"
        assert run(path, str(out)) == EXIT_OK
        header, rows = read_series(out)
        xcol, pcol = header.index("x"), header.index("price")
        x = np.array([float(r[xcol]) for r in rows])
        p = np.array([float(r[pcol]) for r in rows])
        assert np.allclose(p, x / 2 - x**2 / 4, atol=1e-12)
        result = json.loads((out / "result.json").read_text())
        assert result["model"] == "one"
        assert result["summary"]["method"] == "quadratic_1d_reference"

    def test_interval_window_summary(self, tmp_path):
        path = write_scenario(tmp_path, "win.json", window_scenario(0.4))
        out = tmp_path / "out"
        assert run(path, str(out)) == EXIT_OK
        result = json.loads((out / "result.json").read_text())
        assert np.isclose(result["summary"]["p1"], 0.2)
        assert np.isclose(result["summary"]["p2"], 0.2)
        assert abs(result["summary"]["profit"] - 0.08) <= 0.01

    def test_malformed_scenario_writes_nothing(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"model": "five"}')
        out = tmp_path / "out"
        assert run(str(path), str(out)) == EXIT_VALIDATION
        assert not out.exists()

    def test_budget_refusal_exit_code(self, tmp_path):
        scen = {
            "model": "one",
            "region": {"dimension": 1, "n": 15, "bounds": [0, 1]},
            "cost": {"kind": "metric_power", "alpha": 1.0},
            "measure": {"kind": "uniform"},
            "prices": {"p0": {"kind": "constant", "value": 1.0}},
            "solver": {"method": "general_search", "search": {"mode": "exhaustive", "levels": 8, "max_candidates": 1000}},
        }
        path = write_scenario(tmp_path, "big.json", scen)
        assert run(path, str(tmp_path / "o")) == EXIT_BUDGET

    def test_nash_trace_and_summary(self, tmp_path):
        scen = {
            "model": "nash",
            "region": {"dimension": 1, "n": 21, "bounds": [0, 1]},
            "cost": {"kind": "metric_power", "alpha": 1.0},
            "measure": {"kind": "uniform"},
            "game": {"split": 0.5, "rounds": 20, "eps": 1e-9, "grid_n": 30, "verify": True},
        }
        path = write_scenario(tmp_path, "game.json", scen)
        out = tmp_path / "out"
        assert run(path, str(out)) == EXIT_OK
        result = json.loads((out / "result.json").read_text())
        assert result["summary"]["converged"] is True
        assert result["summary"]["is_equilibrium"] is True
        with open(out / "trace.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["round", "player", "sup_delta", "payoff"]
        assert len(rows) == 2 * result["summary"]["rounds_used"] + 1

    def test_determinism_byte_identical(self, tmp_path):
        path = write_scenario(tmp_path, "win.json", window_scenario(0.4))
        run(path, str(tmp_path / "a"))
        run(path, str(tmp_path / "b"))
        for name in ("result.json", "series.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_round_trip_revalidation(self, tmp_path):
        # reloading the emitted series reproduces the reported profit and
        # respects feasibility against the scenario inputs
        scen = {
            "model": "one",
            "region": {"dimension": 1, "n": 21, "bounds": [0, 1]},
            "cost": {"kind": "metric_power", "alpha": 1.0},
            "measure": {"kind": "uniform"},
            "prices": {"p0": {"kind": "constant", "value": 1.5}},
            "solver": {"method": "metric_closed_form"},
        }
        path = write_scenario(tmp_path, "m.json", scen)
        out = tmp_path / "out"
        assert run(path, str(out)) == EXIT_OK
        header, rows = read_series(out)
        p = np.array([float(r[header.index("price")]) for r in rows])
        region = sp.build_interval_region(21, 0.0, 1.0)
        assert (p <= 1.5 + 1e-12).all()
        recomputed = profit_from_prices(
            sp.PricePattern(p), sp.CostKernel.metric(1.0), region, sp.CustomerMeasure.uniform(21)
        )
        reported = json.loads((out / "result.json").read_text())["summary"]["profit"]
        assert np.isclose(recomputed, reported)

    def test_format_flag(self, tmp_path):
        path = write_scenario(tmp_path, "win.json", window_scenario(0.4))
        out = tmp_path / "s"
        assert run(path, str(out), fmt="structured") == EXIT_OK
        assert (out / "result.json").exists() and not (out / "series.csv").exists()
        out2 = tmp_path / "c"
        assert run(path, str(out2), fmt="csv") == EXIT_OK
        assert (out2 / "series.csv").exists() and not (out2 / "result.json").exists()


class TestCompare:
    def test_interval_methods_agree(self, tmp_path, capsys):
        path = write_scenario(tmp_path, "win.json", window_scenario(0.4, n=41))
        assert compare(path, ["one_d", "w_search", "boundary_control"]) == EXIT_OK
        lines = [l for l in capsys.readouterr().out.splitlines() if l.strip()]
        assert len(lines) == 4  # header + three methods
        profits = [float(l.split()[1]) for l in lines[1:]]
        assert max(profits) - min(profits) <= 0.02

    def test_metric_methods_agree(self, tmp_path, capsys):
        scen = {
            "model": "one",
            "region": {"dimension": 1, "n": 9, "bounds": [0, 1]},
            "cost": {"kind": "metric_power", "alpha": 1.0},
            "measure": {"kind": "uniform"},
            "prices": {"p0": {"kind": "constant", "value": 1.0}},
            "solver": {"search": {"levels": 8, "multistarts": 8}},
        }
        path = write_scenario(tmp_path, "m.json", scen)
        assert compare(path, ["metric_closed_form", "general_search"]) == EXIT_OK
        lines = [l for l in capsys.readouterr().out.splitlines() if l.strip()]
        profits = [float(l.split()[1]) for l in lines[1:]]
        assert abs(profits[0] - profits[1]) <= 2.0 * 1.0 / 8

    def test_single_method_table(self, tmp_path, capsys):
        path = write_scenario(tmp_path, "win.json", window_scenario(0.4))
        assert compare(path, ["one_d"]) == EXIT_OK
        lines = [l for l in capsys.readouterr().out.splitlines() if l.strip()]
        assert len(lines) == 2

    def test_inapplicable_method_rejected(self, tmp_path):
        path = write_scenario(tmp_path, "win.json", window_scenario(0.4))
        assert compare(path, ["metric_closed_form"]) == EXIT_VALIDATION


class TestScenarioValidation:
    def test_model_method_compatibility(self, tmp_path):
        payload = window_scenario(0.4)
        payload["solver"]["method"] = "general_search"
        path = write_scenario(tmp_path, "bad.json", payload)
        with pytest.raises(ScenarioError):
            load_scenario(path)

    def test_infinite_bound_tokens(self, tmp_path):
        scen = {
            "model": "one",
            "region": {"dimension": 1, "n": 3, "bounds": [0, 1]},
            "cost": {"kind": "metric_power", "alpha": 1.0},
            "measure": {"kind": "uniform"},
            "prices": {"p0": {"kind": "per_point", "values": [1.0, "+inf", "+inf"]}},
        }
        path = write_scenario(tmp_path, "inf.json", scen)
        sc = load_scenario(path)
        assert np.isinf(sc.p0.values[1])

    def test_quadratic_reference_requires_matching_bound(self, tmp_path):
        payload = quadratic_reference_scenario()
        payload["prices"]["p0"] = {"kind": "constant", "value": 1.0}
        path = write_scenario(tmp_path, "q.json", payload)
        with pytest.raises(ScenarioError):
            load_scenario(path)

    def test_weights_length_checked(self, tmp_path):
        payload = window_scenario(0.4)
        payload["measure"] = {"kind": "weights", "values": [1.0, 2.0]}
        path = write_scenario(tmp_path, "w.json", payload)
        with pytest.raises(ScenarioError):
            load_scenario(path)

    def test_nash_explicit_masks(self, tmp_path):
        n = 11
        a = [1] * 6 + [0] * 5
        b = [0] * 5 + [1] * 6
        scen = {
            "model": "nash",
            "region": {"dimension": 1, "n": n, "bounds": [0, 1]},
            "cost": {"kind": "metric_power", "alpha": 1.0},
            "measure": {"kind": "uniform"},
            "game": {"masks": {"a": a, "b": b}, "rounds": 15, "eps": 1e-9, "grid_n": 20},
        }
        path = write_scenario(tmp_path, "masks.json", scen)
        out = tmp_path / "out"
        assert run(path, str(out)) == EXIT_OK
        header, rows = read_series(out)
        regions = [r[header.index("region")] for r in rows]
        assert regions[0] == "A" and regions[-1] == "B" and "AB" in regions

    def test_2d_region_scenario_loads(self, tmp_path):
        scen = {
            "model": "two",
            "region": {"dimension": 2, "nx": 5, "ny": 5, "bounds": [[0, 1], [0, 1]], "fixed_box": [[0.2, 0.8], [0.2, 0.8]]},
            "cost": {"kind": "metric_power", "alpha": 1.0},
            "measure": {"kind": "uniform"},
            "fixed_price": {"kind": "constant", "value": 0.5},
            "solver": {"method": "w_search", "search": {"levels": 4, "multistarts": 4}},
        }
        path = write_scenario(tmp_path, "grid.json", scen)
        out = tmp_path / "out"
        assert run(path, str(out)) == EXIT_OK
        header, rows = read_series(out)
        assert "y" in header
        assert len(rows) == 25
