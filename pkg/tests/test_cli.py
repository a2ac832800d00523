import json

import numpy as np
import pytest

from amacsim.cli import (
    ConfigError,
    config_hash,
    emit_region_plot_data,
    main,
    parse_channel,
    run,
)

from conftest import EX4_B1, EX4_B12, EX4_VERTEX12, example4_channel

EX4 = [
    [[1.0, 0.0], [0.0, 1.0]],
    [[0.0, 1.0], [0.5, 0.5]],
]
BSC01 = [[0.9, 0.1], [0.1, 0.9]]


def write_config(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


class TestParsing:
    def test_malformed_row_names_index(self):
        bad = [[0.6, 0.3], [0.5, 0.5]]
        with pytest.raises(ConfigError) as err:
            parse_channel({"transition": bad})
        assert "(0,)" in str(err.value)

    def test_missing_seed(self, tmp_path):
        with pytest.raises(ConfigError) as err:
            run({"task": "region", "channel": {"transition": BSC01}}, tmp_path)
        assert "seed" in str(err.value)

    def test_channel_from_file(self, tmp_path):
        chan_path = tmp_path / "chan.json"
        chan_path.write_text(json.dumps({"transition": BSC01}))
        w = parse_channel({"file": str(chan_path)})
        assert w.num_senders == 1


class TestRegionTask:
    def test_single_polytope_pentagon_corners(self, tmp_path):
        cfg = {
            "task": "region",
            "seed": 1,
            "channel": {"transition": EX4},
            "kind": "single-polytope",
            "resolution": 128,
        }
        payload = run(cfg, tmp_path)
        rows = (tmp_path / "boundary.csv").read_text().splitlines()
        data = np.array(
            [[float(eval(v)) for v in line.split(",")[:2]] for line in rows[2:]]
        )
        # the pentagon's five extreme points recoverable from the samples
        corners = np.array(
            [[EX4_B1, EX4_VERTEX12[0]], [EX4_VERTEX12[0], EX4_B1], [EX4_B1, 0], [0, EX4_B1]]
        )
        for c in corners:
            assert np.min(np.linalg.norm(data - c, axis=1)) < 0.05
        assert (tmp_path / "report.json").exists()

    def test_k1_interval(self, tmp_path):
        cfg = {
            "task": "region",
            "seed": 2,
            "channel": {"transition": BSC01},
            "kind": "single-polytope",
        }
        run(cfg, tmp_path)
        rows = (tmp_path / "boundary.csv").read_text().splitlines()
        vals = [float(eval(r.split(",")[0])) for r in rows[2:]]
        assert vals == pytest.approx([0.0, 0.5310044064107188], abs=1e-9)

    def test_even_delay_hill(self, tmp_path):
        # the even-delay boundary rises above the union on the 45-degree ray
        # (resolution 9 puts sample index 4 exactly on the diagonal)
        union_rows, _ = emit_region_plot_data(
            example4_channel(), "union", resolution=9, grid_denom=4
        )
        even_rows, _ = emit_region_plot_data(
            example4_channel(), "even-delay", resolution=9, grid_denom=4
        )
        u = union_rows[4]["R1"] + union_rows[4]["R2"]
        e = even_rows[4]["R1"] + even_rows[4]["R2"]
        assert u == pytest.approx(EX4_B12, abs=1e-3)
        assert e == pytest.approx(1.0, abs=1e-3)

    def test_membership_queries(self, tmp_path):
        cfg = {
            "task": "region",
            "seed": 3,
            "channel": {"transition": EX4},
            "kind": "even-delay",
            "resolution": 4,
            "grid_denom": 4,
            "queries": [[0.5, 0.5], [0.6, 0.6]],
        }
        payload = run(cfg, tmp_path)
        q = payload["result"]["queries"]
        assert q[0]["member"] is True
        assert len(q[0]["certificate"]["weights"]) == 2
        assert q[1]["member"] is False


class TestSimulateTask:
    def test_single_sender_run(self, tmp_path):
        cfg = {
            "task": "simulate",
            "seed": 11,
            "channel": {"transition": BSC01},
            "mode": "single",
            "n": 160,
            "rate": 0.15,
            "delta": 0.22,
            "trials": 20,
            "bins_per_sender": 2,
        }
        payload = run(cfg, tmp_path)
        assert payload["result"]["maximal_error"] <= 0.25
        report = json.loads((tmp_path / "trialreport.json").read_text())
        assert report["trials"] == 20
        assert (tmp_path / "cells.csv").exists()

    def test_reproducible_hash_and_rerun(self, tmp_path):
        cfg = {
            "task": "simulate",
            "seed": 12,
            "channel": {"transition": BSC01},
            "mode": "single",
            "n": 64,
            "rate": 0.1,
            "delta": 0.3,
            "trials": 10,
        }
        p1 = run(cfg, tmp_path / "a")
        p2 = run(cfg, tmp_path / "b")
        assert p1["config_hash"] == p2["config_hash"]
        r1 = json.loads((tmp_path / "a" / "trialreport.json").read_text())
        r2 = json.loads((tmp_path / "b" / "trialreport.json").read_text())
        assert r1 == r2

    def test_validation_error_exit_code(self, tmp_path):
        bad = {"seed": 1, "channel": {"transition": [[0.6, 0.3], [0.5, 0.5]]},
               "mode": "single", "n": 16, "rate": 0.1, "delta": 0.2, "trials": 2}
        cfg_path = write_config(tmp_path, bad)
        code = main(["simulate", "--config", str(cfg_path), "--out", str(tmp_path / "out")])
        assert code == 2

    def test_cli_end_to_end(self, tmp_path):
        cfg = {
            "seed": 13,
            "channel": {"transition": BSC01},
            "mode": "single",
            "n": 64,
            "rate": 0.1,
            "delta": 0.3,
            "trials": 5,
        }
        cfg_path = write_config(tmp_path, cfg)
        code = main(["simulate", "--config", str(cfg_path), "--out", str(tmp_path / "out")])
        assert code == 0
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["task"] == "simulate"
        assert report["seed"] == 13


class TestSplitTask:
    def test_distribution_mode(self, tmp_path):
        cfg = {
            "task": "split",
            "seed": 21,
            "mode": "distribution",
            "input": [0.5, 0.5],
            "theta": 0.7,
        }
        payload = run(cfg, tmp_path)
        assert payload["result"]["p_a"][0] == pytest.approx(5 / 7)
        assert (tmp_path / "split.json").exists()

    def test_two_sender_mode(self, tmp_path):
        cfg = {
            "task": "split",
            "seed": 22,
            "mode": "two_sender",
            "channel": {"transition": EX4},
            "p": [0.5, 0.5],
            "q": [0.5, 0.5],
            "target": [EX4_B12 / 2, EX4_B12 / 2],
        }
        payload = run(cfg, tmp_path)
        res = payload["result"]
        assert res["rates"][0] + res["rates"][1] == pytest.approx(EX4_B12 / 2, abs=1e-4)


class TestConverseTask:
    def test_bounds_with_relative_check(self, tmp_path):
        cfg = {
            "task": "converse",
            "seed": 31,
            "channel": {"transition": EX4},
            "n": 24,
            "rates": [0.1, 0.1],
            "schedules": [[0.5, 0.5], [0.5, 0.5]],
            "delays": {"kind": "totally_async"},
            "p_e": 0.05,
            "check_relative_form": True,
        }
        payload = run(cfg, tmp_path)
        res = payload["result"]
        assert res["relative_form_max_diff"] < 1e-9
        assert res["epsilon"] == pytest.approx(0.2 * 0.05 + 1 / 24)
        assert (tmp_path / "bounds.csv").exists()


def test_config_hash_stability():
    a = {"task": "region", "seed": 1, "x": [1, 2]}
    b = {"seed": 1, "x": [1, 2], "task": "region"}
    assert config_hash(a) == config_hash(b)
