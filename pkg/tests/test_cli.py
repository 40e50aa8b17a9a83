"""
End-to-end runs of the cplnet command line
"""

import json

import numpy as np
import pandas as pd
import pytest

from cplnet.cli.main import main
from cplnet.models.control import design_individual_gains
from cplnet.schemas import GlobalFeedback

from conftest import C, P, V_BAR, make_spec


def _write_config(tmp_path, n=1, resistance=0.0, **blocks):
    document = {
        "schema_version": 1,
        "network": json.loads(make_spec(n, resistance).model_dump_json()),
        **blocks,
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


def _run(command, config, out, *extra):
    return main([command, "--config", str(config), "--out", str(out), "--jobs", "1", *extra])


def _verdict(capsys):
    return capsys.readouterr().out.strip().splitlines()[-1]


class TestAnalyze:
    def test_open_loop_single_converter(self, tmp_path, capsys):
        config = _write_config(tmp_path)
        assert _run("analyze", config, tmp_path / "out") == 0

        verdict, max_re = _verdict(capsys).split()
        assert verdict == "UNSTABLE"
        assert float(max_re.split("=")[1]) == pytest.approx(P / (2 * C * V_BAR**2), rel=1e-5)

        frame = pd.read_csv(tmp_path / "out" / "eigenvalues.csv")
        assert list(frame.columns) == ["index", "real", "imag"]
        assert len(frame) == 2

    def test_closed_loop_is_stable(self, tmp_path, capsys):
        config = _write_config(tmp_path, n=2, resistance=0.3, analyze={"closed_loop": True})
        assert _run("analyze", config, tmp_path / "out") == 0
        assert _verdict(capsys).startswith("STABLE")

    def test_reruns_are_byte_identical(self, tmp_path):
        config = _write_config(
            tmp_path, n=2, resistance=0.3, analyze={"closed_loop": True, "export_matrices": True}
        )
        assert _run("analyze", config, tmp_path / "a") == 0
        assert _run("analyze", config, tmp_path / "b") == 0
        for name in ("eigenvalues.csv", "A.csv", "B.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_infeasible_operating_point(self, tmp_path, capsys):
        config = _write_config(tmp_path, n=2, resistance=5.0)
        assert _run("analyze", config, tmp_path / "out") == 3
        assert capsys.readouterr().err.startswith("error:")


class TestConfigErrors:
    def test_malformed_json(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("{not json", encoding="utf-8")
        assert _run("analyze", path, tmp_path / "out") == 2

    def test_missing_file(self, tmp_path):
        assert _run("analyze", tmp_path / "absent.json", tmp_path / "out") == 2

    def test_unknown_field(self, tmp_path):
        config = _write_config(tmp_path, colour="blue")
        assert _run("analyze", config, tmp_path / "out") == 2

    def test_unknown_nested_field(self, tmp_path):
        config = _write_config(tmp_path, analyze={"closed_loop": True, "verbose": True})
        assert _run("analyze", config, tmp_path / "out") == 2

    def test_wrong_schema_version(self, tmp_path):
        path = _write_config(tmp_path)
        document = json.loads(path.read_text(encoding="utf-8"))
        document["schema_version"] = 2
        path.write_text(json.dumps(document), encoding="utf-8")
        assert _run("analyze", path, tmp_path / "out") == 2

    def test_empty_range(self, tmp_path):
        config = _write_config(tmp_path, n=2, sweep_n={"n_min": 5, "n_max": 2, "r_max": 5.0})
        assert _run("sweep-n", config, tmp_path / "out") == 2

    def test_missing_block(self, tmp_path):
        config = _write_config(tmp_path, n=2)
        assert _run("sweep-r", config, tmp_path / "out") == 2

    def test_bad_jobs(self, tmp_path):
        config = _write_config(tmp_path)
        assert main(["analyze", "--config", str(config), "--jobs", "0"]) == 2

    def test_unknown_command(self, tmp_path):
        config = _write_config(tmp_path)
        assert main(["explode", "--config", str(config)]) == 2

    def test_missing_gains_file(self, tmp_path):
        config = _write_config(
            tmp_path, n=2, gains_file="nowhere.json", analyze={"closed_loop": True}
        )
        assert _run("analyze", config, tmp_path / "out") == 2


class TestGains:
    def test_written_gains_round_trip(self, tmp_path):
        config = _write_config(tmp_path, n=2)
        assert _run("gains", config, tmp_path / "out") == 0
        written = GlobalFeedback.read_json(tmp_path / "out" / "gains.json")
        assert written == design_individual_gains(make_spec(2))

    def test_pinned_gains_file_is_used(self, tmp_path, capsys):
        assert _run("gains", _write_config(tmp_path, n=2), tmp_path) == 0
        config = _write_config(
            tmp_path, n=2, resistance=0.3, gains_file="gains.json", analyze={"closed_loop": True}
        )
        assert _run("analyze", config, tmp_path / "out") == 0
        assert _verdict(capsys).startswith("STABLE")


class TestSweeps:
    def test_sweep_r(self, tmp_path, capsys, analytic_r_star):
        config = _write_config(tmp_path, n=2, sweep_r={"r_max": 10.0, "tol": 1e-6})
        assert _run("sweep-r", config, tmp_path / "out") == 0

        r_star = float(_verdict(capsys).split("=")[1])
        assert r_star == pytest.approx(analytic_r_star(2), rel=1e-4)
        boundary = pd.read_csv(tmp_path / "out" / "boundary.csv")
        assert boundary["n"].tolist() == [2]
        assert (tmp_path / "out" / "boundary.svg").exists()
        grid = pd.read_csv(tmp_path / "out" / "sweep_grid.csv")
        assert list(grid.columns) == ["n", "R", "max_re", "stable"]

    def test_sweep_n_with_critical_count(self, tmp_path, capsys):
        config = _write_config(
            tmp_path,
            n=2,
            sweep_n={"n_min": 1, "n_max": 3, "r_max": 5.0, "critical_r": 0.5, "critical_n_max": 10},
        )
        assert _run("sweep-n", config, tmp_path / "out") == 0
        assert _verdict(capsys) == "N0=4 at R=0.5"

        boundary = pd.read_csv(tmp_path / "out" / "boundary.csv")
        assert boundary["n"].tolist() == [1, 2, 3]
        assert boundary["R_star"].is_monotonic_decreasing
        critical = pd.read_csv(tmp_path / "out" / "critical_n.csv")
        assert critical["stable"].tolist() == [1, 1, 1, 0]

    def test_sweep_n_on_loaded_feeder(self, tmp_path, capsys, analytic_r_star):
        config = _write_config(
            tmp_path,
            n=2,
            resistance=0.5,
            sweep_n={"n_min": 1, "n_max": 8, "r_max": 10.0, "critical_r": 0.5},
        )
        assert _run("sweep-n", config, tmp_path / "out") == 0
        assert _verdict(capsys) == "N0=4 at R=0.5"

        boundary = pd.read_csv(tmp_path / "out" / "boundary.csv")
        assert boundary["n"].tolist() == list(range(1, 9))
        r_star = boundary["R_star"].to_numpy()
        assert np.all(np.isfinite(r_star))
        assert np.all(np.diff(r_star) < 0.0)
        assert r_star[1] == pytest.approx(analytic_r_star(2), rel=1e-3)


class TestSimulateAndDesign:
    def test_averaged_run_writes_outputs(self, tmp_path):
        config = _write_config(
            tmp_path,
            n=2,
            resistance=0.3,
            simulate={
                "model": "averaged",
                "t_end": 1e-4,
                "controller": {"kind": "state_feedback"},
                "initial_state": {"v0": [49.0, 48.0]},
            },
        )
        assert _run("simulate", config, tmp_path / "out") == 0
        trace = pd.read_csv(tmp_path / "out" / "trace.csv")
        assert trace.columns[0] == "t"
        assert {"V_1", "V_2", "I_1", "I_2"} <= set(trace.columns)
        assert len(trace) == 101
        assert (tmp_path / "out" / "metrics.csv").exists()
        assert (tmp_path / "out" / "trace.svg").exists()

    def test_output_shunt_design(self, tmp_path, capsys):
        config = _write_config(
            tmp_path,
            n=2,
            design={
                "kind": "output_shunt_r",
                "r_s_values": [1.0, 2.0, 3.0],
                "r_set": {"r_min": 0.01, "r_max": 5.0, "points": 5},
            },
        )
        assert _run("design", config, tmp_path / "out") == 0
        assert _verdict(capsys).startswith("R_s=2 ")
        report = pd.read_csv(tmp_path / "out" / "design_report.csv")
        assert len(report) == 15
        assert set(report["variant"]) == {
            "output_shunt_r(r_s=1)",
            "output_shunt_r(r_s=2)",
            "output_shunt_r(r_s=3)",
        }
