"""End-to-end smoke tests for the command line interface."""
import json

import pytest

from swarmplan import save_scenario, ScenarioConfig
from swarmplan.cli import main


@pytest.fixture()
def scenario_file(tmp_path):
    cfg = ScenarioConfig(
        lx=6.0,
        ly=4.0,
        initial_mixture=[{"mean": [1.5, 2.0], "cov": 0.3}],
        target_mixture=[{"mean": [4.5, 2.0], "cov": 0.8}],
        n_robots=10,
        d_th=2.0,
        colloc_spacing=1.0,
        grid_spacing=0.2,
        dbar=0.1,
        tf_max=300,
        attract_gain=200.0,
    )
    path = tmp_path / "room.yaml"
    save_scenario(cfg, path)
    return path


class TestRunCommand:
    def test_run_writes_artifacts(self, scenario_file, tmp_path, capsys):
        out = tmp_path / "run"
        code = main(
            ["run", "--scenario", str(scenario_file), "--out", str(out), "--seed", "1"]
        )
        assert code == 0
        assert (out / "metrics.csv").exists()
        assert "completed=True" in capsys.readouterr().out

    def test_planner_override(self, scenario_file, tmp_path):
        out = tmp_path / "run"
        main(
            [
                "run", "--scenario", str(scenario_file), "--out", str(out),
                "--planner", "spp", "--seed", "1",
            ]
        )
        summary = json.loads((out / "summary.json").read_text())
        assert summary["config"]["planner"] == "spp"

    def test_bad_scenario_is_an_error_exit(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("lx: -3\n")
        code = main(["run", "--scenario", str(bad), "--out", str(tmp_path / "o")])
        assert code != 0


class TestCompareCommand:
    def test_compare_two_planners(self, scenario_file, tmp_path):
        out = tmp_path / "cmp"
        code = main(
            [
                "compare", "--scenario", str(scenario_file),
                "--planners", "adoc,spp", "--seeds", "1", "--out", str(out),
            ]
        )
        assert code == 0
        results = json.loads((out / "compare.json").read_text())
        assert {r["planner"] for r in results} == {"adoc", "spp"}
        assert (out / "adoc_seed1" / "metrics.csv").exists()
        assert (out / "spp_seed1" / "metrics.csv").exists()


class TestRenderCommand:
    def test_render_frames(self, scenario_file, tmp_path):
        out = tmp_path / "run"
        main(["run", "--scenario", str(scenario_file), "--out", str(out), "--seed", "1"])
        code = main(["render", "--run", str(out), "--every", "5"])
        assert code == 0
        frames = list((out / "frames").glob("frame_*.svg"))
        assert frames
