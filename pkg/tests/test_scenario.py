"""Unit tests for scenario configuration and YAML round trip."""
import numpy as np
import pytest

from swarmplan import InvalidParameterError, ScenarioConfig, load_scenario, save_scenario


def base_dict(**kw):
    d = dict(
        lx=10.0,
        ly=8.0,
        initial_mixture=[{"mean": [2.0, 4.0], "cov": 0.5, "weight": 1.0}],
        target_mixture=[{"mean": [8.0, 4.0], "cov": [[1.0, 0.0], [0.0, 1.0]]}],
    )
    d.update(kw)
    return d


class TestScenarioConfig:
    def test_scalar_cov_expands_to_isotropic(self):
        cfg = ScenarioConfig(**base_dict())
        np.testing.assert_allclose(
            cfg.initial_pdf().components[0].cov, 0.5 * np.eye(2)
        )

    def test_weights_normalized(self):
        cfg = ScenarioConfig(
            **base_dict(
                target_mixture=[
                    {"mean": [7.0, 4.0], "cov": 1.0, "weight": 3.0},
                    {"mean": [9.0, 4.0], "cov": 1.0, "weight": 1.0},
                ]
            )
        )
        np.testing.assert_allclose(cfg.target_pdf().weights, [0.75, 0.25])

    def test_rejects_nonpositive_scalars(self):
        with pytest.raises(InvalidParameterError):
            ScenarioConfig(**base_dict(dt=0.0))
        with pytest.raises(InvalidParameterError):
            ScenarioConfig(**base_dict(lx=-1.0))

    def test_rejects_unknown_planner(self):
        with pytest.raises(InvalidParameterError):
            ScenarioConfig(**base_dict(planner="magic"))

    def test_rejects_bad_replan_mode(self):
        with pytest.raises(InvalidParameterError):
            ScenarioConfig(**base_dict(replan_mode="sometimes"))

    def test_rejects_malformed_mixture(self):
        with pytest.raises(Exception):
            ScenarioConfig(**base_dict(initial_mixture=[{"mean": [1.0]}]))

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(InvalidParameterError):
            ScenarioConfig.from_dict(base_dict(warp_speed=9))


class TestYamlRoundTrip:
    def test_save_load_identity(self, tmp_path):
        cfg = ScenarioConfig(
            **base_dict(
                true_obstacles=[[[4, 3], [6, 3], [6, 5], [4, 5]]],
                seed=7,
                planner="spp",
            )
        )
        path = tmp_path / "scene.yaml"
        save_scenario(cfg, path)
        back = load_scenario(path)
        assert back.to_dict() == cfg.to_dict()

    def test_load_rejects_non_mapping(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("- just\n- a\n- list\n")
        with pytest.raises(InvalidParameterError):
            load_scenario(path)

    def test_repo_scenario_loads(self):
        from pathlib import Path

        cfg = load_scenario(Path(__file__).parent.parent / "scenarios/corridor.yaml")
        assert cfg.planner in ("adoc", "pdf-apf", "sapf", "spp")
        assert cfg.n_robots >= 1
