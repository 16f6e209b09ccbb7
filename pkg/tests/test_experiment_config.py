import json

import pytest

from cifeedback import DEFAULT_PRESETS_FILEPATH, ExperimentConfig, InterpolantSpec, ModelParams


class TestExperimentConfig:
    def test_instantiate(self):
        config = ExperimentConfig(ModelParams(nu=1.0, gamma=0.0, delta=0.0))
        assert config.N == 100
        assert config.interpolant == InterpolantSpec.nodal()
        assert config.stepper_config.k == pytest.approx(0.01)

    def test_params_dict(self):
        config = ExperimentConfig({"nu": 0.1, "gamma": 9, "delta": 9, "mu": 20})
        assert config.params.mu == 20.0

    def test_invalid_study(self):
        with pytest.raises(ValueError):
            ExperimentConfig(ModelParams(1, 0, 0), study="optimize")

    def test_invalid_mesh(self):
        with pytest.raises(ValueError):
            ExperimentConfig(ModelParams(1, 0, 0), N=1)

    def test_unparseable_initial_condition(self):
        with pytest.raises(ValueError):
            ExperimentConfig(ModelParams(1, 0, 0), initial_condition="sin(")
        with pytest.raises(ValueError):
            ExperimentConfig(ModelParams(1, 0, 0), initial_condition="a * x")

    def test_snapshot_beyond_horizon(self):
        with pytest.raises(ValueError):
            ExperimentConfig(ModelParams(1, 0, 0), T=1.0, snapshot_times=[0.5, 2.0])

    def test_initial_condition_fn(self):
        config = ExperimentConfig(ModelParams(1, 0, 0), initial_condition="x(1-x)")
        assert float(config.initial_condition_fn()(0.5)) == pytest.approx(0.25)

    def test_replace(self):
        config = ExperimentConfig(ModelParams(nu=0.1, gamma=9, delta=9, mu=20))
        changed = config.replace(mu=0.0, N=20)
        assert changed.params.mu == 0.0
        assert changed.N == 20
        assert config.params.mu == 20.0

    def test_replace_unknown(self):
        with pytest.raises(ValueError):
            ExperimentConfig(ModelParams(1, 0, 0)).replace(resolution=3)


class TestConfigDict:
    def test_from_dict_minimal(self):
        config = ExperimentConfig.from_dict({"params": {"nu": 1.0, "gamma": 0.0, "delta": 0.0}})
        assert config.study == "simulate"
        assert config.bc.value == "mixed"

    def test_from_dict(self, config_dict):
        config = ExperimentConfig.from_dict(config_dict)
        assert config.bc.value == "neumann"
        assert config.interpolant.breakpoints.size == 6
        assert config.study == "converge-space"
        assert config.study_options == {"N_ladder": [10, 20], "N_ref": 80}
        assert config.output_dir == "results"

    def test_from_dict_error(self, config_dict):
        config_dict["invalid"] = "this is an invalid key"
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict(config_dict)

    def test_schema_error_names_path(self, config_dict):
        config_dict["params"]["nu"] = -1.0
        with pytest.raises(ValueError, match="params/nu"):
            ExperimentConfig.from_dict(config_dict)

    def test_schema_rejects_unknown_section_key(self, config_dict):
        config_dict["mesh"]["elements"] = 10
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict(config_dict)

    def test_to_dict_round_trip(self, config_dict):
        config = ExperimentConfig.from_dict(config_dict)
        assert ExperimentConfig.from_dict(config.to_dict()).to_dict() == config.to_dict()


class TestConfigJson:
    def test_json_round_trip(self, config_dict, tmp_path):
        config = ExperimentConfig.from_dict(config_dict)
        filepath = str(tmp_path / "config.json")
        config.to_json(filepath, version="0.1.0")
        with open(filepath) as file:
            assert json.load(file)["version"] == "0.1.0"
        assert ExperimentConfig.from_json(filepath).to_dict() == config.to_dict()

    def test_syntax_error_location(self, tmp_path):
        filepath = tmp_path / "broken.json"
        filepath.write_text('{\n    "params": }\n')
        with pytest.raises(ValueError, match="line 2"):
            ExperimentConfig.from_json(str(filepath))

    def test_presets(self):
        presets = ExperimentConfig.presets_from_json(DEFAULT_PRESETS_FILEPATH)
        assert set(presets) == {"example5.1", "example5.2a", "example5.2b", "example5.3"}
        assert presets["example5.1"].params == ModelParams(nu=0.1, gamma=9.0, delta=9.0, mu=20.0)
        assert presets["example5.3"].interpolant == InterpolantSpec.fourier(6)
        assert presets["example5.3"].bc.value == "neumann"
        assert presets["example5.2a"].study_options["sweep"]["parameter"] == "mu"
        assert presets["example5.1"].name == "example5.1"


@pytest.fixture
def config_dict():
    return {
        "params": {"nu": 1.0, "gamma": 150.0, "delta": 150.0, "mu": 500.0},
        "mesh": {"N": 40, "bc": "neumann"},
        "time": {"T": 0.5, "M": 50},
        "interpolant": {"kind": "volumes", "count": 5},
        "initial_condition": "cos(3 pi x)",
        "study": {"type": "converge-space", "N_ladder": [10, 20], "N_ref": 80},
        "output": {"directory": "results"},
    }
