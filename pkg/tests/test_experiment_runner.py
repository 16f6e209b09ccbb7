import csv
import json
import os

import pytest

from cifeedback import ExperimentConfig, ExperimentRunner, ModelParams


def read_rows(filepath):
    with open(filepath, newline="") as file:
        return list(csv.reader(file))


class TestExperimentRunner:
    def test_preset(self, tmp_path):
        runner = ExperimentRunner(preset="example5.1", out_dir=str(tmp_path))
        assert runner.config.name == "example5.1"
        assert runner.out_dir == str(tmp_path)

    def test_needs_exactly_one_source(self):
        with pytest.raises(ValueError):
            ExperimentRunner()
        with pytest.raises(ValueError):
            ExperimentRunner(config=ExperimentConfig(ModelParams(1, 0, 0)), preset="example5.1")

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            ExperimentRunner(preset="example9")

    def test_stability_check(self, tmp_path):
        runner = ExperimentRunner(preset="example5.1", out_dir=str(tmp_path))
        summary = runner.stability_check()
        assert summary["conditions_ok"]
        assert summary["alpha_max"] == pytest.approx(0.9)
        assert summary["unstable_modes"] == 3
        assert summary["steady_states"] == [0.0, 1.0, -1.0]
        assert summary["step_size_guard"]
        with open(os.path.join(str(tmp_path), "stability.json")) as file:
            assert json.load(file)["h"] == pytest.approx(0.01)

    def test_modes(self, tmp_path):
        runner = ExperimentRunner(preset="example5.1", out_dir=str(tmp_path))
        rows = runner.modes(5)
        assert [row[3] for row in rows] == [True, True, True, False, False]
        written = read_rows(os.path.join(str(tmp_path), "modes.csv"))
        assert written[0] == ["n", "eigenvalue", "rate", "unstable"]
        assert len(written) == 6
        assert written[1][3] == "true"

    def test_simulate_writes_artifacts(self, tmp_path, short_config):
        runner = ExperimentRunner(config=short_config.replace(snapshot_times=[0.05]), out_dir=str(tmp_path))
        assert runner.run()
        names = set(os.listdir(str(tmp_path)))
        assert {"trajectory.csv", "diagnostics.csv", "control.csv", "manifest.json"} <= names
        assert "snapshot_t0.05.tsv" in names
        rows = read_rows(os.path.join(str(tmp_path), "trajectory.csv"))
        assert rows[0] == ["t", "l2_norm", "h1_norm", "control_l2", "newton_iters"]
        assert len(rows) == 12

    def test_sweep(self, tmp_path, short_config):
        options = {"sweep": {"parameter": "mu", "values": [0.0, 20.0]}}
        runner = ExperimentRunner(config=short_config.replace(study_options=options), out_dir=str(tmp_path))
        results = runner.simulate()
        assert list(results) == ["mu=0", "mu=20"]
        assert results["mu=20"].l2[-1] < results["mu=0"].l2[-1]
        assert os.path.exists(os.path.join(str(tmp_path), "trajectory_mu=20.csv"))

    def test_compare(self, tmp_path, short_config):
        options = {"compare": [{"kind": "nodal", "count": 5}, {"kind": "volumes", "count": 5}]}
        runner = ExperimentRunner(config=short_config.replace(study_options=options), out_dir=str(tmp_path))
        results = runner.simulate()
        assert list(results) == ["nodal", "volumes"]
        with open(os.path.join(str(tmp_path), "compare_gaps.json")) as file:
            gaps = json.load(file)
        assert len(gaps) == 1
        assert (gaps[0]["first"], gaps[0]["second"]) == ("nodal", "volumes")
        assert gaps[0]["relative_gap"] > 0.0

    def test_converge_space(self, tmp_path, short_config):
        options = {"N_ladder": [5, 10], "N_ref": 40}
        config = short_config.replace(study="converge-space", study_options=options)
        runner = ExperimentRunner(config=config, out_dir=str(tmp_path))
        assert runner.run()
        rows = read_rows(os.path.join(str(tmp_path), "convergence_space.csv"))
        assert rows[0] == ["resolution", "error_l2", "oc_l2", "error_linf", "oc_linf"]
        assert [row[0] for row in rows[1:]] == ["1/5", "1/10"]

    def test_converge_control_time(self, tmp_path, short_config):
        options = {"M_ladder": [5, 10], "refine": "time"}
        config = short_config.replace(study="converge-control", study_options=options)
        runner = ExperimentRunner(config=config, out_dir=str(tmp_path))
        report = runner.converge("control")
        assert report.resolutions == [5, 10]
        assert os.path.exists(os.path.join(str(tmp_path), "convergence_control_time.csv"))

    def test_invalid_table(self, tmp_path):
        runner = ExperimentRunner(preset="example5.1", out_dir=str(tmp_path))
        with pytest.raises(ValueError):
            runner.table_repro(3)

    @pytest.mark.slow
    def test_table1(self, tmp_path):
        runner = ExperimentRunner(preset="example5.1", out_dir=str(tmp_path))
        summary = runner.table_repro(1)
        assert summary["passed"]
        assert os.path.exists(os.path.join(str(tmp_path), "table1.csv"))

    @pytest.mark.slow
    def test_table2(self, tmp_path):
        runner = ExperimentRunner(preset="example5.1", out_dir=str(tmp_path))
        summary = runner.table_repro(2)
        assert summary["passed"]
        assert os.path.exists(os.path.join(str(tmp_path), "table2_summary.json"))

    @pytest.mark.slow
    def test_table4(self, tmp_path):
        runner = ExperimentRunner(preset="example5.1", out_dir=str(tmp_path))
        summary = runner.table_repro(4)
        assert summary["passed"]
        assert os.path.exists(os.path.join(str(tmp_path), "table4_summary.json"))

    @pytest.mark.slow
    def test_fourier_comparison(self, tmp_path):
        config = ExperimentRunner.load_preset("example5.3").replace(T=1.0, M=200)
        runner = ExperimentRunner(config=config, out_dir=str(tmp_path))
        results = runner.simulate()
        assert list(results) == ["fourier", "nodal", "volumes"]
        assert results["fourier"].l2[-1] < results["fourier"].l2[0]
        with open(os.path.join(str(tmp_path), "compare_gaps.json")) as file:
            assert len(json.load(file)) == 3


@pytest.fixture
def short_config():
    config = ExperimentRunner.load_preset("example5.1")
    return config.replace(N=20, M=10, T=0.1)
