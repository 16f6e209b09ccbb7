"""The ExperimentRunner definition."""
import json
import logging
from os import path

# Filepath to the presets which are included in the package
from pathlib import Path

from .convergence import (
    TEMPORAL_REFERENCE_FACTOR,
    compute_reference,
    control_study,
    spatial_study,
    temporal_study,
)
from .diagnostics import relative_gap
from .experiment_config import ExperimentConfig
from .helpers import atomic_write_text, map_in_order
from .interpolants import InterpolantSpec
from .mesh import project_initial
from .model import (
    check_stabilization_conditions,
    first_mode_index,
    laplacian_eigenvalue,
    linearized_mode_rate,
    steady_states,
    unstable_mode_count,
)
from .stepper import decay_step_condition, simulate, step_size_guard
from . import viz

logger = logging.getLogger(__name__)

DEFAULT_PRESETS_FILEPATH = path.join(Path(__file__).resolve().parents[1], "kb", "presets.json")

SPACE_LADDER = [10, 20, 40, 80, 160, 320]
SPACE_REFERENCE_N = 1280
SPACE_STEPS = 1050
TIME_LADDER = [100, 200, 400, 800, 1600, 3200]
TIME_MESH_N = 200

# Accepted ranges for the mean of the last two observed orders
ORDER_TOLERANCES = {
    "space_l2": (1.75, 2.25),
    "space_linf": (1.7, 2.3),
    "time": (0.8, 1.2),
}

TABLE_IDS = (1, 2, 4)
TABLE2_GAMMAS = (5.0, 9.0)


def _within(value, bounds):
    return value is not None and bounds[0] <= value <= bounds[1]


class ExperimentRunner:
    """Runs one configured experiment and writes its artifacts."""

    def __init__(self, config=None, preset=None, presets_filepath=DEFAULT_PRESETS_FILEPATH, out_dir=None, workers=None):
        """Create a new ExperimentRunner.

        Args:
            config (ExperimentConfig or None): the experiment to run. Exactly
                one of config and preset must be given.
            preset (str or None): the name of a preset in presets_filepath,
                such as "example5.1".
            presets_filepath (str): the JSON file holding the presets. Default
                is the file shipped with the package.
            out_dir (str or None): overrides the output directory of the config.
            workers (int or None): thread count for independent runs. If None,
                uses the config's study option or the CPU count.

        Raises:
            ValueError: if the arguments do not select exactly one experiment
                or the preset does not exist.
        """
        if (config is None) == (preset is None):
            raise ValueError("Exactly one of config and preset must be given.")
        self.presets_filepath = presets_filepath
        if preset is not None:
            config = self.load_preset(preset, presets_filepath)
        elif not isinstance(config, ExperimentConfig):
            raise ValueError("config must be an ExperimentConfig, not {0}.".format(type(config).__name__))
        if out_dir is not None:
            config = config.replace(output_dir=out_dir)
        self.config = config
        self.workers = workers if workers is not None else config.study_options.get("workers")
        self.artifacts = []

    @staticmethod
    def load_preset(name, presets_filepath=DEFAULT_PRESETS_FILEPATH):
        presets = ExperimentConfig.presets_from_json(presets_filepath)
        if name not in presets:
            raise ValueError("Preset {0} not found. Must be one of: {1}".format(name, sorted(presets)))
        return presets[name]

    @property
    def out_dir(self):
        return self.config.output_dir

    def _path(self, filename):
        return path.join(self.out_dir, filename)

    def _record(self, filepath):
        self.artifacts.append(filepath)
        return filepath

    def write_manifest(self):
        """Echo every input of the run, stamped with the package version."""
        from . import __version__

        filepath = self._path("manifest.json")
        self.config.to_json(filepath, version=__version__)
        return self._record(filepath)

    def run(self):
        """Dispatch to the configured study and write its artifacts.

        Returns:
            passed (bool): False if a reproduced table misses its order tolerances.
        """
        study = self.config.study
        logger.info("Running %r", self.config)
        if study == "simulate":
            self.simulate()
            passed = True
        elif study in ("converge-space", "converge-time", "converge-control"):
            self.converge(study.split("-")[1])
            passed = True
        elif study == "table-repro":
            passed = self.table_repro(self.config.study_options.get("table", 1))["passed"]
        elif study == "stability-check":
            self.stability_check()
            passed = True
        else:
            self.modes(self.config.study_options.get("modes", 10))
            passed = True
        self.write_manifest()
        return passed

    def _variants(self):
        """(label, config) pairs for a sweep or an interpolant comparison."""
        options = self.config.study_options
        variants = []
        if "sweep" in options:
            parameter = options["sweep"]["parameter"]
            for value in options["sweep"]["values"]:
                variants.append(("{0}={1:g}".format(parameter, value), self.config.replace(**{parameter: value})))
        if "compare" in options:
            for spec_dict in options["compare"]:
                spec = InterpolantSpec.from_dict(spec_dict)
                variants.append((spec.kind.value, self.config.replace(interpolant=spec)))
        if not variants:
            variants.append((None, self.config))
        return variants

    def _simulate_one(self, config):
        mesh = config.mesh
        y0h = project_initial(config.initial_condition_fn(), mesh, config.bc)
        return simulate(y0h, config.params, config.interpolant, config.bc, config.stepper_config)

    def simulate(self):
        """Run every variant of the configured simulation.

        Writes per variant a trajectory CSV, a diagnostics CSV, a control CSV
        and the requested snapshots.

        Returns:
            trajectories: a dict from variant label (None for a single run) to Trajectory
        """
        variants = self._variants()
        trajectories = map_in_order(lambda variant: self._simulate_one(variant[1]), variants, self.workers)
        results = {}
        for (label, config), traj in zip(variants, trajectories):
            suffix = "" if label is None else "_" + label
            h_obs = config.interpolant.observation_width(config.mesh)
            alpha = config.study_options.get("alpha", check_stabilization_conditions(config.params, h_obs).alpha_max)
            self._record(viz.write_trajectory(traj, self._path("trajectory{0}.csv".format(suffix))))
            self._record(viz.write_diagnostics(traj, self._path("diagnostics{0}.csv".format(suffix)), alpha))
            self._record(viz.write_control(traj, self._path("control{0}.csv".format(suffix))))
            for filepath in viz.write_snapshots(traj, self.out_dir, prefix="snapshot{0}".format(suffix)):
                self._record(filepath)
            logger.info("Variant %s finished with ||Y(T)||=%.4e", label or "<base>", traj.l2[-1])
            results[label] = traj
        if "compare" in self.config.study_options and len(results) > 1:
            self._write_gaps(results)
        return results

    def _write_gaps(self, results):
        """Pairwise relative L2 gaps between compared variants, written to compare_gaps.json."""
        labels = list(results)
        gaps = []
        for i, first in enumerate(labels):
            for second in labels[i + 1 :]:
                gap = relative_gap(results[first], results[second])
                logger.info("Relative L2 gap %s vs %s: %.3f", first, second, gap)
                gaps.append({"first": first, "second": second, "relative_gap": gap})
        filepath = self._path("compare_gaps.json")
        atomic_write_text(filepath, json.dumps(gaps, indent=4) + "\n")
        self._record(filepath)
        return gaps

    def converge(self, axis, config=None, filename=None):
        """Run a refinement study along axis "space", "time" or "control".

        Returns:
            report: the ConvergenceReport
        """
        config = config or self.config
        options = config.study_options
        params, bc, spec, y0 = config.params, config.bc, config.interpolant, config.initial_condition_fn()
        refine = options.get("refine", "space") if axis == "control" else axis

        if refine == "space":
            ladder = options.get("N_ladder", SPACE_LADDER)
            N_ref = options.get("N_ref", SPACE_REFERENCE_N)
            M_ref = options.get("M_ref", config.M)
            ref = compute_reference(params, bc, spec, y0, 1.0 / N_ref, M_ref, config.T)
            h_ladder = [1.0 / N for N in ladder]
            if axis == "control":
                report = control_study(params, bc, spec, y0, h_ladder, config.M, ref, "space", self.workers)
            else:
                report = spatial_study(params, bc, spec, y0, h_ladder, config.M, ref, self.workers)
        elif refine == "time":
            ladder = options.get("M_ladder", TIME_LADDER)
            M_ref = options.get("M_ref", TEMPORAL_REFERENCE_FACTOR * max(ladder))
            h = 1.0 / config.N
            ref = compute_reference(params, bc, spec, y0, h, M_ref, config.T)
            if axis == "control":
                report = control_study(params, bc, spec, y0, ladder, h, ref, "time", self.workers)
            else:
                report = temporal_study(params, bc, spec, y0, ladder, h, ref, self.workers)
        else:
            raise ValueError("axis must be 'space', 'time' or 'control', not {0!r}.".format(axis))

        filename = filename or "convergence_{0}.csv".format(axis if axis != "control" else "control_" + refine)
        self._record(viz.write_convergence(report, self._path(filename)))
        logger.info("%r", report)
        return report

    def _table_config(self, **changes):
        base = self.load_preset("example5.1", self.presets_filepath)
        return base.replace(T=1.0, **changes)

    def table_repro(self, table_id):
        """Run a reproduction matrix and check its observed orders.

        1: state errors in space (M=1050, reference h=1/1280).
        2: state errors in time (h=0.005) for gamma = 5 and 9.
        4: control errors in space and in time (gamma = 9).

        Returns:
            summary: a dict with the tail orders, their accepted ranges and
            the overall verdict, also written as JSON
        """
        if table_id not in TABLE_IDS:
            raise ValueError("table_id must be one of {0}, not {1}.".format(TABLE_IDS, table_id))
        checks = []

        def check(name, value, bounds):
            checks.append({"name": name, "tail_order": value, "range": list(bounds), "passed": _within(value, bounds)})

        space_options = {"N_ladder": SPACE_LADDER, "N_ref": SPACE_REFERENCE_N, "M_ref": SPACE_STEPS}
        time_options = {"M_ladder": TIME_LADDER}
        if table_id == 1:
            config = self._table_config(M=SPACE_STEPS, study_options=space_options)
            report = self.converge("space", config, "table1.csv")
            check("space_l2", report.tail_mean("l2"), ORDER_TOLERANCES["space_l2"])
            check("space_linf", report.tail_mean("linf"), ORDER_TOLERANCES["space_linf"])
        elif table_id == 2:
            for gamma in TABLE2_GAMMAS:
                config = self._table_config(N=TIME_MESH_N, gamma=gamma, study_options=time_options)
                report = self.converge("time", config, "table2_gamma{0:g}.csv".format(gamma))
                check("time_linf_gamma{0:g}".format(gamma), report.tail_mean("linf"), ORDER_TOLERANCES["time"])
        else:
            space_config = self._table_config(M=SPACE_STEPS, study_options=dict(space_options, refine="space"))
            report = self.converge("control", space_config, "table4_space.csv")
            check("control_space_linf", report.tail_mean("linf"), ORDER_TOLERANCES["space_l2"])
            time_config = self._table_config(N=TIME_MESH_N, study_options=dict(time_options, refine="time"))
            report = self.converge("control", time_config, "table4_time.csv")
            check("control_time_linf", report.tail_mean("linf"), ORDER_TOLERANCES["time"])

        summary = {"table": table_id, "checks": checks, "passed": all(item["passed"] for item in checks)}
        filepath = self._path("table{0}_summary.json".format(table_id))
        atomic_write_text(filepath, json.dumps(summary, indent=4) + "\n")
        self._record(filepath)
        if summary["passed"]:
            logger.info("Table %d reproduced within tolerance.", table_id)
        else:
            logger.error("Table %d missed its order tolerances: %s", table_id, checks)
        return summary

    def stability_check(self):
        """Evaluate the stabilization conditions, steady states, unstable
        modes and step conditions of the configured run.

        Returns:
            summary: a dict, also written to stability.json
        """
        config = self.config
        params = config.params
        h_obs = config.interpolant.observation_width(config.mesh)
        k = config.T / config.M
        report = check_stabilization_conditions(params, h_obs)
        alpha = config.study_options.get("alpha", report.alpha_max)
        summary = {
            "h": h_obs,
            "k": k,
            "nu_lower_ok": report.nu_lower_ok,
            "mu_lower_ok": report.mu_lower_ok,
            "conditions_ok": report.ok,
            "alpha_max": report.alpha_max,
            "beta": report.beta,
            "alpha": alpha,
            "steady_states": steady_states(params),
            "unstable_modes": unstable_mode_count(params, config.bc),
            "step_size_guard": step_size_guard(params, h_obs, k),
            "decay_step_condition": decay_step_condition(params, alpha, k),
            "refined_decay_step_condition": decay_step_condition(params, alpha, k, refined=True),
        }
        filepath = self._path("stability.json")
        atomic_write_text(filepath, json.dumps(summary, indent=4) + "\n")
        self._record(filepath)
        return summary

    def modes(self, count=10):
        """List the first linearized modes around y = 0 and write modes.csv."""
        params, bc = self.config.params, self.config.bc
        start = first_mode_index(bc)
        rows = []
        for n in range(start, start + count):
            rate = linearized_mode_rate(params, bc, n)
            rows.append((n, laplacian_eigenvalue(bc, n), rate, rate > 0))
        self._record(viz.write_modes(rows, self._path("modes.csv")))
        return rows

    def __repr__(self):
        return "<ExperimentRunner> {0!r} -> {1}".format(self.config, self.out_dir)
