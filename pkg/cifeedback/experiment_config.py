import json

import jsonschema

from .helpers import atomic_write_text, parse_initial_condition
from .interpolants import InterpolantSpec
from .mesh import uniform_partition
from .model import BoundaryCondition, ModelParams
from .stepper import StepperConfig

STUDY_TYPES = (
    "simulate",
    "converge-space",
    "converge-time",
    "converge-control",
    "table-repro",
    "stability-check",
    "modes",
)

SWEEP_PARAMETERS = ("nu", "gamma", "delta", "mu", "c_p")

_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_NONNEGATIVE = {"type": "number", "minimum": 0}
_MESH_COUNT = {"type": "integer", "minimum": 2}
_STEP_COUNT = {"type": "integer", "minimum": 1}

EXPERIMENT_SCHEMA = {
    "type": "object",
    "properties": {
        "name": {"type": ["string", "null"]},
        "version": {"type": "string"},
        "params": {
            "type": "object",
            "properties": {
                "nu": _POSITIVE,
                "gamma": _NONNEGATIVE,
                "delta": _NONNEGATIVE,
                "mu": _NONNEGATIVE,
                "c_p": _POSITIVE,
            },
            "required": ["nu", "gamma", "delta"],
            "additionalProperties": False,
        },
        "mesh": {
            "type": "object",
            "properties": {
                "N": _MESH_COUNT,
                "bc": {"type": "string", "enum": [bc.value for bc in BoundaryCondition]},
            },
            "additionalProperties": False,
        },
        "time": {
            "type": "object",
            "properties": {
                "T": _POSITIVE,
                "M": _STEP_COUNT,
                "snapshot_times": {"type": "array", "items": _NONNEGATIVE},
            },
            "additionalProperties": False,
        },
        "interpolant": {
            "type": "object",
            "properties": {
                "kind": {"type": "string", "enum": ["nodal", "volumes", "fourier"]},
                "sample_rule": {"type": "string", "enum": ["left", "midpoint", "right"]},
                "count": {"type": "integer", "minimum": 0},
                "mode_count": {"type": "integer", "minimum": 0},
                "breakpoints": {"type": "array", "items": {"type": "number"}, "minItems": 2},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "initial_condition": {"type": "string", "minLength": 1},
        "study": {
            "type": "object",
            "properties": {
                "type": {"type": "string", "enum": list(STUDY_TYPES)},
                "N_ladder": {"type": "array", "items": _MESH_COUNT, "minItems": 1},
                "M_ladder": {"type": "array", "items": _STEP_COUNT, "minItems": 1},
                "N_ref": _MESH_COUNT,
                "M_ref": _STEP_COUNT,
                "refine": {"type": "string", "enum": ["space", "time"]},
                "table": {"type": "integer", "enum": [1, 2, 4]},
                "alpha": _NONNEGATIVE,
                "modes": {"type": "integer", "minimum": 1},
                "workers": {"type": "integer", "minimum": 1},
                "compare": {"type": "array", "items": {"$ref": "#/properties/interpolant"}, "minItems": 1},
                "sweep": {
                    "type": "object",
                    "properties": {
                        "parameter": {"type": "string", "enum": list(SWEEP_PARAMETERS)},
                        "values": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                    },
                    "required": ["parameter", "values"],
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {"directory": {"type": "string", "minLength": 1}},
            "additionalProperties": False,
        },
    },
    "required": ["params"],
    "additionalProperties": False,
}


class ExperimentConfig:
    """An ExperimentConfig holds every input of one run: the model
    coefficients, the discretization, the controller, the initial data and
    which study to perform.
    """

    _ALLOWED_KEYS = {
        "name",
        "version",
        "params",
        "mesh",
        "time",
        "interpolant",
        "initial_condition",
        "study",
        "output",
    }

    def __init__(
        self,
        params,
        bc="mixed",
        N=100,
        T=1.0,
        M=100,
        interpolant=None,
        initial_condition="x(1-x)",
        study="simulate",
        study_options=None,
        output_dir="out",
        snapshot_times=None,
        name=None,
    ):
        """Create an ExperimentConfig.

        Args:
            params (ModelParams or dict): the coefficients nu, gamma, delta,
                mu and c_p.
            bc (str): "mixed", "dirichlet" or "neumann". Default "mixed".
            N (int): number of uniform elements. Default 100.
            T (float): final time. Default 1.
            M (int): number of time steps. Default 100.
            interpolant (InterpolantSpec, dict or None): the observation
                operator. If None, nodal values at the element midpoints.
            initial_condition (str): a named preset such as "x(1-x)" or an
                inline expression in x.
            study (str): one of STUDY_TYPES. Default "simulate".
            study_options (dict or None): ladder, reference, sweep and table
                settings of the study.
            output_dir (str): where artifacts are written. Default "out".
            snapshot_times (list or None): times at which the solution is dumped.
            name (str or None): the preset name this config came from.

        Raises:
            ValueError: if any value is invalid or the initial condition cannot be parsed.
        """
        if isinstance(params, dict):
            params = ModelParams(**params)
        if not isinstance(params, ModelParams):
            raise ValueError("params must be a ModelParams or a dict, not {0}.".format(type(params).__name__))
        self.params = params
        self.bc = BoundaryCondition.from_string(bc)
        if int(N) != N or N < 2:
            raise ValueError("N must be an integer >= 2, not {0}.".format(N))
        self.N = int(N)
        if not T > 0:
            raise ValueError("T must be > 0, not {0}.".format(T))
        self.T = float(T)
        if int(M) != M or M < 1:
            raise ValueError("M must be a positive integer, not {0}.".format(M))
        self.M = int(M)
        if interpolant is None:
            interpolant = InterpolantSpec.nodal()
        elif isinstance(interpolant, dict):
            interpolant = InterpolantSpec.from_dict(interpolant)
        self.interpolant = interpolant
        self.initial_condition = initial_condition
        # Fail early on unparseable expressions
        parse_initial_condition(initial_condition)
        if study not in STUDY_TYPES:
            raise ValueError("Study {0} not recognized. Must be one of: {1}".format(study, STUDY_TYPES))
        self.study = study
        self.study_options = dict(study_options or {})
        self.output_dir = output_dir
        self.snapshot_times = [float(t) for t in (snapshot_times or [])]
        beyond = [t for t in self.snapshot_times if t < 0 or t > self.T]
        if beyond:
            raise ValueError("Snapshot times {0} lie outside [0, T={1}].".format(beyond, self.T))
        self.name = name

    @property
    def mesh(self):
        return uniform_partition(self.N)

    @property
    def stepper_config(self):
        return StepperConfig.from_steps(self.M, self.T, snapshot_times=self.snapshot_times)

    def initial_condition_fn(self):
        return parse_initial_condition(self.initial_condition)

    def replace(self, **changes):
        """Return a copy with some constructor arguments changed.

        Coefficient overrides (nu, gamma, delta, mu, c_p) are applied to params.
        """
        kwargs = self._constructor_kwargs()
        coefficients = {key: changes.pop(key) for key in list(changes) if key in SWEEP_PARAMETERS}
        if coefficients:
            kwargs["params"] = kwargs["params"].replace(**coefficients)
        unknown = set(changes) - set(kwargs)
        if unknown:
            raise ValueError("Cannot override unknown settings: {0}".format(sorted(unknown)))
        kwargs.update(changes)
        return ExperimentConfig(**kwargs)

    def _constructor_kwargs(self):
        return {
            "params": self.params,
            "bc": self.bc,
            "N": self.N,
            "T": self.T,
            "M": self.M,
            "interpolant": self.interpolant,
            "initial_condition": self.initial_condition,
            "study": self.study,
            "study_options": dict(self.study_options),
            "output_dir": self.output_dir,
            "snapshot_times": list(self.snapshot_times),
            "name": self.name,
        }

    @classmethod
    def validate(cls, config_dict):
        """Check a configuration dictionary against EXPERIMENT_SCHEMA.

        Raises:
            ValueError: naming the offending keys or the failing schema path.
        """
        if not isinstance(config_dict, dict):
            raise ValueError("A configuration must be a JSON object, not {0}.".format(type(config_dict).__name__))
        invalid_keys = set(config_dict.keys()).difference(cls._ALLOWED_KEYS)
        if invalid_keys:
            raise ValueError(
                "JSON object contains invalid keys: {0}.\n"
                "Must be one of: {1}".format(invalid_keys, cls._ALLOWED_KEYS)
            )
        try:
            jsonschema.validate(config_dict, EXPERIMENT_SCHEMA)
        except jsonschema.ValidationError as err:
            location = "/".join(str(part) for part in err.absolute_path) or "<root>"
            raise ValueError("Invalid configuration at {0}: {1}".format(location, err.message))

    @classmethod
    def from_dict(cls, config_dict):
        """Reads a dictionary into an ExperimentConfig. Used when reading from a json file.

        Args:
            config_dict: the dictionary to convert, with the sections listed in _ALLOWED_KEYS

        Returns:
            config: the ExperimentConfig created from the dictionary

        Raises:
            ValueError: if the dictionary is invalid
        """
        cls.validate(config_dict)
        mesh = config_dict.get("mesh", {})
        time = config_dict.get("time", {})
        study = dict(config_dict.get("study", {}))
        kwargs = {
            "params": config_dict["params"],
            "interpolant": config_dict.get("interpolant"),
            "study": study.pop("type", "simulate"),
            "study_options": study,
            "name": config_dict.get("name"),
        }
        for key, section, name in (
            ("bc", mesh, "bc"),
            ("N", mesh, "N"),
            ("T", time, "T"),
            ("M", time, "M"),
            ("snapshot_times", time, "snapshot_times"),
        ):
            if name in section:
                kwargs[key] = section[name]
        if "initial_condition" in config_dict:
            kwargs["initial_condition"] = config_dict["initial_condition"]
        if "directory" in config_dict.get("output", {}):
            kwargs["output_dir"] = config_dict["output"]["directory"]
        return cls(**kwargs)

    @classmethod
    def from_json(cls, filepath):
        """Read an ExperimentConfig from a JSON file.

        Raises:
            ValueError: with the line and column of a JSON syntax error, or if
                the content is not a valid configuration.
        """
        with open(filepath) as file:
            text = file.read()
        try:
            config_dict = json.loads(text)
        except json.JSONDecodeError as err:
            raise ValueError(
                "Could not parse {0}: line {1} column {2}: {3}".format(filepath, err.lineno, err.colno, err.msg)
            )
        return cls.from_dict(config_dict)

    @classmethod
    def presets_from_json(cls, filepath):
        """Read a mapping of named presets from a JSON file.

        Returns:
            presets: a dict from preset name to ExperimentConfig
        """
        with open(filepath) as file:
            data = json.load(file)
        presets = {}
        for name, config_dict in data["presets"].items():
            config_dict = dict(config_dict)
            config_dict.setdefault("name", name)
            presets[name] = cls.from_dict(config_dict)
        return presets

    def to_json(self, filepath, version=None):
        """Write this config (optionally stamped with a version) to a JSON file atomically."""
        data = self.to_dict()
        if version is not None:
            data["version"] = version
        atomic_write_text(filepath, json.dumps(data, indent=4) + "\n")

    def to_dict(self):
        """Converts the config to the sectioned dictionary read by from_dict.

        Returns:
            config_dict: the dictionary containing the ExperimentConfig info.
        """
        study = {"type": self.study}
        study.update(self.study_options)
        time = {"T": self.T, "M": self.M}
        if self.snapshot_times:
            time["snapshot_times"] = list(self.snapshot_times)
        return {
            "name": self.name,
            "params": self.params.to_dict(),
            "mesh": {"N": self.N, "bc": self.bc.value},
            "time": time,
            "interpolant": self.interpolant.to_dict(),
            "initial_condition": self.initial_condition,
            "study": study,
            "output": {"directory": self.output_dir},
        }

    def __repr__(self):
        return "ExperimentConfig(name={0!r}, study='{1}', bc='{2}', N={3}, M={4}, T={5}, {6!r}, {7!r})".format(
            self.name, self.study, self.bc.value, self.N, self.M, self.T, self.params, self.interpolant
        )
