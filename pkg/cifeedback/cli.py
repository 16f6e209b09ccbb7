"""Command-line entry point: `cifeedback <subcommand> [options]`."""
import argparse
import json
import logging
import sys

from .experiment_config import SWEEP_PARAMETERS, ExperimentConfig
from .experiment_runner import DEFAULT_PRESETS_FILEPATH, ExperimentRunner
from .interpolants import InterpolantSpec

logger = logging.getLogger(__name__)

SUBCOMMANDS = (
    "simulate",
    "converge-space",
    "converge-time",
    "converge-control",
    "table-repro",
    "stability-check",
    "modes",
)
PRESETS = ("example5.1", "example5.2a", "example5.2b", "example5.3")
DEFAULT_PRESET = "example5.1"
DEFAULT_FOURIER_MODES = 6


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cifeedback",
        description="Simulate the feedback-controlled Chafee-Infante equation and run convergence studies.",
    )
    parser.add_argument("command", choices=SUBCOMMANDS, help="What to run.")
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--config", type=str, default=None, help="Path to a JSON experiment configuration.")
    source.add_argument(
        "--preset",
        choices=PRESETS,
        default=None,
        help="A bundled experiment. Default {0} when no --config is given.".format(DEFAULT_PRESET),
    )
    parser.add_argument("--out", type=str, default=None, help="Output directory for CSVs and the manifest.")
    parser.add_argument("--interpolant", choices=("nodal", "volumes", "fourier"), default=None)
    parser.add_argument(
        "--count",
        type=int,
        default=None,
        help="Observation intervals (nodal, volumes) or modes (fourier). Default: mesh elements, or {0} modes.".format(
            DEFAULT_FOURIER_MODES
        ),
    )
    for name in ("mu", "nu", "gamma", "delta"):
        parser.add_argument("--{0}".format(name), type=float, default=None)
    parser.add_argument("--N", type=int, default=None, help="Number of elements.")
    parser.add_argument("--M", type=int, default=None, help="Number of time steps.")
    parser.add_argument("--T", type=float, default=None, help="Final time.")
    parser.add_argument(
        "--sweep",
        type=str,
        default=None,
        help="Run one simulation per value, e.g. mu=0,10,20. Parameter one of {0}.".format(", ".join(SWEEP_PARAMETERS)),
    )
    parser.add_argument("--table", type=int, choices=(1, 2, 4), default=None, help="Table for table-repro.")
    parser.add_argument("--workers", type=int, default=None, help="Threads for independent runs.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log per-step Newton details.")
    return parser


def parse_sweep(text):
    """Turn "mu=0,10,20" into {"parameter": "mu", "values": [0.0, 10.0, 20.0]}.

    Raises:
        ValueError: if the text is malformed or names an unknown parameter.
    """
    name, sep, values = text.partition("=")
    name = name.strip()
    if not sep or name not in SWEEP_PARAMETERS:
        raise ValueError("Sweep {0!r} must look like PARAM=V1,V2 with PARAM one of {1}.".format(text, SWEEP_PARAMETERS))
    try:
        parsed = [float(value) for value in values.split(",") if value.strip()]
    except ValueError:
        raise ValueError("Sweep values in {0!r} must be numbers.".format(text))
    if not parsed:
        raise ValueError("Sweep {0!r} lists no values.".format(text))
    return {"parameter": name, "values": parsed}


def _interpolant_from_args(args):
    if args.interpolant == "fourier":
        return InterpolantSpec.fourier(args.count if args.count is not None else DEFAULT_FOURIER_MODES)
    if args.interpolant == "volumes":
        return InterpolantSpec.volumes(args.count)
    return InterpolantSpec.nodal(args.count)


def config_from_args(args):
    """Build the ExperimentConfig described by the parsed command line."""
    if args.config is not None:
        config = ExperimentConfig.from_json(args.config)
    else:
        config = ExperimentRunner.load_preset(args.preset or DEFAULT_PRESET, DEFAULT_PRESETS_FILEPATH)

    changes = {"study": args.command}
    for name in ("mu", "nu", "gamma", "delta", "N", "M", "T"):
        value = getattr(args, name)
        if value is not None:
            changes[name] = value
    if args.interpolant is not None:
        changes["interpolant"] = _interpolant_from_args(args)
    elif args.count is not None:
        raise ValueError("--count needs --interpolant.")
    if args.out is not None:
        changes["output_dir"] = args.out

    options = dict(config.study_options)
    if args.interpolant is not None:
        options.pop("compare", None)
    if args.sweep is not None:
        options["sweep"] = parse_sweep(args.sweep)
    if args.table is not None:
        options["table"] = args.table
    if args.workers is not None:
        options["workers"] = args.workers
    changes["study_options"] = options
    return config.replace(**changes)


def main(argv=None):
    """Run the CLI.

    Returns:
        status (int): 0 on success, 1 on any failure or a missed table tolerance.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        config = config_from_args(args)
        runner = ExperimentRunner(config)
        passed = runner.run()
    except Exception as err:
        logger.error("%s: %s", type(err).__name__, err)
        return 1
    if config.study == "stability-check":
        with open(runner.artifacts[0]) as file:
            print(json.dumps(json.load(file), indent=4))
    for filepath in runner.artifacts:
        logger.info("wrote %s", filepath)
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
