"""Command-line entry point: one subcommand per experiment.

Exit codes: 0 success, 2 config error, 3 calibration failure,
4 simulation diagnostic failure.
"""
import argparse
import dataclasses
import logging
import sys

from . import experiments as ex
from .hamiltonian import FRAMES
from .lindblad import SimulationDiagnosticError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CALIBRATION = 3
EXIT_SIMULATION = 4


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tlsgates",
        description="Quantum gates on TLS fluctuators coupled to a driven resonator.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="EXPERIMENT")
    for name in ex.EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="YAML experiment file (default: built-in preset)")
        p.add_argument("--out", help="output file (default: standard output)")
        p.add_argument("--format", choices=ex.FORMATS)
        p.add_argument("--fock-cutoff", type=int)
        p.add_argument("--step-ps", type=float, help="fixed RK4 step in ps (default: automatic)")
        p.add_argument("--frame", choices=FRAMES)
        p.add_argument("--workers", type=int, help="processes for sweep points")
        if name == "fig3-sweep":
            p.add_argument("--gate", choices=("hadamard", "swap"), default="hadamard",
                           help="preset to use when no --config is given")
    return parser


def resolve_spec(args) -> ex.ExperimentSpec:
    if args.config:
        spec = ex.load_config(args.config)
        if spec.name != args.experiment:
            raise ex.ConfigError(
                f"{args.config}: experiment {spec.name!r} does not match subcommand {args.experiment!r}"
            )
    else:
        key = args.experiment
        if key == "fig3-sweep" and getattr(args, "gate", "hadamard") == "swap":
            key = "fig3-sweep-swap"
        spec = ex.preset(key)
    num = {}
    if args.fock_cutoff is not None:
        if args.fock_cutoff < 2:
            raise ex.ConfigError(f"--fock-cutoff must be >= 2, got {args.fock_cutoff}")
        num["fock_cutoff"] = args.fock_cutoff
    if args.step_ps is not None:
        if not args.step_ps > 0:
            raise ex.ConfigError(f"--step-ps must be positive, got {args.step_ps}")
        num["step_ps"] = args.step_ps
    if args.frame is not None:
        num["frame"] = args.frame
    if args.workers is not None:
        if args.workers < 1:
            raise ex.ConfigError(f"--workers must be >= 1, got {args.workers}")
        num["workers"] = args.workers
    out = {}
    if args.out is not None:
        out["path"] = args.out
    if args.format is not None:
        out["format"] = args.format
    return dataclasses.replace(
        spec,
        numerics=dataclasses.replace(spec.numerics, **num),
        output=dataclasses.replace(spec.output, **out),
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        spec = resolve_spec(args)
        result = ex.run_experiment(spec)
        text = ex.write_result(result, spec.output.path, spec.output.format)
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ex.CALIBRATION_ERRORS as exc:
        print(f"calibration failure: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except SimulationDiagnosticError as exc:
        print(f"simulation diagnostic failure: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if spec.output.path is None:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
