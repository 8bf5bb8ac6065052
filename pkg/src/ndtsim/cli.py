"""
Command line entry point.

    ndtsim run <spec.json> [--seed S] [--trials T] [--threads K]
    ndtsim fixed-point <scenario.json> [--seed S] [--trial T]
    ndtsim smallnet <instance.json> [--resolution R]
    ndtsim validate <spec.json>

Exit status is 0 on success, 1 for invalid input or usage, 2 when the
run itself fails.
"""

import argparse
import json
import sys

from . import analysis, harness, smallnet
from .scenario import ConfigError, ScenarioConfig


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _parser():
    p = _Parser(prog="ndtsim", description="Relay uplink simulator.")
    sub = p.add_subparsers(dest="command", metavar="{run,fixed-point,smallnet,validate}", parser_class=_Parser)

    run = sub.add_parser("run", help="run an experiment sweep")
    run.add_argument("spec")
    run.add_argument("--seed", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--output-dir")

    fp = sub.add_parser("fixed-point", help="closed-form fixed point against simulation")
    fp.add_argument("scenario")
    fp.add_argument("--seed", type=int)
    fp.add_argument("--trial", type=int, default=0)

    sn = sub.add_parser("smallnet", help="two-UE bounds against NDT")
    sn.add_argument("instance")
    sn.add_argument("--resolution", type=float, default=smallnet.DEFAULT_RESOLUTION)

    val = sub.add_parser("validate", help="check an experiment spec")
    val.add_argument("spec")
    val.add_argument("--seed", type=int)
    val.add_argument("--trials", type=int)
    return p


def _load_spec(args):
    spec = harness.ExperimentSpec.load(args.spec)
    changes = {}
    if args.seed is not None:
        spec.base = spec.base.replace(seed=args.seed)
    if args.trials is not None:
        changes["trials"] = args.trials
    if getattr(args, "output_dir", None):
        changes["output_dir"] = args.output_dir
    for key, value in changes.items():
        setattr(spec, key, value)
    spec.validate()
    return spec


def _cmd_run(args):
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    spec = _load_spec(args)
    results = harness.run_experiment(spec, threads=args.threads)
    print("wrote %d rows to %s" % (len(results), spec.output_dir))


def _cmd_fixed_point(args):
    config = ScenarioConfig.load(args.scenario)
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    real = harness.trial_realization(config, args.trial)
    print(analysis.convergence_report(real).to_json(indent=2))


def _cmd_smallnet(args):
    with open(args.instance) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("invalid JSON: %s" % exc) from exc
    try:
        inst = smallnet.TwoUserInstance.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    report = smallnet.bound_comparison(inst, resolution=args.resolution)
    print(json.dumps(report.to_dict(), indent=2))


def _cmd_validate(args):
    spec = _load_spec(args)
    print("ok: %d sweep values x %d trials x %d schemes"
          % (len(spec.sweep_values), spec.trials, len(spec.schemes)))


COMMANDS = {"run": _cmd_run, "fixed-point": _cmd_fixed_point, "smallnet": _cmd_smallnet,
            "validate": _cmd_validate}


def main(argv=None):
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print("ndtsim: error: %s" % exc, file=sys.stderr)
        return 1
    if args.command is None:
        parser.print_help(sys.stderr)
        return 1
    try:
        COMMANDS[args.command](args)
    except ConfigError as exc:
        print("ndtsim: invalid input: %s" % exc, file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime status
        print("ndtsim: error: %s: %s" % (type(exc).__name__, exc), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
