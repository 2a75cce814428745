"""Command line entry point.

Exit codes: 0 success, 2 config error, 3 solver failure, 4 verification failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import yaml

from .config import config_from_dict, serialize_config
from .errors import ConfigError, ElapsedError, VerificationError
from .experiment import (compare_routes, dump_json, run_experiment, run_periodic,
                         run_reconstruct)
from .presets import preset_dict, preset_names
from .steady import initial_activities, steady_states

log = logging.getLogger("elapsed")


def _branch(text):
    try:
        return int(text)
    except ValueError:
        try:
            return float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an index or a value: {text!r}") from None


def _document(args) -> dict:
    if args.config and args.preset:
        raise ConfigError("give --config or --preset, not both")
    if args.config:
        try:
            with open(args.config) as fh:
                doc = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"config: malformed document ({exc})") from None
    elif args.preset:
        doc = preset_dict(args.preset)
    else:
        raise ConfigError("a config is required (--config PATH or --preset NAME)")
    if not isinstance(doc, dict):
        raise ConfigError("config: expected a mapping at top level")
    run = doc.setdefault("run", {}) or {}
    doc["run"] = run
    if args.dt is not None:
        run["dt"] = args.dt
    if args.branch is not None:
        run["branch"] = args.branch
    if args.out:
        doc.setdefault("outputs", {})
        doc["outputs"] = dict(doc["outputs"] or {}, dir=args.out)
    return doc


def _emit(obj, out, name):
    text = dump_json(obj)
    if out:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, name), "w") as fh:
            fh.write(text)
    sys.stdout.write(text)


def cmd_steady(cfg, args):
    _emit(steady_states(cfg.build_model()).to_json(), args.out, "steady_states.json")


def cmd_branches(cfg, args):
    from .experiment import initial_state
    model = cfg.build_model()
    n0, _ = initial_state(cfg, model)
    _emit(initial_activities(model, n0).to_json(), args.out, "initial_activities.json")


def cmd_run(cfg, args):
    bundle = run_experiment(cfg, args.out)
    sys.stdout.write(dump_json(bundle.summary))
    if not bundle.verification["pass"]:
        raise VerificationError("verification failed: " + dump_json(bundle.verification))


def cmd_periodic(cfg, args):
    sys.stdout.write(dump_json(run_periodic(cfg, args.out)))


def cmd_reconstruct(cfg, args):
    sys.stdout.write(dump_json(run_reconstruct(cfg, args.out)))


def cmd_compare(cfg, args):
    rep = compare_routes(cfg)
    _emit(rep, args.out, "compare.json")
    if not rep["within_bound"]:
        raise VerificationError(f"routes diverge by {rep['max_divergence']:.3g} > "
                                f"{rep['bound']:.3g}")


COMMANDS = {"steady": cmd_steady, "branches": cmd_branches, "run": cmd_run,
            "periodic": cmd_periodic, "reconstruct": cmd_reconstruct,
            "compare": cmd_compare}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="elapsed",
                                     description="Elapsed-time neural population solver")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", help="YAML or JSON experiment config")
        p.add_argument("--preset", metavar="NAME", help="named preset (see 'preset')")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--dt", type=float, help="time step (sigma/dt must be an integer)")
        p.add_argument("--branch", type=_branch, help="initial branch index (1-based) or N(0)")

    helps = {"steady": "steady states", "branches": "initial activities N(0)",
             "run": "run the configured route", "periodic": "construct a periodic activity",
             "reconstruct": "reconstruct a density from an activity",
             "compare": "compare pde and delay routes"}
    for name, text in helps.items():
        common(sub.add_parser(name, help=text))
    p = sub.add_parser("preset", help="list presets, show one, or run one")
    p.add_argument("name", nargs="?")
    p.add_argument("--show", action="store_true", help="print the preset config and exit")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--dt", type=float)
    p.add_argument("--branch", type=_branch)
    return parser


def _preset(args):
    if not args.name:
        sys.stdout.write("\n".join(preset_names()) + "\n")
        return
    args.config, args.preset = None, args.name
    cfg = config_from_dict(_document(args))
    if args.show:
        sys.stdout.write(serialize_config(cfg))
        return
    command = "periodic" if cfg.periodic is not None else "run"
    COMMANDS[command](cfg, args)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "preset":
            _preset(args)
        else:
            cfg = config_from_dict(_document(args))
            COMMANDS[args.command](cfg, args)
    except ElapsedError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
