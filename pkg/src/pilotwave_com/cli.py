"""Command line entry point.

    pilotwave-com run <preset-or-config> [--check] [--out DIR] [--seed S]
                                         [--threads K]
    pilotwave-com list-presets

Exit status with --check: 0 all gates passed, 1 a numeric gate failed,
2 configuration error. PILOTWAVE_COM_OUT overrides the output directory.
"""

import argparse
import os
import sys

from .config import load_config, load_preset, preset_names
from .errors import ConfigError
from .experiments import run


def _build_parser():
    parser = argparse.ArgumentParser(prog="pilotwave-com")
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run one experiment")
    runp.add_argument("config", help="preset name or path to a YAML config")
    runp.add_argument("--check", action="store_true",
                      help="exit nonzero when a check gate fails")
    runp.add_argument("--out", default=None, help="output directory")
    runp.add_argument("--seed", type=int, default=None, help="override seed")
    runp.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                      help="worker pool size for seed-parallel experiments")
    sub.add_parser("list-presets", help="list bundled experiment presets")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "list-presets":
        for name in preset_names():
            print(name)
        return 0
    try:
        if os.path.exists(args.config):
            config = load_config(args.config)
        else:
            config = load_preset(args.config)
        if args.seed is not None:
            config["seed"] = args.seed
        out = args.out or os.environ.get("PILOTWAVE_COM_OUT") or None
        result = run(config, out_dir=out, threads=max(1, args.threads))
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    for check in result.checks:
        print(check.line())
    print(f"{result.experiment}: {len(result.artifacts)} artifacts, "
          f"{result.elapsed:.1f} s")
    if args.check and not result.all_passed:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
