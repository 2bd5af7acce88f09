"""Command-line entry point: run, plot, validate.

    evoportfolio run --config run.toml [--seed N] [--workers W] [--quiet]
    evoportfolio plot <run-dir>... [--out champion.svg]
    evoportfolio validate --config run.toml

`run` trains every seed in the config and writes one directory per seed
under <EVOPORTFOLIO_OUT>/<out_dir>.  `plot` renders a champion-vs-steps
figure comparing the given run directories (plus an allocation-share
figure inside each).  `validate` checks a config and echoes the fully
resolved settings.  Config problems exit with status 2.
"""

import argparse
import sys
from pathlib import Path

from . import plotting
from .config import dumps_config, load_config
from .errors import ConfigError
from .experiment import run_experiment


def build_parser():
    parser = argparse.ArgumentParser(
        prog="evoportfolio",
        description="portfolio of gradient learners inside an evolving "
                    "population, with bandit-driven rollout allocation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="train and write run directories")
    run_p.add_argument("--config", required=True, type=Path,
                       help="TOML run configuration")
    run_p.add_argument("--seed", type=int, default=None,
                       help="run only this seed instead of the config's list")
    run_p.add_argument("--workers", type=int, default=None,
                       help="rollout worker threads (overrides config)")
    run_p.add_argument("--quiet", action="store_true",
                       help="suppress per-generation progress lines")

    plot_p = sub.add_parser("plot", help="render SVG figures from run dirs")
    plot_p.add_argument("dirs", nargs="+", type=Path,
                        help="run directories (each containing seed_<n>/)")
    plot_p.add_argument("--out", type=Path, default=None,
                        help="champion figure path "
                             "(default: champion.svg in the first dir)")

    val_p = sub.add_parser("validate", help="check a config file")
    val_p.add_argument("--config", required=True, type=Path)
    return parser


def cmd_run(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    if args.workers is not None:
        cfg.workers = args.workers
    record = run_experiment(cfg, echo=not args.quiet)
    for res in record.results:
        how = "early stop" if res.stopped_early else "budget"
        print(f"seed {res.seed}: champion {res.final_champion:.3f} "
              f"after {res.env_steps} steps ({how})")
    print(f"wrote {record.out_dir}")
    return 0


def cmd_plot(args):
    out = args.out if args.out is not None else args.dirs[0] / "champion.svg"
    written = [plotting.plot_champion_curves(args.dirs, out)]
    for d in args.dirs:
        written.append(plotting.plot_allocation(d, Path(d) / "allocation.svg"))
    for path in written:
        print(path)
    return 0


def cmd_validate(args):
    cfg = load_config(args.config)
    print(f"{args.config}: OK")
    print(dumps_config(cfg), end="")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "plot": cmd_plot, "validate": cmd_validate}
    try:
        return handler[args.command](args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
