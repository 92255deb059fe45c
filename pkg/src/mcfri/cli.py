"""Command-line entry point: one subcommand per scenario.

    mcfri snr_sweep --preset fig8 --out results/fig8 --trials 1000 --threads 4
    mcfri failure_audit --config audit.json
"""
from __future__ import annotations

import argparse
import json
import sys

from .errors import AuditFailed
from .experiments import SCENARIOS, load_config, preset, run, save_config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcfri", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        p = sub.add_parser(name, help=f"run the {name} scenario")
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", help="JSON scenario configuration")
        src.add_argument("--preset", help="built-in configuration (e.g. fig8, fig9, si, sync, "
                                          "fig13, fig7, oracle, dump)")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--trials", type=int, help="trials per point (overrides the config)")
        p.add_argument("--threads", type=int, help="worker threads for the trials")
        p.add_argument("--save-config", metavar="PATH",
                       help="write the effective configuration to PATH and exit")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = load_config(args.config) if args.config else preset(args.preset)
    if cfg.scenario != args.scenario:
        print(f"error: configuration is for {cfg.scenario!r}, not {args.scenario!r}",
              file=sys.stderr)
        return 2
    changes = {k: getattr(args, k) for k in ("seed", "out", "trials", "threads")
               if getattr(args, k) is not None}
    cfg = cfg.replace(**changes)
    if args.save_config:
        save_config(cfg, args.save_config)
        return 0
    try:
        result = run(cfg)
    except AuditFailed as exc:
        print(f"audit failed: {exc}", file=sys.stderr)
        return 1
    for path in result.files:
        print(path)
    if result.summary:
        print(json.dumps(result.summary, sort_keys=True, default=str)[:2000])
    if not result.ok:
        print(f"{cfg.scenario}: FAILED", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
