"""Command-line entry point: ``compnet {validate,spectral,run,sweep,compare}``.

Exit codes: 0 success, 1 malformed config or missing file, 2 validation
failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import harness
from .errors import CompnetError, ConfigError, ValidationError


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="compnet", description="Diffusion learning for competing teams.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", required=True, help="experiment JSON (may name a packaged preset)")
        p.add_argument("--seed", type=int, action="append", help="override the seed list (repeatable)")
        if out:
            p.add_argument("--out", help="output directory (default: the config's output_path)")
        return p

    common(sub.add_parser("validate", help="check matrices and monotonicity, print a JSON report"), out=False)
    common(sub.add_parser("spectral", help="print spectral diagnostics as JSON"), out=False)
    common(sub.add_parser("run", help="run every seed, write CSVs and summary.json"))
    sw = common(sub.add_parser("sweep", help="steady-state metrics over a list of step sizes"))
    sw.add_argument("--mu", type=float, action="append", help="step size (repeatable; default: config mu_list)")
    cp = common(sub.add_parser("compare", help="several algorithms at matched seeds"))
    cp.add_argument("--algorithms", help="comma-separated list (default: config algorithms)")
    return ap


def _load(args) -> harness.ExperimentConfig:
    cfg = harness.ExperimentConfig.from_file(args.config)
    if args.seed:
        cfg.seeds = list(args.seed)
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "validate":
            code, report = harness.cmd_validate(cfg)
            print(harness.dumps(report), end="")
            return code
        if args.command == "spectral":
            print(harness.dumps(harness.cmd_spectral(cfg)), end="")
            return 0
        if args.command == "run":
            summary = harness.cmd_run(cfg, args.out)
            print(harness.dumps({"any_diverged": summary["any_diverged"],
                                 "steady_state_mean": summary["steady_state_mean"]}), end="")
            return 0
        if args.command == "sweep":
            result = harness.cmd_sweep(cfg, args.mu if args.mu else None, args.out)
            print(harness.dumps({"ratios": result.ratios}), end="")
            return 0
        if args.command == "compare":
            algs = args.algorithms.split(",") if args.algorithms else None
            summary = harness.cmd_compare(cfg, algs, args.out)
            print(harness.dumps(summary["algorithms"]), end="")
            return 0
    except ValidationError as exc:
        print(f"compnet: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, CompnetError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"compnet: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
