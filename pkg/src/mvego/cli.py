"""Command line entry point: ``mvego run | oracle | summarize``.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 a run stopped
on a numerical failure (outputs are still written).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from importlib import resources
from pathlib import Path

from .benchmarks import BENCHMARKS, ORACLE_CACHE, get_benchmark, load_oracle_cache, oracle_optimum, write_oracle_cache
from .harness import CampaignConfig, ConfigError, any_failed, run_campaign, summarize

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mvego", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a campaign described by a JSON configuration")
    run.add_argument("config", help="path to the JSON configuration")
    run.add_argument("--seed", type=int, help="base seed (repetition r uses seed + r)")
    run.add_argument("--jobs", type=int, help="worker processes")
    run.add_argument("--methods", help="comma-separated subset of CS,HoHS,HeHS,CW,GA")
    run.add_argument("--repetitions", type=int)
    run.add_argument("--output", help="output directory")

    orc = sub.add_parser("oracle", help="brute-force optimum of a benchmark")
    orc.add_argument("benchmark", choices=sorted(BENCHMARKS))
    orc.add_argument("--resolution", type=int, default=801, help="grid points per axis (q <= 2)")
    orc.add_argument("--starts", type=int, default=1000, help="local searches per category (q > 2)")
    orc.add_argument("--write-cache", nargs="?", const="", metavar="PATH",
                     help="store the result in the oracle cache (default: packaged file)")

    summ = sub.add_parser("summarize", help="recompute statistics of a campaign directory")
    summ.add_argument("run_dir")
    return ap


def _cmd_run(args) -> int:
    try:
        config = CampaignConfig.load(args.config)
        overrides = {k: getattr(args, k) for k in ("seed", "jobs", "repetitions", "output")
                     if getattr(args, k) is not None}
        if args.methods is not None:
            overrides["methods"] = args.methods
        config = CampaignConfig(**{**asdict(config), **overrides}) if overrides else config
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    groups = run_campaign(config)
    out = config.output or f"runs/{config.benchmark}"
    print(summarize(out), end="")
    if any_failed(groups):
        for recs in groups.values():
            for r in recs:
                if r.failure:
                    print(f"{r.method} seed {r.seed}: {r.failure}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_oracle(args) -> int:
    if args.resolution < 2 or args.starts < 1:
        print("resolution must be >= 2 and starts >= 1", file=sys.stderr)
        return EXIT_CONFIG
    res = oracle_optimum(get_benchmark(args.benchmark), args.resolution, args.starts)
    print(json.dumps(asdict(res), indent=2))
    if args.write_cache is not None:
        path = Path(args.write_cache) if args.write_cache else Path(
            str(resources.files("mvego.data").joinpath(ORACLE_CACHE)))
        try:
            cache = load_oracle_cache(path) if path.exists() else {}
        except (OSError, ValueError):
            cache = {}
        cache[res.name] = res
        write_oracle_cache(cache.values(), path)
    return EXIT_OK


def _cmd_summarize(args) -> int:
    try:
        print(summarize(args.run_dir), end="")
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return {"run": _cmd_run, "oracle": _cmd_oracle, "summarize": _cmd_summarize}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
