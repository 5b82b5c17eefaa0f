"""Command-line interface: run scenarios, summarize logs, sweep parameters.

Exit codes: 0 on success, 2 for configuration errors, 1 for anything else.
``MINITCP_OUT`` sets the default output directory (falls back to ``./out``).
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys

from .errors import ConfigError
from .harness import load_scenario, run_scenario
from .metrics import MetricsLog, summarize_log

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2

OUT_ENV = "MINITCP_OUT"


def _default_out() -> str:
    return os.environ.get(OUT_ENV, "out")


def _set_by_path(cfg: dict, dotted: str, value):
    """Assign into nested dicts/lists via a dotted path like flows.0.iw."""
    target = cfg
    parts = dotted.split(".")
    for part in parts[:-1]:
        target = target[int(part)] if isinstance(target, list) else target[part]
    leaf = parts[-1]
    if isinstance(target, list):
        target[int(leaf)] = value
    else:
        target[leaf] = value


def _parse_scalar(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def cmd_run(args) -> int:
    result = run_scenario(args.scenario, out_dir=args.out)
    print(f"{result.name}: {len(result.metrics.records)} metric records")
    print(f"log: {result.log_path}")
    print(f"summary: {result.summary_path}")
    return EXIT_OK


def cmd_summarize(args) -> int:
    log = MetricsLog.load(args.log)
    json.dump(summarize_log(log), sys.stdout, indent=2, sort_keys=True)
    print()
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_scenario(args.scenario)
    key, _, values = args.sweep.partition("=")
    if not values:
        raise ConfigError("sweep spec must look like key.path=v1,v2,...")
    for raw in values.split(","):
        value = _parse_scalar(raw)
        variant = copy.deepcopy(cfg)
        _set_by_path(variant, key, value)
        variant["name"] = f"{cfg['name']}_{key.replace('.', '_')}_{raw}"
        result = run_scenario(variant, out_dir=args.out)
        print(f"{result.name}: log={result.log_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minitcp")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario file")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", default=_default_out())
    p_run.set_defaults(fn=cmd_run)

    p_sum = sub.add_parser("summarize", help="print summary stats for a metrics log")
    p_sum.add_argument("log")
    p_sum.set_defaults(fn=cmd_summarize)

    p_sweep = sub.add_parser("sweep", help="run a scenario across parameter values")
    p_sweep.add_argument("scenario")
    p_sweep.add_argument("sweep", help="dotted.key.path=value1,value2,...")
    p_sweep.add_argument("--out", default=_default_out())
    p_sweep.set_defaults(fn=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
