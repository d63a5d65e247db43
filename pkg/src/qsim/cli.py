"""Command-line entry point.

    qsim <scenario> [--seed N] [--dims 2,2] [--trials N] [--epsilon X]
                    [--epsilon-sweep a,b,c] [--output PATH]
                    [--format json|csv] [--config PATH]

Precedence: CLI flags > config file > built-in defaults.  The environment
variable QSIM_SEED overrides the built-in default seed only.

Exit codes: 0 success, 1 property failure, 2 usage error, 3 capacity error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import CapacityError, QsimError, UsageError
from .scenarios import SCENARIOS, ScenarioConfig, run_scenario

DEFAULTS = {
    "seed": 1,
    "dims": (2, 2),
    "trials": 100,
    "epsilon": 0.1,
    "epsilon_sweep": None,
    "output_path": None,
    "format": "json",
    "uniform_weights": False,
}


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError as exc:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from exc


def _parse_float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise UsageError(f"expected comma-separated reals, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qsim",
        description="Scenario-driven quantum information-flow experiments.",
    )
    p.add_argument("scenario", help=f"one of: {', '.join(SCENARIOS)}")
    p.add_argument("--seed", type=int, default=None, help="64-bit RNG seed")
    p.add_argument("--dims", type=str, default=None, help="factor dims, e.g. 2,2")
    p.add_argument("--trials", type=int, default=None, help="Monte-Carlo trial count")
    p.add_argument("--epsilon", type=float, default=None, help="selection imperfection")
    p.add_argument(
        "--epsilon-sweep", type=str, default=None, help="ascending list, e.g. 0,0.05,0.1"
    )
    p.add_argument("--output", type=str, default=None, help="report path (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.add_argument("--config", type=str, default=None, help="JSON config file")
    p.add_argument(
        "--uniform-weights",
        action="store_true",
        default=None,
        help="second-law: use uniform branch weights instead of sampling them",
    )
    return p


def resolve_config(args: argparse.Namespace) -> tuple[ScenarioConfig, int | None]:
    """Merge defaults, env, config file, and flags into a ScenarioConfig."""
    merged = dict(DEFAULTS)
    if os.environ.get("QSIM_SEED"):
        try:
            merged["seed"] = int(os.environ["QSIM_SEED"])
        except ValueError as exc:
            raise UsageError(f"QSIM_SEED must be an integer") from exc
    if args.config:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {args.config}: {exc}") from exc
        for key in DEFAULTS:
            if key in file_cfg and file_cfg[key] is not None:
                merged[key] = file_cfg[key]
    if args.seed is not None:
        merged["seed"] = args.seed
    if args.dims is not None:
        merged["dims"] = _parse_int_list(args.dims)
    if args.trials is not None:
        merged["trials"] = args.trials
    if args.epsilon is not None:
        merged["epsilon"] = args.epsilon
    if args.epsilon_sweep is not None:
        merged["epsilon_sweep"] = _parse_float_list(args.epsilon_sweep)
    if args.output is not None:
        merged["output_path"] = args.output
    if args.format is not None:
        merged["format"] = args.format
    if args.uniform_weights:
        merged["uniform_weights"] = True
    if isinstance(merged["dims"], list):
        merged["dims"] = tuple(merged["dims"])
    if isinstance(merged["epsilon_sweep"], list):
        merged["epsilon_sweep"] = tuple(merged["epsilon_sweep"])
    cfg = ScenarioConfig(scenario=args.scenario, **merged)
    # property-suite runs registry-default counts unless trials was set explicitly
    trials_override = None
    if args.scenario == "property-suite":
        explicitly_set = args.trials is not None or (
            args.config is not None and _config_has_trials(args.config)
        )
        if explicitly_set:
            trials_override = cfg.trials
    return cfg, trials_override


def _config_has_trials(path: str) -> bool:
    try:
        with open(path) as fh:
            return "trials" in json.load(fh)
    except Exception:
        return False


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg, trials_override = resolve_config(args)
        report = run_scenario(cfg, trials_override)
    except CapacityError as exc:
        print(f"qsim: capacity error: {exc}", file=sys.stderr)
        return 3
    except QsimError as exc:
        print(f"qsim: error: {exc}", file=sys.stderr)
        return 2
    text = report.to_csv() if cfg.format == "csv" else report.to_json()
    if cfg.output_path:
        with open(cfg.output_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
