"""Command-line entry point.

Subcommands:

* ``run-experiment`` executes the full settings-by-scenarios study and
  writes per-run CSVs, the summary JSON and the circle-chart data.
* ``run-single`` executes one (setting, scenario) pair.
* ``check-invariants`` runs the built-in property suites.

Configuration is a flat ``key=value`` text file mirroring the fields of
:class:`~mho.scenario.ScenarioConfig`; ``--set key=value`` applies the
same syntax from the command line and wins over the file.  Defaults
reproduce the reference study at full scale.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .invariants import run_all
from .scenario import (
    ScenarioConfig,
    build_tasks,
    run_experiment,
    run_setting,
    write_run_csv,
)


class ConfigError(ValueError):
    """Malformed configuration file or override."""


_INT_KEYS = {"N", "N_sim", "N_s", "q_min", "q_max", "delta", "master_seed"}
_FLOAT_KEYS = {"tau", "tau_c", "noise_variance", "rho", "a_true", "a_observer", "floor_c"}
_VEC_KEYS = {"x0_true", "box_lower", "box_upper"}


def _coerce(key: str, raw: str, where: str):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _VEC_KEYS:
            parts = tuple(float(v) for v in raw.split(","))
            if len(parts) != 3:
                raise ValueError("expected three comma-separated values")
            return parts
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for '{key}': {exc}") from exc
    raise ConfigError(f"{where}: unknown configuration key '{key}'")


def parse_config_file(path: Path) -> dict:
    overrides = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key=value', got '{stripped}'")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        overrides[key] = _coerce(key, raw, f"{path}:{lineno}")
    return overrides


def load_config(args) -> ScenarioConfig:
    overrides = {}
    if args.config is not None:
        overrides.update(parse_config_file(Path(args.config)))
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set '{item}': expected key=value")
        key, raw = (part.strip() for part in item.split("=", 1))
        overrides[key] = _coerce(key, raw, f"--set {key}")
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    try:
        return replace(ScenarioConfig(), **overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def _cmd_run_experiment(args) -> int:
    config = load_config(args)
    out = Path(args.out)
    summary, _ = run_experiment(config, out_dir=out, workers=args.workers)
    for row in summary["indicators"]:
        tagged = "adaptive" if row["adaptive"] else f"fixed q={row['q_init']}"
        print(
            f"setting {row['setting']} ({tagged}): m={row['m']:.6g} sigma={row['sigma']:.6g}"
        )
    print(f"wrote {out / 'summary.json'}")
    return 0


def _cmd_run_single(args) -> int:
    config = load_config(args)
    if not 1 <= args.setting <= len(config.settings):
        raise ConfigError(f"setting must be in 1..{len(config.settings)}")
    if not 0 <= args.scenario < config.N_s:
        raise ConfigError(f"scenario must be in 0..{config.N_s - 1}")
    tasks, _ = build_tasks(config)
    payload = next(
        t for t in tasks if t[1] == args.setting and t[2] == args.scenario
    )
    _, setting_id, scenario_id, x_hat0, plant = payload
    result = run_setting(config, setting_id, x_hat0, plant)
    result = replace(result, scenario_id=scenario_id)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"run_s{setting_id}_c{scenario_id:03d}.csv"
    write_run_csv(path, config, result)
    print(
        f"setting {setting_id} scenario {scenario_id}: "
        f"final J={result.cost_series[-1]:.6g} final q={result.q_series[-1]}"
    )
    print(f"wrote {path}")
    return 0


def _cmd_check_invariants(args) -> int:
    checks = run_all(verbose=True)
    failed = [name for name, ok, _ in checks if not ok]
    if failed:
        print(f"{len(failed)} invariant check(s) failed", file=sys.stderr)
        return 1
    print(f"all {len(checks)} invariant checks passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mho", description="Adaptive-rate moving-horizon observer study runner"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="flat key=value configuration file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--workers", type=int, default=1, help="parallel run workers")
        p.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="override one configuration key (repeatable)",
        )

    p_exp = sub.add_parser("run-experiment", help="run the full study")
    add_common(p_exp)
    p_exp.set_defaults(func=_cmd_run_experiment)

    p_one = sub.add_parser("run-single", help="run one (setting, scenario) pair")
    add_common(p_one)
    p_one.add_argument("--setting", type=int, required=True, help="setting id, 1-based")
    p_one.add_argument("--scenario", type=int, required=True, help="scenario id, 0-based")
    p_one.set_defaults(func=_cmd_run_single)

    p_inv = sub.add_parser("check-invariants", help="run the built-in property suites")
    p_inv.set_defaults(func=_cmd_check_invariants)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"filesystem error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
