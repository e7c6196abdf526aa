"""Command-line entry point: run, ablate, report, validate.

Exit codes: 0 success, 2 configuration error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigurationError
from .harness import (
    ScenarioConfig,
    config_from_dict,
    config_to_dict,
    recompute_report,
    run_ablation_suite,
    run_scenario,
    write_report_files,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _load_config(path: str | None, args: argparse.Namespace) -> ScenarioConfig:
    raw = {}
    if path is not None:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    config = config_from_dict(raw)
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "slots", None) is not None:
        config.slots = args.slots
    for flag in (
        "disable_exit",
        "disable_promotion",
        "disable_bidding",
        "disable_speed_factor",
        "disable_user_factor",
    ):
        if getattr(args, flag, False):
            setattr(config, flag, True)
    if getattr(args, "stage_count", None) is not None:
        config.stage_count = args.stage_count
    if getattr(args, "no_boost", False):
        config.boosting_enabled = False
    config.validate()
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coldboost", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="scenario config JSON (defaults apply to missing keys)")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--slots", type=int, help="override the number of main-phase slots")
        p.add_argument("--out", help="output directory for run artifacts")
        p.add_argument("--disable-exit", dest="disable_exit", action="store_true")
        p.add_argument("--disable-promotion", dest="disable_promotion", action="store_true")
        p.add_argument("--disable-bidding", dest="disable_bidding", action="store_true")
        p.add_argument("--disable-speed-factor", dest="disable_speed_factor", action="store_true")
        p.add_argument("--disable-user-factor", dest="disable_user_factor", action="store_true")
        p.add_argument("--stage-count", dest="stage_count", type=int, choices=(1, 2, 3, 4))
        p.add_argument("--no-boost", dest="no_boost", action="store_true", help="natural channel only")

    p_run = sub.add_parser("run", help="run one scenario and write artifacts")
    add_common(p_run)

    p_ablate = sub.add_parser("ablate", help="run an ablation suite on matched seeds")
    add_common(p_ablate)
    p_ablate.add_argument("--suite", required=True, choices=("rules", "levels", "bidding"))

    p_report = sub.add_parser("report", help="recompute metrics from a persisted run")
    p_report.add_argument("--run-dir", required=True, help="directory holding events.jsonl etc.")
    p_report.add_argument("--out", help="where to write report files (default: run dir)")

    p_validate = sub.add_parser("validate", help="check a scenario config and echo it resolved")
    p_validate.add_argument("--config", help="scenario config JSON")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = _load_config(args.config, args)
            result = run_scenario(config, out_dir=args.out)
            print(json.dumps({"events": len(result.events), "report": result.report.get("overall")}, sort_keys=True))
        elif args.command == "ablate":
            config = _load_config(args.config, args)
            out = run_ablation_suite(config, args.suite, out_dir=args.out)
            print(json.dumps(out["deltas_percent"], indent=2, sort_keys=True))
        elif args.command == "report":
            report = recompute_report(args.run_dir)
            out_dir = Path(args.out) if args.out else Path(args.run_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            write_report_files(report, out_dir)
            print(json.dumps(report.get("overall"), sort_keys=True))
        elif args.command == "validate":
            config = _load_config(args.config, args)
            print(json.dumps(config_to_dict(config), indent=2, sort_keys=True))
        return EXIT_OK
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
