"""Command-line entry point ``picard-op``.

    picard-op <scenario> [--config PATH] [--out DIR] [--seeds a,b,c]
    picard-op validate-config PATH

Without ``--config`` the scenario's bundled default config is used. The
output directory is ``--out`` if given, else ``$OUTPUT_DIR``, else the
config's ``[run] output_dir`` (default ``results``).

Exit codes: 0 when every scenario check passes, 1 on a failed check or a
library error, 2 on usage errors such as an unknown scenario.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .config import parse_config, validate_config
from .errors import PicardOpError
from .scenarios import SCENARIOS, run_scenario


def default_config_text(scenario: str) -> str:
    return resources.files("picardop").joinpath("configs", f"{scenario}.ini").read_text("utf-8")


def _parse_seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="picard-op", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, metavar="{scenario,validate-config}")
    for name in SCENARIOS:
        sp = sub.add_parser(name, help=f"run the {name} scenario")
        sp.add_argument("--config", type=Path, help="INI config (default: bundled)")
        sp.add_argument("--out", type=Path, help="output directory")
        sp.add_argument("--seeds", type=_parse_seeds, help="override the config seed list")
    vp = sub.add_parser("validate-config", help="check parameter inequalities of a config")
    vp.add_argument("path", type=Path)
    return ap


def _output_dir(args, cfg_out: Path) -> Path:
    if args.out is not None:
        return args.out
    env = os.environ.get("OUTPUT_DIR")
    return Path(env) if env else cfg_out


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "validate-config":
        report = validate_config(args.path)
        print(report)
        return 0 if report.ok else 1
    try:
        if args.config is not None:
            if not args.config.exists():
                print(f"error: config file {args.config} not found", file=sys.stderr)
                return 1
            text, source = args.config.read_text("utf-8"), str(args.config)
        else:
            text, source = default_config_text(args.command), f"<default {args.command}>"
        cfg = parse_config(text, args.command, source)
        if args.seeds:
            cfg = dataclasses.replace(cfg, seeds=args.seeds)
        out = _output_dir(args, cfg.output_dir)
        result = run_scenario(cfg)
        result.write(out, cfg.seeds)
    except PicardOpError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for name, ok in result.checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {result.scenario}: {name}")
    print(f"wrote {out / result.scenario}")
    return 0 if result.passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
