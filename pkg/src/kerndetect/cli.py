"""Command-line front end.

Every subcommand reads one INI config, runs the matching handler, and
writes a JSON envelope (plus CSV tables for tabular results) into the
output directory.  Artifacts embed the canonical config echo and carry
no timestamps, so re-running a command on its own echoed config
reproduces them byte for byte.

Exit codes: 0 success, 1 invalid input or config, 2 no solution for the
given inputs (including a solve that did not converge), 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import RunConfig
from .errors import NoSolutionError, NumericalError
from .service.handlers import HANDLERS, HandlerResult

_USAGE = {
    "solve-delay": "solve the normed detection delay for a kernel/alternative pair",
    "optimal-kernel": "construct the delay-optimal kernel and its delay",
    "monitor": "score one observation stream with the online detector",
    "montecarlo": "replicate a detection scenario over a bandwidth grid",
    "false-alarm": "estimate in-control alarm rates over a bandwidth grid",
    "select-kernel": "rank candidate kernels by solved delay",
    "oracle": "probe the reachable objective over constrained kernels",
}


def _fmt_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_artifacts(result: HandlerResult, out_dir: str, prefix: str) -> list:
    os.makedirs(out_dir, exist_ok=True)
    written = []

    json_path = os.path.join(out_dir, f"{prefix}.json")
    with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(result.payload, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    written.append(json_path)

    for name, (fields, rows) in result.tables.items():
        csv_path = os.path.join(out_dir, f"{prefix}_{name}.csv")
        with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(fields) + "\n")
            for row in rows:
                fh.write(",".join(_fmt_cell(cell) for cell in row) + "\n")
        written.append(csv_path)

    echo_path = os.path.join(out_dir, f"{prefix}_config.ini")
    with open(echo_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(result.payload["config"])
    written.append(echo_path)
    return written


def _headline(command: str, payload: dict) -> str:
    if command in ("solve-delay",):
        sol = payload["solution"]
        return f"rho = {sol['rho']} status = {sol['status']}"
    if command == "optimal-kernel":
        pair = payload["pair"]
        return f"rho_star = {pair['rho_star']}"
    if command == "monitor":
        rec = payload["record"]
        state = "signal" if rec["n_h"] is not None else "no signal"
        return f"{state} after {rec['steps']} steps"
    if command == "montecarlo":
        return f"{len(payload['summary']['rows'])} bandwidth rows"
    if command == "false-alarm":
        return f"{len(payload['study']['rows'])} bandwidth rows"
    if command == "select-kernel":
        sel = payload["selection"]
        best = sel["best_index"]
        return f"selected {payload['candidates'][best]} (rho = {sel['solutions'][best]['rho']})"
    if command == "oracle":
        return f"sup objective = {payload['probe']['sup_value']}"
    return "done"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kerndetect",
        description="sequential kernel change detection tools",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, help_text in _USAGE.items():
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("config", help="path to an INI run configuration")
        cmd.add_argument(
            "--set",
            dest="overrides",
            action="append",
            metavar="SECTION.KEY=VALUE",
            help="override a config key (repeatable; flags beat file keys)",
        )
        cmd.add_argument("--out", help="output directory (default: [output] out_dir or .)")
        cmd.add_argument("--prefix", help="artifact name prefix (default: command name)")
    return parser


def _execute(args) -> int:
    cfg = RunConfig.from_file(args.config)
    cfg.override(args.overrides)
    out_sec = cfg.section("output")
    out_dir = args.out or out_sec.get("out_dir") or "."
    prefix = args.prefix or out_sec.get("prefix") or args.command.replace("-", "_")

    result = HANDLERS[args.command](cfg)
    written = write_artifacts(result, out_dir, prefix)
    print(f"{args.command}: {_headline(args.command, result.payload)}")
    for path in written:
        print(f"wrote {path}")

    if args.command == "solve-delay" and result.payload["solution"]["status"] != "converged":
        print(f"solve-delay: no crossing found ({result.payload['solution']['status']})", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _execute(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except NoSolutionError as exc:
        print(f"no solution: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
