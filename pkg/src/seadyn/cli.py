"""Command-line front end: seadyn <command> --scenario ... --out ...

Exit status: 0 on success, 1 when a hard validation failed (trace drift,
entropy decrease, positivity), 2 on rejected input with a machine-readable
error JSON on stderr. Set SEA_DYN_LOG=debug|info|warning for verbosity.
"""

import argparse
import json
import logging
import os
import sys

from .runner import COMMANDS, ScenarioError, run


def _parse_tau(text: str) -> float:
    val = float(text)
    if not val > 0:
        raise argparse.ArgumentTypeError(f"tau must be positive, got {text!r}")
    return val


def _parse_times(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad time list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seadyn",
        description="Steepest-entropy-ascent dissipative quantum dynamics runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=True, help="scenario file (JSON or TOML)")
        p.add_argument("--out", required=True, help="output directory for this run")
        p.add_argument("--t-final", type=float, default=None, dest="t_final")
        p.add_argument("--tau", type=_parse_tau, default=None,
                       help="override relaxation time ('inf' disables the dissipator)")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for randomized verification checks")
        p.add_argument("--format", choices=("csv", "jsonl"), default="csv",
                       help="jsonl additionally emits full states as JSON lines")
        if name == "onsager":
            p.add_argument("--times", type=_parse_times, default=None,
                           help="comma-separated evaluation times")
    return parser


def main(argv=None) -> int:
    level = os.environ.get("SEA_DYN_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    args = build_parser().parse_args(argv)
    try:
        manifest = run(
            args.command,
            args.scenario,
            args.out,
            t_final=args.t_final,
            tau=args.tau,
            seed=args.seed,
            fmt=args.format,
            times=getattr(args, "times", None),
        )
    except ScenarioError as exc:
        print(json.dumps(exc.to_json(), sort_keys=True), file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, NotImplementedError) as exc:
        doc = {"error": type(exc).__name__, "field": "", "detail": str(exc)}
        print(json.dumps(doc, sort_keys=True), file=sys.stderr)
        return 2
    status = "ok" if manifest.ok else "FAILED"
    print(f"{manifest.command}: {status} (digest {manifest.config_digest[:12]}, "
          f"outputs in {manifest.out_dir})")
    return 0 if manifest.ok else 1


if __name__ == "__main__":
    sys.exit(main())
