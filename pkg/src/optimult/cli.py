"""optimult command line: synth, verify, rules."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .arrays import ArraySpec
from .cost import ShapeUnreachable
from .egraph import RunLimits
from .netlist import NetlistError, check_module_name, emit_verilog, lower
from .pipeline import PipelineConfig, optimize
from .rewrites import all_rules, soundness_check
from .term import parse, row, serialize
from .verify import exhaustive_check, unpack_row

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
MAX_VERIFY_WIDTH = 8


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _width(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if n < 2:
        raise argparse.ArgumentTypeError("width must be at least 2")
    return n


def _positive(text: str) -> int:
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return n


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="optimult", description="Multiplier/squarer synthesis by e-graph rewriting.")
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--list-rules", action="store_true", help="print the rule catalogue and exit")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("synth", help="synthesize a multiplier or squarer to Verilog")
    s.add_argument("--width", type=_width, required=True)
    s.add_argument("--square", action="store_true")
    s.add_argument("--phase1-iters", type=_positive, default=16)
    s.add_argument("--phase2-iters", type=_positive, default=16)
    s.add_argument("--node-limit", type=_positive, default=None,
                   help="node limit for both phases (default 100000 / 200000)")
    s.add_argument("--no-dnc", action="store_true", help="disable divide-and-conquer")
    s.add_argument("--compress-stage", action="store_true",
                   help="add the whole-stage column compression rule to phase one")
    s.add_argument("--cache", default=None, help="sub-design cache directory (env OPTIMULT_CACHE)")
    s.add_argument("--out", required=True, help="Verilog output file")
    s.add_argument("--report", default=None, help="JSON run report")
    s.add_argument("--design-out", default=None, help="also write the design as an s-expression")
    s.add_argument("--module", default=None, help="module name (default mult<N>/square<N>)")
    s.add_argument("--skip-verify", action="store_true")
    s.add_argument("--jobs", type=int, default=1)

    v = sub.add_parser("verify", help="exhaustively check a serialized design")
    v.add_argument("--width", type=_width, required=True)
    v.add_argument("--square", action="store_true")
    v.add_argument("--design", required=True, help="s-expression file: a row of output bits")

    r = sub.add_parser("rules", help="list rewrites")
    r.add_argument("--check", action="store_true", help="run the soundness check on each rule")
    r.add_argument("--json", action="store_true")
    return ap


def cmd_synth(args) -> int:
    spec = ArraySpec(args.width, args.square)
    module = args.module or f"{'square' if spec.square else 'mult'}{spec.width}"
    try:
        check_module_name(module)
    except NetlistError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    limits1 = RunLimits(args.phase1_iters, args.node_limit or 100_000)
    limits2 = RunLimits(args.phase2_iters, args.node_limit or 200_000)
    config = PipelineConfig(phase1=limits1, phase2=limits2, dnc=not args.no_dnc,
                            cache_dir=args.cache or os.environ.get("OPTIMULT_CACHE"),
                            jobs=args.jobs, compress_stage=args.compress_stage)
    try:
        bits, report = optimize(spec, config)
    except ShapeUnreachable as e:
        print(json.dumps({"status": "unreachable", "phase": e.phase, "message": str(e)}))
        return EXIT_FAIL
    nl = lower(bits, spec.width, spec.square)
    status = EXIT_OK
    if not args.skip_verify and spec.width <= MAX_VERIFY_WIDTH:
        verdict = exhaustive_check(nl, spec)
        report.verified = verdict.passed
        print(verdict.to_json())
        if not verdict.passed:
            status = EXIT_FAIL
    try:
        Path(args.out).write_text(emit_verilog(nl, module))
        if args.report:
            Path(args.report).write_text(report.to_json() + "\n")
        if args.design_out:
            Path(args.design_out).write_text(serialize(row(*reversed(bits))) + "\n")
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    print(json.dumps({"delay": report.delay, "gates": report.gates,
                      "iterations": report.iterations, "out": args.out}))
    return status


def cmd_verify(args) -> int:
    spec = ArraySpec(args.width, args.square)
    try:
        text = Path(args.design).read_text()
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        design = parse(text)
    except ValueError as e:
        print(f"error: {args.design}: {e}", file=sys.stderr)
        return EXIT_USAGE
    verdict = exhaustive_check(unpack_row(design, spec.output_width), spec)
    print(verdict.to_json())
    return EXIT_OK if verdict.passed else EXIT_FAIL


def cmd_rules(args) -> int:
    failed = 0
    rows = []
    for rule in all_rules():
        entry = rule.describe()
        if args.check:
            res = soundness_check(rule)
            entry["sound"] = res.passed
            entry["cases"] = res.cases
            if not res.passed:
                failed += 1
                entry["counterexample"] = res.counterexample
        rows.append(entry)
    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        for e in rows:
            flag = ""
            if args.check:
                flag = "ok   " if e["sound"] else "FAIL "
            print(f"{flag}{e['name']:<18} {e['phase']:<4} {e['mode']:<6} {e['lhs']}  =>  {e['rhs']}")
            if args.check and not e["sound"]:
                print(f"     counterexample: {json.dumps(e['counterexample'])}")
    return EXIT_FAIL if failed else EXIT_OK


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command is None and args.list_rules:
        return cmd_rules(argparse.Namespace(check=False, json=False))
    if args.command is None:
        ap.print_help()
        return EXIT_USAGE
    handler = {"synth": cmd_synth, "verify": cmd_verify, "rules": cmd_rules}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
