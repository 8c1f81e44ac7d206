"""Command-line front end: assemble, analyze, report.

Exit codes: 0 success (analyze: every call-in clean), 1 findings (any
flagged/stopped/timeout call-in), 2 input or validation errors, 3 I/O
failures while assembling.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .asm import annotations_from_obj, assemble, parse_image, serialize_image
from .heuristics import derive_annotations
from .orderliness import AnalysisConfig, analyze_enclave
from .report import ReportError, parse_report, render_text, serialize_report
from .version import __version__


def _err(message: str):
    print(message, file=sys.stderr)


def cmd_assemble(args) -> int:
    try:
        source = Path(args.source).read_text(encoding="utf-8")
    except OSError as e:
        _err(f"cannot read {args.source}: {e}")
        return 3
    image, diagnostics = assemble(source)
    for d in diagnostics:
        _err(f"{args.source}:{d}")
    if image is None:
        return 2
    try:
        Path(args.output).write_bytes(serialize_image(image))
    except OSError as e:
        _err(f"cannot write {args.output}: {e}")
        return 3
    return 0


def _load_annotations(args, image):
    if args.annotations:
        try:
            obj = json.loads(Path(args.annotations).read_text(encoding="utf-8"))
            return annotations_from_obj(obj), []
        except (OSError, json.JSONDecodeError, Exception) as e:  # noqa: B014
            return None, [f"cannot load annotations: {e}"]
    derivation = derive_annotations(image)
    return derivation.annotations, derivation.diagnostics


def cmd_analyze(args) -> int:
    try:
        data = Path(args.image).read_bytes()
    except OSError as e:
        _err(f"cannot read {args.image}: {e}")
        return 2
    image, diagnostics = parse_image(data)
    for d in diagnostics:
        _err(f"{args.image}:{d}")
    if image is None:
        return 2
    annotations, notes = _load_annotations(args, image)
    for note in notes:
        _err(note)
    if annotations is None:
        return 2
    config = AnalysisConfig(
        stack_size=args.stack_size, heap_size=args.heap_size,
        max_active_branches=args.max_branches,
        max_violations=args.max_violations,
        time_budget=args.time_budget,
        step_budget_per_path=args.step_budget)
    indices = None
    if args.ecall is not None:
        indices = [args.ecall]
        if not 0 <= args.ecall < len(annotations.secure):
            _err(f"invalid ecall index: {args.ecall}")
            return 2
    try:
        report = analyze_enclave(image, annotations, config, indices=indices)
    except ValueError as e:
        _err(str(e))
        return 2
    if args.format == "text":
        rendered = render_text(parse_report(serialize_report(report)))
        payload = rendered.encode("utf-8")
    else:
        payload = serialize_report(report)
    if args.output:
        try:
            Path(args.output).write_bytes(payload)
        except OSError as e:
            _err(f"cannot write {args.output}: {e}")
            return 2
    else:
        sys.stdout.write(payload.decode("utf-8"))
        if args.format != "text":
            sys.stdout.write("\n")
    return 0 if report.totals["clean"] == report.totals["ecalls"] else 1


def cmd_report(args) -> int:
    try:
        data = Path(args.report).read_bytes()
    except OSError as e:
        _err(f"cannot read {args.report}: {e}")
        return 2
    try:
        doc = parse_report(data)
    except ReportError as e:
        _err(str(e))
        return 2
    sys.stdout.write(render_text(doc))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emlcheck",
        description="Assemble and analyze enclave machine language programs.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("assemble", help="assemble an .eml source into an image")
    p.add_argument("source")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("analyze", help="symbolically analyze an enclave image")
    p.add_argument("image")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--annotations", help="JSON annotations file")
    group.add_argument("--auto", action="store_true",
                       help="derive annotations from symbols (default)")
    p.add_argument("--ecall", type=int, default=None, help="analyze one call index")
    p.add_argument("--all", action="store_true", help="analyze every call (default)")
    p.add_argument("--stack-size", type=int, default=None)
    p.add_argument("--heap-size", type=int, default=None)
    p.add_argument("--max-branches", type=int, default=100)
    p.add_argument("--max-violations", type=int, default=20)
    p.add_argument("--time-budget", type=float, default=1200.0)
    p.add_argument("--step-budget", type=int, default=4096)
    p.add_argument("--output", default=None)
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="render a report document as text")
    p.add_argument("report")
    p.add_argument("--format", choices=("text",), default="text")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
