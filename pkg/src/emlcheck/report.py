"""Machine-readable analysis reports and their text rendering.

Reports use the same canonicalization rules as the image container (fixed
key order, lowercase 0x-hex, no insignificant whitespace), so identical
analyses produce byte-identical documents that can be diffed or kept as
golden files. The text rendering is computed from the document alone.
"""

from __future__ import annotations

import hashlib
import json

from .orderliness import AnalysisConfig, EnclaveReport, Phase, ViolationKind

_STATUSES = ("clean", "flagged", "timeout", "stopped")
_KINDS = {k.value for k in ViolationKind}
_PHASES = {p.value for p in Phase}


class ReportError(Exception):
    pass


def image_digest(image_bytes: bytes) -> str:
    return "sha256:" + hashlib.sha256(image_bytes).hexdigest()


def config_to_obj(config: AnalysisConfig) -> dict:
    return {
        "stack_size": config.stack_size,
        "heap_size": config.heap_size,
        "max_active_branches": config.max_active_branches,
        "max_violations": config.max_violations,
        "time_budget": config.time_budget,
        "step_budget_per_path": config.step_budget_per_path,
    }


def report_to_obj(report: EnclaveReport) -> dict:
    ecalls = []
    for e in report.ecalls:
        violations = [{
            "kind": v.kind.value,
            "rip": f"0x{v.rip:x}",
            "phase": v.phase.value,
            "detail": v.detail,
            "feasibility": v.feasibility,
            "trace": [f"0x{a:x}" for a in v.trace],
        } for v in e.violations]
        ecalls.append({
            "index": e.ecall_index,
            "status": e.status,
            "violations": violations,
            "paths_explored": e.paths_explored,
            "paths_truncated": e.paths_truncated,
            # Fixed value: report bytes must be reproducible across runs.
            "wall_time_ms": 0,
        })
    return {
        "tool_version": report.tool_version,
        "image_digest": report.image_digest,
        "config": config_to_obj(report.config),
        "ecalls": ecalls,
        "totals": dict(report.totals),
    }


def serialize_report(report: EnclaveReport) -> bytes:
    return json.dumps(report_to_obj(report), separators=(",", ":")).encode("utf-8")


def _check(cond, message):
    if not cond:
        raise ReportError(message)


def parse_report(data: bytes) -> dict:
    """Parse and validate a report document; raises ReportError."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ReportError(f"malformed report: {e}")
    _check(isinstance(doc, dict), "malformed report: not an object")
    for key in ("tool_version", "image_digest", "config", "ecalls", "totals"):
        _check(key in doc, f"malformed report: missing key {key}")
    _check(isinstance(doc["ecalls"], list), "malformed report: ecalls")
    counts = {"clean": 0, "flagged": 0, "timeout": 0, "stopped": 0}
    for e in doc["ecalls"]:
        _check(isinstance(e, dict), "malformed report: ecall entry")
        for key in ("index", "status", "violations", "paths_explored",
                    "paths_truncated", "wall_time_ms"):
            _check(key in e, f"malformed report: ecall missing {key}")
        _check(e["status"] in _STATUSES, f"malformed report: status {e['status']!r}")
        counts[e["status"]] += 1
        for v in e["violations"]:
            for key in ("kind", "rip", "phase", "detail", "feasibility", "trace"):
                _check(key in v, f"malformed report: violation missing {key}")
            _check(v["kind"] in _KINDS, f"malformed report: kind {v['kind']!r}")
            _check(v["phase"] in _PHASES, f"malformed report: phase {v['phase']!r}")
    totals = doc["totals"]
    _check(isinstance(totals, dict), "malformed report: totals")
    for key in ("ecalls", "clean", "flagged", "timeout", "stopped"):
        _check(isinstance(totals.get(key), int), f"malformed report: totals.{key}")
    expected = dict(counts, ecalls=len(doc["ecalls"]))
    _check(totals == expected, "invariant violated: totals do not match ecalls")
    return doc


def render_text(doc: dict) -> str:
    """Human-readable table plus per-violation trace summaries."""
    lines = []
    lines.append(f"enclave analysis report (tool {doc['tool_version']})")
    lines.append(f"image: {doc['image_digest']}")
    cfg = doc["config"]
    lines.append(
        "config: branches<={max_active_branches} violations<={max_violations} "
        "time={time_budget}s steps/path={step_budget_per_path}".format(**cfg))
    if cfg.get("stack_size") or cfg.get("heap_size"):
        lines.append(f"overrides: stack_size={cfg['stack_size']} heap_size={cfg['heap_size']}")
    lines.append("")
    lines.append(f"{'ecall':>5}  {'status':<8} {'violations':>10} {'paths':>6} {'truncated':>9}")
    for e in doc["ecalls"]:
        lines.append(f"{e['index']:>5}  {e['status']:<8} {len(e['violations']):>10} "
                     f"{e['paths_explored']:>6} {e['paths_truncated']:>9}")
    t = doc["totals"]
    lines.append(f"totals: ecalls={t['ecalls']} clean={t['clean']} flagged={t['flagged']} "
                 f"timeout={t['timeout']} stopped={t['stopped']}")
    any_violation = False
    for e in doc["ecalls"]:
        for v in e["violations"]:
            if not any_violation:
                lines.append("")
                lines.append("violations:")
                any_violation = True
            lines.append(f"  ecall {e['index']}: {v['kind']} at {v['rip']} "
                         f"[{v['phase']}, {v['feasibility']}] {v['detail']}")
            if v["trace"]:
                tail = v["trace"][-8:]
                prefix = "... -> " if len(v["trace"]) > 8 else ""
                lines.append(f"    trace: {prefix}{' -> '.join(tail)}")
    if not any_violation:
        lines.append("no violations")
    return "\n".join(lines) + "\n"
