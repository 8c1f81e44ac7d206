"""Corpus harness: assemble, analyze and diff samples against manifests.

Each `<name>.eml` sample sits beside a `<name>.manifest.json` file holding
the expected per-call status and the expected set of (kind, detail)
violation signatures, plus a wall-time bound. A sample passes when the
analyzer reproduces the manifest exactly within the bound.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .asm import assemble
from .heuristics import derive_annotations
from .orderliness import AnalysisConfig, ViolationKind, analyze_enclave


@dataclass
class EcallExpectation:
    index: int
    status: str
    expected: set  # {(kind, detail), ...}


@dataclass
class CorpusManifest:
    sample: str
    ecalls: list
    max_wall_time_ms: int


@dataclass
class SampleResult:
    name: str
    passed: bool
    mismatches: list = field(default_factory=list)
    wall_ms: float = 0.0
    expected_kinds: set = field(default_factory=set)


def load_manifest(path: Path) -> CorpusManifest:
    doc = json.loads(path.read_text(encoding="utf-8"))
    ecalls = [EcallExpectation(
        index=e["index"], status=e["status"],
        expected={(v["kind"], v["detail"]) for v in e["expected"]})
        for e in doc["ecalls"]]
    return CorpusManifest(sample=doc["sample"], ecalls=ecalls,
                          max_wall_time_ms=doc["max_wall_time_ms"])


def manifest_path(sample_path: Path) -> Path:
    return sample_path.with_name(sample_path.stem + ".manifest.json")


def run_sample(sample_path: Path, config: Optional[AnalysisConfig] = None) -> SampleResult:
    name = sample_path.stem
    manifest = load_manifest(manifest_path(sample_path))
    result = SampleResult(name=name, passed=True)
    result.expected_kinds = {kind for e in manifest.ecalls for kind, _ in e.expected}

    image, diagnostics = assemble(sample_path.read_text(encoding="utf-8"))
    if image is None:
        result.passed = False
        result.mismatches = [f"assembly failed: {d}" for d in diagnostics]
        return result
    derivation = derive_annotations(image)
    if derivation.annotations is None:
        result.passed = False
        result.mismatches = [f"annotation derivation failed: {d}"
                             for d in derivation.diagnostics]
        return result

    started = time.monotonic()
    report = analyze_enclave(image, derivation.annotations,
                             config or AnalysisConfig())
    result.wall_ms = (time.monotonic() - started) * 1000.0

    by_index = {e.ecall_index: e for e in report.ecalls}
    for expectation in manifest.ecalls:
        actual = by_index.get(expectation.index)
        if actual is None:
            result.mismatches.append(f"ecall {expectation.index}: missing from report")
            continue
        if actual.status != expectation.status:
            result.mismatches.append(
                f"ecall {expectation.index}: status expected "
                f"{expectation.status!r}, got {actual.status!r}")
        got = {(v.kind.value, v.detail) for v in actual.violations}
        if got != expectation.expected:
            unexpected = sorted(got - expectation.expected)
            missing = sorted(expectation.expected - got)
            if unexpected:
                result.mismatches.append(
                    f"ecall {expectation.index}: unexpected violations: {unexpected}")
            if missing:
                result.mismatches.append(
                    f"ecall {expectation.index}: missing violations: {missing}")
    if len(report.ecalls) != len(manifest.ecalls):
        result.mismatches.append(
            f"ecall count: expected {len(manifest.ecalls)}, got {len(report.ecalls)}")
    if result.wall_ms > manifest.max_wall_time_ms:
        result.mismatches.append(
            f"wall time {result.wall_ms:.0f}ms over bound {manifest.max_wall_time_ms}ms")
    result.passed = not result.mismatches
    return result


def run_corpus(corpus_dir, config: Optional[AnalysisConfig] = None) -> list:
    """Run every sample in a directory; returns per-sample results."""
    paths = sorted(Path(corpus_dir).glob("*.eml"))
    if not paths:
        raise FileNotFoundError(f"no .eml samples under {corpus_dir}")
    return [run_sample(p, config) for p in paths]


def coverage_kinds(corpus_dir) -> set:
    """Violation kinds promised by the manifests of a corpus directory."""
    kinds = set()
    for path in sorted(Path(corpus_dir).glob("*.manifest.json")):
        manifest = load_manifest(path)
        for e in manifest.ecalls:
            kinds.update(kind for kind, _ in e.expected)
    return kinds


def full_kind_coverage(corpus_dir) -> bool:
    return coverage_kinds(corpus_dir) == {k.value for k in ViolationKind}
