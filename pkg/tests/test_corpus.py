from __future__ import annotations

import json
import shutil

from emlcheck.asm import assemble
from emlcheck.corpus import (
    coverage_kinds, full_kind_coverage, load_manifest, run_corpus, run_sample,
)
from emlcheck.heuristics import derive_annotations
from emlcheck.orderliness import AnalysisConfig, ViolationKind, analyze_enclave

from conftest import CORPUS_DIR


def test_full_corpus_passes():
    results = run_corpus(CORPUS_DIR)
    failures = {r.name: r.mismatches for r in results if not r.passed}
    assert not failures, failures
    assert len(results) == 16


def test_every_violation_kind_is_covered():
    assert full_kind_coverage(CORPUS_DIR)
    assert coverage_kinds(CORPUS_DIR) == {k.value for k in ViolationKind}


def test_clean_samples_unaffected_by_tight_caps():
    for name in ("ok_minimal.eml", "ok_with_ocall.eml"):
        result = run_sample(CORPUS_DIR / name,
                            AnalysisConfig(max_violations=1))
        assert result.passed, result.mismatches


def test_harness_flags_edited_manifest(tmp_path):
    # Self-test: a manifest expecting fewer findings must be reported.
    for suffix in (".eml", ".manifest.json"):
        shutil.copy(CORPUS_DIR / f"vuln_no_flag_clear{suffix}",
                    tmp_path / f"vuln_no_flag_clear{suffix}")
    manifest_path = tmp_path / "vuln_no_flag_clear.manifest.json"
    doc = json.loads(manifest_path.read_text())
    doc["ecalls"][0]["expected"] = doc["ecalls"][0]["expected"][:1]
    manifest_path.write_text(json.dumps(doc))
    (result,) = run_corpus(tmp_path)
    assert not result.passed
    assert any("unexpected violations" in m for m in result.mismatches)


def test_harness_flags_wrong_status(tmp_path):
    for suffix in (".eml", ".manifest.json"):
        shutil.copy(CORPUS_DIR / f"ok_minimal{suffix}",
                    tmp_path / f"ok_minimal{suffix}")
    manifest_path = tmp_path / "ok_minimal.manifest.json"
    doc = json.loads(manifest_path.read_text())
    doc["ecalls"][0]["status"] = "flagged"
    manifest_path.write_text(json.dumps(doc))
    (result,) = run_corpus(tmp_path)
    assert not result.passed
    assert any("status expected" in m for m in result.mismatches)


def test_manifest_files_load_and_match_samples():
    for path in sorted(CORPUS_DIR.glob("*.manifest.json")):
        manifest = load_manifest(path)
        assert manifest.sample == path.name.removesuffix(".manifest.json")
        assert (CORPUS_DIR / f"{manifest.sample}.eml").exists()
        assert manifest.max_wall_time_ms > 0


def test_concrete_violations_replay_against_the_policy_table():
    # For findings with concrete addresses, replaying the access against the
    # address classifier and the policy table must flag the same breach.
    from emlcheck.isa import AddressRegion, classify_address
    from emlcheck.machine import AccessKind
    from emlcheck.orderliness import PolicyTable

    kind_to_access = {
        ViolationKind.OUT_OF_ENCLAVE_READ: AccessKind.READ,
        ViolationKind.OUT_OF_ENCLAVE_WRITE: AccessKind.WRITE,
        ViolationKind.OUT_OF_ENCLAVE_JUMP: AccessKind.JUMP,
    }
    policy = PolicyTable()
    checked = 0
    for name in ("vuln_null_passthrough.eml", "vuln_untrusted_jump.eml"):
        image, _ = assemble((CORPUS_DIR / name).read_text())
        ann = derive_annotations(image).annotations
        report = analyze_enclave(image, ann, AnalysisConfig())
        for ecall in report.ecalls:
            for violation in ecall.violations:
                access = kind_to_access[violation.kind]
                address = int(violation.detail, 16)
                region = classify_address(image.layout, address)
                assert region is AddressRegion.UNTRUSTED
                assert not policy.allows(violation.phase, access)
                checked += 1
    assert checked == 2


def test_corpus_findings_are_all_feasible():
    # Samples are built inside the decidable fragment, so no finding should
    # carry unknown feasibility.
    for path in sorted(CORPUS_DIR.glob("vuln_*.eml")):
        image, _ = assemble(path.read_text())
        ann = derive_annotations(image).annotations
        report = analyze_enclave(image, ann, AnalysisConfig())
        for ecall in report.ecalls:
            for violation in ecall.violations:
                assert violation.feasibility == "sat", (path.name, violation)
