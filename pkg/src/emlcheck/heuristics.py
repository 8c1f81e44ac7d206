"""Annotation recovery from an image's symbol table.

Convention-driven: `enclave_entry`, `sanitised` and `eexit_point` name the
entry, sanitisation-done and exit addresses; every call site of an
`ecall_<name>` symbol opens a secure region there, with the return address
(call site + 4) closing it, and `ocall_<name>` call sites likewise delimit
ocall regions. Images that already carry explicit annotations are returned
unchanged. Stripped images are out of reach for this heuristic by design.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .isa import (
    INSTRUCTION_SIZE, EnclaveImage, TransitionAnnotations, validate_annotations,
)

ENTRY_SYMBOL = "enclave_entry"
SANITISED_SYMBOL = "sanitised"
EXIT_SYMBOL = "eexit_point"
ECALL_PREFIX = "ecall_"
OCALL_PREFIX = "ocall_"


@dataclass
class AnnotationDerivation:
    annotations: Optional[TransitionAnnotations]
    diagnostics: list

    @property
    def ok(self) -> bool:
        return self.annotations is not None


def _call_sites(image: EnclaveImage, target: int) -> list:
    layout = image.layout
    return [layout.code_start + INSTRUCTION_SIZE * i
            for i, instr in enumerate(image.code)
            if instr.op == "CALL" and instr.args[0] == target]


def derive_annotations(image: EnclaveImage) -> AnnotationDerivation:
    """Derive phase annotations, or explain why that is impossible."""
    if image.annotations is not None:
        return AnnotationDerivation(
            image.annotations,
            ["note: explicit annotations present; heuristic skipped"])

    diagnostics = []
    symbols = image.symbols
    required = (
        (ENTRY_SYMBOL, "no entry symbol"),
        (SANITISED_SYMBOL, "no sanitisation-done symbol"),
        (EXIT_SYMBOL, "no exit symbol"),
    )
    failed = False
    for name, message in required:
        if name not in symbols:
            diagnostics.append(f"error: {message}")
            failed = True

    secure, ocall = [], []
    for name in sorted(symbols):
        if name.startswith(ECALL_PREFIX):
            sites = _call_sites(image, symbols[name])
            if not sites:
                diagnostics.append(f"warning: ecall symbol with no call sites: {name}")
            secure.extend((s, s + INSTRUCTION_SIZE) for s in sites)
        elif name.startswith(OCALL_PREFIX):
            sites = _call_sites(image, symbols[name])
            if not sites:
                diagnostics.append(f"warning: ocall symbol with no call sites: {name}")
            ocall.extend((s, s + INSTRUCTION_SIZE) for s in sites)
    if failed:
        return AnnotationDerivation(None, diagnostics)

    annotations = TransitionAnnotations(
        entry_address=symbols[ENTRY_SYMBOL],
        entry_sanitisation_done=symbols[SANITISED_SYMBOL],
        secure=tuple(sorted(secure)),
        ocall=tuple(sorted(ocall)),
        exit_address=symbols[EXIT_SYMBOL])
    errors = validate_annotations(annotations, image.layout, len(image.code))
    if errors:
        diagnostics.extend(f"error: {e}" for e in errors)
        return AnnotationDerivation(None, diagnostics)
    return AnnotationDerivation(annotations, diagnostics)
