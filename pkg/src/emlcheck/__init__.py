"""emlcheck: symbolic validation of enclave machine language programs.

Assembles a small enclave ISA, symbolically executes every attacker-facing
call-in, and checks phase discipline, register sanitisation and per-phase
untrusted-memory access policies, reporting violations with trace context.
"""

from .version import __version__
from .isa import (
    AddressRegion, EnclaveImage, EnclaveLayout, FlagId, Instruction, Register,
    TransitionAnnotations, classify_address, instruction_address, validate_image,
)
from .asm import ParseDiagnostic, assemble, parse_image, serialize_image
from .expr import Const, Sym, eval_expr, render, simplify
from .solver import (
    NOT_UNIQUE, SatResult, UNKNOWN_VALUE, is_satisfiable, may_hold, unique_value,
)
from .machine import (
    AccessEvent, AccessKind, HookSet, MachineState, Status, SymbolAllocator,
    fresh_symbol, step,
)
from .orderliness import (
    AnalysisConfig, EcallReport, EnclaveReport, Phase, PhaseState, PolicyTable,
    Violation, ViolationKind, analyze_ecall, analyze_enclave, check_access,
    entry_sanitisation_check, exit_sanitisation_check, hook_transition,
)
from .heuristics import AnnotationDerivation, derive_annotations
from .report import parse_report, render_text, serialize_report
from .corpus import CorpusManifest, run_corpus, run_sample

__all__ = [
    "__version__",
    "AddressRegion", "EnclaveImage", "EnclaveLayout", "FlagId", "Instruction",
    "Register", "TransitionAnnotations", "classify_address",
    "instruction_address", "validate_image",
    "ParseDiagnostic", "assemble", "parse_image", "serialize_image",
    "Const", "Sym", "eval_expr", "render", "simplify",
    "NOT_UNIQUE", "SatResult", "UNKNOWN_VALUE", "is_satisfiable", "may_hold",
    "unique_value",
    "AccessEvent", "AccessKind", "HookSet", "MachineState", "Status",
    "SymbolAllocator", "fresh_symbol", "step",
    "AnalysisConfig", "EcallReport", "EnclaveReport", "Phase", "PhaseState",
    "PolicyTable", "Violation", "ViolationKind", "analyze_ecall",
    "analyze_enclave", "check_access", "entry_sanitisation_check",
    "exit_sanitisation_check", "hook_transition",
    "AnnotationDerivation", "derive_annotations",
    "parse_report", "render_text", "serialize_report",
    "CorpusManifest", "run_corpus", "run_sample",
]
