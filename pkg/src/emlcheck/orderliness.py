"""Phase discipline for enclave executions.

Execution is split into entry, secure, ocall and exit phases. Hooks attached
to annotated addresses drive the phase machine and run the register
sanitisation predicates; every untrusted-memory access is judged against the
per-phase policy table. Breaches are recorded as Violations, the path that
produced them is pruned, and per-call analyses aggregate everything into
reports with clean / flagged / timeout / stopped statuses.

The phase rules: execution starts at the entry address in phase entry. The
sanitisation-done address must be reached (in phase entry) before any secure
region begins. Secure regions are entered from entry or from a finished
ocall, ocalls only start from secure, and the exit address is legal only
from entry (early bail-out) or from exit (after a secure region ended). The
entry predicate demands RDX and R8-R15 zeroed, RSP/RBP on the trusted stack
and the AC/DF flags clear; the exit predicate demands RCX, RDX and R8-R15
zeroed and RSP/RBP pointing outside the enclave. A predicate clause is
flagged when any assignment consistent with the path allows it to fail.
"""

from __future__ import annotations

import enum
import time
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .expr import Const, FALSE, TRUE, const64, eq, ite, not_, render, simplify, ult
from .isa import (
    EnclaveImage, EnclaveLayout, FlagId, Register, TransitionAnnotations,
    validate_annotations, validate_image,
)
from .machine import (
    AccessEvent, AccessKind, Disposition, DispositionKind, HookSet,
    MachineState, PRUNE, Status, SymbolAllocator, TRUSTED, UNTRUSTED_ACCESS,
    fresh_symbol, step,
)
from .solver import (
    NOT_UNIQUE, SatResult, UNKNOWN_VALUE, may_hold_result, unique_value,
)


class Phase(enum.Enum):
    ENTRY = "entry"
    SECURE = "secure"
    OCALL = "ocall"
    EXIT = "exit"
    TERMINATED = "terminated"


@dataclass
class PhaseState:
    """Per-path phase variable plus the sanitisation-done flag (monotone)."""

    phase: Phase = Phase.ENTRY
    entry_sanitisation_done: bool = False
    history: list = field(default_factory=lambda: ["entry"])

    def copy(self) -> "PhaseState":
        return PhaseState(self.phase, self.entry_sanitisation_done, list(self.history))

    def move(self, phase: Phase):
        self.phase = phase
        self.history.append(phase.value)


class PolicyTable:
    """Untrusted-memory rights per phase. Fixed contents; jumps never allowed."""

    _RIGHTS = {
        Phase.ENTRY: (True, False),
        Phase.SECURE: (False, False),
        Phase.OCALL: (True, True),
        Phase.EXIT: (False, True),
        Phase.TERMINATED: (False, False),
    }

    def allows(self, phase: Phase, kind: AccessKind) -> bool:
        read_ok, write_ok = self._RIGHTS[phase]
        if kind is AccessKind.READ:
            return read_ok
        if kind is AccessKind.WRITE:
            return write_ok
        return False


class ViolationKind(enum.Enum):
    TRANSITION = "TransitionViolation"
    ENTRY_SANITISATION = "EntrySanitisationViolation"
    EXIT_SANITISATION = "ExitSanitisationViolation"
    OUT_OF_ENCLAVE_READ = "OutOfEnclaveRead"
    OUT_OF_ENCLAVE_WRITE = "OutOfEnclaveWrite"
    OUT_OF_ENCLAVE_JUMP = "OutOfEnclaveJump"
    SYMBOLIC_READ = "SymbolicRead"
    SYMBOLIC_WRITE = "SymbolicWrite"
    SYMBOLIC_JUMP = "SymbolicJump"


_OUT_OF_ENCLAVE = {
    AccessKind.READ: ViolationKind.OUT_OF_ENCLAVE_READ,
    AccessKind.WRITE: ViolationKind.OUT_OF_ENCLAVE_WRITE,
    AccessKind.JUMP: ViolationKind.OUT_OF_ENCLAVE_JUMP,
}
_SYMBOLIC = {
    AccessKind.READ: ViolationKind.SYMBOLIC_READ,
    AccessKind.WRITE: ViolationKind.SYMBOLIC_WRITE,
    AccessKind.JUMP: ViolationKind.SYMBOLIC_JUMP,
}


@dataclass
class Violation:
    kind: ViolationKind
    rip: int
    phase: Phase
    detail: str
    feasibility: str  # "sat" or "unknown"
    trace: list
    ecall_index: int = 0

    def signature(self):
        return (self.kind, self.rip, self.detail)


@dataclass
class AnalysisConfig:
    """Exploration limits. stack_size/heap_size override the image layout."""

    stack_size: Optional[int] = None
    heap_size: Optional[int] = None
    max_active_branches: int = 100
    max_violations: int = 20
    time_budget: float = 1200.0
    step_budget_per_path: int = 4096

    def validate(self) -> list[str]:
        errors = []
        for name in ("stack_size", "heap_size"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                errors.append(f"not positive: {name}")
        for name in ("max_active_branches", "max_violations",
                     "time_budget", "step_budget_per_path"):
            if getattr(self, name) <= 0:
                errors.append(f"not positive: {name}")
        return errors


@dataclass
class EcallReport:
    ecall_index: int
    status: str  # clean | flagged | timeout | stopped
    violations: list
    paths_explored: int
    paths_truncated: int
    wall_time: float


@dataclass
class EnclaveReport:
    tool_version: str
    image_digest: str
    config: AnalysisConfig
    ecalls: list
    totals: dict


def _feasibility(state: MachineState, trigger: Optional[SatResult]) -> str:
    ok = state.pc_known_sat and (trigger is None or trigger is SatResult.SAT)
    return "sat" if ok else "unknown"


def _violation(state: MachineState, kind: ViolationKind, detail: str,
               trigger: Optional[SatResult] = None) -> Violation:
    phase = state.phase_state.phase if state.phase_state else Phase.ENTRY
    return Violation(kind=kind, rip=state.rip, phase=phase, detail=detail,
                     feasibility=_feasibility(state, trigger),
                     trace=list(state.trace))


def _outside_range_cond(value, lo: int, hi_incl: int):
    # value < lo or value > hi
    return ite(ult(value, const64(lo)), TRUE, ult(const64(hi_incl), value))


def _inside_enclave_cond(value, layout: EnclaveLayout):
    # base <= value < end
    return ite(ult(value, const64(layout.base)), FALSE, ult(value, const64(layout.end)))


_ENTRY_ZERO_REGS = (Register.RDX, Register.R8, Register.R9, Register.R10,
                    Register.R11, Register.R12, Register.R13, Register.R14,
                    Register.R15)
_EXIT_ZERO_REGS = (Register.RCX, Register.RDX, Register.R8, Register.R9,
                   Register.R10, Register.R11, Register.R12, Register.R13,
                   Register.R14, Register.R15)


def entry_sanitisation_check(state: MachineState, layout: EnclaveLayout) -> list:
    """Clauses that may fail at the sanitisation-done point.

    Argument registers (RAX, RBX, RCX, RDI, RSI) are deliberately
    unconstrained: they carry the call index and marshalling pointers.
    """
    violations = []
    pc = state.pc
    for reg in _ENTRY_ZERO_REGS:
        cond = not_(eq(state.regs[reg], const64(0)))
        res = may_hold_result(pc, cond)
        if res is not SatResult.UNSAT:
            violations.append(_violation(
                state, ViolationKind.ENTRY_SANITISATION, f"register {reg.name}", res))
    lo, hi = layout.stack_low, layout.stack_top
    for reg in (Register.RSP, Register.RBP):
        cond = _outside_range_cond(state.regs[reg], lo, hi)
        res = may_hold_result(pc, cond)
        if res is not SatResult.UNSAT:
            violations.append(_violation(
                state, ViolationKind.ENTRY_SANITISATION, f"register {reg.name}", res))
    for flag in (FlagId.AC, FlagId.DF):
        cond = not_(eq(state.flags[flag], FALSE))
        res = may_hold_result(pc, cond)
        if res is not SatResult.UNSAT:
            violations.append(_violation(
                state, ViolationKind.ENTRY_SANITISATION, f"flag {flag.name}", res))
    return violations


def exit_sanitisation_check(state: MachineState, layout: EnclaveLayout) -> list:
    """Clauses that may fail at the exit address."""
    violations = []
    pc = state.pc
    for reg in _EXIT_ZERO_REGS:
        cond = not_(eq(state.regs[reg], const64(0)))
        res = may_hold_result(pc, cond)
        if res is not SatResult.UNSAT:
            violations.append(_violation(
                state, ViolationKind.EXIT_SANITISATION, f"register {reg.name}", res))
    for reg in (Register.RSP, Register.RBP):
        cond = _inside_enclave_cond(state.regs[reg], layout)
        res = may_hold_result(pc, cond)
        if res is not SatResult.UNSAT:
            violations.append(_violation(
                state, ViolationKind.EXIT_SANITISATION, f"register {reg.name}", res))
    return violations


def hook_transition(state: MachineState, annotations: TransitionAnnotations,
                    layout: EnclaveLayout) -> list:
    """Run the phase-transition hook for state.rip, mutating the phase state.

    Returns the recorded violations; on a violating transition the state is
    pruned. The sanitisation-done hook sets the flag even when its predicate
    fails, so downstream policy breaches are still observable.
    """
    ps: PhaseState = state.phase_state
    rip = state.rip
    violations = []

    if rip == annotations.entry_sanitisation_done:
        if ps.phase is not Phase.ENTRY:
            violations.append(_violation(
                state, ViolationKind.TRANSITION,
                "sanitisation point reached outside entry"))
            state.prune("transition violation")
            return violations
        violations.extend(entry_sanitisation_check(state, layout))
        ps.entry_sanitisation_done = True
        ps.history.append("sanitised-done")
        return violations

    secure_begins = {pair[0] for pair in annotations.secure}
    ocall_ends = {pair[1] for pair in annotations.ocall}
    if rip in secure_begins or rip in ocall_ends:
        if ps.phase not in (Phase.ENTRY, Phase.OCALL):
            violations.append(_violation(
                state, ViolationKind.TRANSITION,
                f"secure entered from {ps.phase.value}"))
            state.prune("transition violation")
        elif not ps.entry_sanitisation_done:
            violations.append(_violation(
                state, ViolationKind.TRANSITION,
                "secure entered before sanitisation done"))
            state.prune("transition violation")
        else:
            ps.move(Phase.SECURE)
        return violations

    ocall_begins = {pair[0] for pair in annotations.ocall}
    if rip in ocall_begins:
        if ps.phase is not Phase.SECURE:
            violations.append(_violation(
                state, ViolationKind.TRANSITION, "ocall started outside secure"))
            state.prune("transition violation")
        else:
            ps.move(Phase.OCALL)
        return violations

    secure_ends = {pair[1] for pair in annotations.secure}
    if rip in secure_ends:
        if ps.phase is not Phase.SECURE:
            violations.append(_violation(
                state, ViolationKind.TRANSITION, "secure end reached outside secure"))
            state.prune("transition violation")
        else:
            ps.move(Phase.EXIT)
        return violations

    if rip == annotations.exit_address:
        if ps.phase not in (Phase.ENTRY, Phase.EXIT):
            detail = ("ocall may only return to secure" if ps.phase is Phase.OCALL
                      else "exit reached before secure end")
            violations.append(_violation(state, ViolationKind.TRANSITION, detail))
            state.prune("transition violation")
            return violations
        violations.extend(exit_sanitisation_check(state, layout))
        ps.move(Phase.TERMINATED)
        state.terminate("exit point")
        return violations

    return violations


def check_access(state: MachineState, event: AccessEvent, layout: EnclaveLayout,
                 policy: PolicyTable):
    """Judge one memory access; returns (Disposition, violations).

    Rule order: a symbolic address that may fall inside the enclave is a
    memory-corruption witness regardless of phase; otherwise an access that
    may leave the enclave is checked against the phase policy (jumps are
    never allowed, the exit instruction is the only sanctioned way out);
    addresses that must be outside become adversarial accesses (reads give
    fresh symbols, writes are logged); unique inside addresses hit the
    trusted store.
    """
    phase = state.phase_state.phase if state.phase_state else Phase.ENTRY
    addr = simplify(event.address)
    kind = event.kind

    if isinstance(addr, Const):
        inside = layout.contains(addr.value)
        if not inside:
            if kind is AccessKind.JUMP or not policy.allows(phase, kind):
                v = _violation(state, _OUT_OF_ENCLAVE[kind], f"0x{addr.value:x}")
                return PRUNE, [v]
            return UNTRUSTED_ACCESS, []
        return TRUSTED(addr.value), []

    pc = state.pc
    u = unique_value(pc, addr)
    inside_cond = _inside_enclave_cond(addr, layout)
    res_in = may_hold_result(pc, inside_cond)
    res_out = may_hold_result(pc, not_(inside_cond))
    may_in = res_in is not SatResult.UNSAT
    may_out = res_out is not SatResult.UNSAT

    if u in (NOT_UNIQUE, UNKNOWN_VALUE) and may_in:
        v = _violation(state, _SYMBOLIC[kind], render(addr), res_in)
        return PRUNE, [v]
    if may_out and (kind is AccessKind.JUMP or not policy.allows(phase, kind)):
        detail = f"0x{u:x}" if isinstance(u, int) else render(addr)
        v = _violation(state, _OUT_OF_ENCLAVE[kind], detail, res_out)
        return PRUNE, [v]
    if not may_in:
        return UNTRUSTED_ACCESS, []
    if isinstance(u, int):
        return TRUSTED(u), []
    # Unreachable when the address analysis is consistent; bail out safely.
    state.diagnostic("undecidable access address")
    return PRUNE, []


class _EcallContext:
    """Violation recorder with deduplication and the violation cap."""

    def __init__(self, config: AnalysisConfig, ecall_index: int):
        self.config = config
        self.ecall_index = ecall_index
        self.violations = []
        self._seen = set()
        self.cap_hit = False

    def record(self, violation: Violation):
        if self.cap_hit:
            return
        violation.ecall_index = self.ecall_index
        sig = violation.signature()
        if sig in self._seen:
            return
        self._seen.add(sig)
        self.violations.append(violation)
        if len(self.violations) >= self.config.max_violations:
            self.cap_hit = True


class OrderlinessHooks(HookSet):
    """HookSet that enforces the phase machine and access policies."""

    def __init__(self, layout: EnclaveLayout, annotations: TransitionAnnotations,
                 ctx: _EcallContext, policy: Optional[PolicyTable] = None):
        super().__init__(layout)
        self.annotations = annotations
        self.ctx = ctx
        self.policy = policy or PolicyTable()
        self._hooked = set(annotations.all_addresses()) - {annotations.entry_address}

    def before_instruction(self, state: MachineState) -> None:
        if state.rip in self._hooked:
            for v in hook_transition(state, self.annotations, self.layout):
                self.ctx.record(v)

    def check_access(self, state: MachineState, event: AccessEvent) -> Disposition:
        disp, violations = check_access(state, event, self.layout, self.policy)
        for v in violations:
            self.ctx.record(v)
        if disp.kind is DispositionKind.PRUNE and state.status is Status.ALIVE:
            if violations:
                state.prune("access violation")
        return disp

    def on_ocall(self, state: MachineState) -> bool:
        if state.phase_state.phase is not Phase.OCALL:
            self.ctx.record(_violation(
                state, ViolationKind.TRANSITION, "ocall instruction outside ocall phase"))
            state.prune("transition violation")
            return False
        return True

    def on_eexit(self, state: MachineState) -> bool:
        # Orderly exits end at the annotated exit address before this
        # instruction runs; any eexit actually executed is unsanctioned.
        self.ctx.record(_violation(
            state, ViolationKind.TRANSITION, "eexit outside exit address"))
        state.prune("transition violation")
        return False


def _overridden_image(image: EnclaveImage, config: AnalysisConfig) -> EnclaveImage:
    layout = image.layout
    if config.stack_size is not None:
        layout = replace(layout, stack_size=config.stack_size)
    if config.heap_size is not None:
        layout = replace(layout, heap_size=config.heap_size)
    if layout is image.layout:
        return image
    return replace(image, layout=layout)


def build_initial_state(image: EnclaveImage, annotations: TransitionAnnotations,
                        ecall_index: int, alloc: SymbolAllocator) -> MachineState:
    """Adversarial entry state: every register and flag the host controls is
    a fresh symbol; only the call index register is pinned."""
    state = MachineState(rip=annotations.entry_address, regs={}, flags={},
                         trusted_store={}, alloc=alloc)
    state.phase_state = PhaseState()
    for reg in Register:
        if reg is Register.RDI:
            state.regs[reg] = const64(ecall_index)
        else:
            state.regs[reg] = fresh_symbol(64, f"reg_{reg.name.lower()}", state)
    for flag in FlagId:
        state.flags[flag] = fresh_symbol(1, f"flag_{flag.name.lower()}", state)
    base = image.layout.base
    for offset, words in image.data:
        for i, w in enumerate(words):
            state.trusted_store[base + offset + 8 * i] = const64(w)
    return state


def analyze_ecall(image: EnclaveImage, annotations: TransitionAnnotations,
                  config: AnalysisConfig, ecall_index: int,
                  observer: Optional[Callable[[int], None]] = None,
                  path_sink: Optional[Callable[[MachineState], None]] = None) -> EcallReport:
    """Explore one call-in under the given annotations and limits.

    Exploration is round-robin over the active states (each state advances
    one instruction per turn, forked children join the back of the queue in
    fall-through, taken order), so reports are reproducible. paths_explored
    counts paths that ended for any reason; paths_truncated counts the subset
    cut off by the per-path step budget or an engine diagnostic. Analyses
    share no mutable state (the symbol allocator is per-call), so distinct
    calls may run concurrently.
    """
    errors = config.validate()
    if errors:
        raise ValueError("; ".join(errors))
    image = _overridden_image(image, config)
    errors = validate_image(image)
    if errors:
        raise ValueError("; ".join(errors))
    errors = validate_annotations(annotations, image.layout, len(image.code))
    if errors:
        raise ValueError("; ".join(errors))
    if not annotations.secure:
        raise ValueError("no ecalls annotated")
    if not 0 <= ecall_index < len(annotations.secure):
        raise ValueError(f"invalid ecall index: {ecall_index}")

    ctx = _EcallContext(config, ecall_index)
    hooks = OrderlinessHooks(image.layout, annotations, ctx)
    alloc = SymbolAllocator()
    queue = deque([build_initial_state(image, annotations, ecall_index, alloc)])

    started = time.monotonic()
    timed_out = False
    cap_fired = False
    explored = 0
    truncated = 0

    def finish(st: MachineState):
        nonlocal explored, truncated
        explored += 1
        if st.status in (Status.TRUNCATED, Status.DIAGNOSTIC):
            truncated += 1
        if path_sink is not None:
            path_sink(st)

    while queue:
        if observer is not None:
            observer(len(queue))
        if time.monotonic() - started >= config.time_budget:
            timed_out = True
            break
        state = queue.popleft()
        if state.step_count >= config.step_budget_per_path:
            state.status = Status.TRUNCATED
            state.end_reason = "step budget exhausted"
            finish(state)
            continue
        successors = step(state, image, hooks)
        if not successors:
            finish(state)
        else:
            if len(queue) + len(successors) > config.max_active_branches:
                cap_fired = True
                break
            queue.extend(successors)
        if ctx.cap_hit:
            cap_fired = True
            break

    wall = time.monotonic() - started
    if timed_out:
        status = "timeout"
    elif cap_fired:
        status = "stopped"
    elif ctx.violations:
        status = "flagged"
    else:
        status = "clean"
    return EcallReport(ecall_index=ecall_index, status=status,
                       violations=ctx.violations, paths_explored=explored,
                       paths_truncated=truncated, wall_time=wall)


def analyze_enclave(image: EnclaveImage, annotations: TransitionAnnotations,
                    config: AnalysisConfig,
                    observer: Optional[Callable[[int], None]] = None,
                    path_sink: Optional[Callable[[MachineState], None]] = None,
                    indices: Optional[list] = None) -> EnclaveReport:
    """Run analyze_ecall for every annotated call-in (or a chosen subset)."""
    from .asm import serialize_image
    from .report import image_digest
    from .version import __version__

    if not annotations.secure:
        raise ValueError("no ecalls annotated")
    if indices is None:
        indices = list(range(len(annotations.secure)))
    reports = [analyze_ecall(image, annotations, config, i,
                             observer=observer, path_sink=path_sink)
               for i in indices]
    totals = {
        "ecalls": len(reports),
        "clean": sum(1 for r in reports if r.status == "clean"),
        "flagged": sum(1 for r in reports if r.status == "flagged"),
        "timeout": sum(1 for r in reports if r.status == "timeout"),
        "stopped": sum(1 for r in reports if r.status == "stopped"),
    }
    return EnclaveReport(tool_version=__version__,
                         image_digest=image_digest(serialize_image(image)),
                         config=config, ecalls=reports, totals=totals)
