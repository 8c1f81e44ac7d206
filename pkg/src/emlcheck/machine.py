"""Symbolic execution core: machine states, access events, the stepper.

One MachineState is one exploration path: a register file and flags holding
bitvector terms, a trusted word store, the path condition, and bookkeeping.
Stepping executes exactly one instruction; a conditional branch on an
unresolved condition forks the state into (fall-through, taken) children.

Policy decisions about memory accesses are delegated to a HookSet. The
default HookSet has no phase machinery: concrete untrusted reads yield fresh
symbols, untrusted writes are logged, and symbolic or outward jumps end the
path quietly. The orderliness analyzer installs a HookSet that enforces the
phase transition rules and access policies and records violations.

Determinism contract: fresh symbols are numbered in step order from a
per-analysis allocator. Analyses create register symbols in declaration
order (skipping the call-index register, which is concrete) and then the six
flags, so symbol serials, and every value derived from them, are reproducible
run to run.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from . import expr
from .expr import (
    Const, Sym, add, and_, bit, const64, eq, lshr, not_, or_, shl, slt, sub,
    ult, xor,
)
from .isa import (
    INSTRUCTION_SIZE, WORD_SIZE, AddressRegion, EnclaveImage, FlagId,
    Instruction, Register, address_to_index, classify_address,
)
from .solver import SatResult, is_satisfiable

TRACE_LIMIT = 64


class SymbolAllocator:
    """Per-analysis source of strictly increasing symbol serials."""

    def __init__(self):
        self._next = 0

    def fresh(self, width: int, tag: str) -> Sym:
        s = Sym(width, tag, self._next)
        self._next += 1
        return s


def fresh_symbol(width: int, tag: str, state: "MachineState") -> Sym:
    """Allocate a fresh symbol; untrusted fetches also bump the fetch counter."""
    if width not in (1, 64):
        raise ValueError(f"bad symbol width: {width}")
    if tag == "untrusted_fetch":
        state.fetch_counter += 1
    return state.alloc.fresh(width, tag)


class AccessKind(enum.Enum):
    READ = "Read"
    WRITE = "Write"
    JUMP = "Jump"


@dataclass
class AccessEvent:
    kind: AccessKind
    address: object
    value: Optional[object]
    rip: int


class DispositionKind(enum.Enum):
    TRUSTED = "trusted"
    UNTRUSTED = "untrusted"
    PRUNE = "prune"


@dataclass(frozen=True)
class Disposition:
    kind: DispositionKind
    addr: Optional[int] = None


TRUSTED = lambda a: Disposition(DispositionKind.TRUSTED, a)
UNTRUSTED_ACCESS = Disposition(DispositionKind.UNTRUSTED)
PRUNE = Disposition(DispositionKind.PRUNE)


class Status(enum.Enum):
    ALIVE = "alive"
    TERMINATED = "terminated"  # reached the sanctioned end of execution
    PRUNED = "pruned"          # stopped after a recorded violation
    TRUNCATED = "truncated"    # step budget exhausted
    DIAGNOSTIC = "diagnostic"  # engine-level dead end (bad jump target etc.)


@dataclass
class MachineState:
    rip: int
    regs: dict
    flags: dict
    trusted_store: dict
    alloc: SymbolAllocator
    pc: list = field(default_factory=list)
    untrusted_write_log: list = field(default_factory=list)
    fetch_counter: int = 0
    phase_state: object = None
    step_count: int = 0
    trace: deque = field(default_factory=lambda: deque(maxlen=TRACE_LIMIT))
    status: Status = Status.ALIVE
    end_reason: Optional[str] = None
    pc_known_sat: bool = True
    last_cmp: Optional[tuple] = None

    def fork(self) -> "MachineState":
        return MachineState(
            rip=self.rip,
            regs=dict(self.regs),
            flags=dict(self.flags),
            trusted_store=dict(self.trusted_store),
            alloc=self.alloc,
            pc=list(self.pc),
            untrusted_write_log=list(self.untrusted_write_log),
            fetch_counter=self.fetch_counter,
            phase_state=self.phase_state.copy() if self.phase_state is not None else None,
            step_count=self.step_count,
            trace=deque(self.trace, maxlen=TRACE_LIMIT),
            status=self.status,
            end_reason=self.end_reason,
            pc_known_sat=self.pc_known_sat,
            last_cmp=self.last_cmp,
        )

    def diagnostic(self, reason: str):
        self.status = Status.DIAGNOSTIC
        self.end_reason = reason

    def prune(self, reason: str):
        self.status = Status.PRUNED
        self.end_reason = reason

    def terminate(self, reason: str):
        self.status = Status.TERMINATED
        self.end_reason = reason


class HookSet:
    """Engine extension points; the base class imposes no policies."""

    def __init__(self, layout):
        self.layout = layout

    def before_instruction(self, state: MachineState) -> None:
        """Runs before the instruction at state.rip; may end the path."""

    def check_access(self, state: MachineState, event: AccessEvent) -> Disposition:
        addr = expr.simplify(event.address)
        if isinstance(addr, Const):
            if self.layout.contains(addr.value):
                return TRUSTED(addr.value)
            if event.kind is AccessKind.JUMP:
                state.diagnostic("jump leaves the enclave")
                return PRUNE
            return UNTRUSTED_ACCESS
        # Without policies there is nothing useful to do with a symbolic
        # address: treat it as a dead end.
        state.diagnostic("symbolic address without an access policy")
        return PRUNE

    def on_ocall(self, state: MachineState) -> bool:
        return True

    def on_eexit(self, state: MachineState) -> bool:
        return True


def initial_flag_exprs(state: MachineState) -> None:
    for f in FlagId:
        state.flags[f] = fresh_symbol(1, f"flag_{f.name.lower()}", state)


def _mem_read(state: MachineState, addr_expr, image: EnclaveImage, hooks: HookSet):
    event = AccessEvent(AccessKind.READ, addr_expr, None, state.rip)
    disp = hooks.check_access(state, event)
    if disp.kind is DispositionKind.PRUNE:
        return None
    if disp.kind is DispositionKind.UNTRUSTED:
        return fresh_symbol(64, "untrusted_fetch", state)
    a = disp.addr
    if a % WORD_SIZE != 0:
        state.diagnostic(f"misaligned trusted read at 0x{a:x}")
        return None
    if classify_address(image.layout, a) is AddressRegion.TRUSTED_CODE:
        state.diagnostic(f"data read from code region at 0x{a:x}")
        return None
    # Unwritten trusted words read as zero (freshly added pages are zeroed).
    return state.trusted_store.get(a, const64(0))


def _mem_write(state: MachineState, addr_expr, value, image: EnclaveImage,
               hooks: HookSet) -> bool:
    event = AccessEvent(AccessKind.WRITE, addr_expr, value, state.rip)
    disp = hooks.check_access(state, event)
    if disp.kind is DispositionKind.PRUNE:
        return False
    if disp.kind is DispositionKind.UNTRUSTED:
        # Logged only: the adversary owns that memory, so the stored value
        # carries no guarantee and later reads stay fresh.
        phase = getattr(state.phase_state, "phase", None)
        state.untrusted_write_log.append((phase, addr_expr, value, state.rip))
        return True
    a = disp.addr
    if a % WORD_SIZE != 0:
        state.diagnostic(f"misaligned trusted write at 0x{a:x}")
        return False
    if classify_address(image.layout, a) is AddressRegion.TRUSTED_CODE:
        state.diagnostic(f"write into code region at 0x{a:x}")
        return False
    state.trusted_store[a] = value
    return True


def _jump(state: MachineState, target_expr, image: EnclaveImage, hooks: HookSet) -> None:
    event = AccessEvent(AccessKind.JUMP, target_expr, None, state.rip)
    disp = hooks.check_access(state, event)
    if disp.kind is DispositionKind.PRUNE:
        return
    if disp.kind is DispositionKind.UNTRUSTED:
        state.diagnostic("jump leaves the enclave")
        return
    target = disp.addr
    if address_to_index(image.layout, target, len(image.code)) is None:
        state.diagnostic(f"jump to a non-instruction address 0x{target:x}")
        return
    state.rip = target


def _direct_target(state: MachineState, target: int, image: EnclaveImage) -> bool:
    if address_to_index(image.layout, target, len(image.code)) is None:
        state.diagnostic(f"jump to a non-instruction address 0x{target:x}")
        return False
    return True


_ALU = {
    "ADD": add, "SUB": sub, "AND": and_, "OR": or_, "XOR": xor,
    "SHL": shl, "SHR": lshr,
}


def cmp_flags(a, b) -> dict:
    """Comparison flags of a - b under two's-complement semantics."""
    d = sub(a, b)
    return {
        FlagId.ZF: eq(a, b),
        FlagId.CF: ult(a, b),
        FlagId.SF: slt(d, const64(0)),
        # Signed overflow: operands of different sign whose difference
        # disagrees in sign with the minuend.
        FlagId.OF: slt(and_(xor(a, b), xor(a, d)), const64(0)),
    }


def _branch_condition(state: MachineState, cc: str):
    f = state.flags
    if cc == "EQ":
        return f[FlagId.ZF]
    if cc == "NE":
        return not_(f[FlagId.ZF])
    if cc == "ULT":
        return f[FlagId.CF]
    if cc == "UGE":
        return not_(f[FlagId.CF])
    # Signed conditions are SF!=OF / SF==OF. When the flags come from a
    # comparison we still know its operands, so emit the equivalent direct
    # predicate, which the solver can decide for affine operands.
    if state.last_cmp is not None:
        a, b = state.last_cmp
        c = slt(a, b)
        return c if cc == "SLT" else not_(c)
    c = eq(f[FlagId.SF], f[FlagId.OF])
    return not_(c) if cc == "SLT" else c


def _take_branch(state: MachineState, cond, target: int, image: EnclaveImage):
    c = expr.simplify(cond)
    if not _direct_target(state, target, image):
        return []
    if isinstance(c, Const):
        if c.value:
            state.rip = target
        else:
            state.rip += INSTRUCTION_SIZE
        return [state]
    taken_res = is_satisfiable(state.pc + [c])
    fall_res = is_satisfiable(state.pc + [not_(c)])
    if taken_res is SatResult.UNSAT and fall_res is SatResult.UNSAT:
        state.prune("infeasible path condition")
        return []
    if taken_res is SatResult.UNSAT:
        state.rip += INSTRUCTION_SIZE
        return [state]
    if fall_res is SatResult.UNSAT:
        state.rip = target
        return [state]
    taken = state.fork()
    state.pc.append(not_(c))
    state.pc_known_sat = state.pc_known_sat and fall_res is SatResult.SAT
    state.rip += INSTRUCTION_SIZE
    taken.pc.append(c)
    taken.pc_known_sat = taken.pc_known_sat and taken_res is SatResult.SAT
    taken.rip = target
    return [state, taken]


def step(state: MachineState, image: EnclaveImage, hooks: HookSet) -> list:
    """Execute one instruction; returns live successors (0, 1 or 2)."""
    if state.status is not Status.ALIVE:
        raise RuntimeError("stepping a finished state")
    layout = image.layout
    state.step_count += 1
    state.trace.append(state.rip)

    hooks.before_instruction(state)
    if state.status is not Status.ALIVE:
        return []

    idx = address_to_index(layout, state.rip, len(image.code))
    if idx is None:
        state.diagnostic(f"instruction fetch outside code at 0x{state.rip:x}")
        return []
    instr: Instruction = image.code[idx]
    op, args = instr.op, instr.args
    regs = state.regs

    def operand(v):
        return regs[v] if isinstance(v, Register) else const64(v)

    def mem_addr(base_reg, disp):
        return add(regs[base_reg], const64(disp))

    if op == "MOVI":
        regs[args[0]] = const64(args[1])
    elif op == "MOVR":
        regs[args[0]] = regs[args[1]]
    elif op == "LOAD":
        value = _mem_read(state, mem_addr(args[1], args[2]), image, hooks)
        if value is None:
            return []
        regs[args[0]] = value
    elif op == "STORE":
        if not _mem_write(state, mem_addr(args[0], args[1]), regs[args[2]], image, hooks):
            return []
    elif op == "ALU":
        regs[args[1]] = _ALU[args[0]](regs[args[1]], operand(args[2]))
    elif op == "CMP":
        a, b = regs[args[0]], operand(args[1])
        state.flags.update(cmp_flags(a, b))
        state.last_cmp = (a, b)
    elif op == "JMP":
        if not _direct_target(state, args[0], image):
            return []
        state.rip = args[0]
        return [state]
    elif op == "JMPR":
        _jump(state, regs[args[0]], image, hooks)
        return [state] if state.status is Status.ALIVE else []
    elif op == "JCC":
        return _take_branch(state, _branch_condition(state, args[0]), args[1], image)
    elif op == "CALL":
        ret = const64(state.rip + INSTRUCTION_SIZE)
        if not _mem_write(state, add(regs[Register.RSP], const64(-8)), ret, image, hooks):
            return []
        regs[Register.RSP] = add(regs[Register.RSP], const64(-8))
        if not _direct_target(state, args[0], image):
            return []
        state.rip = args[0]
        return [state]
    elif op == "CALLR":
        ret = const64(state.rip + INSTRUCTION_SIZE)
        if not _mem_write(state, add(regs[Register.RSP], const64(-8)), ret, image, hooks):
            return []
        regs[Register.RSP] = add(regs[Register.RSP], const64(-8))
        _jump(state, regs[args[0]], image, hooks)
        return [state] if state.status is Status.ALIVE else []
    elif op == "RET":
        target = _mem_read(state, regs[Register.RSP], image, hooks)
        if target is None:
            return []
        regs[Register.RSP] = add(regs[Register.RSP], const64(8))
        _jump(state, target, image, hooks)
        return [state] if state.status is Status.ALIVE else []
    elif op == "PUSH":
        if not _mem_write(state, add(regs[Register.RSP], const64(-8)), regs[args[0]], image, hooks):
            return []
        regs[Register.RSP] = add(regs[Register.RSP], const64(-8))
    elif op == "POP":
        value = _mem_read(state, regs[Register.RSP], image, hooks)
        if value is None:
            return []
        regs[args[0]] = value
        regs[Register.RSP] = add(regs[Register.RSP], const64(8))
    elif op == "FLAGSET":
        state.flags[args[0]] = bit(args[1])
    elif op == "OCALL":
        if not hooks.on_ocall(state):
            return []
        regs[Register.RAX] = fresh_symbol(64, "ocall_ret", state)
    elif op == "EEXIT":
        if hooks.on_eexit(state):
            state.terminate("eexit")
        return []
    else:  # pragma: no cover - image validation rejects unknown opcodes
        state.diagnostic(f"unknown opcode {op}")
        return []

    state.rip += INSTRUCTION_SIZE
    return [state]
