from __future__ import annotations

from pathlib import Path

import pytest

from emlcheck.expr import bit, const64
from emlcheck.isa import EnclaveLayout, FlagId, Register
from emlcheck.machine import MachineState, SymbolAllocator, fresh_symbol
from emlcheck.orderliness import PhaseState

ROOT = Path(__file__).resolve().parents[1]
CORPUS_DIR = ROOT / "corpus"

STD_LAYOUT = EnclaveLayout(
    base=0x100000, size=0x10000,
    code_offset=0x0, code_length=0x1000,
    data_offset=0x2000, data_length=0x1000,
    heap_offset=0x4000, heap_size=0x2000,
    stack_offset=0xC000, stack_size=0x2000,
)


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS_DIR


@pytest.fixture
def std_layout() -> EnclaveLayout:
    return STD_LAYOUT


def make_state(regs=None, flags=None, rip=0x100000, pc=None) -> MachineState:
    """State with symbolic registers/flags, selectively pinned by the caller.

    Values in `regs`/`flags` may be ints (wrapped as constants) or terms.
    """
    state = MachineState(rip=rip, regs={}, flags={}, trusted_store={},
                         alloc=SymbolAllocator(), pc=list(pc or []))
    state.phase_state = PhaseState()
    overrides = regs or {}
    for reg in Register:
        if reg in overrides:
            v = overrides[reg]
            state.regs[reg] = const64(v) if isinstance(v, int) else v
        else:
            state.regs[reg] = fresh_symbol(64, f"reg_{reg.name.lower()}", state)
    flag_overrides = flags or {}
    for flag in FlagId:
        if flag in flag_overrides:
            v = flag_overrides[flag]
            state.flags[flag] = bit(v) if isinstance(v, int) else v
        else:
            state.flags[flag] = fresh_symbol(1, f"flag_{flag.name.lower()}", state)
    return state
