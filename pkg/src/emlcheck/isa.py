"""Enclave machine language (EML): registers, flags, instructions, memory layout.

The analyzer targets a small fixed-width register machine. Every instruction
occupies 4 address units, data access is through 8-byte aligned little-endian
words, and a single contiguous enclave range [base, base+size) is divided into
code, data, heap and stack regions. Addresses inside the enclave that fall in
no declared sub-region classify as trusted data; everything outside the
enclave is untrusted.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

INSTRUCTION_SIZE = 4
WORD_SIZE = 8
MASK64 = (1 << 64) - 1


class Register(enum.Enum):
    RAX = "RAX"
    RBX = "RBX"
    RCX = "RCX"
    RDX = "RDX"
    RSI = "RSI"
    RDI = "RDI"
    RBP = "RBP"
    RSP = "RSP"
    R8 = "R8"
    R9 = "R9"
    R10 = "R10"
    R11 = "R11"
    R12 = "R12"
    R13 = "R13"
    R14 = "R14"
    R15 = "R15"


class FlagId(enum.Enum):
    ZF = "ZF"
    SF = "SF"
    CF = "CF"
    OF = "OF"
    AC = "AC"
    DF = "DF"


class AddressRegion(enum.Enum):
    TRUSTED_CODE = "TrustedCode"
    TRUSTED_DATA = "TrustedData"
    TRUSTED_HEAP = "TrustedHeap"
    TRUSTED_STACK = "TrustedStack"
    UNTRUSTED = "Untrusted"


ALU_OPS = ("ADD", "SUB", "AND", "OR", "XOR", "SHL", "SHR")
CONDITION_CODES = ("EQ", "NE", "ULT", "UGE", "SLT", "SGE")
SETTABLE_FLAGS = (FlagId.AC, FlagId.DF)

OPCODES = (
    "MOVI", "MOVR", "LOAD", "STORE", "ALU", "CMP",
    "JMP", "JMPR", "JCC", "CALL", "CALLR", "RET",
    "PUSH", "POP", "FLAGSET", "OCALL", "EEXIT",
)


@dataclass(frozen=True)
class Instruction:
    """One decoded instruction: opcode name plus an operand tuple.

    Operand layouts:
      MOVI (dst, imm64)            MOVR (dst, src)
      LOAD (dst, base, disp32)     STORE (base, disp32, src)
      ALU (op, dst, src_or_imm)    CMP (a, b_or_imm)
      JMP (addr,)   JMPR (reg,)   JCC (cc, addr)
      CALL (addr,)  CALLR (reg,)  RET ()
      PUSH (reg,)   POP (reg,)    FLAGSET (flag, bit)
      OCALL (imm16,)  EEXIT ()
    """

    op: str
    args: tuple = ()


def check_instruction(instr: Instruction) -> Optional[str]:
    """Return an error string when the operand tuple does not fit the opcode."""
    op, args = instr.op, instr.args
    reg = lambda a: isinstance(a, Register)
    imm64 = lambda a: isinstance(a, int) and 0 <= a <= MASK64
    disp32 = lambda a: isinstance(a, int) and -(1 << 31) <= a < (1 << 31)
    addr = imm64

    shapes = {
        "MOVI": lambda: len(args) == 2 and reg(args[0]) and imm64(args[1]),
        "MOVR": lambda: len(args) == 2 and reg(args[0]) and reg(args[1]),
        "LOAD": lambda: len(args) == 3 and reg(args[0]) and reg(args[1]) and disp32(args[2]),
        "STORE": lambda: len(args) == 3 and reg(args[0]) and disp32(args[1]) and reg(args[2]),
        "ALU": lambda: (len(args) == 3 and args[0] in ALU_OPS and reg(args[1])
                        and (reg(args[2]) or imm64(args[2]))),
        "CMP": lambda: len(args) == 2 and reg(args[0]) and (reg(args[1]) or imm64(args[1])),
        "JMP": lambda: len(args) == 1 and addr(args[0]),
        "JMPR": lambda: len(args) == 1 and reg(args[0]),
        "JCC": lambda: len(args) == 2 and args[0] in CONDITION_CODES and addr(args[1]),
        "CALL": lambda: len(args) == 1 and addr(args[0]),
        "CALLR": lambda: len(args) == 1 and reg(args[0]),
        "RET": lambda: len(args) == 0,
        "PUSH": lambda: len(args) == 1 and reg(args[0]),
        "POP": lambda: len(args) == 1 and reg(args[0]),
        "FLAGSET": lambda: len(args) == 2 and args[0] in SETTABLE_FLAGS and args[1] in (0, 1),
        "OCALL": lambda: len(args) == 1 and isinstance(args[0], int) and 0 <= args[0] < (1 << 16),
        "EEXIT": lambda: len(args) == 0,
    }
    if op not in shapes:
        return f"unknown opcode: {op}"
    if not shapes[op]():
        return f"bad operands for {op}"
    return None


@dataclass(frozen=True)
class EnclaveLayout:
    """Enclave memory map. Offsets and lengths are bytes relative to base."""

    base: int
    size: int
    code_offset: int
    code_length: int
    data_offset: int
    data_length: int
    heap_offset: int
    heap_size: int
    stack_offset: int
    stack_size: int

    @property
    def end(self) -> int:
        return self.base + self.size

    @property
    def code_start(self) -> int:
        return self.base + self.code_offset

    @property
    def code_end(self) -> int:
        return self.code_start + self.code_length

    @property
    def stack_low(self) -> int:
        return self.base + self.stack_offset

    @property
    def stack_top(self) -> int:
        # Stack grows downward from the top; the top address itself is a
        # valid initial stack pointer.
        return self.stack_low + self.stack_size

    def contains(self, addr: int) -> bool:
        return self.base <= addr < self.end

    def regions(self) -> tuple:
        return (
            ("code", self.code_offset, self.code_length, AddressRegion.TRUSTED_CODE),
            ("data", self.data_offset, self.data_length, AddressRegion.TRUSTED_DATA),
            ("heap", self.heap_offset, self.heap_size, AddressRegion.TRUSTED_HEAP),
            ("stack", self.stack_offset, self.stack_size, AddressRegion.TRUSTED_STACK),
        )


def validate_layout(layout: EnclaveLayout) -> list[str]:
    errors = []
    # 8-alignment of base keeps every word address in the store 8-aligned.
    if layout.base % WORD_SIZE != 0:
        errors.append("base not 8-aligned")
    if layout.size <= 0:
        errors.append("size not positive")
    fields = (
        ("size", layout.size),
        ("code_offset", layout.code_offset), ("code_length", layout.code_length),
        ("data_offset", layout.data_offset), ("data_length", layout.data_length),
        ("heap_offset", layout.heap_offset), ("heap_size", layout.heap_size),
        ("stack_offset", layout.stack_offset), ("stack_size", layout.stack_size),
    )
    for name, value in fields:
        if value < 0:
            errors.append(f"negative field: {name}")
        elif name == "code_length":
            # Code is instruction-granular, everything else word-granular.
            if value % INSTRUCTION_SIZE != 0:
                errors.append("not a multiple of 4: code_length")
        elif value % WORD_SIZE != 0:
            errors.append(f"not a multiple of 8: {name}")
    if layout.base < 0 or layout.base + layout.size > (1 << 64):
        errors.append("base+size overflows 64 bits")
    spans = []
    for name, off, length, _ in layout.regions():
        if off + length > layout.size:
            errors.append(f"region outside enclave: {name}")
        if length > 0:
            spans.append((name, off, off + length))
    for i, (a, alo, ahi) in enumerate(spans):
        for b, blo, bhi in spans[i + 1:]:
            if alo < bhi and blo < ahi:
                errors.append(f"region overlap: {a}/{b}")
    return errors


def classify_address(layout: EnclaveLayout, addr: int) -> AddressRegion:
    """Total classification of a 64-bit address under a layout."""
    if not layout.contains(addr):
        return AddressRegion.UNTRUSTED
    rel = addr - layout.base
    for _, off, length, region in layout.regions():
        if off <= rel < off + length:
            return region
    # Inside the enclave but in no declared sub-region.
    return AddressRegion.TRUSTED_DATA


def instruction_address(layout: EnclaveLayout, index: int) -> int:
    if index < 0 or layout.code_start + INSTRUCTION_SIZE * index >= layout.code_end:
        raise IndexError(f"code index out of range: {index}")
    return layout.code_start + INSTRUCTION_SIZE * index


def address_to_index(layout: EnclaveLayout, addr: int, code_len: int) -> Optional[int]:
    """Map an address to a code index, or None when it is not an instruction."""
    if addr < layout.code_start or addr >= layout.code_start + INSTRUCTION_SIZE * code_len:
        return None
    rel = addr - layout.code_start
    if rel % INSTRUCTION_SIZE != 0:
        return None
    return rel // INSTRUCTION_SIZE


@dataclass(frozen=True)
class TransitionAnnotations:
    """Addresses marking phase boundaries of one enclave image.

    secure holds (begin, end) address pairs, one per offered call-in; ocall
    holds (begin, end) pairs wrapping each call-out proxy.
    """

    entry_address: int
    entry_sanitisation_done: int
    secure: tuple  # tuple[(int, int), ...]
    ocall: tuple  # tuple[(int, int), ...]
    exit_address: int

    def all_addresses(self) -> list[int]:
        out = [self.entry_address, self.entry_sanitisation_done, self.exit_address]
        for pair in self.secure:
            out.extend(pair)
        for pair in self.ocall:
            out.extend(pair)
        return out


def validate_annotations(ann: TransitionAnnotations, layout: EnclaveLayout,
                         code_len: int) -> list[str]:
    errors = []
    for a in ann.all_addresses():
        if address_to_index(layout, a, code_len) is None:
            errors.append(f"annotation address not an instruction: 0x{a:x}")
    if ann.entry_address == ann.exit_address:
        errors.append("entry and exit addresses coincide")
    # Hook dispatch needs one unambiguous role per address.
    addrs = ann.all_addresses()
    if len(set(addrs)) != len(addrs):
        errors.append("annotation addresses not pairwise distinct")
    return errors


@dataclass
class EnclaveImage:
    """The unit of analysis: layout, code, initial data, symbols, annotations.

    data holds (offset, words) runs; offsets are bytes relative to base and
    must land inside the data region. symbols map names to absolute addresses.
    """

    format_version: int
    layout: EnclaveLayout
    code: tuple  # tuple[Instruction, ...]
    data: tuple = ()  # tuple[(int, tuple[int, ...]), ...]
    symbols: dict = field(default_factory=dict)
    annotations: Optional[TransitionAnnotations] = None

    def __eq__(self, other):
        if not isinstance(other, EnclaveImage):
            return NotImplemented
        return (self.format_version == other.format_version
                and self.layout == other.layout
                and self.code == other.code
                and self.data == other.data
                and self.symbols == other.symbols
                and self.annotations == other.annotations)


def validate_image(image: EnclaveImage) -> list[str]:
    """Structural validation; returns one error per violated invariant."""
    errors = []
    if image.format_version != 1:
        errors.append(f"unsupported format version: {image.format_version}")
    layout = image.layout
    errors.extend(validate_layout(layout))
    if errors:
        # Region arithmetic below assumes a sane layout.
        return errors
    if len(image.code) * INSTRUCTION_SIZE != layout.code_length:
        errors.append(
            f"code length mismatch: {len(image.code)} instructions, "
            f"code_length=0x{layout.code_length:x}")
    for instr in image.code:
        err = check_instruction(instr)
        if err:
            errors.append(err)
    data_lo = layout.data_offset
    data_hi = layout.data_offset + layout.data_length
    for offset, words in image.data:
        if offset % WORD_SIZE != 0:
            errors.append(f"data entry misaligned: offset 0x{offset:x}")
        elif not (data_lo <= offset and offset + WORD_SIZE * len(words) <= data_hi):
            errors.append(f"data entry outside data region: offset 0x{offset:x}")
        for w in words:
            if not (0 <= w <= MASK64):
                errors.append(f"data word out of range at offset 0x{offset:x}")
    for name, addr in image.symbols.items():
        if not layout.contains(addr):
            errors.append(f"symbol out of range: {name}")
    if image.annotations is not None:
        errors.extend(validate_annotations(image.annotations, layout, len(image.code)))
    return errors
