"""Assembler for `.eml` sources and the canonical image container format.

Assembly grammar (one item per line, `;` starts a comment):

    .enclave base=<num> size=<num>
    .code    offset=<num> length=<num>
    .data    offset=<num> length=<num>      ; also opens the data section
    .heap    offset=<num> size=<num>
    .stack   offset=<num> size=<num>
    .word    <num>                          ; appended to the data section
    .annotations                            ; block of key=value lines:
        entry=<label>  sanitised=<label>  exit=<label>
        secure=(<label>,<label>)            ; repeatable
        ocall=(<label>,<label>)             ; repeatable

    label:                ; binds to the next instruction or data word
    label: movi rax, 42   ; or inline

Numbers are decimal or 0x-hex. Mnemonics: movi movr load store, the ALU ops
add sub and or xor shl shr, cmp, jmp jmpr jcc call callr ret, push pop,
flagset, ocall, eexit. Memory operands are written [reg], [reg + n] or
[reg - n]. Jump/call targets take a label or a literal instruction address;
movi immediates additionally accept a label, which assembles to its address.

The container format is canonical JSON: fixed key order, lowercase 0x-hex
strings, no insignificant whitespace, symbols sorted by name. Equal images
serialize to identical bytes.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Optional

from .isa import (
    ALU_OPS, CONDITION_CODES, INSTRUCTION_SIZE, EnclaveImage, EnclaveLayout,
    FlagId, Instruction, Register, TransitionAnnotations, validate_image,
)

_LABEL_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_NUM_RE = re.compile(r"^-?(0x[0-9a-fA-F]+|[0-9]+)$")
_MEM_RE = re.compile(r"^\[\s*([A-Za-z0-9_]+)\s*(?:([+-])\s*([^\]\s]+)\s*)?\]$")

_MASK64 = (1 << 64) - 1


@dataclass
class ParseDiagnostic:
    line: int
    message: str
    severity: str = "error"

    def __str__(self):
        return f"line {self.line}: {self.severity}: {self.message}"


def _parse_num(tok: str) -> Optional[int]:
    if not _NUM_RE.match(tok):
        return None
    return int(tok, 0)


def _parse_reg(tok: str) -> Optional[Register]:
    try:
        return Register(tok.upper())
    except ValueError:
        return None


_ALU_MNEMONICS = {op.lower(): op for op in ALU_OPS}


class _Assembler:
    def __init__(self, source: str):
        self.lines = source.splitlines()
        self.errors: list[ParseDiagnostic] = []
        self.warnings: list[ParseDiagnostic] = []
        self.layout_fields: dict = {}
        self.directive_seen: set = set()
        self.code_items: list = []  # (line_no, mnemonic, [operand strings])
        self.words: list = []  # (line_no, value)
        self.labels: dict = {}  # name -> ("code"|"data", item index)
        self.pending_labels: list = []  # (line_no, name)
        self.ann_items: list = []  # (line_no, key, value string)
        self.has_annotations_block = False
        self.in_annotations = False

    def error(self, line: int, message: str):
        self.errors.append(ParseDiagnostic(self._clamp(line), message, "error"))

    def warn(self, line: int, message: str):
        self.warnings.append(ParseDiagnostic(self._clamp(line), message, "warning"))

    def _clamp(self, line: int) -> int:
        return max(1, min(line, max(1, len(self.lines))))

    # -- pass 1: line scanning ------------------------------------------

    def scan(self):
        for no, raw in enumerate(self.lines, start=1):
            line = raw.split(";", 1)[0].strip()
            if not line:
                continue
            if line.startswith("."):
                self.in_annotations = False
                self._directive(no, line)
                continue
            if self.in_annotations:
                self._annotation_line(no, line)
                continue
            self._code_line(no, line)
        for no, name in self.pending_labels:
            self.error(no, f"label at end of input: {name}")

    def _directive(self, no: int, line: str):
        parts = line.split()
        name = parts[0]
        if name == ".annotations":
            if self.has_annotations_block:
                self.error(no, "duplicate .annotations block")
            self.has_annotations_block = True
            self.in_annotations = True
            return
        if name == ".word":
            if len(parts) != 2 or (value := _parse_num(parts[1])) is None:
                self.error(no, ".word takes one numeric operand")
                return
            if "data" not in self.directive_seen:
                self.error(no, ".word before .data directive")
                return
            self._bind_labels("data", len(self.words))
            self.words.append((no, value & _MASK64))
            return
        specs = {
            ".enclave": ("enclave", ("base", "size")),
            ".code": ("code", ("offset", "length")),
            ".data": ("data", ("offset", "length")),
            ".heap": ("heap", ("offset", "size")),
            ".stack": ("stack", ("offset", "size")),
        }
        if name not in specs:
            self.error(no, f"unknown directive: {name}")
            return
        if name == ".data" and len(parts) == 1 and "data" in self.directive_seen:
            # Bare .data reopens the section for .word lines.
            return
        key, fields = specs[name]
        if key in self.directive_seen:
            self.error(no, f"duplicate directive: {name}")
            return
        self.directive_seen.add(key)
        kv = {}
        for part in parts[1:]:
            if "=" not in part:
                self.error(no, f"bad directive operand: {part}")
                return
            k, v = part.split("=", 1)
            num = _parse_num(v)
            if num is None or num < 0:
                self.error(no, f"bad directive value: {part}")
                return
            kv[k] = num
        if set(kv) != set(fields):
            self.error(no, f"{name} needs fields {', '.join(fields)}")
            return
        for k, v in kv.items():
            self.layout_fields[f"{key}_{k}" if key != "enclave" else k] = v

    def _annotation_line(self, no: int, line: str):
        if "=" not in line:
            self.error(no, f"bad annotation line: {line}")
            return
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in ("entry", "sanitised", "secure", "ocall", "exit"):
            self.error(no, f"unknown annotation key: {key}")
            return
        self.ann_items.append((no, key, value))

    def _bind_labels(self, kind: str, index: int):
        for no, name in self.pending_labels:
            if name in self.labels:
                self.error(no, f"duplicate label: {name}")
            else:
                self.labels[name] = (kind, index)
        self.pending_labels = []

    def _code_line(self, no: int, line: str):
        while True:
            m = re.match(r"^([A-Za-z_][A-Za-z0-9_]*)\s*:\s*", line)
            if not m:
                break
            self.pending_labels.append((no, m.group(1)))
            line = line[m.end():]
        if not line:
            return
        if line.startswith("."):
            self._directive(no, line)
            return
        parts = line.split(None, 1)
        mnemonic = parts[0].lower()
        operands = [s.strip() for s in parts[1].split(",")] if len(parts) > 1 else []
        self._bind_labels("code", len(self.code_items))
        self.code_items.append((no, mnemonic, operands))

    # -- pass 2: resolution ----------------------------------------------

    def resolve(self) -> Optional[EnclaveImage]:
        for required in ("enclave", "code"):
            if required not in self.directive_seen:
                self.error(1, f"missing .{required} directive")
        if self.errors:
            return None
        f = self.layout_fields
        layout = EnclaveLayout(
            base=f.get("base", 0), size=f.get("size", 0),
            code_offset=f.get("code_offset", 0), code_length=f.get("code_length", 0),
            data_offset=f.get("data_offset", 0), data_length=f.get("data_length", 0),
            heap_offset=f.get("heap_offset", 0), heap_size=f.get("heap_size", 0),
            stack_offset=f.get("stack_offset", 0), stack_size=f.get("stack_size", 0),
        )
        if len(self.code_items) * INSTRUCTION_SIZE > layout.code_length:
            self.error(self.code_items[-1][0] if self.code_items else 1,
                       "code region overflow")
        if self.words and (
                layout.data_offset + 8 * len(self.words)
                > layout.data_offset + layout.data_length):
            self.error(self.words[-1][0], "data region overflow")
        if self.errors:
            return None

        addr_of = {}
        for name, (kind, index) in self.labels.items():
            if kind == "code":
                addr_of[name] = layout.code_start + INSTRUCTION_SIZE * index
            else:
                addr_of[name] = layout.base + layout.data_offset + 8 * index

        code = []
        for no, mnemonic, operands in self.code_items:
            instr = self._build_instruction(no, mnemonic, operands, addr_of, layout)
            if instr is not None:
                code.append(instr)
        annotations = self._build_annotations(addr_of) if self.has_annotations_block else None
        if self.errors:
            return None

        # Pad declared code space bookkeeping: the declared length is the
        # region size, the emitted list defines the instruction count.
        layout = EnclaveLayout(
            base=layout.base, size=layout.size,
            code_offset=layout.code_offset,
            code_length=len(code) * INSTRUCTION_SIZE,
            data_offset=layout.data_offset, data_length=layout.data_length,
            heap_offset=layout.heap_offset, heap_size=layout.heap_size,
            stack_offset=layout.stack_offset, stack_size=layout.stack_size,
        )
        data = ()
        if self.words:
            data = ((layout.data_offset, tuple(v for _, v in self.words)),)
        image = EnclaveImage(format_version=1, layout=layout, code=tuple(code),
                             data=data, symbols=dict(sorted(addr_of.items())),
                             annotations=annotations)
        for msg in validate_image(image):
            self.error(1, msg)
        if self.errors:
            return None
        return image

    def _label_addr(self, no: int, tok: str, addr_of: dict) -> Optional[int]:
        if tok not in addr_of:
            self.error(no, f"undefined label: {tok}")
            return None
        return addr_of[tok]

    def _target(self, no: int, tok: str, addr_of: dict, layout: EnclaveLayout) -> Optional[int]:
        """A jump/call target: label or literal address of an instruction."""
        num = _parse_num(tok)
        if num is None:
            if not _LABEL_RE.match(tok):
                self.error(no, f"bad target operand: {tok}")
                return None
            if tok not in addr_of:
                self.error(no, f"undefined label: {tok}")
                return None
            kind, _ = self.labels[tok]
            if kind != "code":
                self.error(no, f"target is not code: {tok}")
                return None
            return addr_of[tok]
        rel = num - layout.code_start
        if rel < 0 or rel % INSTRUCTION_SIZE != 0 or \
                rel >= INSTRUCTION_SIZE * len(self.code_items):
            self.error(no, f"target is not an instruction address: {tok}")
            return None
        return num

    def _imm(self, no: int, tok: str, addr_of: dict) -> Optional[int]:
        num = _parse_num(tok)
        if num is not None:
            if not -(1 << 63) <= num <= _MASK64:
                self.error(no, f"immediate out of range: {tok}")
                return None
            return num & _MASK64
        if _LABEL_RE.match(tok):
            return self._label_addr(no, tok, addr_of)
        self.error(no, f"bad immediate: {tok}")
        return None

    def _mem(self, no: int, tok: str) -> Optional[tuple]:
        m = _MEM_RE.match(tok)
        if not m:
            self.error(no, f"bad memory operand: {tok}")
            return None
        reg = _parse_reg(m.group(1))
        if reg is None:
            self.error(no, f"bad base register: {m.group(1)}")
            return None
        disp = 0
        if m.group(2):
            num = _parse_num(m.group(3))
            if num is None or num < 0:
                self.error(no, f"bad displacement: {m.group(3)}")
                return None
            disp = -num if m.group(2) == "-" else num
        if not -(1 << 31) <= disp < (1 << 31):
            self.error(no, f"displacement out of range: {tok}")
            return None
        return reg, disp

    def _reg(self, no: int, tok: str) -> Optional[Register]:
        reg = _parse_reg(tok)
        if reg is None:
            self.error(no, f"bad register: {tok}")
        return reg

    def _build_instruction(self, no, mnemonic, operands, addr_of, layout):
        def arity(n):
            if len(operands) != n:
                self.error(no, f"{mnemonic} takes {n} operand(s)")
                return False
            return True

        if mnemonic in _ALU_MNEMONICS:
            if not arity(2):
                return None
            dst = self._reg(no, operands[0])
            src = _parse_reg(operands[1])
            if src is None:
                src = self._imm(no, operands[1], {})
            if dst is None or src is None:
                return None
            return Instruction("ALU", (_ALU_MNEMONICS[mnemonic], dst, src))
        if mnemonic == "movi":
            if not arity(2):
                return None
            dst = self._reg(no, operands[0])
            imm = self._imm(no, operands[1], addr_of)
            if dst is None or imm is None:
                return None
            return Instruction("MOVI", (dst, imm))
        if mnemonic == "movr":
            if not arity(2):
                return None
            dst, src = self._reg(no, operands[0]), self._reg(no, operands[1])
            if dst is None or src is None:
                return None
            return Instruction("MOVR", (dst, src))
        if mnemonic == "load":
            if not arity(2):
                return None
            dst = self._reg(no, operands[0])
            mem = self._mem(no, operands[1])
            if dst is None or mem is None:
                return None
            return Instruction("LOAD", (dst, mem[0], mem[1]))
        if mnemonic == "store":
            if not arity(2):
                return None
            mem = self._mem(no, operands[0])
            src = self._reg(no, operands[1])
            if mem is None or src is None:
                return None
            return Instruction("STORE", (mem[0], mem[1], src))
        if mnemonic == "cmp":
            if not arity(2):
                return None
            a = self._reg(no, operands[0])
            b = _parse_reg(operands[1])
            if b is None:
                b = self._imm(no, operands[1], {})
            if a is None or b is None:
                return None
            return Instruction("CMP", (a, b))
        if mnemonic in ("jmp", "call"):
            if not arity(1):
                return None
            target = self._target(no, operands[0], addr_of, layout)
            if target is None:
                return None
            return Instruction(mnemonic.upper(), (target,))
        if mnemonic == "jcc":
            if not arity(2):
                return None
            cc = operands[0].upper()
            if cc not in CONDITION_CODES:
                self.error(no, f"bad condition code: {operands[0]}")
                return None
            target = self._target(no, operands[1], addr_of, layout)
            if target is None:
                return None
            return Instruction("JCC", (cc, target))
        if mnemonic in ("jmpr", "callr", "push", "pop"):
            if not arity(1):
                return None
            reg = self._reg(no, operands[0])
            if reg is None:
                return None
            return Instruction(mnemonic.upper(), (reg,))
        if mnemonic == "flagset":
            if not arity(2):
                return None
            try:
                flag = FlagId(operands[0].upper())
            except ValueError:
                flag = None
            if flag not in (FlagId.AC, FlagId.DF):
                self.error(no, f"bad flag: {operands[0]}")
                return None
            bit = _parse_num(operands[1])
            if bit not in (0, 1):
                self.error(no, f"bad flag bit: {operands[1]}")
                return None
            return Instruction("FLAGSET", (flag, bit))
        if mnemonic == "ocall":
            if not arity(1):
                return None
            imm = _parse_num(operands[0])
            if imm is None or not 0 <= imm < (1 << 16):
                self.error(no, f"bad ocall index: {operands[0]}")
                return None
            return Instruction("OCALL", (imm,))
        if mnemonic in ("ret", "eexit"):
            if not arity(0):
                return None
            return Instruction(mnemonic.upper(), ())
        self.error(no, f"unknown mnemonic: {mnemonic}")
        return None

    def _build_annotations(self, addr_of) -> Optional[TransitionAnnotations]:
        singles = {}
        secure, ocall = [], []
        for no, key, value in self.ann_items:
            if key in ("entry", "sanitised", "exit"):
                if key in singles:
                    self.error(no, f"duplicate annotation: {key}")
                    continue
                addr = self._label_addr(no, value, addr_of)
                if addr is not None:
                    singles[key] = addr
            else:
                m = re.match(r"^\(\s*([A-Za-z0-9_]+)\s*,\s*([A-Za-z0-9_]+)\s*\)$", value)
                if not m:
                    self.error(no, f"bad annotation pair: {value}")
                    continue
                a = self._label_addr(no, m.group(1), addr_of)
                b = self._label_addr(no, m.group(2), addr_of)
                if a is not None and b is not None:
                    (secure if key == "secure" else ocall).append((a, b))
        missing = [k for k in ("entry", "sanitised", "exit") if k not in singles]
        if missing:
            self.error(1, f"annotations missing: {', '.join(missing)}")
            return None
        return TransitionAnnotations(
            entry_address=singles["entry"],
            entry_sanitisation_done=singles["sanitised"],
            secure=tuple(secure), ocall=tuple(ocall),
            exit_address=singles["exit"])


def assemble(source: str):
    """Assemble a source document into (image, diagnostics).

    The image is None when any error-grade diagnostic was produced; warnings
    alone do not block emission. Assembly is deterministic.
    """
    asm = _Assembler(source)
    asm.scan()
    image = None if asm.errors else asm.resolve()
    return image, asm.errors + asm.warnings


# -- canonical container -------------------------------------------------


def _hx(v: int) -> str:
    return f"0x{v:x}"


def _disp_hx(v: int) -> str:
    return f"-0x{-v:x}" if v < 0 else f"0x{v:x}"


_LAYOUT_KEYS = ("base", "size", "code_offset", "code_length", "data_offset",
                "data_length", "heap_offset", "heap_size", "stack_offset",
                "stack_size")


def _encode_args(instr: Instruction) -> list:
    op, a = instr.op, instr.args
    if op == "MOVI":
        return [a[0].value, _hx(a[1])]
    if op == "MOVR":
        return [a[0].value, a[1].value]
    if op == "LOAD":
        return [a[0].value, a[1].value, _disp_hx(a[2])]
    if op == "STORE":
        return [a[0].value, _disp_hx(a[1]), a[2].value]
    if op == "ALU":
        src = a[2].value if isinstance(a[2], Register) else _hx(a[2])
        return [a[0], a[1].value, src]
    if op == "CMP":
        b = a[1].value if isinstance(a[1], Register) else _hx(a[1])
        return [a[0].value, b]
    if op in ("JMP", "CALL"):
        return [_hx(a[0])]
    if op == "JCC":
        return [a[0], _hx(a[1])]
    if op in ("JMPR", "CALLR", "PUSH", "POP"):
        return [a[0].value]
    if op == "FLAGSET":
        return [a[0].value, _hx(a[1])]
    if op == "OCALL":
        return [_hx(a[0])]
    return []


def annotations_to_obj(ann: TransitionAnnotations) -> dict:
    return {
        "entry": _hx(ann.entry_address),
        "sanitised": _hx(ann.entry_sanitisation_done),
        "secure": [[_hx(a), _hx(b)] for a, b in ann.secure],
        "ocall": [[_hx(a), _hx(b)] for a, b in ann.ocall],
        "exit": _hx(ann.exit_address),
    }


def serialize_image(image: EnclaveImage) -> bytes:
    """Canonical byte form: equal images give identical bytes."""
    doc = {
        "format_version": image.format_version,
        "layout": {k: _hx(getattr(image.layout, k)) for k in _LAYOUT_KEYS},
        "code": [{"op": i.op, "args": _encode_args(i)} for i in image.code],
        "data": [{"offset": _hx(off), "words": [_hx(w) for w in words]}
                 for off, words in image.data],
        "symbols": {k: _hx(v) for k, v in sorted(image.symbols.items())},
    }
    if image.annotations is not None:
        doc["annotations"] = annotations_to_obj(image.annotations)
    return json.dumps(doc, separators=(",", ":")).encode("utf-8")


class _Malformed(Exception):
    pass


def _need(obj, key, kind):
    if not isinstance(obj, dict) or key not in obj:
        raise _Malformed(f"missing key: {key}")
    v = obj[key]
    if not isinstance(v, kind):
        raise _Malformed(f"bad type for key: {key}")
    return v


def _unhex(s, what) -> int:
    if not isinstance(s, str) or not re.match(r"^-?0x[0-9a-f]+$", s):
        raise _Malformed(f"bad number for {what}: {s!r}")
    return int(s, 16)


_DECODERS = {}


def _register(tok, what) -> Register:
    reg = _parse_reg(tok) if isinstance(tok, str) else None
    if reg is None:
        raise _Malformed(f"bad register for {what}: {tok!r}")
    return reg


def _decode_instruction(entry) -> Instruction:
    op = _need(entry, "op", str)
    args = _need(entry, "args", list)
    if set(entry) != {"op", "args"}:
        raise _Malformed("unexpected key in code entry")

    def n(i):
        return _unhex(args[i], op)

    def r(i):
        return _register(args[i], op)

    def reg_or_imm(i):
        if isinstance(args[i], str) and args[i].lower().lstrip("-").startswith("0x"):
            return n(i)
        return r(i)

    try:
        if op == "MOVI":
            return Instruction(op, (r(0), n(1)))
        if op == "MOVR":
            return Instruction(op, (r(0), r(1)))
        if op == "LOAD":
            return Instruction(op, (r(0), r(1), n(2)))
        if op == "STORE":
            return Instruction(op, (r(0), n(1), r(2)))
        if op == "ALU":
            if args[0] not in ALU_OPS:
                raise _Malformed(f"bad alu op: {args[0]!r}")
            return Instruction(op, (args[0], r(1), reg_or_imm(2)))
        if op == "CMP":
            return Instruction(op, (r(0), reg_or_imm(1)))
        if op in ("JMP", "CALL"):
            return Instruction(op, (n(0),))
        if op == "JCC":
            if args[0] not in CONDITION_CODES:
                raise _Malformed(f"bad condition code: {args[0]!r}")
            return Instruction(op, (args[0], n(1)))
        if op in ("JMPR", "CALLR", "PUSH", "POP"):
            return Instruction(op, (r(0),))
        if op == "FLAGSET":
            flag = FlagId(args[0]) if args[0] in ("AC", "DF") else None
            if flag is None:
                raise _Malformed(f"bad flag: {args[0]!r}")
            return Instruction(op, (flag, n(1)))
        if op == "OCALL":
            return Instruction(op, (n(0),))
        if op in ("RET", "EEXIT"):
            if args:
                raise _Malformed(f"{op} takes no args")
            return Instruction(op, ())
    except IndexError:
        raise _Malformed(f"missing operand for {op}")
    raise _Malformed(f"unknown opcode: {op}")


def annotations_from_obj(obj) -> TransitionAnnotations:
    for key in ("entry", "sanitised", "secure", "ocall", "exit"):
        if key not in obj:
            raise _Malformed(f"annotations missing key: {key}")
    if set(obj) != {"entry", "sanitised", "secure", "ocall", "exit"}:
        raise _Malformed("unexpected key in annotations")

    def pairs(key):
        out = []
        for item in _need(obj, key, list):
            if not isinstance(item, list) or len(item) != 2:
                raise _Malformed(f"bad {key} pair")
            out.append((_unhex(item[0], key), _unhex(item[1], key)))
        return tuple(out)

    return TransitionAnnotations(
        entry_address=_unhex(obj["entry"], "entry"),
        entry_sanitisation_done=_unhex(obj["sanitised"], "sanitised"),
        secure=pairs("secure"), ocall=pairs("ocall"),
        exit_address=_unhex(obj["exit"], "exit"))


def parse_image(data: bytes):
    """Parse container bytes into (image, diagnostics); inverse of serialize."""
    diagnostics = []
    try:
        doc = json.loads(data.decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        line = getattr(e, "lineno", 1)
        diagnostics.append(ParseDiagnostic(line, f"malformed container: {e}"))
        return None, diagnostics
    try:
        if not isinstance(doc, dict):
            raise _Malformed("document is not an object")
        allowed = {"format_version", "layout", "code", "data", "symbols", "annotations"}
        if set(doc) - allowed:
            raise _Malformed(f"unexpected keys: {sorted(set(doc) - allowed)}")
        version = _need(doc, "format_version", int)
        layout_obj = _need(doc, "layout", dict)
        if set(layout_obj) != set(_LAYOUT_KEYS):
            raise _Malformed("bad layout keys")
        layout = EnclaveLayout(**{k: _unhex(layout_obj[k], k) for k in _LAYOUT_KEYS})
        code = tuple(_decode_instruction(entry) for entry in _need(doc, "code", list))
        data_entries = []
        for entry in _need(doc, "data", list):
            off = _unhex(_need(entry, "offset", str), "data offset")
            words = tuple(_unhex(w, "data word") for w in _need(entry, "words", list))
            data_entries.append((off, words))
        symbols = {k: _unhex(v, f"symbol {k}") for k, v in _need(doc, "symbols", dict).items()}
        annotations = None
        if "annotations" in doc:
            annotations = annotations_from_obj(_need(doc, "annotations", dict))
        image = EnclaveImage(format_version=version, layout=layout, code=code,
                             data=tuple(data_entries), symbols=symbols,
                             annotations=annotations)
    except _Malformed as e:
        msg = str(e)
        if not msg.startswith("unknown opcode"):
            msg = f"malformed container: {msg}"
        diagnostics.append(ParseDiagnostic(1, msg))
        return None, diagnostics
    errors = validate_image(image)
    if errors:
        diagnostics.extend(ParseDiagnostic(1, msg) for msg in errors)
        return None, diagnostics
    return image, diagnostics
