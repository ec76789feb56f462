"""Parser, printer and encoder for the RV32IM-subset assembly dialect.

The dialect is a frozen GNU-as flavour: one item per line, ``#`` comments,
``.text``/``.data`` sections, ``.word``/``.byte``/``.asciz`` data and the
pseudo-instructions ``li la mv not nop j ret``.  Pseudo-instructions are
expanded while parsing, so a :class:`Program` only ever holds real
instructions and every instruction is exactly four bytes.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

ABI_NAMES = (
    "zero ra sp gp tp t0 t1 t2 s0 s1 a0 a1 a2 a3 a4 a5 "
    "a6 a7 s2 s3 s4 s5 s6 s7 s8 s9 s10 s11 t3 t4 t5 t6"
).split()

REGISTERS = {name: i for i, name in enumerate(ABI_NAMES)}
REGISTERS.update({f"x{i}": i for i in range(32)})
REGISTERS["fp"] = 8

R_TYPE = ("add", "sub", "and", "or", "xor", "sll", "srl", "sra", "mul")
I_ARITH = ("addi", "andi", "ori", "xori")
I_SHIFT = ("slli", "srli", "srai")
LOADS = ("lw", "lb", "lbu")
STORES = ("sw", "sb")
U_TYPE = ("lui", "auipc")
BRANCHES = ("beq", "bne", "blt", "bge", "bltu", "bgeu")
MNEMONICS = frozenset(
    R_TYPE + I_ARITH + I_SHIFT + LOADS + STORES + U_TYPE + BRANCHES + ("jal", "jalr", "ecall")
)
PSEUDOS = frozenset({"li", "la", "mv", "not", "nop", "j", "ret"})

TEXT_BASE = 0x1000
DATA_BASE = 0x10000

_DATA_SIZES = {".word": 4, ".byte": 1}


class AsmError(ValueError):
    """Raised for any malformed assembly source or program."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        self.message = message
        super().__init__(f"line {lineno}: {message}" if lineno is not None else message)


@dataclass(frozen=True)
class Instruction:
    mnemonic: str
    rd: int = 0
    rs1: int = 0
    rs2: int = 0
    imm: int = 0
    # branch/jump destination, or the symbol of a %hi/%lo relocation
    target: str | None = None
    reloc: str | None = None  # "hi" | "lo"

    @property
    def reads(self) -> tuple[int, ...]:
        m = self.mnemonic
        if m in R_TYPE or m in BRANCHES or m in STORES:
            return (self.rs1, self.rs2)
        if m in I_ARITH or m in I_SHIFT or m in LOADS or m == "jalr":
            return (self.rs1,)
        return ()

    @property
    def writes(self) -> int | None:
        m = self.mnemonic
        if m in BRANCHES or m in STORES or m == "ecall":
            return None
        return self.rd


@dataclass(frozen=True)
class Label:
    name: str


@dataclass(frozen=True)
class Directive:
    name: str  # .word | .byte | .asciz
    values: tuple = ()

    @property
    def size(self) -> int:
        if self.name == ".asciz":
            return len(self.values[0].encode("utf-8")) + 1
        return _DATA_SIZES[self.name] * len(self.values)

    def to_bytes(self) -> bytes:
        if self.name == ".word":
            return b"".join(struct.pack("<I", v) for v in self.values)
        if self.name == ".byte":
            return bytes(self.values)
        return self.values[0].encode("utf-8") + b"\0"


@dataclass(frozen=True)
class Section:
    name: str  # .text | .data


Item = Union[Instruction, Label, Directive, Section]


@dataclass(frozen=True)
class Program:
    items: tuple = ()
    symbols: Mapping[str, int] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        items = tuple(self.items)
        object.__setattr__(self, "items", items)
        symbols: dict[str, int] = {}
        for i, item in enumerate(items):
            if isinstance(item, Label):
                if item.name in symbols:
                    raise AsmError(f"duplicate label {item.name!r}")
                symbols[item.name] = i
        for item in items:
            if isinstance(item, Instruction) and item.target is not None and item.target not in symbols:
                raise AsmError(f"unresolved label {item.target!r}")
        object.__setattr__(self, "symbols", symbols)

    def instructions(self) -> list[Instruction]:
        return [it for it in self.items if isinstance(it, Instruction)]

    def __len__(self) -> int:
        return len(self.items)


# -- helpers ---------------------------------------------------------------

def sext(value: int, bits: int) -> int:
    value &= (1 << bits) - 1
    return value - (1 << bits) if value >> (bits - 1) else value


def hi20(value: int) -> int:
    return ((value + 0x800) >> 12) & 0xFFFFF


def lo12(value: int) -> int:
    return sext(value & 0xFFF, 12)


def expand_li(rd: int, value: int) -> list[Instruction]:
    """Canonical expansion of ``li``: one ``addi`` or a ``lui``/``addi`` pair."""
    value = sext(value, 32)
    if -2048 <= value < 2048:
        return [Instruction("addi", rd=rd, rs1=0, imm=value)]
    out = [Instruction("lui", rd=rd, imm=hi20(value))]
    if lo12(value):
        out.append(Instruction("addi", rd=rd, rs1=rd, imm=lo12(value)))
    return out


def reg_name(index: int) -> str:
    return ABI_NAMES[index]


# -- parsing ---------------------------------------------------------------

_LABEL_RE = re.compile(r"^([A-Za-z_.$][\w.$]*)\s*:")
_MEM_RE = re.compile(r"^(.*)\((\s*[\w$]+\s*)\)$")
_RELOC_RE = re.compile(r"^%(hi|lo)\(\s*([A-Za-z_.$][\w.$]*)\s*\)$")
_SYMBOL_RE = re.compile(r"^[A-Za-z_.$][\w.$]*$")


def _strip_comment(line: str) -> str:
    # '#' inside a string literal is not a comment
    in_str = False
    escaped = False
    for i, ch in enumerate(line):
        if in_str:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch == "#":
            return line[:i]
    return line


class _LineParser:
    def __init__(self, lineno: int):
        self.lineno = lineno

    def fail(self, msg: str):
        raise AsmError(msg, self.lineno)

    def reg(self, tok: str) -> int:
        tok = tok.strip()
        if tok not in REGISTERS:
            self.fail(f"unknown register {tok!r}")
        return REGISTERS[tok]

    def int(self, tok: str) -> int:
        tok = tok.strip()
        try:
            return int(tok, 0)
        except ValueError:
            if len(tok) == 3 and tok[0] == tok[2] == "'":
                return ord(tok[1])
            self.fail(f"bad integer {tok!r}")

    def imm(self, tok: str, lo: int, hi: int, what: str = "immediate") -> int:
        v = self.int(tok)
        if not lo <= v <= hi:
            self.fail(f"{what} {v} out of range [{lo}, {hi}]")
        return v

    def symbol(self, tok: str) -> str:
        tok = tok.strip()
        if not _SYMBOL_RE.match(tok) or tok in REGISTERS:
            self.fail(f"bad label {tok!r}")
        return tok

    def mem(self, tok: str) -> tuple[int, int]:
        m = _MEM_RE.match(tok.strip())
        if not m:
            self.fail(f"expected offset(register), got {tok!r}")
        off = m.group(1).strip() or "0"
        return self.imm(off, -2048, 2047, "offset"), self.reg(m.group(2))

    def arity(self, mnemonic: str, ops: list[str], *counts: int):
        if len(ops) not in counts:
            want = " or ".join(str(c) for c in counts)
            self.fail(f"{mnemonic} expects {want} operands, got {len(ops)}")

    def i_imm(self, tok: str):
        """12-bit signed immediate or %lo(sym); returns (imm, target, reloc)."""
        m = _RELOC_RE.match(tok.strip())
        if m:
            if m.group(1) != "lo":
                self.fail("%hi is only valid for lui")
            return 0, m.group(2), "lo"
        return self.imm(tok, -2048, 2047), None, None

    def instruction(self, mnemonic: str, ops: list[str]) -> list[Instruction]:
        I = Instruction
        if mnemonic in R_TYPE:
            self.arity(mnemonic, ops, 3)
            return [I(mnemonic, rd=self.reg(ops[0]), rs1=self.reg(ops[1]), rs2=self.reg(ops[2]))]
        if mnemonic in I_ARITH:
            self.arity(mnemonic, ops, 3)
            imm, target, reloc = self.i_imm(ops[2])
            return [I(mnemonic, rd=self.reg(ops[0]), rs1=self.reg(ops[1]), imm=imm, target=target, reloc=reloc)]
        if mnemonic in I_SHIFT:
            self.arity(mnemonic, ops, 3)
            return [I(mnemonic, rd=self.reg(ops[0]), rs1=self.reg(ops[1]), imm=self.imm(ops[2], 0, 31, "shift amount"))]
        if mnemonic in LOADS:
            self.arity(mnemonic, ops, 2)
            off, base = self.mem(ops[1])
            return [I(mnemonic, rd=self.reg(ops[0]), rs1=base, imm=off)]
        if mnemonic in STORES:
            self.arity(mnemonic, ops, 2)
            off, base = self.mem(ops[1])
            return [I(mnemonic, rs2=self.reg(ops[0]), rs1=base, imm=off)]
        if mnemonic in U_TYPE:
            self.arity(mnemonic, ops, 2)
            m = _RELOC_RE.match(ops[1].strip())
            if m:
                if m.group(1) != "hi" or mnemonic != "lui":
                    self.fail(f"relocation not valid for {mnemonic}")
                return [I(mnemonic, rd=self.reg(ops[0]), target=m.group(2), reloc="hi")]
            return [I(mnemonic, rd=self.reg(ops[0]), imm=self.imm(ops[1], 0, 0xFFFFF, "upper immediate"))]
        if mnemonic in BRANCHES:
            self.arity(mnemonic, ops, 3)
            return [I(mnemonic, rs1=self.reg(ops[0]), rs2=self.reg(ops[1]), target=self.symbol(ops[2]))]
        if mnemonic == "jal":
            self.arity(mnemonic, ops, 1, 2)
            rd = self.reg(ops[0]) if len(ops) == 2 else 1
            return [I("jal", rd=rd, target=self.symbol(ops[-1]))]
        if mnemonic == "jalr":
            self.arity(mnemonic, ops, 1, 2, 3)
            if len(ops) == 1:
                return [I("jalr", rd=1, rs1=self.reg(ops[0]))]
            if len(ops) == 2:
                off, base = self.mem(ops[1])
                return [I("jalr", rd=self.reg(ops[0]), rs1=base, imm=off)]
            return [I("jalr", rd=self.reg(ops[0]), rs1=self.reg(ops[1]), imm=self.imm(ops[2], -2048, 2047))]
        if mnemonic == "ecall":
            self.arity(mnemonic, ops, 0)
            return [I("ecall")]
        # pseudo-instructions
        if mnemonic == "li":
            self.arity(mnemonic, ops, 2)
            value = self.imm(ops[1], -(1 << 31), (1 << 32) - 1)
            return expand_li(self.reg(ops[0]), value)
        if mnemonic == "la":
            self.arity(mnemonic, ops, 2)
            rd, sym = self.reg(ops[0]), self.symbol(ops[1])
            return [I("lui", rd=rd, target=sym, reloc="hi"),
                    I("addi", rd=rd, rs1=rd, target=sym, reloc="lo")]
        if mnemonic == "mv":
            self.arity(mnemonic, ops, 2)
            return [I("addi", rd=self.reg(ops[0]), rs1=self.reg(ops[1]))]
        if mnemonic == "not":
            self.arity(mnemonic, ops, 2)
            return [I("xori", rd=self.reg(ops[0]), rs1=self.reg(ops[1]), imm=-1)]
        if mnemonic == "nop":
            self.arity(mnemonic, ops, 0)
            return [I("addi")]
        if mnemonic == "j":
            self.arity(mnemonic, ops, 1)
            return [I("jal", rd=0, target=self.symbol(ops[0]))]
        if mnemonic == "ret":
            self.arity(mnemonic, ops, 0)
            return [I("jalr", rd=0, rs1=1)]
        self.fail(f"unknown mnemonic {mnemonic!r}")

    def directive(self, name: str, rest: str) -> Item:
        if name in (".text", ".data"):
            if rest:
                self.fail(f"{name} takes no operands")
            return Section(name)
        if name == ".asciz":
            try:
                text = _unquote(rest)
            except ValueError as exc:
                self.fail(str(exc))
            return Directive(".asciz", (text,))
        if name in _DATA_SIZES:
            ops = [t for t in _split_operands(rest)]
            if not ops:
                self.fail(f"{name} needs at least one value")
            if name == ".word":
                vals = tuple(self.imm(t, -(1 << 31), (1 << 32) - 1) & 0xFFFFFFFF for t in ops)
            else:
                vals = tuple(self.imm(t, -128, 255) & 0xFF for t in ops)
            return Directive(name, vals)
        self.fail(f"unsupported directive {name!r}")


def _split_operands(text: str) -> list[str]:
    text = text.strip()
    if not text:
        return []
    return [t.strip() for t in text.split(",")]


_ESCAPES = {"n": "\n", "t": "\t", "0": "\0", "\\": "\\", '"': '"', "r": "\r"}


def _unquote(text: str) -> str:
    text = text.strip()
    if len(text) < 2 or text[0] != '"' or text[-1] != '"':
        raise ValueError("expected a quoted string")
    body, out, i = text[1:-1], [], 0
    while i < len(body):
        ch = body[i]
        if ch == "\\":
            if i + 1 >= len(body) or body[i + 1] not in _ESCAPES:
                raise ValueError("bad escape in string")
            out.append(_ESCAPES[body[i + 1]])
            i += 2
        elif ch == '"':
            raise ValueError("unescaped quote in string")
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def _quote(text: str) -> str:
    rev = {v: k for k, v in _ESCAPES.items()}
    return '"' + "".join("\\" + rev[c] if c in rev else c for c in text) + '"'


def parse_program(text: str) -> Program:
    """Parse assembly source into a :class:`Program`.

    Raises :class:`AsmError` (carrying the offending line number) on syntax
    errors, unknown mnemonics, duplicate labels and unresolved labels.
    """
    items: list[Item] = []
    label_lines: dict[str, int] = {}
    refs: list[tuple[str, int]] = []
    section = ".text"
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        lp = _LineParser(lineno)
        while True:
            m = _LABEL_RE.match(line)
            if not m:
                break
            name = m.group(1)
            if name in label_lines:
                lp.fail(f"duplicate label {name!r} (first defined on line {label_lines[name]})")
            label_lines[name] = lineno
            items.append(Label(name))
            line = line[m.end():].strip()
        if not line:
            continue
        parts = line.split(None, 1)
        head, rest = parts[0], (parts[1].strip() if len(parts) > 1 else "")
        if head.startswith("."):
            item = lp.directive(head, rest)
            if isinstance(item, Section):
                section = item.name
            elif section != ".data":
                lp.fail(f"data directive {head} outside .data")
            items.append(item)
            continue
        mnemonic = head.lower()
        if mnemonic not in MNEMONICS and mnemonic not in PSEUDOS:
            lp.fail(f"unknown mnemonic {head!r}")
        if section != ".text":
            lp.fail("instruction outside .text")
        for ins in lp.instruction(mnemonic, _split_operands(rest)):
            if ins.target is not None:
                refs.append((ins.target, lineno))
            items.append(ins)
    for name, lineno in refs:
        if name not in label_lines:
            raise AsmError(f"unresolved label {name!r}", lineno)
    return Program(tuple(items))


# -- printing --------------------------------------------------------------

def format_instruction(ins: Instruction) -> str:
    m, r = ins.mnemonic, ABI_NAMES
    if m in R_TYPE:
        return f"{m} {r[ins.rd]}, {r[ins.rs1]}, {r[ins.rs2]}"
    if m in I_ARITH or m in I_SHIFT:
        imm = f"%lo({ins.target})" if ins.reloc == "lo" else str(ins.imm)
        return f"{m} {r[ins.rd]}, {r[ins.rs1]}, {imm}"
    if m in LOADS:
        return f"{m} {r[ins.rd]}, {ins.imm}({r[ins.rs1]})"
    if m in STORES:
        return f"{m} {r[ins.rs2]}, {ins.imm}({r[ins.rs1]})"
    if m in U_TYPE:
        imm = f"%hi({ins.target})" if ins.reloc == "hi" else hex(ins.imm)
        return f"{m} {r[ins.rd]}, {imm}"
    if m in BRANCHES:
        return f"{m} {r[ins.rs1]}, {r[ins.rs2]}, {ins.target}"
    if m == "jal":
        return f"jal {r[ins.rd]}, {ins.target}"
    if m == "jalr":
        return f"jalr {r[ins.rd]}, {ins.imm}({r[ins.rs1]})"
    return m


def _fold_one(ins: Instruction) -> str | None:
    m, r = ins.mnemonic, ABI_NAMES
    if m == "addi" and ins.reloc is None:
        if ins.rd == 0 and ins.rs1 == 0 and ins.imm == 0:
            return "nop"
        if ins.rs1 == 0:
            return f"li {r[ins.rd]}, {ins.imm}"
        if ins.imm == 0:
            return f"mv {r[ins.rd]}, {r[ins.rs1]}"
    if m == "xori" and ins.imm == -1 and ins.reloc is None:
        return f"not {r[ins.rd]}, {r[ins.rs1]}"
    if m == "jal" and ins.rd == 0:
        return f"j {ins.target}"
    if m == "jalr" and ins.rd == 0 and ins.rs1 == 1 and ins.imm == 0:
        return "ret"
    return None


def _fold_pair(a: Instruction, b: Instruction) -> str | None:
    if a.mnemonic != "lui" or b.mnemonic != "addi" or not (a.rd == b.rd == b.rs1) or a.rd == 0:
        return None
    if a.reloc == "hi" and b.reloc == "lo" and a.target == b.target:
        return f"la {ABI_NAMES[a.rd]}, {a.target}"
    if a.reloc is None and b.reloc is None:
        value = sext(((a.imm << 12) + b.imm) & 0xFFFFFFFF, 32)
        if expand_li(a.rd, value) == [a, b]:
            return f"li {ABI_NAMES[a.rd]}, {value}"
    return None


def print_program(p: Program, fold_pseudos: bool = False) -> str:
    """Render a program as text, one item per line.

    The expanded form is printed by default.  ``fold_pseudos`` re-folds
    canonical sequences back into pseudo-instructions; it never changes the
    encoded bytes.
    """
    lines: list[str] = []
    items = p.items
    i = 0
    while i < len(items):
        item = items[i]
        if isinstance(item, Label):
            lines.append(f"{item.name}:")
        elif isinstance(item, Section):
            lines.append(item.name)
        elif isinstance(item, Directive):
            if item.name == ".asciz":
                lines.append(f"    .asciz {_quote(item.values[0])}")
            else:
                fmt = hex if item.name == ".word" else str
                lines.append(f"    {item.name} " + ", ".join(fmt(v) for v in item.values))
        else:
            text = None
            if fold_pseudos:
                nxt = items[i + 1] if i + 1 < len(items) else None
                if isinstance(nxt, Instruction):
                    text = _fold_pair(item, nxt)
                    if text:
                        i += 1
                if text is None:
                    text = _fold_one(item)
            lines.append("    " + (text or format_instruction(item)))
        i += 1
    return "\n".join(lines) + ("\n" if lines else "")


# -- sizes and layout ------------------------------------------------------

def text_bytes(p: Program) -> int:
    return 4 * sum(1 for it in p.items if isinstance(it, Instruction))


def data_bytes(p: Program) -> int:
    return sum(it.size for it in p.items if isinstance(it, Directive))


def code_size_bytes(p: Program) -> int:
    """Memory footprint: 4 bytes per real instruction plus directive payload."""
    return text_bytes(p) + data_bytes(p)


@dataclass
class Layout:
    text: bytes
    data: bytes
    addresses: dict[str, int]
    text_base: int = TEXT_BASE
    data_base: int = DATA_BASE


def _addresses(p: Program, text_base: int, data_base: int) -> dict[str, int]:
    addresses: dict[str, int] = {}
    pending: list[str] = []
    section = ".text"
    pc, dp = text_base, data_base
    for item in p.items:
        if isinstance(item, Label):
            pending.append(item.name)
            continue
        if isinstance(item, Section):
            here = pc if section == ".text" else dp
            addresses.update((n, here) for n in pending)
            pending.clear()
            section = item.name
            continue
        if isinstance(item, Instruction):
            addresses.update((n, pc) for n in pending)
            pc += 4
        else:
            if item.name == ".word" and dp % 4:
                dp += 4 - dp % 4
            addresses.update((n, dp) for n in pending)
            dp += item.size
        pending.clear()
    here = pc if section == ".text" else dp
    addresses.update((n, here) for n in pending)
    return addresses


def layout(p: Program, text_base: int = TEXT_BASE, data_base: int = DATA_BASE) -> Layout:
    """Assign addresses and encode the program into text and data images."""
    addresses = _addresses(p, text_base, data_base)
    text = bytearray()
    data = bytearray()
    for item in p.items:
        if isinstance(item, Instruction):
            pc = text_base + len(text)
            text += struct.pack("<I", encode_instruction(item, pc, addresses))
        elif isinstance(item, Directive):
            if item.name == ".word" and len(data) % 4:
                data += bytes(4 - len(data) % 4)
            data += item.to_bytes()
    return Layout(bytes(text), bytes(data), addresses, text_base, data_base)


# -- machine encoding ------------------------------------------------------

_OPC = {"R": 0x33, "I": 0x13, "L": 0x03, "S": 0x23, "B": 0x63, "lui": 0x37, "auipc": 0x17, "jal": 0x6F, "jalr": 0x67}
_F3 = {
    "add": 0, "sub": 0, "sll": 1, "xor": 4, "srl": 5, "sra": 5, "or": 6, "and": 7, "mul": 0,
    "addi": 0, "xori": 4, "ori": 6, "andi": 7, "slli": 1, "srli": 5, "srai": 5,
    "lb": 0, "lw": 2, "lbu": 4, "sb": 0, "sw": 2,
    "beq": 0, "bne": 1, "blt": 4, "bge": 5, "bltu": 6, "bgeu": 7,
}
_F7 = {"sub": 0x20, "sra": 0x20, "mul": 0x01, "srai": 0x20}


def _resolved_imm(ins: Instruction, addresses: Mapping[str, int]) -> int:
    if ins.reloc == "hi":
        return hi20(addresses[ins.target])
    if ins.reloc == "lo":
        return lo12(addresses[ins.target])
    return ins.imm


def encode_instruction(ins: Instruction, pc: int, addresses: Mapping[str, int]) -> int:
    m = ins.mnemonic
    rd, rs1, rs2 = ins.rd, ins.rs1, ins.rs2
    if m in R_TYPE:
        return (_F7.get(m, 0) << 25) | (rs2 << 20) | (rs1 << 15) | (_F3[m] << 12) | (rd << 7) | _OPC["R"]
    if m in I_ARITH or m in LOADS or m == "jalr":
        imm = _resolved_imm(ins, addresses) & 0xFFF
        opc = _OPC["L"] if m in LOADS else _OPC["jalr"] if m == "jalr" else _OPC["I"]
        return (imm << 20) | (rs1 << 15) | (_F3.get(m, 0) << 12) | (rd << 7) | opc
    if m in I_SHIFT:
        return (_F7.get(m, 0) << 25) | (ins.imm << 20) | (rs1 << 15) | (_F3[m] << 12) | (rd << 7) | _OPC["I"]
    if m in STORES:
        imm = ins.imm & 0xFFF
        return ((imm >> 5) << 25) | (rs2 << 20) | (rs1 << 15) | (_F3[m] << 12) | ((imm & 0x1F) << 7) | _OPC["S"]
    if m in U_TYPE:
        return (_resolved_imm(ins, addresses) << 12) | (rd << 7) | _OPC[m]
    if m in BRANCHES:
        off = addresses[ins.target] - pc
        if not -4096 <= off < 4096:
            raise AsmError(f"branch to {ins.target!r} out of range ({off} bytes)")
        o = off & 0x1FFF
        return (((o >> 12) & 1) << 31) | (((o >> 5) & 0x3F) << 25) | (rs2 << 20) | (rs1 << 15) \
            | (_F3[m] << 12) | (((o >> 1) & 0xF) << 8) | (((o >> 11) & 1) << 7) | _OPC["B"]
    if m == "jal":
        off = addresses[ins.target] - pc
        if not -(1 << 20) <= off < (1 << 20):
            raise AsmError(f"jump to {ins.target!r} out of range")
        o = off & 0x1FFFFF
        return (((o >> 20) & 1) << 31) | (((o >> 1) & 0x3FF) << 21) | (((o >> 11) & 1) << 20) \
            | (((o >> 12) & 0xFF) << 12) | (rd << 7) | _OPC["jal"]
    if m == "ecall":
        return 0x00000073
    raise AsmError(f"cannot encode {m!r}")


def decode_mnemonic(word: int) -> str | None:
    """Mnemonic of an encoded instruction word, or None if outside the subset."""
    opc, f3, f7 = word & 0x7F, (word >> 12) & 7, word >> 25
    if opc == 0x33:
        for m in R_TYPE:
            if _F3[m] == f3 and _F7.get(m, 0) == f7:
                return m
        return None
    if opc == 0x13:
        if f3 == 1:
            return "slli" if f7 == 0 else None
        if f3 == 5:
            return {0: "srli", 0x20: "srai"}.get(f7)
        return {0: "addi", 4: "xori", 6: "ori", 7: "andi"}.get(f3)
    if opc == 0x03:
        return {0: "lb", 2: "lw", 4: "lbu"}.get(f3)
    if opc == 0x23:
        return {0: "sb", 2: "sw"}.get(f3)
    if opc == 0x63:
        return {0: "beq", 1: "bne", 4: "blt", 5: "bge", 6: "bltu", 7: "bgeu"}.get(f3)
    if opc == 0x37:
        return "lui"
    if opc == 0x17:
        return "auipc"
    if opc == 0x6F:
        return "jal"
    if opc == 0x67 and f3 == 0:
        return "jalr"
    if word == 0x73:
        return "ecall"
    return None


def program_from_items(items: Iterable[Item]) -> Program:
    return Program(tuple(items))


def rename_labels(p: Program, mapping: Mapping[str, str]) -> Program:
    """Return ``p`` with labels (and every reference to them) renamed."""
    out: list[Item] = []
    for item in p.items:
        if isinstance(item, Label):
            out.append(Label(mapping.get(item.name, item.name)))
        elif isinstance(item, Instruction) and item.target is not None:
            out.append(Instruction(item.mnemonic, item.rd, item.rs1, item.rs2, item.imm,
                                   mapping.get(item.target, item.target), item.reloc))
        else:
            out.append(item)
    return Program(tuple(out))


__all__: Sequence[str] = [
    "AsmError", "Instruction", "Label", "Directive", "Section", "Program", "Layout",
    "parse_program", "print_program", "code_size_bytes", "text_bytes", "data_bytes",
    "layout", "encode_instruction", "decode_mnemonic", "expand_li", "rename_labels",
    "REGISTERS", "ABI_NAMES", "TEXT_BASE", "DATA_BASE",
]
