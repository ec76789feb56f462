"""RV32IM-subset emulator with an ALU split into independently failable units.

Faults act on unit *results*.  The ADD unit also computes load/store
addresses, ``jalr`` targets and branch comparisons, so an ADD fault with the
default ``scope="all"`` breaks addressing and control flow as well; with
``scope="alu"`` only the arithmetic instructions are affected.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field, replace
from typing import IO, Callable, Mapping

import numpy as np

from . import kernel
from .asm import DATA_BASE, TEXT_BASE, AsmError, Label, Program, layout

UNITS = ("MUL", "ADD", "SHIFT", "AND", "OR", "XOR")
_SLOT = {"MUL": kernel.MUL, "ADD": kernel.ADD, "SHIFT": kernel.SHIFT,
         "AND": kernel.AND, "OR": kernel.OR, "XOR": kernel.XOR}

OP_UNIT = {
    "mul": "MUL",
    "add": "ADD", "addi": "ADD", "sub": "ADD", "auipc": "ADD", "addr": "ADD", "cmp": "ADD",
    "sll": "SHIFT", "slli": "SHIFT", "srl": "SHIFT", "srli": "SHIFT", "sra": "SHIFT", "srai": "SHIFT",
    "and": "AND", "andi": "AND",
    "or": "OR", "ori": "OR",
    "xor": "XOR", "xori": "XOR",
}
# operations that run on the ADD unit's addressing/compare path
_ADDRESS_OPS = frozenset({"addr", "cmp"})

M32 = 0xFFFFFFFF
WINDOW = 1 << 20
GUARD = 0x1000  # the first page is unmapped
EXIT_SYSCALL = 93


class EmulatorError(RuntimeError):
    pass


class Trap(EmulatorError):
    def __init__(self, description: str, pc: int):
        super().__init__(description)
        self.description = description
        self.pc = pc


@dataclass(frozen=True)
class Fault:
    kind: str = "healthy"  # healthy | disabled | stuck_at | wrong_result
    bit: int = 0
    value: int = 0
    mask: int = 0
    scope: str = "all"  # ADD only: "all" or "alu"

    def __post_init__(self):
        if self.kind not in ("healthy", "disabled", "stuck_at", "wrong_result"):
            raise ValueError(f"unknown fault kind {self.kind!r}")
        if self.kind == "stuck_at" and not (0 <= self.bit <= 31 and self.value in (0, 1)):
            raise ValueError("stuck_at needs bit in 0..31 and value 0 or 1")
        if self.scope not in ("all", "alu"):
            raise ValueError(f"unknown fault scope {self.scope!r}")

    @classmethod
    def disabled(cls, scope: str = "all") -> "Fault":
        return cls("disabled", scope=scope)

    @classmethod
    def stuck_at(cls, bit: int, value: int, scope: str = "all") -> "Fault":
        return cls("stuck_at", bit=bit, value=value, scope=scope)

    @classmethod
    def wrong_result(cls, mask: int, scope: str = "all") -> "Fault":
        return cls("wrong_result", mask=mask & M32, scope=scope)

    def masks(self) -> tuple[int, int, int]:
        """(and, or, xor) masks such that faulty = ((r & and) | or) ^ xor."""
        if self.kind == "disabled":
            return 0, 0, 0
        if self.kind == "stuck_at":
            if self.value:
                return M32, 1 << self.bit, 0
            return M32 & ~(1 << self.bit), 0, 0
        if self.kind == "wrong_result":
            return M32, 0, self.mask
        return M32, 0, 0

    def apply(self, result: int) -> int:
        a, o, x = self.masks()
        return ((result & a) | o) ^ x


HEALTHY = Fault()


@dataclass(frozen=True)
class FaultConfig:
    faults: Mapping[str, Fault] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for unit, fault in dict(self.faults).items():
            if unit not in UNITS:
                raise ValueError(f"unknown unit {unit!r}")
            if fault.kind != "healthy":
                clean[unit] = fault
        object.__setattr__(self, "faults", dict(sorted(clean.items())))

    def __getitem__(self, unit: str) -> Fault:
        return self.faults.get(unit, HEALTHY)

    def __hash__(self):
        return hash(tuple(self.faults.items()))

    @classmethod
    def of(cls, **faults: Fault) -> "FaultConfig":
        return cls(faults)

    def with_fault(self, unit: str, fault: Fault) -> "FaultConfig":
        return FaultConfig({**self.faults, unit: fault})

    def merged(self, other: "FaultConfig") -> "FaultConfig":
        return FaultConfig({**self.faults, **other.faults})

    @property
    def faulty_units(self) -> frozenset[str]:
        return frozenset(self.faults)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        fa = np.full(7, M32, dtype=np.uint32)
        fo = np.zeros(7, dtype=np.uint32)
        fx = np.zeros(7, dtype=np.uint32)
        for unit, fault in self.faults.items():
            a, o, x = fault.masks()
            slots = [_SLOT[unit]]
            if unit == "ADD" and fault.scope == "all":
                slots.append(kernel.ADDR)
            for s in slots:
                fa[s], fo[s], fx[s] = a, o, x
        return fa, fo, fx

    def to_text(self) -> str:
        lines = []
        for unit, f in self.faults.items():
            parts = [f"unit={unit}", f"fault={f.kind}"]
            if f.kind == "stuck_at":
                parts += [f"bit={f.bit}", f"value={f.value}"]
            if f.kind == "wrong_result":
                parts.append(f"mask={f.mask:#010x}")
            if f.scope != "all":
                parts.append(f"scope={f.scope}")
            lines.append(" ".join(parts))
        return "\n".join(lines) + ("\n" if lines else "")


def fault_from_fields(fields: Mapping[str, object]) -> tuple[str, Fault]:
    """Build (unit, Fault) from a flat key/value mapping (config files, JSON)."""
    unit = str(fields["unit"]).upper()
    kind = str(fields.get("fault", "disabled"))
    scope = str(fields.get("scope", "all"))

    def num(key):
        v = fields.get(key, 0)
        return int(v, 0) if isinstance(v, str) else int(v)

    if unit not in UNITS:
        raise ValueError(f"unknown unit {unit!r}")
    if kind == "stuck_at":
        return unit, Fault.stuck_at(num("bit"), num("value"), scope)
    if kind == "wrong_result":
        return unit, Fault.wrong_result(num("mask"), scope)
    if kind in ("disabled", "healthy"):
        return unit, Fault(kind, scope=scope)
    raise ValueError(f"unknown fault kind {kind!r}")


_KV = re.compile(r"(\w+)=(\S+)")


def parse_fault_config(text: str) -> FaultConfig:
    """Parse the line format ``unit=MUL fault=stuck_at bit=3 value=1``."""
    faults: dict[str, Fault] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = dict(_KV.findall(line))
        if "unit" not in fields:
            raise ValueError(f"line {lineno}: missing unit=")
        try:
            unit, fault = fault_from_fields(fields)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        if unit in faults:
            raise ValueError(f"line {lineno}: second fault for unit {unit}")
        faults[unit] = fault
    return FaultConfig(faults)


def _oracle_compute(op: str, a: int, b: int) -> int:
    a &= M32
    b &= M32
    if op in ("add", "addi", "auipc", "addr"):
        return (a + b) & M32
    if op in ("sub", "cmp"):
        return (a - b) & M32
    if op == "mul":
        return (a * b) & M32
    sh = b & 31
    if op in ("sll", "slli"):
        return (a << sh) & M32
    if op in ("srl", "srli"):
        return a >> sh
    if op in ("sra", "srai"):
        signed = a - (1 << 32) if a >> 31 else a
        return (signed >> sh) & M32
    if op in ("and", "andi"):
        return a & b
    if op in ("or", "ori"):
        return a | b
    if op in ("xor", "xori"):
        return a ^ b
    raise ValueError(f"{op!r} is not an ALU operation")


def alu_execute(op: str, a: int, b: int, faults: FaultConfig = FaultConfig()) -> int:
    """Result of ALU operation ``op`` on words ``a`` and ``b`` under ``faults``.

    ``op`` is an instruction mnemonic, ``"addr"`` (address generation) or
    ``"cmp"`` (branch comparison, i.e. ``a - b``).  Faults are silent.
    """
    unit = OP_UNIT.get(op)
    if unit is None:
        raise ValueError(f"{op!r} is not an ALU operation")
    result = _oracle_compute(op, a, b)
    fault = faults[unit]
    if op in _ADDRESS_OPS and fault.scope != "all":
        return result
    return fault.apply(result)


@dataclass(frozen=True)
class CostModel:
    alu: int = 1
    mul: int = 5
    branch_taken: int = 2
    branch_not_taken: int = 1
    jump: int = 2
    load: int = 2
    store: int = 2
    system: int = 1

    def __post_init__(self):
        for name, v in self.__dict__.items():
            if int(v) < 1:
                raise ValueError(f"cost {name} must be >= 1")

    def array(self) -> np.ndarray:
        a = np.zeros(8, dtype=np.uint32)
        a[kernel.C_ALU], a[kernel.C_MUL] = self.alu, self.mul
        a[kernel.C_TAKEN], a[kernel.C_NOT_TAKEN] = self.branch_taken, self.branch_not_taken
        a[kernel.C_JUMP], a[kernel.C_LOAD], a[kernel.C_STORE] = self.jump, self.load, self.store
        a[kernel.C_SYSTEM] = self.system
        return a


DEFAULT_COST = CostModel()


@dataclass
class MachineState:
    regs: np.ndarray
    pc: int
    mem: bytearray
    cycles: int = 0
    retired: int = 0
    halted: bool = False
    exit_code: int | None = None
    trap: str | None = None
    addresses: dict = field(default_factory=dict)
    mem_lo: int = GUARD

    @property
    def mem_hi(self) -> int:
        return len(self.mem)

    def copy(self) -> "MachineState":
        return replace(self, regs=self.regs.copy(), mem=bytearray(self.mem), addresses=dict(self.addresses))

    def reg(self, index: int) -> int:
        return int(self.regs[index])

    def read_word(self, addr: int) -> int:
        return int.from_bytes(self.mem[addr:addr + 4], "little")

    def read_bytes(self, addr: int, n: int) -> bytes:
        return bytes(self.mem[addr:addr + n])


@dataclass
class RunResult:
    state: MachineState
    cycles: int
    retired: int
    reason: str  # ecall-exit | cycle-limit | trap
    trap: str | None = None

    @property
    def exit_code(self) -> int | None:
        return self.state.exit_code


def load(p: Program, entry: str = "main", window: int = WINDOW) -> MachineState:
    """Lay out ``p`` (text at 0x1000, data at 0x10000) in a fresh machine."""
    if entry not in p.symbols:
        raise EmulatorError(f"entry label {entry!r} not found")
    try:
        img = layout(p)
    except AsmError as exc:
        raise EmulatorError(str(exc)) from None
    if TEXT_BASE + len(img.text) > DATA_BASE:
        raise EmulatorError(f"text of {len(img.text)} bytes overflows into the data region")
    if DATA_BASE + len(img.data) > window - 0x1000:
        raise EmulatorError(f"data of {len(img.data)} bytes does not fit the {window:#x} byte window")
    mem = bytearray(window)
    mem[TEXT_BASE:TEXT_BASE + len(img.text)] = img.text
    mem[DATA_BASE:DATA_BASE + len(img.data)] = img.data
    regs = np.zeros(32, dtype=np.uint32)
    regs[2] = window  # sp
    return MachineState(regs=regs, pc=img.addresses[entry], mem=mem, addresses=img.addresses)


_TRAP_TEXT = {
    kernel.ST_MISALIGNED: "misaligned access at {:#x}",
    kernel.ST_ACCESS: "access fault at {:#x}",
    kernel.ST_ILLEGAL: "illegal instruction {:#010x}",
    kernel.ST_ECALL: "unsupported ecall {}",
}


def _execute(s: MachineState, faults: FaultConfig, cost: CostModel, max_cycles: int,
             max_instret: int, trace, backend) -> tuple[str, str | None]:
    if s.halted:
        raise EmulatorError("machine is halted")
    impl = kernel.backend(backend) if backend else None
    if trace is not None and impl is None:
        impl = kernel.backend("python")
    run_kernel = impl.run_kernel if impl is not None else kernel.run_kernel
    fa, fo, fx = faults.arrays()
    pc, cycles, retired, status, info = run_kernel(
        s.mem, s.regs, s.pc, s.cycles, max_cycles, max_instret,
        fa, fo, fx, cost.array(), s.mem_lo, s.mem_hi, trace)
    s.pc, s.retired = int(pc), s.retired + int(retired)
    s.cycles = int(cycles)
    if status == kernel.ST_LIMIT:
        return "cycle-limit", None
    s.halted = True
    if status == kernel.ST_EXIT:
        s.exit_code = int(info)
        return "ecall-exit", None
    s.trap = _TRAP_TEXT[status].format(int(info))
    return "trap", s.trap


def step(s: MachineState, faults: FaultConfig = FaultConfig(), cost: CostModel = DEFAULT_COST,
         trace=None, backend: str | None = None) -> MachineState:
    """Retire one instruction, updating ``s`` in place (and returning it).

    Raises :class:`Trap` if the instruction traps.
    """
    reason, trap = _execute(s, faults, cost, 1 << 62, 1, trace, backend)
    if reason == "trap":
        raise Trap(trap, s.pc)
    return s


def run(s: MachineState, faults: FaultConfig = FaultConfig(), cost: CostModel = DEFAULT_COST,
        max_cycles: int = 10_000_000, trace=None, backend: str | None = None) -> RunResult:
    """Run until ecall exit, a trap, or ``max_cycles`` more cycles have elapsed."""
    if max_cycles <= 0:
        raise ValueError("max_cycles must be positive")
    start_cycles, start_retired = s.cycles, s.retired
    reason, trap = _execute(s, faults, cost, max_cycles, 1 << 62, trace, backend)
    return RunResult(s, s.cycles - start_cycles, s.retired - start_retired, reason, trap)


class TraceWriter:
    """Callback writing ``cycle,pc,mnemonic,rd,value`` CSV rows."""

    def __init__(self, fh: IO[str]):
        self.writer = csv.writer(fh, lineterminator="\n")
        self.writer.writerow(["cycle", "pc", "mnemonic", "rd", "value"])

    def __call__(self, cycle, pc, kind, rd, value):
        self.writer.writerow([cycle, f"{pc:#x}", kernel.KIND_NAMES[kind], rd, f"{value:#x}"])


class TraceRecorder:
    """Callback collecting trace rows in memory (tests, loop counting)."""

    def __init__(self):
        self.rows: list[tuple[int, int, str, int, int]] = []

    def __call__(self, cycle, pc, kind, rd, value):
        self.rows.append((cycle, pc, kernel.KIND_NAMES[kind], rd, value))


def entry_points(p: Program) -> list[str]:
    return [it.name for it in p.items if isinstance(it, Label)]


TraceCallback = Callable[[int, int, int, int, int], None]
