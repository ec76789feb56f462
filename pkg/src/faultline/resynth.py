"""Instruction resynthesis: rewrite programs so they avoid faulty ALU units.

Three passes, each a pure ``Program -> Program`` function:

* ``mul2addshift``  ``mul`` becomes a shift-and-add loop (MUL-free)
* ``add2xorand``    ``add``/``addi``/``sub`` become xor/and carry loops (ADD-free)
* ``and2demorgan``  ``and``/``andi`` become ``~(~a | ~b)`` (AND-free)

Every pass uses statically reserved scratch registers.  Programs fed to the
passes must not keep live values in them; :func:`check_scratch` enforces
that.  The default scratch sets are disjoint, so any composition is safe.
"""

from __future__ import annotations

from collections import deque
from typing import Callable, Iterable, Sequence

from .asm import (BRANCHES, REGISTERS, Instruction, Item, Label, Program)

T3, T4, T5, T6 = (REGISTERS[r] for r in ("t3", "t4", "t5", "t6"))
S9, S10, S11 = (REGISTERS[r] for r in ("s9", "s10", "s11"))
ZERO = 0

MUL_SCRATCH = (T4, T5, T6)
ADD_SCRATCH = (T3, S11)
AND_SCRATCH = (S10, S9)
RESERVED = frozenset(MUL_SCRATCH + ADD_SCRATCH + AND_SCRATCH)

MNEMONIC_UNIT = {
    "mul": "MUL",
    "add": "ADD", "addi": "ADD", "sub": "ADD", "auipc": "ADD",
    "sll": "SHIFT", "slli": "SHIFT", "srl": "SHIFT", "srli": "SHIFT", "sra": "SHIFT", "srai": "SHIFT",
    "and": "AND", "andi": "AND", "or": "OR", "ori": "OR", "xor": "XOR", "xori": "XOR",
}
ALL_UNITS = frozenset({"MUL", "ADD", "SHIFT", "AND", "OR", "XOR"})

UNRECOVERABLE = "unrecoverable"
VARIANTS = ("V1", "V2", "V3", "V4")

# units each variant needs beyond implicit address generation
DEFAULT_REQUIREMENTS = {
    "V1": frozenset({"MUL", "ADD", "SHIFT", "AND"}),
    "V2": frozenset({"ADD", "SHIFT", "AND"}),
    "V3": frozenset({"XOR", "AND", "SHIFT"}),
    "V4": frozenset({"MUL", "ADD", "SHIFT", "OR", "XOR"}),
}


class TranslationError(ValueError):
    pass


def _ins(m, rd=0, rs1=0, rs2=0, imm=0, target=None, reloc=None) -> Instruction:
    return Instruction(m, rd=rd, rs1=rs1, rs2=rs2, imm=imm, target=target, reloc=reloc)


# -- scratch-register checking -----------------------------------------------

def _successors(items: Sequence[Item], symbols) -> list[list[int]]:
    n = len(items)
    # a return may land after any call site
    returns = [i + 1 for i, it in enumerate(items)
               if isinstance(it, Instruction) and it.mnemonic == "jal" and it.rd != 0 and i + 1 < n]
    succ: list[list[int]] = []
    for i, it in enumerate(items):
        nxt = [i + 1] if i + 1 < n else []
        if isinstance(it, Instruction):
            if it.mnemonic in BRANCHES:
                succ.append(nxt + [symbols[it.target]])
                continue
            if it.mnemonic == "jal":
                succ.append([symbols[it.target]] + (nxt if it.rd != 0 else []))
                continue
            if it.mnemonic == "jalr":
                succ.append(list(returns))
                continue
        succ.append(nxt)
    return succ


def check_scratch(p: Program, sites: Iterable[int], scratch: Sequence[int]) -> None:
    """Reject rewrites that would clobber a value the program still needs.

    A site may not name a scratch register as an operand, and no path from a
    site may read a scratch register before writing it.
    """
    sites = sorted(set(sites))
    items = p.items
    scratch = tuple(r for r in scratch if r != ZERO)
    for i in sites:
        ins = items[i]
        if ins.writes in scratch:
            raise TranslationError(f"{ins.mnemonic} at item {i}: rd aliases scratch register x{ins.writes}")
        for r in ins.reads:
            if r in scratch:
                raise TranslationError(f"{ins.mnemonic} at item {i}: operand x{r} is a scratch register")
    site_set = set(sites)
    succ = _successors(items, p.symbols)
    for r in scratch:
        seen: set[int] = set()
        queue = deque(j for i in sites for j in succ[i])
        while queue:
            j = queue.popleft()
            if j in seen:
                continue
            seen.add(j)
            it = items[j]
            if isinstance(it, Instruction):
                if j in site_set:
                    continue  # the rewrite writes its scratch before use
                if r in it.reads:
                    raise TranslationError(
                        f"scratch register x{r} is read by {it.mnemonic} at item {j} after being clobbered")
                if it.writes == r:
                    continue
            queue.extend(succ[j])


# -- pass driver ---------------------------------------------------------------

class _Labeler:
    def __init__(self, prefix: str, taken: Iterable[str]):
        self.prefix = prefix
        self.taken = set(taken)
        self.n = 0

    def site(self) -> Callable[[str], str]:
        while True:
            stem = f".L{self.prefix}{self.n}"
            self.n += 1
            if not any(name.startswith(stem + "_") for name in self.taken):
                break
        return lambda suffix: f"{stem}_{suffix}"


def _rewrite(p: Program, targets: frozenset[str], scratch: Sequence[int], prefix: str,
             expand: Callable[[Instruction, Callable[[str], str], Sequence[int]], list[Item]]) -> Program:
    sites = [i for i, it in enumerate(p.items) if isinstance(it, Instruction) and it.mnemonic in targets]
    if not sites:
        return p
    if len(set(scratch)) != len(scratch) or ZERO in scratch:
        raise TranslationError("scratch registers must be distinct and non-zero")
    check_scratch(p, sites, scratch)
    labeler = _Labeler(prefix, p.symbols)
    site_set = set(sites)
    out: list[Item] = []
    for i, item in enumerate(p.items):
        if i in site_set:
            out.extend(expand(item, labeler.site(), scratch))
        else:
            out.append(item)
    return Program(tuple(out))


# -- mul -> shift/add ------------------------------------------------------------

def _expand_mul(ins: Instruction, label, scratch) -> list[Item]:
    mcand, mplier, prod = scratch
    rd = ins.rd
    loop, skip, end = label("loop"), label("skip"), label("end")
    return [
        _ins("addi", mcand, ins.rs1),
        _ins("addi", mplier, ins.rs2),
        _ins("addi", prod, ZERO),
        _ins("beq", rs1=mplier, rs2=ZERO, target=end),
        Label(loop),
        _ins("andi", rd, mplier, imm=1),  # rd is dead until the final move
        _ins("beq", rs1=rd, rs2=ZERO, target=skip),
        _ins("add", prod, prod, mcand),
        Label(skip),
        _ins("slli", mcand, mcand, imm=1),
        _ins("srli", mplier, mplier, imm=1),
        _ins("bne", rs1=mplier, rs2=ZERO, target=loop),
        Label(end),
        _ins("addi", rd, prod),
    ]


def pass_mul_to_shift_add(p: Program, scratch: Sequence[int] = MUL_SCRATCH) -> Program:
    """Replace every ``mul rd, rs1, rs2`` with a shift-and-add loop.

    The multiplier's low bit decides whether the multiplicand is added to the
    product; the multiplicand shifts left and the multiplier shifts right
    (logically) until the multiplier is zero, so the loop body runs at most
    32 times and the low word of the product is exact.
    """
    return _rewrite(p, frozenset({"mul"}), tuple(scratch), "mul", _expand_mul)


# -- add -> xor/and ---------------------------------------------------------------

def _carry_loop(rd: int, b: int, carry: int, label, subtract: bool) -> list[Item]:
    loop, end = label("loop"), label("end")
    body: list[Item] = [_ins("beq", rs1=b, rs2=ZERO, target=end), Label(loop)]
    if subtract:
        body += [_ins("xori", carry, rd, imm=-1), _ins("and", carry, carry, b)]
    else:
        body.append(_ins("and", carry, rd, b))
    body += [
        _ins("xor", rd, rd, b),
        _ins("slli", b, carry, imm=1),
        _ins("bne", rs1=b, rs2=ZERO, target=loop),
        Label(end),
    ]
    return body


def _expand_add(ins: Instruction, label, scratch) -> list[Item]:
    b, carry = scratch
    rd, rs1 = ins.rd, ins.rs1
    if ins.mnemonic == "addi":
        if rs1 == ZERO:
            return [_ins("xori", rd, ZERO, imm=ins.imm, target=ins.target, reloc=ins.reloc)]
        if ins.imm == 0 and ins.reloc is None:
            return [_ins("xori", rd, rs1, imm=0)]
        out: list[Item] = [_ins("xori", b, ZERO, imm=ins.imm, target=ins.target, reloc=ins.reloc)]
    else:
        out = [_ins("xori", b, ins.rs2, imm=0)]
    if rd != rs1:
        out.append(_ins("xori", rd, rs1, imm=0))
    return out + _carry_loop(rd, b, carry, label, subtract=ins.mnemonic == "sub")


def pass_add_to_xor_and(p: Program, scratch: Sequence[int] = ADD_SCRATCH) -> Program:
    """Replace ``add``/``addi``/``sub`` with xor/and carry-propagation loops.

    Each iteration forms the carry-less sum with ``xor`` and the carries
    with ``and``; the carry word shifts left until it is zero (at most 32
    iterations).  ``sub`` uses the borrow form ``(~a & b) << 1``.
    Immediates are materialised with ``xori rd, zero, imm``, and moves
    become ``xori rd, rs, 0``, so the output has no ADD-unit instruction.
    """
    return _rewrite(p, frozenset({"add", "addi", "sub"}), tuple(scratch), "add", _expand_add)


# -- and -> De Morgan ---------------------------------------------------------------

def _expand_and(ins: Instruction, label, scratch) -> list[Item]:
    u, v = scratch
    if ins.mnemonic == "andi":
        second = _ins("xori", v, ZERO, imm=~ins.imm)  # ~imm of a 12-bit value is 12-bit
    else:
        second = _ins("xori", v, ins.rs2, imm=-1)
    return [
        _ins("xori", u, ins.rs1, imm=-1),
        second,
        _ins("or", u, u, v),
        _ins("xori", ins.rd, u, imm=-1),
    ]


def pass_and_to_demorgan(p: Program, scratch: Sequence[int] = AND_SCRATCH) -> Program:
    """Replace ``and``/``andi`` using a & b == ~(~a | ~b), inverting by xor with -1."""
    return _rewrite(p, frozenset({"and", "andi"}), tuple(scratch), "and", _expand_and)


PASSES: dict[str, Callable[[Program], Program]] = {
    "mul2addshift": pass_mul_to_shift_add,
    "add2xorand": pass_add_to_xor_and,
    "and2demorgan": pass_and_to_demorgan,
}

VARIANT_PASSES = {
    "V1": (),
    "V2": ("mul2addshift",),
    "V3": ("mul2addshift", "add2xorand"),
    "V4": ("and2demorgan",),
}


def apply_passes(p: Program, names: str | Sequence[str]) -> Program:
    """Apply passes left to right; ``names`` may be a comma-separated string."""
    if isinstance(names, str):
        names = [n.strip() for n in names.split(",") if n.strip()]
    for name in names:
        if name not in PASSES:
            raise TranslationError(f"unknown pass {name!r}; choose from {', '.join(PASSES)}")
        p = PASSES[name](p)
    return p


def make_variant(p: Program, variant: str) -> Program:
    if variant not in VARIANT_PASSES:
        raise TranslationError(f"unknown variant {variant!r}")
    return apply_passes(p, VARIANT_PASSES[variant])


def all_variants(p: Program) -> dict[str, Program]:
    return {v: make_variant(p, v) for v in VARIANTS}


# -- variant selection -------------------------------------------------------------

_REMOVED_BY = {"V2": {"mul"}, "V3": {"mul", "add", "addi", "sub"}, "V4": {"and", "andi"}}


def required_units(variant: str, p: Program, implicit: bool = True) -> frozenset[str]:
    """Units whose instructions appear in ``p``.

    ADD is always included when ``implicit`` is set, because address
    generation and branch comparison run on the adder whatever the program.
    """
    if variant not in VARIANTS:
        raise TranslationError(f"unknown variant {variant!r}")
    units = set()
    for ins in p.instructions():
        if ins.mnemonic in _REMOVED_BY.get(variant, ()):
            raise TranslationError(f"program still contains {ins.mnemonic}; not a {variant} translation")
        unit = MNEMONIC_UNIT.get(ins.mnemonic)
        if unit:
            units.add(unit)
    if implicit:
        units.add("ADD")
    return frozenset(units)


def select_variant(faulty: Iterable[str], requirements=None) -> str:
    """Choose the program variant for a set of faulty units.

    {} -> V1, {MUL} -> V2, anything with ADD -> V3, {AND} -> V4.  Returns
    ``UNRECOVERABLE`` when no variant fits or the chosen variant still needs
    one of the faulty units.  ``requirements`` maps variant -> unit set
    (defaults to :data:`DEFAULT_REQUIREMENTS`).
    """
    faulty = frozenset(faulty)
    unknown = faulty - ALL_UNITS
    if unknown:
        raise ValueError(f"unknown units {sorted(unknown)}")
    reqs = DEFAULT_REQUIREMENTS if requirements is None else requirements
    if not faulty:
        choice = "V1"
    elif "ADD" in faulty:
        choice = "V3"
    elif "MUL" in faulty:
        choice = "V2"
    elif faulty == {"AND"}:
        choice = "V4"
    else:
        return UNRECOVERABLE
    if reqs[choice] & faulty:
        return UNRECOVERABLE
    return choice
