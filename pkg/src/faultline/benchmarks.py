"""Shipped benchmark programs, their host-side oracles, and pre-generated variants."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Callable

from .asm import Directive, Label, Program, Section, parse_program
from .resynth import all_variants

ALIASES = {"rs": "rs_encode"}


@dataclass(frozen=True)
class Expected:
    exit_code: int
    memory: dict  # data label -> expected bytes at that label


def canonical_name(name: str) -> str:
    name = ALIASES.get(name, name)
    if name not in ORACLES:
        raise KeyError(f"unknown benchmark {name!r}; choose from {', '.join(sorted(ORACLES))}")
    return name


def source(name: str) -> str:
    name = canonical_name(name)
    return resources.files("faultline.assets").joinpath(f"{name}.s").read_text("utf-8")


@lru_cache(maxsize=None)
def program(name: str) -> Program:
    return parse_program(source(name))


@lru_cache(maxsize=None)
def variants(name: str) -> dict[str, Program]:
    return all_variants(program(canonical_name(name)))


def data_values(p: Program, label: str) -> list:
    """Values of the data directives following ``label`` up to the next label."""
    start = p.symbols[label] + 1
    values: list = []
    for item in p.items[start:]:
        if isinstance(item, (Label, Section)):
            break
        if isinstance(item, Directive):
            values.extend(item.values)
    return values


# -- MAC ---------------------------------------------------------------------

MAC_ROUNDS = 32
MAC_MASK = 0xFFF


def mac_oracle(p: Program) -> Expected:
    a, b = data_values(p, "vec_a"), data_values(p, "vec_b")
    acc = 0
    for rnd in range(MAC_ROUNDS):
        for x, y in zip(a, b):
            acc = (acc + (((x * y) + rnd) & MAC_MASK)) & 0xFFFFFFFF
    return Expected(acc, {})


# -- Reed-Solomon -------------------------------------------------------------

RS_N, RS_K = 15, 11
RS_POLY = 0x11D


def gf_mul(a: int, b: int) -> int:
    """Carry-less multiply then reduce modulo the field polynomial."""
    prod = 0
    while b:
        if b & 1:
            prod ^= a
        a <<= 1
        b >>= 1
    for bit in range(14, 7, -1):
        if prod >> bit & 1:
            prod ^= RS_POLY << (bit - 8)
    return prod


def rs_generator(nsym: int = RS_N - RS_K) -> list[int]:
    """Generator coefficients, highest degree first, roots alpha^0..alpha^(nsym-1)."""
    g = [1]
    root = 1
    for _ in range(nsym):
        nxt = g + [0]
        for j, c in enumerate(g):
            nxt[j + 1] ^= gf_mul(c, root)
        g = nxt
        root = gf_mul(root, 2)
    return g


def rs_parity(msg: list[int], nsym: int = RS_N - RS_K) -> list[int]:
    """Remainder of msg(x) * x^nsym divided by the generator, highest degree first."""
    g = rs_generator(nsym)
    rem = list(msg) + [0] * nsym
    for i in range(len(msg)):
        coef = rem[i]
        if coef:
            for j in range(1, len(g)):
                rem[i + j] ^= gf_mul(g[j], coef)
    return rem[len(msg):]


def rs_oracle(p: Program) -> Expected:
    msgs = data_values(p, "msgs")
    out = bytearray()
    signature = 0
    for i in range(0, len(msgs), RS_K):
        msg = msgs[i:i + RS_K]
        parity = rs_parity(msg)
        out += bytes(msg + parity)
        signature ^= int.from_bytes(bytes(parity), "little")
    return Expected(signature, {"out": bytes(out)})


ORACLES: dict[str, Callable[[Program], Expected]] = {"mac": mac_oracle, "rs_encode": rs_oracle}
NAMES = tuple(sorted(ORACLES))


@lru_cache(maxsize=None)
def expected(name: str) -> Expected:
    name = canonical_name(name)
    return ORACLES[name](program(name))


def check(name: str, state) -> bool:
    """True if a halted machine holds the oracle result for ``name``."""
    exp = expected(name)
    if not state.halted or state.exit_code != exp.exit_code:
        return False
    for label, want in exp.memory.items():
        if state.read_bytes(state.addresses[label], len(want)) != want:
            return False
    return True
