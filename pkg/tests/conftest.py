import os

import numpy as np
from hypothesis import HealthCheck, settings

from faultline import emulator as em
from faultline.asm import DATA_BASE, Program, parse_program

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

M32 = 0xFFFFFFFF

# filled by tests/test_acceptance.py, printed at the end of the session
CRITERIA: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, text = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {text}")


def batch_program(body: str, pairs, imm_only: bool = False) -> Program:
    """A program applying ``body`` to every (a, b) pair in data.

    ``body`` reads a0/a1 and leaves its result in a2; results are stored to
    ``results`` and the last one is also the exit code.
    """
    n = len(pairs)
    code = f"""
.text
main:
    la s0, ops_a
    la s1, ops_b
    la s2, results
    li s3, {n}
loop:
    lw a0, 0(s0)
    lw a1, 0(s1)
{body}
    sw a2, 0(s2)
    addi s0, s0, 4
    addi s1, s1, 4
    addi s2, s2, 4
    addi s3, s3, -1
    bne s3, zero, loop
    mv a0, a2
    li a7, 93
    ecall
"""
    a = ", ".join(str(int(x) & M32) for x, _ in pairs)
    b = ", ".join(str(int(y) & M32) for _, y in pairs)
    zeros = ", ".join("0" for _ in pairs)
    return parse_program(code + f".data\nops_a: .word {a}\nops_b: .word {b}\nresults: .word {zeros}\n")


def run_batch(p: Program, faults=em.FaultConfig(), backend=None) -> tuple[np.ndarray, em.RunResult]:
    s = em.load(p)
    res = em.run(s, faults, max_cycles=2_000_000_000, backend=backend)
    assert res.reason == "ecall-exit", res.trap
    addr = s.addresses["results"]
    n = len(p.items[p.symbols["results"] + 1].values)
    out = np.frombuffer(bytes(s.mem[addr:addr + 4 * n]), dtype="<u4").astype(np.uint64)
    return out, res


EDGE_PAIRS = [(a, b) for a in (0, 1, -1 & M32, 0x7FFFFFFF, 0x80000000, 0xFFFFFFFF)
              for b in (0, 1, -1 & M32, 0x7FFFFFFF, 0x80000000, 0xFFFFFFFF)]


def random_pairs(seed: int, n: int) -> list[tuple[int, int]]:
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 1 << 32, n, dtype=np.uint64)
    b = rng.integers(0, 1 << 32, n, dtype=np.uint64)
    # mix in short operands so carry chains and multiplier lengths vary
    short = rng.random(n) < 0.25
    b[short] &= 0xFF
    return list(zip(a.tolist(), b.tolist())) + EDGE_PAIRS


def host(op: str, a: int, b: int) -> int:
    """Two's-complement reference written independently of the emulator."""
    sa = np.int64(np.int32(np.uint32(a)))
    sb = np.int64(np.int32(np.uint32(b)))
    if op == "mul":
        return int((sa * sb) & M32)
    if op == "add":
        return int((sa + sb) & M32)
    if op == "sub":
        return int((sa - sb) & M32)
    if op == "and":
        return a & b
    if op == "or":
        return a | b
    if op == "xor":
        return a ^ b
    if op == "sll":
        return (a << (b % 32)) % (1 << 32)
    if op == "srl":
        return a // (1 << (b % 32))
    if op == "sra":
        return int(np.int64(sa >> (b % 32)) & M32)
    raise ValueError(op)


__all__ = ["batch_program", "run_batch", "random_pairs", "host", "EDGE_PAIRS", "M32", "DATA_BASE", "CRITERIA"]
