import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import M32, host
from faultline import benchmarks as bm, emulator as em, kernel
from faultline.asm import I_ARITH, I_SHIFT, R_TYPE, Instruction, Label, Program, Section, parse_program

HEALTHY = em.FaultConfig()


def machine(src: str, **regs) -> em.MachineState:
    s = em.load(parse_program(src))
    for name, value in regs.items():
        s.regs[int(name[1:])] = value & M32
    return s


# -- load -------------------------------------------------------------------------

def test_load_layout():
    s = em.load(parse_program(".text\nmain: nop\n"))
    assert s.pc == 0x1000 and s.reg(2) == em.WINDOW and s.cycles == 0
    s = em.load(parse_program("main: nop\n.data\nv: .word 1, 2, 3\n"))
    assert s.read_bytes(0x10000, 12) == bytes([1, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0])


def test_load_errors():
    with pytest.raises(em.EmulatorError, match="entry"):
        em.load(parse_program("start: nop"))
    big = "main:\n" + "nop\n" * 0x4000
    with pytest.raises(em.EmulatorError, match="overflows"):
        em.load(parse_program(big))


# -- ALU --------------------------------------------------------------------------

def test_alu_examples():
    assert em.alu_execute("mul", 6, 7) == 42
    assert em.alu_execute("mul", 6, 7, em.FaultConfig({"MUL": em.Fault.disabled()})) == 0
    stuck = em.FaultConfig({"ADD": em.Fault.stuck_at(31, 0)})
    assert em.alu_execute("add", 0x7FFFFFFF, 1, stuck) == 0
    assert em.alu_execute("or", 0, 0, em.FaultConfig({"OR": em.Fault.stuck_at(3, 1)})) == 8
    assert em.alu_execute("xor", 5, 5, em.FaultConfig({"XOR": em.Fault.wrong_result(0xF0)})) == 0xF0


def test_alu_address_scope():
    alu_only = em.FaultConfig({"ADD": em.Fault.disabled(scope="alu")})
    assert em.alu_execute("add", 2, 2, alu_only) == 0
    assert em.alu_execute("addr", 0x10000, 4, alu_only) == 0x10004
    assert em.alu_execute("addr", 0x10000, 4, em.FaultConfig({"ADD": em.Fault.disabled()})) == 0


def test_alu_random_triples_match_oracle():
    rng = np.random.default_rng(3)
    ops = ["mul", "add", "sub", "and", "or", "xor", "sll", "srl", "sra"]
    for _ in range(10_000):
        op = ops[rng.integers(len(ops))]
        a, b = (int(x) for x in rng.integers(0, 1 << 32, 2, dtype=np.uint64))
        assert em.alu_execute(op, a, b) == host(op, a, b), (op, a, b)


@given(st.sampled_from(em.UNITS), st.integers(0, 31), st.integers(0, 1), st.integers(0, M32), st.integers(0, M32))
def test_stuck_at_forces_one_bit(unit, bit, value, a, b):
    op = {"MUL": "mul", "ADD": "add", "SHIFT": "sll", "AND": "and", "OR": "or", "XOR": "xor"}[unit]
    good = em.alu_execute(op, a, b)
    bad = em.alu_execute(op, a, b, em.FaultConfig({unit: em.Fault.stuck_at(bit, value)}))
    assert (bad >> bit) & 1 == value
    assert bad & ~(1 << bit) == good & ~(1 << bit)


# -- fault config -----------------------------------------------------------------

def test_fault_config_text():
    fc = em.parse_fault_config("unit=MUL fault=stuck_at bit=3 value=1\n# note\nunit=ADD fault=disabled scope=alu\n"
                               "unit=XOR fault=wrong_result mask=0xff\n")
    assert fc["MUL"] == em.Fault.stuck_at(3, 1)
    assert fc["ADD"].scope == "alu"
    assert fc["XOR"].mask == 0xFF
    assert fc["SHIFT"] == em.HEALTHY
    assert em.parse_fault_config(fc.to_text()) == fc


@pytest.mark.parametrize("text", ["unit=MUL fault=bogus", "unit=FPU fault=disabled", "fault=disabled",
                                  "unit=MUL\nunit=MUL fault=disabled", "unit=ADD fault=stuck_at bit=40 value=1"])
def test_fault_config_errors(text):
    with pytest.raises(ValueError):
        em.parse_fault_config(text)


# -- step / run ---------------------------------------------------------------------

def test_step_addi():
    s = machine("main: addi t0, zero, 5\n")
    em.step(s)
    assert s.reg(5) == 5 and s.cycles == 1 and s.pc == 0x1004


def test_step_branch_costs():
    s = machine("main: beq zero, zero, main\n")
    em.step(s)
    assert s.cycles == 2 and s.pc == 0x1000
    s = machine("main: bne zero, zero, main\n")
    em.step(s)
    assert s.cycles == 1 and s.pc == 0x1004


@pytest.mark.parametrize("src, what", [
    ("main: lw t0, 0(zero)\n", "access fault"),
    ("main: lui t0, 0x10\n lw t1, 2(t0)\n", "misaligned"),
    ("main: lui t0, 0x100\n sw t0, 0(t0)\n", "access fault"),
])
def test_traps(src, what):
    s = machine(src)
    with pytest.raises(em.Trap, match=what):
        for _ in range(3):
            em.step(s)


def test_illegal_instruction_word():
    s = machine("main: nop\n")
    s.mem[0x1000:0x1004] = (0xFFFFFFFF).to_bytes(4, "little")
    res = em.run(s)
    assert res.reason == "trap" and "illegal" in res.trap


def test_infinite_loop_hits_limit():
    s = machine("main: j main\n")
    res = em.run(s, max_cycles=1000)
    assert res.reason == "cycle-limit" and 1000 <= res.cycles < 1000 + 2


def test_add_fault_breaks_addressing_and_compares():
    src = "main:\n li a1, 7\n li a2, 7\n beq a1, a2, same\n li a0, 1\n li a7, 93\n ecall\nsame:\n li a0, 2\n li a7, 93\n ecall\n"
    s = em.load(parse_program(src))
    assert em.run(s).exit_code == 2
    s = em.load(parse_program(src))
    em.run(s, em.FaultConfig({"ADD": em.Fault.stuck_at(0, 1, scope="all")}))
    # li itself goes through ADD; with scope="all" the comparison is corrupted too
    assert s.halted


def test_mac_fault_free_and_faulty():
    s = em.load(bm.program("mac"))
    res = em.run(s)
    assert res.exit_code == bm.expected("mac").exit_code
    s = em.load(bm.program("mac"))
    em.run(s, em.FaultConfig({"MUL": em.Fault.disabled()}))
    assert s.exit_code != bm.expected("mac").exit_code


def test_trace_csv():
    buf = io.StringIO()
    s = machine("main: addi t0, zero, 5\n li a7, 93\n ecall\n")
    em.run(s, trace=em.TraceWriter(buf))
    lines = buf.getvalue().splitlines()
    assert lines[0] == "cycle,pc,mnemonic,rd,value"
    assert lines[1] == "1,0x1000,addi,5,0x5"
    assert len(lines) == 4


# -- properties ------------------------------------------------------------------------

ALU_UNIT = {m: em.OP_UNIT[m] for m in R_TYPE + I_ARITH + I_SHIFT}


@st.composite
def alu_programs(draw, avoid=None):
    pool = [m for m in ALU_UNIT if ALU_UNIT[m] != avoid]
    n = draw(st.integers(1, 25))
    body = []
    for _ in range(n):
        m = draw(st.sampled_from(pool + ["lui"]))
        rd = draw(st.integers(0, 31))
        if rd == 17:
            rd = 0  # keep a7 for the exit call
        if m in R_TYPE:
            body.append(Instruction(m, rd, draw(st.integers(0, 31)), draw(st.integers(0, 31))))
        elif m in I_SHIFT:
            body.append(Instruction(m, rd, draw(st.integers(0, 31)), imm=draw(st.integers(0, 31))))
        elif m == "lui":
            body.append(Instruction("lui", rd, imm=draw(st.integers(0, 0xFFFFF))))
        else:
            body.append(Instruction(m, rd, draw(st.integers(0, 31)), imm=draw(st.integers(-2048, 2047))))
    regs = draw(st.lists(st.integers(0, M32), min_size=32, max_size=32))
    return Program((Section(".text"), Label("main"), *body, Instruction("ecall"))), regs


def _start(p, regs):
    s = em.load(p)
    s.regs[:] = np.array(regs, dtype=np.uint32)
    s.regs[0] = 0
    s.regs[17] = 93
    return s


@given(alu_programs())
def test_x0_stays_zero_and_cycles_monotone(case):
    p, regs = case
    s = _start(p, regs)
    last_cycles, last_retired = 0, 0
    while not s.halted:
        em.step(s)
        assert s.regs[0] == 0
        assert s.pc % 4 == 0
        assert s.cycles > last_cycles and s.retired == last_retired + 1
        last_cycles, last_retired = s.cycles, s.retired
    assert s.cycles >= s.retired


@given(st.sampled_from(em.UNITS), st.data())
def test_fault_locality(unit, data):
    p, regs = data.draw(alu_programs(avoid=unit))
    fault = data.draw(st.sampled_from([em.Fault.disabled(), em.Fault.stuck_at(7, 1), em.Fault.wrong_result(0xA5A5)]))
    a, b = _start(p, regs), _start(p, regs)
    em.run(a)
    em.run(b, em.FaultConfig({unit: fault}))
    assert np.array_equal(a.regs, b.regs) and a.cycles == b.cycles


@pytest.mark.skipif("cython" not in kernel.available_backends(), reason="compiled kernel not built")
@given(alu_programs(), st.sampled_from(em.UNITS), st.integers(0, M32))
def test_backends_agree_on_random_programs(case, unit, mask):
    p, regs = case
    faults = em.FaultConfig({unit: em.Fault.wrong_result(mask)})
    a, b = _start(p, regs), _start(p, regs)
    ra = em.run(a, faults, backend="python")
    rb = em.run(b, faults, backend="cython")
    assert np.array_equal(a.regs, b.regs)
    assert (a.pc, a.cycles, a.retired, ra.reason) == (b.pc, b.cycles, b.retired, rb.reason)


@pytest.mark.skipif("cython" not in kernel.available_backends(), reason="compiled kernel not built")
@pytest.mark.parametrize("name", bm.NAMES)
@pytest.mark.parametrize("faults", [
    em.FaultConfig(),
    em.FaultConfig({"MUL": em.Fault.disabled()}),
    em.FaultConfig({"ADD": em.Fault.stuck_at(4, 1)}),
    em.FaultConfig({"AND": em.Fault.wrong_result(0x10), "SHIFT": em.Fault.stuck_at(0, 1)}),
])
def test_backends_agree_on_benchmarks(name, faults):
    for v, p in bm.variants(name).items():
        a, b = em.load(p), em.load(p)
        ra = em.run(a, faults, max_cycles=300_000, backend="python")
        rb = em.run(b, faults, max_cycles=300_000, backend="cython")
        assert (ra.reason, ra.trap, a.pc, a.cycles, a.retired) == (rb.reason, rb.trap, b.pc, b.cycles, b.retired)
        assert np.array_equal(a.regs, b.regs) and a.mem == b.mem


def test_pure_python_fallback_selected_by_env(monkeypatch):
    import importlib
    monkeypatch.setenv("FAULTLINE_PURE_PYTHON", "1")
    k = importlib.reload(kernel)
    try:
        assert k.BACKEND == "python"
    finally:
        monkeypatch.delenv("FAULTLINE_PURE_PYTHON")
        importlib.reload(kernel)
