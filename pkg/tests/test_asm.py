import pytest
from hypothesis import given, strategies as st

from faultline import benchmarks as bm
from faultline.asm import (BRANCHES, I_ARITH, I_SHIFT, LOADS, R_TYPE, STORES, AsmError, Directive, Instruction,
                           Label, Program, Section, code_size_bytes, decode_mnemonic, encode_instruction, layout,
                           parse_program, print_program, rename_labels)


def test_r_type_fields():
    p = parse_program("add t0, t1, t2")
    assert p.items == (Instruction("add", rd=5, rs1=6, rs2=7),)


def test_label_and_branch():
    p = parse_program("loop: bne t2, zero, loop")
    assert p.items == (Label("loop"), Instruction("bne", rs1=7, rs2=0, target="loop"))
    assert p.symbols == {"loop": 0}


def test_x_names_match_abi_names():
    assert parse_program("add x5, x6, x7") == parse_program("add t0, t1, t2")


def test_comments_and_blank_lines():
    p = parse_program("# header\n\n  addi a0, zero, 1   # one\n")
    assert p.items == (Instruction("addi", rd=10, imm=1),)


@pytest.mark.parametrize("src, fragment", [
    ("mul t0, t1", "expects 3 operands"),
    ("frob t0, t1, t2", "unknown mnemonic"),
    ("a:\na:\n", "duplicate label"),
    ("beq t0, t1, nowhere", "unresolved label"),
    ("slli t0, t1, 32", "shift amount"),
    ("addi t0, t1, 4096", "out of range"),
    ("add t0, t1, q9", "unknown register"),
])
def test_errors(src, fragment):
    with pytest.raises(AsmError, match=fragment):
        parse_program(src)


def test_error_carries_line_number():
    with pytest.raises(AsmError) as info:
        parse_program("nop\nnop\nbogus t0\n")
    assert info.value.lineno == 3


def test_pseudo_expansion_sizes():
    assert code_size_bytes(parse_program("li t0, 0x12345678")) == 8
    assert code_size_bytes(parse_program("li t0, -5")) == 4
    for src in ("not t0, t1", "mv t0, t1", "nop", "j here\nhere:", "ret"):
        assert code_size_bytes(parse_program(src)) == 4


def test_code_size_counts_instructions_and_data():
    src = "\n".join(["add t0, t1, t2"] * 10)
    assert code_size_bytes(parse_program(src)) == 40
    p = parse_program(".data\nx: .word 1, 2, 3\ny: .byte 1\ns: .asciz \"hi\"\n")
    assert code_size_bytes(p) == 12 + 1 + 3


def test_data_directive_needs_data_section():
    with pytest.raises(AsmError):
        parse_program(".word 1")


def test_print_empty_and_single():
    assert print_program(Program()) == ""
    text = print_program(parse_program("add t0, t1, t2"))
    assert text.count("\n") == 1


def test_fold_is_byte_identical():
    src = "main:\n  li t0, 0x12345678\n  mv a0, t0\n  not a1, a0\n  nop\n  j main\n  ret\n"
    p = parse_program(src)
    folded = print_program(p, fold_pseudos=True)
    assert "li t0, 305419896" in folded and "ret" in folded
    assert parse_program(folded) == p


@pytest.mark.parametrize("name", bm.NAMES)
def test_asset_round_trip(name):
    p = bm.program(name)
    for fold in (False, True):
        again = parse_program(print_program(p, fold_pseudos=fold))
        assert again == p
        assert print_program(again) == print_program(p)


def test_layout_places_sections():
    p = parse_program(".text\nmain: nop\n.data\nv: .byte 1\nw: .word 7\n")
    img = layout(p)
    assert img.addresses["main"] == 0x1000
    assert img.addresses["v"] == 0x10000
    assert img.addresses["w"] == 0x10004  # natural alignment


def test_branch_out_of_range():
    body = "\n".join(["nop"] * 1100)
    p = parse_program(f"top: nop\n{body}\nbeq zero, zero, top\n")
    with pytest.raises(AsmError, match="out of range"):
        layout(p)


# -- properties --------------------------------------------------------------

REG = st.integers(0, 31)
LABELS = ["l0", "l1", "l2"]


@st.composite
def instructions(draw):
    kind = draw(st.sampled_from(["r", "i", "shift", "load", "store", "lui", "branch", "jal", "jalr", "ecall"]))
    if kind == "r":
        return Instruction(draw(st.sampled_from(R_TYPE)), draw(REG), draw(REG), draw(REG))
    if kind == "i":
        return Instruction(draw(st.sampled_from(I_ARITH)), draw(REG), draw(REG), imm=draw(st.integers(-2048, 2047)))
    if kind == "shift":
        return Instruction(draw(st.sampled_from(I_SHIFT)), draw(REG), draw(REG), imm=draw(st.integers(0, 31)))
    if kind == "load":
        return Instruction(draw(st.sampled_from(LOADS)), draw(REG), draw(REG), imm=draw(st.integers(-2048, 2047)))
    if kind == "store":
        return Instruction(draw(st.sampled_from(STORES)), rs1=draw(REG), rs2=draw(REG),
                           imm=draw(st.integers(-2048, 2047)))
    if kind == "lui":
        return Instruction(draw(st.sampled_from(["lui", "auipc"])), draw(REG), imm=draw(st.integers(0, 0xFFFFF)))
    if kind == "branch":
        return Instruction(draw(st.sampled_from(BRANCHES)), rs1=draw(REG), rs2=draw(REG),
                           target=draw(st.sampled_from(LABELS)))
    if kind == "jal":
        return Instruction("jal", draw(REG), target=draw(st.sampled_from(LABELS)))
    if kind == "jalr":
        return Instruction("jalr", draw(REG), draw(REG), imm=draw(st.integers(-2048, 2047)))
    return Instruction("ecall")


@st.composite
def programs(draw):
    body = draw(st.lists(instructions(), max_size=30))
    items = [Section(".text")]
    cuts = sorted(draw(st.lists(st.integers(0, len(body)), min_size=3, max_size=3)))
    last = 0
    for name, cut in zip(LABELS, cuts):
        items += body[last:cut] + [Label(name)]
        last = cut
    items += body[last:]
    if draw(st.booleans()):
        words = draw(st.lists(st.integers(0, 0xFFFFFFFF), min_size=1, max_size=4))
        items += [Section(".data"), Label("table"), Directive(".word", tuple(words)),
                  Directive(".byte", tuple(draw(st.lists(st.integers(0, 255), max_size=4))) or (0,))]
    return Program(tuple(items))


@given(programs(), st.booleans())
def test_round_trip(p, fold):
    assert parse_program(print_program(p, fold_pseudos=fold)) == p


@given(programs())
def test_parse_is_deterministic(p):
    text = print_program(p)
    assert parse_program(text) == parse_program(text)


@given(programs())
def test_code_size_invariant_under_renaming(p):
    renamed = rename_labels(p, {name: f"renamed_{name}_x" for name in p.symbols})
    assert code_size_bytes(renamed) == code_size_bytes(p)
    assert print_program(renamed) != print_program(p) or not p.symbols


@given(instructions())
def test_encode_decode_mnemonic(ins):
    addresses = {name: 0x1000 for name in LABELS}
    word = encode_instruction(ins, 0x1000, addresses)
    assert 0 <= word < 1 << 32
    assert decode_mnemonic(word) == ins.mnemonic
