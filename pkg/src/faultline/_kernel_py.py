"""Pure-Python execution kernel.

Reference semantics for the compiled ``_kernel`` extension and the backend
used whenever the extension is unavailable or an execution trace is wanted.
Both backends must agree bit-for-bit; ``tests/test_kernel_backends.py``
checks that.
"""

import numpy as np

# unit slots in the fault mask arrays
MUL, ADD, SHIFT, AND, OR, XOR, ADDR = range(7)
# cost classes
C_ALU, C_MUL, C_TAKEN, C_NOT_TAKEN, C_JUMP, C_LOAD, C_STORE, C_SYSTEM = range(8)
# termination status
ST_LIMIT, ST_EXIT, ST_MISALIGNED, ST_ACCESS, ST_ILLEGAL, ST_ECALL = range(6)

M32 = 0xFFFFFFFF

# decoded kinds
(K_ADD, K_SUB, K_SLL, K_XOR, K_SRL, K_SRA, K_OR, K_AND, K_MUL,
 K_ADDI, K_XORI, K_ORI, K_ANDI, K_SLLI, K_SRLI, K_SRAI,
 K_LB, K_LW, K_LBU, K_SB, K_SW, K_LUI, K_AUIPC,
 K_BEQ, K_BNE, K_BLT, K_BGE, K_BLTU, K_BGEU, K_JAL, K_JALR, K_ECALL) = range(32)

KIND_NAMES = (
    "add sub sll xor srl sra or and mul addi xori ori andi slli srli srai "
    "lb lw lbu sb sw lui auipc beq bne blt bge bltu bgeu jal jalr ecall"
).split()

_R = {(0, 0): K_ADD, (0, 0x20): K_SUB, (1, 0): K_SLL, (4, 0): K_XOR, (5, 0): K_SRL,
      (5, 0x20): K_SRA, (6, 0): K_OR, (7, 0): K_AND, (0, 1): K_MUL}
_BR = {0: K_BEQ, 1: K_BNE, 4: K_BLT, 5: K_BGE, 6: K_BLTU, 7: K_BGEU}

_cache: dict = {}


def _sx(v, bits):
    return v - (1 << bits) if v >> (bits - 1) & 1 else v


def decode(w):
    """Decode one word into (kind, rd, rs1, rs2, imm) or None if illegal."""
    d = _cache.get(w)
    if d is not None or w in _cache:
        return d
    opc, rd, f3 = w & 0x7F, (w >> 7) & 31, (w >> 12) & 7
    rs1, rs2, f7 = (w >> 15) & 31, (w >> 20) & 31, w >> 25
    iimm = _sx(w >> 20, 12)
    d = None
    if opc == 0x33:
        k = _R.get((f3, f7))
        if k is not None:
            d = (k, rd, rs1, rs2, 0)
    elif opc == 0x13:
        if f3 == 0:
            d = (K_ADDI, rd, rs1, 0, iimm)
        elif f3 == 4:
            d = (K_XORI, rd, rs1, 0, iimm)
        elif f3 == 6:
            d = (K_ORI, rd, rs1, 0, iimm)
        elif f3 == 7:
            d = (K_ANDI, rd, rs1, 0, iimm)
        elif f3 == 1 and f7 == 0:
            d = (K_SLLI, rd, rs1, 0, rs2)
        elif f3 == 5 and f7 == 0:
            d = (K_SRLI, rd, rs1, 0, rs2)
        elif f3 == 5 and f7 == 0x20:
            d = (K_SRAI, rd, rs1, 0, rs2)
    elif opc == 0x03:
        k = {0: K_LB, 2: K_LW, 4: K_LBU}.get(f3)
        if k is not None:
            d = (k, rd, rs1, 0, iimm)
    elif opc == 0x23:
        k = {0: K_SB, 2: K_SW}.get(f3)
        if k is not None:
            d = (k, 0, rs1, rs2, _sx((f7 << 5) | rd, 12))
    elif opc == 0x37:
        d = (K_LUI, rd, 0, 0, w & 0xFFFFF000)
    elif opc == 0x17:
        d = (K_AUIPC, rd, 0, 0, w & 0xFFFFF000)
    elif opc == 0x63:
        k = _BR.get(f3)
        if k is not None:
            imm = (((w >> 31) & 1) << 12) | (((w >> 7) & 1) << 11) | (((w >> 25) & 0x3F) << 5) | (((w >> 8) & 0xF) << 1)
            d = (k, 0, rs1, rs2, _sx(imm, 13))
    elif opc == 0x6F:
        imm = (((w >> 31) & 1) << 20) | (((w >> 12) & 0xFF) << 12) | (((w >> 20) & 1) << 11) | (((w >> 21) & 0x3FF) << 1)
        d = (K_JAL, rd, 0, 0, _sx(imm, 21))
    elif opc == 0x67 and f3 == 0:
        d = (K_JALR, rd, rs1, 0, iimm)
    elif w == 0x73:
        d = (K_ECALL, 0, 0, 0, 0)
    _cache[w] = d
    return d


def compute(kind, a, b):
    """Fault-free result of an ALU-class kind on 32-bit unsigned operands."""
    if kind == K_ADD or kind == K_ADDI or kind == K_AUIPC:
        return (a + b) & M32
    if kind == K_SUB:
        return (a - b) & M32
    if kind == K_MUL:
        return (a * b) & M32
    if kind == K_SLL or kind == K_SLLI:
        return (a << (b & 31)) & M32
    if kind == K_SRL or kind == K_SRLI:
        return a >> (b & 31)
    if kind == K_SRA or kind == K_SRAI:
        return (_sx(a, 32) >> (b & 31)) & M32
    if kind == K_AND or kind == K_ANDI:
        return a & b
    if kind == K_OR or kind == K_ORI:
        return a | b
    if kind == K_XOR or kind == K_XORI:
        return a ^ b
    raise ValueError(kind)


UNIT_OF_KIND = {
    K_ADD: ADD, K_ADDI: ADD, K_SUB: ADD, K_AUIPC: ADD, K_MUL: MUL,
    K_SLL: SHIFT, K_SLLI: SHIFT, K_SRL: SHIFT, K_SRLI: SHIFT, K_SRA: SHIFT, K_SRAI: SHIFT,
    K_AND: AND, K_ANDI: AND, K_OR: OR, K_ORI: OR, K_XOR: XOR, K_XORI: XOR,
}


def branch_taken(kind, a, b, diff):
    """Branch outcome derived from the (possibly faulted) difference a - b."""
    if kind == K_BEQ:
        return diff == 0
    if kind == K_BNE:
        return diff != 0
    if kind == K_BLT or kind == K_BGE:
        overflow = ((a ^ b) & (a ^ diff)) >> 31
        lt = ((diff >> 31) ^ overflow) & 1
        return bool(lt) if kind == K_BLT else not lt
    borrow = (((~a & b) | (~(a ^ b) & diff)) >> 31) & 1
    return bool(borrow) if kind == K_BLTU else not borrow


def run_kernel(mem, regs, pc, cycles, max_cycles, max_instret,
               f_and, f_or, f_xor, cost, lo, hi, trace=None):
    """Execute until exit, trap, or a budget is reached.

    ``mem`` is a bytearray window and ``regs`` a 32-entry uint32 buffer, both
    modified in place.  Returns ``(pc, cycles, retired, status, info)``.
    """
    start = cycles
    retired = 0
    fa, fo, fx = [int(v) for v in f_and], [int(v) for v in f_or], [int(v) for v in f_xor]
    cst = [int(v) for v in cost]
    x = [int(v) for v in regs]
    status, info = ST_LIMIT, 0
    a_and, a_or, a_xor = fa[ADDR], fo[ADDR], fx[ADDR]
    while cycles - start < max_cycles and retired < max_instret:
        if pc & 3:
            status, info = ST_MISALIGNED, pc
            break
        if pc < lo or pc + 4 > hi:
            status, info = ST_ACCESS, pc
            break
        w = mem[pc] | (mem[pc + 1] << 8) | (mem[pc + 2] << 16) | (mem[pc + 3] << 24)
        d = decode(w)
        if d is None:
            status, info = ST_ILLEGAL, w
            break
        kind, rd, rs1, rs2, imm = d
        npc = pc + 4
        c = cst[C_ALU]
        value = None
        if kind <= K_MUL:
            u = UNIT_OF_KIND[kind]
            value = ((compute(kind, x[rs1], x[rs2]) & fa[u]) | fo[u]) ^ fx[u]
            if kind == K_MUL:
                c = cst[C_MUL]
        elif kind <= K_SRAI:
            u = UNIT_OF_KIND[kind]
            value = ((compute(kind, x[rs1], imm & M32) & fa[u]) | fo[u]) ^ fx[u]
        elif kind <= K_SW:
            addr = ((((x[rs1] + imm) & M32) & a_and) | a_or) ^ a_xor
            size = 4 if kind == K_LW or kind == K_SW else 1
            if addr & (size - 1):
                status, info = ST_MISALIGNED, addr
                break
            if addr < lo or addr + size > hi:
                status, info = ST_ACCESS, addr
                break
            if kind == K_LW:
                value = mem[addr] | (mem[addr + 1] << 8) | (mem[addr + 2] << 16) | (mem[addr + 3] << 24)
                c = cst[C_LOAD]
            elif kind == K_LB:
                value = mem[addr] | (0xFFFFFF00 if mem[addr] & 0x80 else 0)
                c = cst[C_LOAD]
            elif kind == K_LBU:
                value = mem[addr]
                c = cst[C_LOAD]
            elif kind == K_SB:
                mem[addr] = x[rs2] & 0xFF
                c = cst[C_STORE]
            else:
                v = x[rs2]
                mem[addr] = v & 0xFF
                mem[addr + 1] = (v >> 8) & 0xFF
                mem[addr + 2] = (v >> 16) & 0xFF
                mem[addr + 3] = v >> 24
                c = cst[C_STORE]
        elif kind == K_LUI:
            value = imm
        elif kind == K_AUIPC:
            value = ((((pc + imm) & M32) & fa[ADD]) | fo[ADD]) ^ fx[ADD]
        elif kind <= K_BGEU:
            a, b = x[rs1], x[rs2]
            diff = ((((a - b) & M32) & a_and) | a_or) ^ a_xor
            if branch_taken(kind, a, b, diff):
                npc = (pc + imm) & M32
                c = cst[C_TAKEN]
            else:
                c = cst[C_NOT_TAKEN]
        elif kind == K_JAL:
            value = npc
            npc = (pc + imm) & M32
            c = cst[C_JUMP]
        elif kind == K_JALR:
            value = npc
            npc = (((((x[rs1] + imm) & M32) & a_and) | a_or) ^ a_xor) & ~1 & M32
            c = cst[C_JUMP]
        else:  # ecall
            c = cst[C_SYSTEM]
            if x[17] == 93:
                cycles += c
                retired += 1
                status, info = ST_EXIT, x[10]
                if trace is not None:
                    trace(cycles, pc, kind, 0, x[10])
                break
            status, info = ST_ECALL, x[17]
            break
        if value is not None and rd:
            x[rd] = value
        cycles += c
        retired += 1
        if trace is not None:
            trace(cycles, pc, kind, rd if value is not None else 0, x[rd] if value is not None else 0)
        pc = npc
    for i in range(32):
        regs[i] = x[i]
    return pc, cycles, retired, status, info


def shift_add_iterations(a, b, width=32):
    """Vectorised model of the shift-and-add multiply loop.

    Returns (products, iterations); the loop runs once per bit of the
    multiplier ``b`` up to its highest set bit.
    """
    mask = np.uint64((1 << width) - 1)
    s1 = np.asarray(a, dtype=np.uint64) & mask
    s2 = np.asarray(b, dtype=np.uint64) & mask
    prod = np.zeros_like(s1)
    iters = np.zeros(s1.shape, dtype=np.int64)
    while True:
        live = s2 != 0
        if not live.any():
            break
        iters += live
        prod = np.where(live & ((s2 & np.uint64(1)) == 1), (prod + s1) & mask, prod)
        s1 = np.where(live, (s1 << np.uint64(1)) & mask, s1)
        s2 = np.where(live, s2 >> np.uint64(1), s2)
    return prod, iters


def ripple_iterations(a, b, width=32):
    """Vectorised model of the xor/and carry-propagation add loop."""
    mask = np.uint64((1 << width) - 1)
    x = np.asarray(a, dtype=np.uint64) & mask
    y = np.asarray(b, dtype=np.uint64) & mask
    iters = np.zeros(x.shape, dtype=np.int64)
    while True:
        live = y != 0
        if not live.any():
            break
        iters += live
        carry = x & y
        x = np.where(live, x ^ y, x)
        y = np.where(live, (carry << np.uint64(1)) & mask, y)
    return x, iters
