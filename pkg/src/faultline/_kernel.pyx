# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled execution kernel; same contract as ``_kernel_py``."""

from libc.stdint cimport uint32_t, int32_t, uint64_t, int64_t
import numpy as np

cdef enum:
    MUL = 0
    ADD = 1
    SHIFT = 2
    AND_ = 3
    OR_ = 4
    XOR_ = 5
    ADDR = 6

cdef enum:
    C_ALU = 0
    C_MUL = 1
    C_TAKEN = 2
    C_NOT_TAKEN = 3
    C_JUMP = 4
    C_LOAD = 5
    C_STORE = 6
    C_SYSTEM = 7

cdef enum:
    ST_LIMIT = 0
    ST_EXIT = 1
    ST_MISALIGNED = 2
    ST_ACCESS = 3
    ST_ILLEGAL = 4
    ST_ECALL = 5


cdef inline uint32_t faulted(uint32_t r, const uint32_t[::1] fa, const uint32_t[::1] fo,
                             const uint32_t[::1] fx, int u) nogil:
    return ((r & fa[u]) | fo[u]) ^ fx[u]


cdef inline int32_t sx(uint32_t v, int bits) nogil:
    cdef uint32_t m = (<uint32_t>1) << (bits - 1)
    v &= (m << 1) - 1
    return <int32_t>((v ^ m) - m)


cdef inline bint taken(int f3, uint32_t a, uint32_t b, uint32_t diff) nogil:
    cdef uint32_t ovf, lt, borrow
    if f3 == 0:
        return diff == 0
    if f3 == 1:
        return diff != 0
    if f3 == 4 or f3 == 5:
        ovf = ((a ^ b) & (a ^ diff)) >> 31
        lt = ((diff >> 31) ^ ovf) & 1
        return lt if f3 == 4 else not lt
    borrow = (((~a & b) | (~(a ^ b) & diff)) >> 31) & 1
    return borrow if f3 == 6 else not borrow


def run_kernel(unsigned char[::1] mem, uint32_t[::1] regs, uint32_t pc, uint64_t cycles,
               uint64_t max_cycles, uint64_t max_instret,
               const uint32_t[::1] fa, const uint32_t[::1] fo, const uint32_t[::1] fx,
               const uint32_t[::1] cost, uint32_t lo, uint32_t hi, trace=None):
    if trace is not None:
        raise ValueError("the compiled kernel does not trace; use the Python backend")
    cdef uint64_t start = cycles, retired = 0
    cdef uint32_t x[32]
    cdef int i, status = ST_LIMIT
    cdef uint64_t info = 0
    cdef uint32_t w, opc, rd, f3, rs1, rs2, f7, npc, a, b, r, addr, c, size
    cdef int32_t imm
    cdef bint write
    for i in range(32):
        x[i] = regs[i]
    x[0] = 0
    with nogil:
        while cycles - start < max_cycles and retired < max_instret:
            if pc & 3:
                status = ST_MISALIGNED; info = pc
                break
            if pc < lo or <uint64_t>pc + 4 > hi:
                status = ST_ACCESS; info = pc
                break
            w = mem[pc] | (<uint32_t>mem[pc + 1] << 8) | (<uint32_t>mem[pc + 2] << 16) | (<uint32_t>mem[pc + 3] << 24)
            opc = w & 0x7F
            rd = (w >> 7) & 31
            f3 = (w >> 12) & 7
            rs1 = (w >> 15) & 31
            rs2 = (w >> 20) & 31
            f7 = w >> 25
            npc = pc + 4
            c = cost[C_ALU]
            write = False
            r = 0
            if opc == 0x33:
                a = x[rs1]
                b = x[rs2]
                if f7 == 0:
                    if f3 == 0:
                        r = faulted(a + b, fa, fo, fx, ADD)
                    elif f3 == 1:
                        r = faulted(a << (b & 31), fa, fo, fx, SHIFT)
                    elif f3 == 4:
                        r = faulted(a ^ b, fa, fo, fx, XOR_)
                    elif f3 == 5:
                        r = faulted(a >> (b & 31), fa, fo, fx, SHIFT)
                    elif f3 == 6:
                        r = faulted(a | b, fa, fo, fx, OR_)
                    elif f3 == 7:
                        r = faulted(a & b, fa, fo, fx, AND_)
                    else:
                        status = ST_ILLEGAL; info = w
                        break
                elif f7 == 0x20 and f3 == 0:
                    r = faulted(a - b, fa, fo, fx, ADD)
                elif f7 == 0x20 and f3 == 5:
                    r = faulted(<uint32_t>(<int32_t>a >> (b & 31)), fa, fo, fx, SHIFT)
                elif f7 == 1 and f3 == 0:
                    r = faulted(a * b, fa, fo, fx, MUL)
                    c = cost[C_MUL]
                else:
                    status = ST_ILLEGAL; info = w
                    break
                write = True
            elif opc == 0x13:
                a = x[rs1]
                imm = sx(w >> 20, 12)
                if f3 == 0:
                    r = faulted(a + <uint32_t>imm, fa, fo, fx, ADD)
                elif f3 == 4:
                    r = faulted(a ^ <uint32_t>imm, fa, fo, fx, XOR_)
                elif f3 == 6:
                    r = faulted(a | <uint32_t>imm, fa, fo, fx, OR_)
                elif f3 == 7:
                    r = faulted(a & <uint32_t>imm, fa, fo, fx, AND_)
                elif f3 == 1 and f7 == 0:
                    r = faulted(a << rs2, fa, fo, fx, SHIFT)
                elif f3 == 5 and f7 == 0:
                    r = faulted(a >> rs2, fa, fo, fx, SHIFT)
                elif f3 == 5 and f7 == 0x20:
                    r = faulted(<uint32_t>(<int32_t>a >> rs2), fa, fo, fx, SHIFT)
                else:
                    status = ST_ILLEGAL; info = w
                    break
                write = True
            elif opc == 0x03 or opc == 0x23:
                if opc == 0x03:
                    imm = sx(w >> 20, 12)
                    if f3 != 0 and f3 != 2 and f3 != 4:
                        status = ST_ILLEGAL; info = w
                        break
                else:
                    imm = sx((f7 << 5) | rd, 12)
                    if f3 != 0 and f3 != 2:
                        status = ST_ILLEGAL; info = w
                        break
                addr = faulted(x[rs1] + <uint32_t>imm, fa, fo, fx, ADDR)
                size = 4 if f3 == 2 else 1
                if addr & (size - 1):
                    status = ST_MISALIGNED; info = addr
                    break
                if addr < lo or <uint64_t>addr + size > hi:
                    status = ST_ACCESS; info = addr
                    break
                if opc == 0x03:
                    if f3 == 2:
                        r = mem[addr] | (<uint32_t>mem[addr + 1] << 8) | (<uint32_t>mem[addr + 2] << 16) | (<uint32_t>mem[addr + 3] << 24)
                    elif f3 == 0:
                        r = <uint32_t>(<int32_t>(<signed char>mem[addr]))
                    else:
                        r = mem[addr]
                    c = cost[C_LOAD]
                    write = True
                else:
                    b = x[rs2]
                    mem[addr] = b & 0xFF
                    if f3 == 2:
                        mem[addr + 1] = (b >> 8) & 0xFF
                        mem[addr + 2] = (b >> 16) & 0xFF
                        mem[addr + 3] = b >> 24
                    c = cost[C_STORE]
            elif opc == 0x37:
                r = w & ~(<uint32_t>0xFFF)
                write = True
            elif opc == 0x17:
                r = faulted(pc + (w & ~(<uint32_t>0xFFF)), fa, fo, fx, ADD)
                write = True
            elif opc == 0x63:
                if f3 == 2 or f3 == 3:
                    status = ST_ILLEGAL; info = w
                    break
                imm = sx((((w >> 31) & 1) << 12) | (((w >> 7) & 1) << 11) | (((w >> 25) & 0x3F) << 5) | (((w >> 8) & 0xF) << 1), 13)
                a = x[rs1]
                b = x[rs2]
                if taken(f3, a, b, faulted(a - b, fa, fo, fx, ADDR)):
                    npc = pc + <uint32_t>imm
                    c = cost[C_TAKEN]
                else:
                    c = cost[C_NOT_TAKEN]
            elif opc == 0x6F:
                imm = sx((((w >> 31) & 1) << 20) | (((w >> 12) & 0xFF) << 12) | (((w >> 20) & 1) << 11) | (((w >> 21) & 0x3FF) << 1), 21)
                r = npc
                npc = pc + <uint32_t>imm
                c = cost[C_JUMP]
                write = True
            elif opc == 0x67 and f3 == 0:
                imm = sx(w >> 20, 12)
                r = npc
                npc = faulted(x[rs1] + <uint32_t>imm, fa, fo, fx, ADDR) & ~(<uint32_t>1)
                c = cost[C_JUMP]
                write = True
            elif w == 0x73:
                c = cost[C_SYSTEM]
                if x[17] == 93:
                    cycles += c
                    retired += 1
                    status = ST_EXIT; info = x[10]
                    break
                status = ST_ECALL; info = x[17]
                break
            else:
                status = ST_ILLEGAL; info = w
                break
            if write and rd != 0:
                x[rd] = r
            cycles += c
            retired += 1
            pc = npc
    for i in range(32):
        regs[i] = x[i]
    return pc, cycles, retired, status, info


def shift_add_iterations(a, b, int width=32):
    cdef uint64_t[::1] av = np.ascontiguousarray(a, dtype=np.uint64)
    cdef uint64_t[::1] bv = np.ascontiguousarray(b, dtype=np.uint64)
    cdef Py_ssize_t n = av.shape[0], i
    prod_arr = np.zeros(n, dtype=np.uint64)
    it_arr = np.zeros(n, dtype=np.int64)
    cdef uint64_t[::1] prod = prod_arr
    cdef int64_t[::1] iters = it_arr
    cdef uint64_t mask = ((<uint64_t>1) << width) - 1
    cdef uint64_t s1, s2, p
    cdef int64_t k
    with nogil:
        for i in range(n):
            s1 = av[i] & mask
            s2 = bv[i] & mask
            p = 0
            k = 0
            while s2 != 0:
                k += 1
                if s2 & 1:
                    p = (p + s1) & mask
                s1 = (s1 << 1) & mask
                s2 >>= 1
            prod[i] = p
            iters[i] = k
    return prod_arr, it_arr


def ripple_iterations(a, b, int width=32):
    cdef uint64_t[::1] av = np.ascontiguousarray(a, dtype=np.uint64)
    cdef uint64_t[::1] bv = np.ascontiguousarray(b, dtype=np.uint64)
    cdef Py_ssize_t n = av.shape[0], i
    sum_arr = np.zeros(n, dtype=np.uint64)
    it_arr = np.zeros(n, dtype=np.int64)
    cdef uint64_t[::1] out = sum_arr
    cdef int64_t[::1] iters = it_arr
    cdef uint64_t mask = ((<uint64_t>1) << width) - 1
    cdef uint64_t x, y, carry
    cdef int64_t k
    with nogil:
        for i in range(n):
            x = av[i] & mask
            y = bv[i] & mask
            k = 0
            while y != 0:
                k += 1
                carry = x & y
                x = x ^ y
                y = (carry << 1) & mask
            out[i] = x
            iters[i] = k
    return sum_arr, it_arr
