"""The interpreter hot loop shared by the golden model and the DUT.

``execute`` runs until exit, a terminal fault or ``max_retired`` entries and
writes one row per retired instruction into caller-owned buffers. Defect
behaviour is switched by the ``bugs`` bitmask; with ``bugs == 0`` the loop is
the golden model.

All integer state is int64 holding raw 64-bit patterns. Unsigned operations
go through the helpers below (logical shift, unsigned compare, 128-bit high
product, unsigned division) so the code behaves the same compiled or not.
"""

from __future__ import annotations

import numpy as np

from .._accel import jit
from ..isa import csrs
from ..isa.opcodes import OPS, READS_RS1, READS_RS2
from ..isa.state import MEM_SIZE
from . import fpu

# -- op ids (row positions in the opcode table) --------------------------------
OP_LUI = OPS["lui"]
OP_AUIPC = OPS["auipc"]
OP_JAL = OPS["jal"]
OP_JALR = OPS["jalr"]
OP_BEQ = OPS["beq"]
OP_BNE = OPS["bne"]
OP_BLT = OPS["blt"]
OP_BGE = OPS["bge"]
OP_BLTU = OPS["bltu"]
OP_BGEU = OPS["bgeu"]
OP_LB = OPS["lb"]
OP_LH = OPS["lh"]
OP_LW = OPS["lw"]
OP_LD = OPS["ld"]
OP_LBU = OPS["lbu"]
OP_LHU = OPS["lhu"]
OP_LWU = OPS["lwu"]
OP_SB = OPS["sb"]
OP_SH = OPS["sh"]
OP_SW = OPS["sw"]
OP_SD = OPS["sd"]
OP_ADDI = OPS["addi"]
OP_SLTI = OPS["slti"]
OP_SLTIU = OPS["sltiu"]
OP_XORI = OPS["xori"]
OP_ORI = OPS["ori"]
OP_ANDI = OPS["andi"]
OP_SLLI = OPS["slli"]
OP_SRLI = OPS["srli"]
OP_SRAI = OPS["srai"]
OP_ADD = OPS["add"]
OP_SUB = OPS["sub"]
OP_SLL = OPS["sll"]
OP_SLT = OPS["slt"]
OP_SLTU = OPS["sltu"]
OP_XOR = OPS["xor"]
OP_SRL = OPS["srl"]
OP_SRA = OPS["sra"]
OP_OR = OPS["or"]
OP_AND = OPS["and"]
OP_ADDIW = OPS["addiw"]
OP_SLLIW = OPS["slliw"]
OP_SRLIW = OPS["srliw"]
OP_SRAIW = OPS["sraiw"]
OP_ADDW = OPS["addw"]
OP_SUBW = OPS["subw"]
OP_SLLW = OPS["sllw"]
OP_SRLW = OPS["srlw"]
OP_SRAW = OPS["sraw"]
OP_MUL = OPS["mul"]
OP_MULH = OPS["mulh"]
OP_MULHSU = OPS["mulhsu"]
OP_MULHU = OPS["mulhu"]
OP_DIV = OPS["div"]
OP_DIVU = OPS["divu"]
OP_REM = OPS["rem"]
OP_REMU = OPS["remu"]
OP_MULW = OPS["mulw"]
OP_DIVW = OPS["divw"]
OP_DIVUW = OPS["divuw"]
OP_REMW = OPS["remw"]
OP_REMUW = OPS["remuw"]
OP_CSRRW = OPS["csrrw"]
OP_CSRRS = OPS["csrrs"]
OP_CSRRC = OPS["csrrc"]
OP_CSRRWI = OPS["csrrwi"]
OP_CSRRSI = OPS["csrrsi"]
OP_CSRRCI = OPS["csrrci"]
OP_ECALL = OPS["ecall"]
OP_EBREAK = OPS["ebreak"]
OP_SRET = OPS["sret"]
OP_MRET = OPS["mret"]
OP_WFI = OPS["wfi"]
OP_FADD = OPS["fadd.s"]
OP_FSUB = OPS["fsub.s"]
OP_FMUL = OPS["fmul.s"]
OP_FDIV = OPS["fdiv.s"]
OP_FSQRT = OPS["fsqrt.s"]
OP_FMV_X_W = OPS["fmv.x.w"]
OP_FMV_W_X = OPS["fmv.w.x"]

# -- defect bits -----------------------------------------------------------------
BUG_FFLAGS_RAW = 1 << 0
BUG_FS_WHEN_OFF = 1 << 1
BUG_SEPC_LOW_BITS = 1 << 2
BUG_RO_WRITE_SILENT = 1 << 3
BUG_X0_BYPASS = 1 << 4
BUG_FS_GRATUITOUS = 1 << 5
BUG_TRANSITION = 1 << 6

# -- run status -------------------------------------------------------------------
ST_LIMIT = 0
ST_EXIT = 1
ST_DOUBLE_TRAP = 2
ST_FETCH_FAULT = 3

# -- output row columns -------------------------------------------------------------
C_PC = 0
C_ENC = 1
C_OP = 2
C_PRIV = 3
C_WBK = 4  # 0 none, 1 integer register, 2 fp register
C_WBR = 5
C_WBV = 6
C_TRAP = 7  # -1 when the instruction retired normally
C_CWA = 8  # committed CSR write address, -1 none
C_CWV = 9
C_BUG = 10  # bitmask of defects that altered this entry
NCOL = 11

# -- config vector -------------------------------------------------------------------
K_MEM_BASE = 0
K_CODE_LO = 1
K_CODE_HI = 2
K_HANDLER_LO = 3
K_HANDLER_HI = 4
K_BODY_LO = 5
K_MTVEC = 6
K_STVEC = 7
K_BUGS = 8
K_WINDOW = 9
K_MAX_RETIRED = 10
NCFG = 11

# -- misc state vector ----------------------------------------------------------------
M_PC = 0
M_PRIV = 1
M_LAST_FP = 2  # retired index of the latest fp arithmetic op
M_STALE_FFLAGS = 3  # fflags before that op
M_LAST_DIV = 4  # retired index of the latest div/rem with rd = x0
M_DIV_VALUE = 5
M_U_VIA_SRET = 6  # current U-mode was entered from S by an sret in the program body
M_PENDING_CORRUPT = 7
M_STORE_LO = 8
M_STORE_HI = 9
NMISC = 10

FAR_PAST = -(1 << 40)

MIN64 = -0x8000000000000000
MAX64 = 0x7FFFFFFFFFFFFFFF
M32 = 0xFFFFFFFF

I_MSTATUS = csrs.MSTATUS
I_MCAUSE = csrs.MCAUSE
I_SCAUSE = csrs.SCAUSE
I_MEDELEG = csrs.MEDELEG
I_MCOUNTEREN = csrs.MCOUNTEREN
I_SCOUNTEREN = csrs.SCOUNTEREN
I_FRM = csrs.FRM
I_FFLAGS = csrs.FFLAGS
I_SEPC = csrs.SEPC
I_MEPC = csrs.MEPC
I_MHARTID = csrs.MHARTID
I_MINSTRET = csrs.MINSTRET
I_FCSR = csrs.FCSR
N_CSR = csrs.NUM_CSRS

MS_SIE = csrs.MSTATUS_SIE
MS_MIE = csrs.MSTATUS_MIE
MS_SPIE = csrs.MSTATUS_SPIE
MS_MPIE = csrs.MSTATUS_MPIE
MS_SPP = csrs.MSTATUS_SPP
MS_MPP = csrs.MSTATUS_MPP
MS_FS = csrs.MSTATUS_FS
MS_MPRV = csrs.MSTATUS_MPRV
MS_TW = csrs.MSTATUS_TW
MS_TSR = csrs.MSTATUS_TSR
MS_WMASK = csrs.MSTATUS_WMASK
MEDELEG_WMASK = csrs.MEDELEG_WMASK
COUNTEREN_WMASK = csrs.COUNTEREN_WMASK

CSR_INDEX = np.array(csrs.address_table(), dtype=np.int64)
READS1 = np.array(READS_RS1, dtype=np.int64)
READS2 = np.array(READS_RS2, dtype=np.int64)


# -- integer helpers --------------------------------------------------------------------
@jit
def srl(v, s):
    if s == 0:
        return v
    return (v >> s) & (MAX64 >> (s - 1))


@jit
def ult(a, b):
    return (a ^ MIN64) < (b ^ MIN64)


@jit
def sext32(v):
    return ((v & M32) ^ 0x80000000) - 0x80000000


@jit
def mulhu(a, b):
    a_lo = a & M32
    a_hi = srl(a, 32)
    b_lo = b & M32
    b_hi = srl(b, 32)
    ll = a_lo * b_lo
    hl = a_hi * b_lo
    lh = a_lo * b_hi
    hh = a_hi * b_hi
    cross = srl(ll, 32) + (hl & M32) + lh
    return srl(hl, 32) + srl(cross, 32) + hh


@jit
def divu(a, b):
    """Unsigned quotient; b must be nonzero."""
    if b < 0:
        return 0 if ult(a, b) else 1
    if a >= 0:
        return a // b
    q = (srl(a, 1) // b) << 1
    r = a - q * b
    if not ult(r, b):
        q += 1
    return q


@jit
def div_trunc(a, b):
    """Signed quotient rounded toward zero; no overflow or zero divisor."""
    q = a // b
    if q * b != a and ((a < 0) != (b < 0)):
        q += 1
    return q


@jit
def alu(op, a, b):
    """Register-register and register-immediate integer and M-extension ops."""
    if op == OP_ADD or op == OP_ADDI:
        return a + b
    if op == OP_SUB:
        return a - b
    if op == OP_SLL or op == OP_SLLI:
        return a << (b & 63)
    if op == OP_SLT or op == OP_SLTI:
        return 1 if a < b else 0
    if op == OP_SLTU or op == OP_SLTIU:
        return 1 if ult(a, b) else 0
    if op == OP_XOR or op == OP_XORI:
        return a ^ b
    if op == OP_SRL or op == OP_SRLI:
        return srl(a, b & 63)
    if op == OP_SRA or op == OP_SRAI:
        return a >> (b & 63)
    if op == OP_OR or op == OP_ORI:
        return a | b
    if op == OP_AND or op == OP_ANDI:
        return a & b
    if op == OP_ADDW or op == OP_ADDIW:
        return sext32(a + b)
    if op == OP_SUBW:
        return sext32(a - b)
    if op == OP_SLLW or op == OP_SLLIW:
        return sext32(a << (b & 31))
    if op == OP_SRLW or op == OP_SRLIW:
        return sext32((a & M32) >> (b & 31))
    if op == OP_SRAW or op == OP_SRAIW:
        return sext32(a) >> (b & 31)
    if op == OP_MUL:
        return a * b
    if op == OP_MULH:
        h = mulhu(a, b)
        if a < 0:
            h -= b
        if b < 0:
            h -= a
        return h
    if op == OP_MULHSU:
        h = mulhu(a, b)
        if a < 0:
            h -= b
        return h
    if op == OP_MULHU:
        return mulhu(a, b)
    if op == OP_DIV:
        if b == 0:
            return -1
        if a == MIN64 and b == -1:
            return MIN64
        return div_trunc(a, b)
    if op == OP_DIVU:
        if b == 0:
            return -1
        return divu(a, b)
    if op == OP_REM:
        if b == 0:
            return a
        if a == MIN64 and b == -1:
            return 0
        return a - div_trunc(a, b) * b
    if op == OP_REMU:
        if b == 0:
            return a
        return a - divu(a, b) * b
    if op == OP_MULW:
        return sext32(a * b)
    a32 = sext32(a)
    b32 = sext32(b)
    if op == OP_DIVW:
        if b32 == 0:
            return -1
        if a32 == -0x80000000 and b32 == -1:
            return a32
        return sext32(div_trunc(a32, b32))
    if op == OP_REMW:
        if b32 == 0:
            return a32
        if a32 == -0x80000000 and b32 == -1:
            return 0
        return sext32(a32 - div_trunc(a32, b32) * b32)
    ua = a & M32
    ub = b & M32
    if op == OP_DIVUW:
        if ub == 0:
            return -1
        return sext32(ua // ub)
    # remuw
    if ub == 0:
        return sext32(ua)
    return sext32(ua % ub)


@jit
def imm_i(enc):
    return enc >> 20 if enc < 0x80000000 else (enc >> 20) - 4096


@jit
def imm_s(enc):
    v = ((enc >> 25) << 5) | ((enc >> 7) & 31)
    return v - 4096 if v & 0x800 else v


@jit
def imm_b(enc):
    v = (((enc >> 31) & 1) << 12) | (((enc >> 7) & 1) << 11) | (((enc >> 25) & 0x3F) << 5) \
        | (((enc >> 8) & 0xF) << 1)
    return v - 8192 if v & 0x1000 else v


@jit
def imm_j(enc):
    v = (((enc >> 31) & 1) << 20) | (((enc >> 12) & 0xFF) << 12) | (((enc >> 20) & 1) << 11) \
        | (((enc >> 21) & 0x3FF) << 1)
    return v - (1 << 21) if v & 0x100000 else v


@jit
def decode_op(enc):
    """Op id for a 32-bit word, -1 when outside the subset (switch form)."""
    opc = enc & 0x7F
    f3 = (enc >> 12) & 7
    f7 = enc >> 25
    if opc == 0x13:
        if f3 == 0:
            return OP_ADDI
        if f3 == 1:
            return OP_SLLI if (enc >> 26) == 0 else -1
        if f3 == 2:
            return OP_SLTI
        if f3 == 3:
            return OP_SLTIU
        if f3 == 4:
            return OP_XORI
        if f3 == 5:
            if (enc >> 26) == 0:
                return OP_SRLI
            return OP_SRAI if (enc >> 26) == 0x10 else -1
        if f3 == 6:
            return OP_ORI
        return OP_ANDI
    if opc == 0x33:
        if f7 == 0:
            if f3 == 0:
                return OP_ADD
            if f3 == 1:
                return OP_SLL
            if f3 == 2:
                return OP_SLT
            if f3 == 3:
                return OP_SLTU
            if f3 == 4:
                return OP_XOR
            if f3 == 5:
                return OP_SRL
            if f3 == 6:
                return OP_OR
            return OP_AND
        if f7 == 0x20:
            if f3 == 0:
                return OP_SUB
            return OP_SRA if f3 == 5 else -1
        if f7 == 1:
            return OP_MUL + f3
        return -1
    if opc == 0x03:
        return OP_LB + f3 if f3 != 7 else -1
    if opc == 0x23:
        return OP_SB + f3 if f3 < 4 else -1
    if opc == 0x63:
        if f3 == 0:
            return OP_BEQ
        if f3 == 1:
            return OP_BNE
        if f3 >= 4:
            return OP_BLT + (f3 - 4)
        return -1
    if opc == 0x37:
        return OP_LUI
    if opc == 0x17:
        return OP_AUIPC
    if opc == 0x6F:
        return OP_JAL
    if opc == 0x67:
        return OP_JALR if f3 == 0 else -1
    if opc == 0x1B:
        if f3 == 0:
            return OP_ADDIW
        if f3 == 1:
            return OP_SLLIW if f7 == 0 else -1
        if f3 == 5:
            if f7 == 0:
                return OP_SRLIW
            return OP_SRAIW if f7 == 0x20 else -1
        return -1
    if opc == 0x3B:
        if f7 == 0:
            if f3 == 0:
                return OP_ADDW
            if f3 == 1:
                return OP_SLLW
            return OP_SRLW if f3 == 5 else -1
        if f7 == 0x20:
            if f3 == 0:
                return OP_SUBW
            return OP_SRAW if f3 == 5 else -1
        if f7 == 1:
            if f3 == 0:
                return OP_MULW
            if f3 >= 4:
                return OP_DIVW + (f3 - 4)
        return -1
    if opc == 0x73:
        if f3 == 0:
            if enc == 0x00000073:
                return OP_ECALL
            if enc == 0x00100073:
                return OP_EBREAK
            if enc == 0x10200073:
                return OP_SRET
            if enc == 0x30200073:
                return OP_MRET
            if enc == 0x10500073:
                return OP_WFI
            return -1
        if f3 == 4:
            return -1
        if f3 < 4:
            return OP_CSRRW + (f3 - 1)
        return OP_CSRRWI + (f3 - 5)
    if opc == 0x53:
        rs2 = (enc >> 20) & 31
        rm_ok = f3 <= 4 or f3 == 7
        if f7 == 0x00:
            return OP_FADD if rm_ok else -1
        if f7 == 0x04:
            return OP_FSUB if rm_ok else -1
        if f7 == 0x08:
            return OP_FMUL if rm_ok else -1
        if f7 == 0x0C:
            return OP_FDIV if rm_ok else -1
        if f7 == 0x2C:
            return OP_FSQRT if (rm_ok and rs2 == 0) else -1
        if f7 == 0x70:
            return OP_FMV_X_W if (rs2 == 0 and f3 == 0) else -1
        if f7 == 0x78:
            return OP_FMV_W_X if (rs2 == 0 and f3 == 0) else -1
        return -1
    return -1


@jit
def _set_fs_dirty(csr):
    csr[I_MSTATUS] = csr[I_MSTATUS] | MS_FS | MIN64


@jit
def _legal_mstatus(old, new):
    v = (old & ~MS_WMASK) | (new & MS_WMASK)
    if (v & MS_MPP) == (2 << 11):
        v &= ~MS_MPP
    if (v & MS_FS) == MS_FS:
        v |= MIN64
    else:
        v &= MAX64
    return v


@jit
def execute(mem, cfg, x, f, csr, misc, out, snap):
    """Run from misc[M_PC]/misc[M_PRIV]; returns (entries, status)."""
    mem_base = cfg[K_MEM_BASE]
    code_lo = cfg[K_CODE_LO]
    code_hi = cfg[K_CODE_HI]
    handler_lo = cfg[K_HANDLER_LO]
    handler_hi = cfg[K_HANDLER_HI]
    body_lo = cfg[K_BODY_LO]
    mtvec = cfg[K_MTVEC]
    stvec = cfg[K_STVEC]
    bugs = cfg[K_BUGS]
    window = cfg[K_WINDOW]
    max_retired = cfg[K_MAX_RETIRED]

    pc = misc[M_PC]
    priv = misc[M_PRIV]
    n = 0
    status = ST_LIMIT
    while n < max_retired:
        if (pc & 3) != 0 or pc < code_lo or pc >= code_hi:
            status = ST_FETCH_FAULT
            break
        off = pc - mem_base
        enc = (np.int64(mem[off]) | (np.int64(mem[off + 1]) << 8)
               | (np.int64(mem[off + 2]) << 16) | (np.int64(mem[off + 3]) << 24))
        op = decode_op(enc)
        rd = (enc >> 7) & 31
        rs1 = (enc >> 15) & 31
        rs2 = (enc >> 20) & 31
        f3 = (enc >> 12) & 7

        priv_at = priv
        trap = -1
        wbk = 0
        wbv = 0
        cwa = -1
        cwv = 0
        fired = 0
        next_pc = pc + 4
        counted_write = False
        exiting = False

        a = x[rs1]
        b = x[rs2]
        if (bugs & BUG_X0_BYPASS) != 0 and op >= 0 and n - misc[M_LAST_DIV] <= window:
            leak = misc[M_DIV_VALUE]
            if leak != 0:
                csr_set_clear = op == OP_CSRRS or op == OP_CSRRC
                if rs1 == 0 and READS1[op] != 0 and not csr_set_clear:
                    a = leak
                    fired |= BUG_X0_BYPASS
                if rs2 == 0 and READS2[op] != 0:
                    b = leak
                    fired |= BUG_X0_BYPASS

        if op < 0:
            trap = 2
        elif op >= OP_ADDI and op <= OP_REMUW:
            if op <= OP_SRAI or (op >= OP_ADDIW and op <= OP_SRAIW):
                imm = imm_i(enc)
                if op == OP_SLLI or op == OP_SRLI or op == OP_SRAI:
                    imm &= 63
                elif op == OP_SLLIW or op == OP_SRLIW or op == OP_SRAIW:
                    imm &= 31
                v = alu(op, a, imm)
            else:
                v = alu(op, a, b)
            if rd != 0:
                wbk = 1
                wbv = v
            elif (op >= OP_DIV and op <= OP_REMU) or op >= OP_DIVW:
                misc[M_LAST_DIV] = n
                misc[M_DIV_VALUE] = v
        elif op <= OP_BGEU:
            if op == OP_LUI:
                v = sext32(enc & 0xFFFFF000)
                if rd != 0:
                    wbk = 1
                    wbv = v
            elif op == OP_AUIPC:
                v = pc + sext32(enc & 0xFFFFF000)
                if rd != 0:
                    wbk = 1
                    wbv = v
            elif op == OP_JAL or op == OP_JALR:
                if op == OP_JAL:
                    target = pc + imm_j(enc)
                else:
                    target = (a + imm_i(enc)) & ~1
                if (target & 3) != 0:
                    trap = 0
                else:
                    next_pc = target
                    if rd != 0:
                        wbk = 1
                        wbv = pc + 4
            else:
                if op == OP_BEQ:
                    taken = a == b
                elif op == OP_BNE:
                    taken = a != b
                elif op == OP_BLT:
                    taken = a < b
                elif op == OP_BGE:
                    taken = a >= b
                elif op == OP_BLTU:
                    taken = ult(a, b)
                else:
                    taken = not ult(a, b)
                if taken:
                    target = pc + imm_b(enc)
                    if (target & 3) != 0:
                        trap = 0
                    else:
                        next_pc = target
        elif op <= OP_LWU:
            size = 1 << (f3 & 3)
            addr = a + imm_i(enc)
            moff = addr - mem_base
            if (addr & (size - 1)) != 0:
                trap = 4
            elif moff < 0 or moff > MEM_SIZE - size:
                trap = 5
            else:
                v = np.int64(0)
                for k in range(size):
                    v |= np.int64(mem[moff + k]) << (8 * k)
                if op == OP_LB:
                    v = ((v & 0xFF) ^ 0x80) - 0x80
                elif op == OP_LH:
                    v = ((v & 0xFFFF) ^ 0x8000) - 0x8000
                elif op == OP_LW:
                    v = sext32(v)
                if rd != 0:
                    wbk = 1
                    wbv = v
        elif op <= OP_SD:
            size = 1 << (f3 & 3)
            addr = a + imm_s(enc)
            moff = addr - mem_base
            if (addr & (size - 1)) != 0:
                trap = 6
            elif moff < 0 or moff > MEM_SIZE - size:
                trap = 7
            else:
                for k in range(size):
                    mem[moff + k] = (b >> (8 * k)) & 0xFF
                if moff < misc[M_STORE_LO]:
                    misc[M_STORE_LO] = moff
                if moff + size > misc[M_STORE_HI]:
                    misc[M_STORE_HI] = moff + size
        elif op <= OP_CSRRCI:
            addr = (enc >> 20) & 0xFFF
            ci = CSR_INDEX[addr]
            kind = op - OP_CSRRW if op <= OP_CSRRC else op - OP_CSRRWI
            src = a if op <= OP_CSRRC else np.int64(rs1)
            writes = kind == 0 or rs1 != 0
            is_fp = ci == I_FFLAGS or ci == I_FRM or ci == I_FCSR
            fs_off = (csr[I_MSTATUS] & MS_FS) == 0
            if ci < 0:
                trap = 2
            elif priv < ((addr >> 8) & 3):
                trap = 2
            elif writes and (addr >> 10) == 3 and (bugs & BUG_RO_WRITE_SILENT) == 0:
                trap = 2
            elif is_fp and fs_off and (bugs & BUG_FS_WHEN_OFF) == 0:
                trap = 2
            else:
                ro_ignored = writes and (addr >> 10) == 3
                if ro_ignored:
                    fired |= BUG_RO_WRITE_SILENT
                if is_fp and fs_off:
                    fired |= BUG_FS_WHEN_OFF
                    _set_fs_dirty(csr)
                if ci == I_FCSR:
                    old = (csr[I_FRM] << 5) | csr[I_FFLAGS]
                else:
                    old = csr[ci]
                rdval = old
                if ((bugs & BUG_FFLAGS_RAW) != 0 and rd != 0 and (ci == I_FFLAGS or ci == I_FCSR)
                        and n - misc[M_LAST_FP] <= window):
                    stale = misc[M_STALE_FFLAGS]
                    if ci == I_FCSR:
                        stale |= csr[I_FRM] << 5
                    if stale != old:
                        rdval = stale
                        fired |= BUG_FFLAGS_RAW
                if kind == 0:
                    new = src
                elif kind == 1:
                    new = old | src
                else:
                    new = old & ~src
                if writes and not ro_ignored:
                    if ci == I_MSTATUS:
                        stored = _legal_mstatus(old, new)
                        csr[I_MSTATUS] = stored
                    elif ci == I_MCAUSE or ci == I_SCAUSE:
                        stored = new
                        csr[ci] = stored
                    elif ci == I_MEDELEG:
                        stored = new & MEDELEG_WMASK
                        csr[ci] = stored
                    elif ci == I_MCOUNTEREN or ci == I_SCOUNTEREN:
                        stored = new & COUNTEREN_WMASK
                        csr[ci] = stored
                    elif ci == I_SEPC or ci == I_MEPC:
                        stored = new & ~3
                        if ci == I_SEPC and (bugs & BUG_SEPC_LOW_BITS) != 0 and (new & 3) != 0:
                            stored = new
                            fired |= BUG_SEPC_LOW_BITS
                        csr[ci] = stored
                    elif ci == I_MINSTRET:
                        stored = new
                        csr[ci] = stored
                        counted_write = True
                    else:
                        # fp CSRs
                        if ci == I_FFLAGS:
                            stored = new & 0x1F
                            changed = stored != csr[I_FFLAGS]
                            csr[I_FFLAGS] = stored
                        elif ci == I_FRM:
                            stored = new & 7
                            changed = stored != csr[I_FRM]
                            csr[I_FRM] = stored
                        else:
                            stored = new & 0xFF
                            changed = stored != old
                            csr[I_FRM] = (stored >> 5) & 7
                            csr[I_FFLAGS] = stored & 0x1F
                        if changed:
                            _set_fs_dirty(csr)
                        elif (bugs & BUG_FS_GRATUITOUS) != 0:
                            if (csr[I_MSTATUS] & MS_FS) != MS_FS:
                                fired |= BUG_FS_GRATUITOUS
                            _set_fs_dirty(csr)
                    cwa = addr
                    cwv = stored
                if rd != 0:
                    wbk = 1
                    wbv = rdval
        elif op <= OP_WFI:
            ms = csr[I_MSTATUS]
            if op == OP_ECALL:
                if x[10] == 0:
                    exiting = True
                else:
                    trap = 8 if priv == 0 else (9 if priv == 1 else 11)
            elif op == OP_EBREAK:
                trap = 3
            elif op == OP_SRET:
                if priv == 0 or (priv == 1 and (ms & MS_TSR) != 0):
                    trap = 2
                else:
                    spp = (ms >> 8) & 1
                    ms = (ms & ~MS_SIE) | (MS_SIE if (ms & MS_SPIE) != 0 else 0)
                    ms = (ms | MS_SPIE) & ~MS_SPP & ~MS_MPRV
                    csr[I_MSTATUS] = ms
                    priv = spp
                    next_pc = csr[I_SEPC]
                    misc[M_U_VIA_SRET] = 1 if (priv_at == 1 and spp == 0 and pc >= body_lo) else 0
            elif op == OP_MRET:
                if priv != 3:
                    trap = 2
                else:
                    mpp = (ms >> 11) & 3
                    ms = (ms & ~MS_MIE) | (MS_MIE if (ms & MS_MPIE) != 0 else 0)
                    ms = (ms | MS_MPIE) & ~MS_MPP
                    if mpp != 3:
                        ms &= ~MS_MPRV
                    csr[I_MSTATUS] = ms
                    priv = mpp
                    next_pc = csr[I_MEPC]
                    misc[M_U_VIA_SRET] = 0
            else:
                if priv == 0 or (priv == 1 and (ms & MS_TW) != 0):
                    trap = 2
        else:
            # floating point
            if (csr[I_MSTATUS] & MS_FS) == 0:
                trap = 2
            elif op == OP_FMV_X_W:
                if rd != 0:
                    wbk = 1
                    wbv = sext32(f[rs1])
            elif op == OP_FMV_W_X:
                wbk = 2
                wbv = a & M32
                _set_fs_dirty(csr)
            else:
                rm = f3
                if rm == 7:
                    rm = csr[I_FRM]
                if rm > 4:
                    trap = 2
                else:
                    res, flags = fpu.fp_op(op - OP_FADD, f[rs1], f[rs2], rm)
                    old_flags = csr[I_FFLAGS]
                    misc[M_LAST_FP] = n
                    misc[M_STALE_FFLAGS] = old_flags
                    csr[I_FFLAGS] = old_flags | flags
                    _set_fs_dirty(csr)
                    wbk = 2
                    wbv = np.int64(res)

        out[n, C_PC] = pc
        out[n, C_ENC] = enc
        out[n, C_OP] = op
        out[n, C_PRIV] = priv_at
        if trap >= 0:
            if handler_lo <= pc < handler_hi:
                status = ST_DOUBLE_TRAP
            to_s = priv < 3 and ((csr[I_MEDELEG] >> trap) & 1) != 0
            if (bugs & BUG_TRANSITION) != 0 and to_s and priv == 0 and trap == 8 and misc[M_U_VIA_SRET] != 0:
                misc[M_PENDING_CORRUPT] = 1
            ms = csr[I_MSTATUS]
            if to_s:
                csr[I_SCAUSE] = trap
                csr[I_SEPC] = pc
                ms = (ms & ~MS_SPP) | (MS_SPP if priv == 1 else 0)
                ms = (ms & ~MS_SPIE) | (MS_SPIE if (ms & MS_SIE) != 0 else 0)
                ms &= ~MS_SIE
                priv = 1
                next_pc = stvec
            else:
                csr[I_MCAUSE] = trap
                csr[I_MEPC] = pc
                ms = (ms & ~MS_MPP) | (priv << 11)
                ms = (ms & ~MS_MPIE) | (MS_MPIE if (ms & MS_MIE) != 0 else 0)
                ms &= ~MS_MIE
                priv = 3
                next_pc = mtvec
            csr[I_MSTATUS] = ms
            misc[M_U_VIA_SRET] = 0
            wbk = 0
        else:
            if wbk != 0 and misc[M_PENDING_CORRUPT] != 0:
                wbv ^= 1
                misc[M_PENDING_CORRUPT] = 0
                fired |= BUG_TRANSITION
            if wbk == 1:
                x[rd] = wbv
            elif wbk == 2:
                f[rd] = wbv
            if not counted_write:
                csr[I_MINSTRET] += 1
        out[n, C_WBK] = wbk
        out[n, C_WBR] = rd if wbk != 0 else 0
        out[n, C_WBV] = wbv if wbk != 0 else 0
        out[n, C_TRAP] = trap
        out[n, C_CWA] = cwa
        out[n, C_CWV] = cwv
        out[n, C_BUG] = fired
        for k in range(N_CSR):
            snap[n, k] = csr[k]
        n += 1
        pc = next_pc
        if exiting:
            status = ST_EXIT
            break
        if status == ST_DOUBLE_TRAP:
            break
    misc[M_PC] = pc
    misc[M_PRIV] = priv
    return n, status
