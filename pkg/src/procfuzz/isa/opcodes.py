"""Opcode table for the modeled subset: RV64I, M, Zicsr, privileged returns and
single-precision arithmetic.

Each row fixes the mnemonic, operand format, instruction class and the fixed
encoding bits. Op ids are row positions; the kernel switches on them.
"""

from __future__ import annotations

from dataclasses import dataclass

INTEGER = "integer"
MULDIV = "muldiv"
LOADSTORE = "loadstore"
BRANCH = "branch"
CSR = "csr"
FP = "fp"
SYSTEM = "system"

CLASSES = (INTEGER, MULDIV, LOADSTORE, BRANCH, CSR, FP, SYSTEM)


@dataclass(frozen=True)
class OpSpec:
    mnemonic: str
    fmt: str
    cls: str
    opcode: int
    funct3: int = 0
    funct7: int = 0
    word: int = 0  # full encoding for operand-less system instructions

    @property
    def mask(self) -> int:
        return _FORMAT_MASK[self.fmt]

    @property
    def match(self) -> int:
        if self.fmt == "SYS":
            return self.word
        m = self.opcode
        if self.fmt not in ("U", "J", "FR", "FR1"):
            m |= self.funct3 << 12
        if self.fmt in ("R", "ISHW", "FR", "FR1", "FMV"):
            m |= self.funct7 << 25
        if self.fmt == "ISH":
            m |= self.funct7 << 26
        return m


# fixed-bit masks per format; FR/FR1 leave the rounding-mode field free
_FORMAT_MASK = {
    "R": 0xFE00707F,
    "I": 0x0000707F,
    "ISH": 0xFC00707F,
    "ISHW": 0xFE00707F,
    "L": 0x0000707F,
    "S": 0x0000707F,
    "B": 0x0000707F,
    "U": 0x0000007F,
    "J": 0x0000007F,
    "JALR": 0x0000707F,
    "CSR": 0x0000707F,
    "CSRI": 0x0000707F,
    "SYS": 0xFFFFFFFF,
    "FR": 0xFE00007F,
    "FR1": 0xFFF0007F,
    "FMV": 0xFFF0707F,
}


def _r(m, f3, f7, cls=INTEGER, op=0x33):
    return OpSpec(m, "R", cls, op, f3, f7)


TABLE: tuple[OpSpec, ...] = (
    OpSpec("lui", "U", INTEGER, 0x37),
    OpSpec("auipc", "U", INTEGER, 0x17),
    OpSpec("jal", "J", BRANCH, 0x6F),
    OpSpec("jalr", "JALR", BRANCH, 0x67, 0),
    OpSpec("beq", "B", BRANCH, 0x63, 0),
    OpSpec("bne", "B", BRANCH, 0x63, 1),
    OpSpec("blt", "B", BRANCH, 0x63, 4),
    OpSpec("bge", "B", BRANCH, 0x63, 5),
    OpSpec("bltu", "B", BRANCH, 0x63, 6),
    OpSpec("bgeu", "B", BRANCH, 0x63, 7),
    OpSpec("lb", "L", LOADSTORE, 0x03, 0),
    OpSpec("lh", "L", LOADSTORE, 0x03, 1),
    OpSpec("lw", "L", LOADSTORE, 0x03, 2),
    OpSpec("ld", "L", LOADSTORE, 0x03, 3),
    OpSpec("lbu", "L", LOADSTORE, 0x03, 4),
    OpSpec("lhu", "L", LOADSTORE, 0x03, 5),
    OpSpec("lwu", "L", LOADSTORE, 0x03, 6),
    OpSpec("sb", "S", LOADSTORE, 0x23, 0),
    OpSpec("sh", "S", LOADSTORE, 0x23, 1),
    OpSpec("sw", "S", LOADSTORE, 0x23, 2),
    OpSpec("sd", "S", LOADSTORE, 0x23, 3),
    OpSpec("addi", "I", INTEGER, 0x13, 0),
    OpSpec("slti", "I", INTEGER, 0x13, 2),
    OpSpec("sltiu", "I", INTEGER, 0x13, 3),
    OpSpec("xori", "I", INTEGER, 0x13, 4),
    OpSpec("ori", "I", INTEGER, 0x13, 6),
    OpSpec("andi", "I", INTEGER, 0x13, 7),
    OpSpec("slli", "ISH", INTEGER, 0x13, 1, 0x00),
    OpSpec("srli", "ISH", INTEGER, 0x13, 5, 0x00),
    OpSpec("srai", "ISH", INTEGER, 0x13, 5, 0x10),
    _r("add", 0, 0x00),
    _r("sub", 0, 0x20),
    _r("sll", 1, 0x00),
    _r("slt", 2, 0x00),
    _r("sltu", 3, 0x00),
    _r("xor", 4, 0x00),
    _r("srl", 5, 0x00),
    _r("sra", 5, 0x20),
    _r("or", 6, 0x00),
    _r("and", 7, 0x00),
    OpSpec("addiw", "I", INTEGER, 0x1B, 0),
    OpSpec("slliw", "ISHW", INTEGER, 0x1B, 1, 0x00),
    OpSpec("srliw", "ISHW", INTEGER, 0x1B, 5, 0x00),
    OpSpec("sraiw", "ISHW", INTEGER, 0x1B, 5, 0x20),
    _r("addw", 0, 0x00, op=0x3B),
    _r("subw", 0, 0x20, op=0x3B),
    _r("sllw", 1, 0x00, op=0x3B),
    _r("srlw", 5, 0x00, op=0x3B),
    _r("sraw", 5, 0x20, op=0x3B),
    _r("mul", 0, 0x01, MULDIV),
    _r("mulh", 1, 0x01, MULDIV),
    _r("mulhsu", 2, 0x01, MULDIV),
    _r("mulhu", 3, 0x01, MULDIV),
    _r("div", 4, 0x01, MULDIV),
    _r("divu", 5, 0x01, MULDIV),
    _r("rem", 6, 0x01, MULDIV),
    _r("remu", 7, 0x01, MULDIV),
    _r("mulw", 0, 0x01, MULDIV, 0x3B),
    _r("divw", 4, 0x01, MULDIV, 0x3B),
    _r("divuw", 5, 0x01, MULDIV, 0x3B),
    _r("remw", 6, 0x01, MULDIV, 0x3B),
    _r("remuw", 7, 0x01, MULDIV, 0x3B),
    OpSpec("csrrw", "CSR", CSR, 0x73, 1),
    OpSpec("csrrs", "CSR", CSR, 0x73, 2),
    OpSpec("csrrc", "CSR", CSR, 0x73, 3),
    OpSpec("csrrwi", "CSRI", CSR, 0x73, 5),
    OpSpec("csrrsi", "CSRI", CSR, 0x73, 6),
    OpSpec("csrrci", "CSRI", CSR, 0x73, 7),
    OpSpec("ecall", "SYS", SYSTEM, 0x73, word=0x00000073),
    OpSpec("ebreak", "SYS", SYSTEM, 0x73, word=0x00100073),
    OpSpec("sret", "SYS", SYSTEM, 0x73, word=0x10200073),
    OpSpec("mret", "SYS", SYSTEM, 0x73, word=0x30200073),
    OpSpec("wfi", "SYS", SYSTEM, 0x73, word=0x10500073),
    OpSpec("fadd.s", "FR", FP, 0x53, 0, 0x00),
    OpSpec("fsub.s", "FR", FP, 0x53, 0, 0x04),
    OpSpec("fmul.s", "FR", FP, 0x53, 0, 0x08),
    OpSpec("fdiv.s", "FR", FP, 0x53, 0, 0x0C),
    OpSpec("fsqrt.s", "FR1", FP, 0x53, 0, 0x2C),
    OpSpec("fmv.x.w", "FMV", FP, 0x53, 0, 0x70),
    OpSpec("fmv.w.x", "FMV", FP, 0x53, 0, 0x78),
)

OPS: dict[str, int] = {spec.mnemonic: i for i, spec in enumerate(TABLE)}
BY_MNEMONIC: dict[str, OpSpec] = {spec.mnemonic: spec for spec in TABLE}
MNEMONICS: tuple[str, ...] = tuple(spec.mnemonic for spec in TABLE)
NUM_OPS = len(TABLE)

# rounding-mode field values with a defined meaning (7 = dynamic, from frm)
VALID_RM = (0, 1, 2, 3, 4, 7)
RM_NAMES = {0: "rne", 1: "rtz", 2: "rdn", 3: "rup", 4: "rmm", 7: "dyn"}
RM_BY_NAME = {v: k for k, v in RM_NAMES.items()}

DIVIDES = frozenset({"div", "divu", "rem", "remu", "divw", "divuw", "remw", "remuw"})
FP_ARITH = frozenset({"fadd.s", "fsub.s", "fmul.s", "fdiv.s", "fsqrt.s"})


def _source_usage() -> tuple[list[int], list[int]]:
    """Per-op flags: does the op read rs1 / rs2 as integer registers."""
    rs1 = [0] * NUM_OPS
    rs2 = [0] * NUM_OPS
    for i, s in enumerate(TABLE):
        if s.fmt in ("R", "I", "ISH", "ISHW", "L", "S", "B", "JALR", "CSR"):
            rs1[i] = 1
        if s.fmt in ("R", "S", "B"):
            rs2[i] = 1
        if s.mnemonic == "fmv.w.x":
            rs1[i] = 1
    return rs1, rs2


READS_RS1, READS_RS2 = _source_usage()
