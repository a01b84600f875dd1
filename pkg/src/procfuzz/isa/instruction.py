"""Instruction values, encoder, table-driven decoder and disassembler."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from . import csrs
from .opcodes import BY_MNEMONIC, RM_NAMES, TABLE, VALID_RM, OpSpec


class IllegalEncoding:
    """Result of decoding a word outside the modeled subset."""

    __slots__ = ("word",)

    def __init__(self, word: int) -> None:
        self.word = word

    def __eq__(self, other: object) -> bool:
        return isinstance(other, IllegalEncoding) and other.word == self.word

    def __hash__(self) -> int:
        return hash(("illegal", self.word))

    def __repr__(self) -> str:
        return f"IllegalEncoding(0x{self.word:08x})"

    def __bool__(self) -> bool:
        return False


def _sext(value: int, bits: int) -> int:
    value &= (1 << bits) - 1
    return value - (1 << bits) if value >> (bits - 1) else value


@dataclass(frozen=True)
class Instruction:
    """One instruction of the subset.

    Unused operand fields are zero so that equal instructions have equal
    encodings. ``imm`` is the sign-extended immediate (the raw 20-bit field for
    ``lui``/``auipc``, the shift amount for shifts, the 5-bit zero-extended
    source for the immediate Zicsr forms is kept in ``rs1``).
    """

    mnemonic: str
    rd: int = 0
    rs1: int = 0
    rs2: int = 0
    imm: int = 0
    csr: int = 0
    rm: int = 0

    def __post_init__(self) -> None:
        spec = BY_MNEMONIC.get(self.mnemonic)
        if spec is None:
            raise ValueError(f"unsupported mnemonic {self.mnemonic!r}")
        for name in ("rd", "rs1", "rs2"):
            v = getattr(self, name)
            if not 0 <= v < 32:
                raise ValueError(f"{self.mnemonic}: {name}={v} out of range")
        _check_imm(spec, self.imm)
        if spec.fmt in ("CSR", "CSRI") and not 0 <= self.csr < 4096:
            raise ValueError(f"{self.mnemonic}: csr address {self.csr:#x} out of range")
        if spec.fmt in ("FR", "FR1") and self.rm not in VALID_RM:
            raise ValueError(f"{self.mnemonic}: reserved rounding mode {self.rm}")

    @property
    def spec(self) -> OpSpec:
        return BY_MNEMONIC[self.mnemonic]

    @property
    def cls(self) -> str:
        return BY_MNEMONIC[self.mnemonic].cls

    @property
    def encoding(self) -> int:
        return encode(self)

    def __str__(self) -> str:
        return disasm(self)


_IMM_RANGE = {
    "I": (-2048, 2047),
    "L": (-2048, 2047),
    "S": (-2048, 2047),
    "JALR": (-2048, 2047),
    "B": (-4096, 4094),
    "J": (-(1 << 20), (1 << 20) - 2),
    "U": (0, (1 << 20) - 1),
    "ISH": (0, 63),
    "ISHW": (0, 31),
}


def _check_imm(spec: OpSpec, imm: int) -> None:
    lo_hi = _IMM_RANGE.get(spec.fmt)
    if lo_hi is None:
        if imm != 0:
            raise ValueError(f"{spec.mnemonic} takes no immediate")
        return
    lo, hi = lo_hi
    if not lo <= imm <= hi:
        raise ValueError(f"{spec.mnemonic}: immediate {imm} outside [{lo}, {hi}]")
    if spec.fmt in ("B", "J") and imm & 1:
        raise ValueError(f"{spec.mnemonic}: branch offset {imm} is odd")


def encode(instr: Instruction) -> int:
    s = instr.spec
    f = s.fmt
    rd, rs1, rs2, imm = instr.rd, instr.rs1, instr.rs2, instr.imm
    base = s.match
    if f == "SYS":
        return base
    if f == "R":
        return base | rd << 7 | rs1 << 15 | rs2 << 20
    if f in ("I", "L", "JALR"):
        return base | rd << 7 | rs1 << 15 | (imm & 0xFFF) << 20
    if f in ("ISH", "ISHW"):
        return base | rd << 7 | rs1 << 15 | imm << 20
    if f == "S":
        u = imm & 0xFFF
        return base | (u & 0x1F) << 7 | rs1 << 15 | rs2 << 20 | (u >> 5) << 25
    if f == "B":
        u = imm & 0x1FFF
        return (base | ((u >> 11) & 1) << 7 | ((u >> 1) & 0xF) << 8 | rs1 << 15 | rs2 << 20
                | ((u >> 5) & 0x3F) << 25 | ((u >> 12) & 1) << 31)
    if f == "U":
        return base | rd << 7 | imm << 12
    if f == "J":
        u = imm & 0x1FFFFF
        return (base | rd << 7 | ((u >> 12) & 0xFF) << 12 | ((u >> 11) & 1) << 20
                | ((u >> 1) & 0x3FF) << 21 | ((u >> 20) & 1) << 31)
    if f in ("CSR", "CSRI"):
        return base | rd << 7 | rs1 << 15 | instr.csr << 20
    if f == "FR":
        return base | rd << 7 | instr.rm << 12 | rs1 << 15 | rs2 << 20
    if f == "FR1":
        return base | rd << 7 | instr.rm << 12 | rs1 << 15
    if f == "FMV":
        return base | rd << 7 | rs1 << 15
    raise AssertionError(f)


def _fields(spec: OpSpec, w: int) -> Instruction:
    f = spec.fmt
    rd = (w >> 7) & 31
    rs1 = (w >> 15) & 31
    rs2 = (w >> 20) & 31
    m = spec.mnemonic
    if f == "SYS":
        return Instruction(m)
    if f == "R":
        return Instruction(m, rd, rs1, rs2)
    if f in ("I", "L", "JALR"):
        return Instruction(m, rd, rs1, imm=_sext(w >> 20, 12))
    if f == "ISH":
        return Instruction(m, rd, rs1, imm=(w >> 20) & 63)
    if f == "ISHW":
        return Instruction(m, rd, rs1, imm=(w >> 20) & 31)
    if f == "S":
        return Instruction(m, rs1=rs1, rs2=rs2, imm=_sext(((w >> 25) << 5) | rd, 12))
    if f == "B":
        u = (((w >> 31) & 1) << 12 | ((w >> 7) & 1) << 11 | ((w >> 25) & 0x3F) << 5
             | ((w >> 8) & 0xF) << 1)
        return Instruction(m, rs1=rs1, rs2=rs2, imm=_sext(u, 13))
    if f == "U":
        return Instruction(m, rd, imm=(w >> 12) & 0xFFFFF)
    if f == "J":
        u = (((w >> 31) & 1) << 20 | ((w >> 12) & 0xFF) << 12 | ((w >> 20) & 1) << 11
             | ((w >> 21) & 0x3FF) << 1)
        return Instruction(m, rd, imm=_sext(u, 21))
    if f in ("CSR", "CSRI"):
        return Instruction(m, rd, rs1, csr=(w >> 20) & 0xFFF)
    if f == "FR":
        return Instruction(m, rd, rs1, rs2, rm=(w >> 12) & 7)
    if f == "FR1":
        return Instruction(m, rd, rs1, rm=(w >> 12) & 7)
    if f == "FMV":
        return Instruction(m, rd, rs1)
    raise AssertionError(f)


_BY_OPCODE: dict[int, list[OpSpec]] = {}
for _s in TABLE:
    _BY_OPCODE.setdefault(_s.opcode, []).append(_s)


@lru_cache(maxsize=1 << 16)
def decode(word: int) -> Instruction | IllegalEncoding:
    """Decode a 32-bit word; words outside the subset give IllegalEncoding."""
    word &= 0xFFFFFFFF
    for spec in _BY_OPCODE.get(word & 0x7F, ()):
        if word & spec.mask != spec.match:
            continue
        if spec.fmt in ("FR", "FR1") and (word >> 12) & 7 not in VALID_RM:
            continue
        return _fields(spec, word)
    return IllegalEncoding(word)


def mnemonic_of(word: int) -> str:
    d = decode(word)
    return d.mnemonic if isinstance(d, Instruction) else "illegal"


def csr_write_targets(instr: Instruction | IllegalEncoding) -> frozenset[int]:
    """CSR addresses the instruction explicitly writes.

    ``csrrs``/``csrrc`` with ``rs1 = x0`` and their immediate forms with a zero
    immediate only read.
    """
    if not isinstance(instr, Instruction) or instr.cls != "csr":
        return frozenset()
    m = instr.mnemonic
    if m in ("csrrw", "csrrwi") or instr.rs1 != 0:
        return frozenset({instr.csr})
    return frozenset()


def csr_label(address: int) -> str:
    return csrs.CSR_NAME.get(address, f"0x{address:03x}")


def disasm(instr: Instruction | IllegalEncoding) -> str:
    if isinstance(instr, IllegalEncoding):
        return f".word 0x{instr.word:08x}"
    s = instr.spec
    f = s.fmt
    m = instr.mnemonic
    rd, rs1, rs2, imm = instr.rd, instr.rs1, instr.rs2, instr.imm
    if f == "SYS":
        return m
    if f == "R":
        return f"{m} x{rd}, x{rs1}, x{rs2}"
    if f in ("I", "ISH", "ISHW"):
        return f"{m} x{rd}, x{rs1}, {imm}"
    if f in ("L", "JALR"):
        return f"{m} x{rd}, {imm}(x{rs1})"
    if f == "S":
        return f"{m} x{rs2}, {imm}(x{rs1})"
    if f == "B":
        return f"{m} x{rs1}, x{rs2}, {imm}"
    if f == "U":
        return f"{m} x{rd}, 0x{imm:x}"
    if f == "J":
        return f"{m} x{rd}, {imm}"
    if f == "CSR":
        return f"{m} x{rd}, {csr_label(instr.csr)}, x{rs1}"
    if f == "CSRI":
        return f"{m} x{rd}, {csr_label(instr.csr)}, {rs1}"
    if f == "FR":
        text = f"{m} f{rd}, f{rs1}, f{rs2}"
        return text if instr.rm == 7 else f"{text}, {RM_NAMES[instr.rm]}"
    if f == "FR1":
        text = f"{m} f{rd}, f{rs1}"
        return text if instr.rm == 7 else f"{text}, {RM_NAMES[instr.rm]}"
    if m == "fmv.x.w":
        return f"{m} x{rd}, f{rs1}"
    return f"{m} f{rd}, x{rs1}"


@lru_cache(maxsize=1 << 16)
def disasm_word(word: int) -> str:
    return disasm(decode(word))
