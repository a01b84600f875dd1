"""Test-input programs and the fixed harness that wraps them in memory.

Layout at ``MEM_BASE``::

    +0    entry: data pointer in x9, mepc/sepc <- body, medeleg, mstatus.MPP/FS, mret
    +52   M-mode trap stub: x30 <- mcause, mepc += 4, mret
    +72   S-mode trap stub: x30 <- scause, sepc += 4, sret
    +92   body (1..max_len instructions)
    ...   epilogue: (x10 <- 0, ecall) three times, so short forward jumps
          past the body still end the run cleanly

The stubs record the cause and resume after the faulting instruction, so
programs survive their own illegal instructions. Body instructions never write
x9, x10, x30 or x31, which the harness owns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

from .isa import csrs
from .isa.instruction import Instruction, encode
from .isa.state import MEM_BASE, MEM_SIZE, PrivMode

ENTRY_OFFSET = 0
M_HANDLER = MEM_BASE + 52
S_HANDLER = MEM_BASE + 72
HANDLER_LO = M_HANDLER
HANDLER_HI = MEM_BASE + 92
BODY_START = MEM_BASE + 92
DATA_OFFSET = 0x80000
DATA_BASE = MEM_BASE + DATA_OFFSET

DATA_REG = 9
EXIT_REG = 10
SCRATCH_REGS = (30, 31)
RESERVED_REGS = frozenset({DATA_REG, EXIT_REG, *SCRATCH_REGS})

MAX_LEN = 64


class ProgramLoadError(ValueError):
    """The program does not fit the memory region."""


def _li_pair(value: int) -> tuple[int, int]:
    """(lui imm20, addi imm12) that materialise a small positive constant."""
    lo = value & 0xFFF
    if lo >= 0x800:
        lo -= 0x1000
    hi = ((value - lo) >> 12) & 0xFFFFF
    return hi, lo


def build_prologue(start_priv: PrivMode, medeleg: int) -> tuple[Instruction, ...]:
    mstatus_bits = (int(start_priv) << csrs.MSTATUS_MPP_SHIFT) | (csrs.FS_INITIAL << csrs.MSTATUS_FS_SHIFT)
    hi, lo = _li_pair(mstatus_bits)
    mepc = csrs.CSR_ADDRESS["mepc"]
    sepc = csrs.CSR_ADDRESS["sepc"]
    entry = (
        Instruction("auipc", rd=31, imm=0),
        Instruction("lui", rd=DATA_REG, imm=DATA_OFFSET >> 12),
        Instruction("add", rd=DATA_REG, rs1=DATA_REG, rs2=31),
        Instruction("addi", rd=31, rs1=31, imm=BODY_START - MEM_BASE),
        Instruction("csrrw", rd=0, rs1=31, csr=mepc),
        Instruction("csrrw", rd=0, rs1=31, csr=sepc),
        Instruction("addi", rd=31, rs1=0, imm=medeleg),
        Instruction("csrrw", rd=0, rs1=31, csr=csrs.CSR_ADDRESS["medeleg"]),
        Instruction("lui", rd=31, imm=hi),
        Instruction("addi", rd=31, rs1=31, imm=lo),
        Instruction("csrrs", rd=0, rs1=31, csr=csrs.CSR_ADDRESS["mstatus"]),
        Instruction("addi", rd=EXIT_REG, rs1=0, imm=1),
        Instruction("mret"),
    )
    m_stub = (
        Instruction("csrrs", rd=30, rs1=0, csr=csrs.CSR_ADDRESS["mcause"]),
        Instruction("csrrs", rd=31, rs1=0, csr=mepc),
        Instruction("addi", rd=31, rs1=31, imm=4),
        Instruction("csrrw", rd=0, rs1=31, csr=mepc),
        Instruction("mret"),
    )
    s_stub = (
        Instruction("csrrs", rd=30, rs1=0, csr=csrs.CSR_ADDRESS["scause"]),
        Instruction("csrrs", rd=31, rs1=0, csr=sepc),
        Instruction("addi", rd=31, rs1=31, imm=4),
        Instruction("csrrw", rd=0, rs1=31, csr=sepc),
        Instruction("sret"),
    )
    out = entry + m_stub + s_stub
    assert MEM_BASE + 4 * len(entry) == M_HANDLER
    assert MEM_BASE + 4 * len(out) == BODY_START
    return out


EPILOGUE: tuple[Instruction, ...] = (
    Instruction("addi", rd=EXIT_REG, rs1=0, imm=0),
    Instruction("ecall"),
) * 3
_EPILOGUE_WORDS = tuple(encode(i) for i in EPILOGUE)


@lru_cache(maxsize=None)
def _prologue_words(start_priv: PrivMode, medeleg: int) -> tuple[int, ...]:
    return tuple(encode(i) for i in build_prologue(start_priv, medeleg))


_encode_cached = lru_cache(maxsize=1 << 16)(encode)


@dataclass(frozen=True)
class Program:
    """A fuzzing input: a mutable body inside the fixed harness.

    ``start_priv`` is the privilege the entry code drops to before the body;
    ``medeleg`` is the exception-delegation mask it installs.
    """

    body: tuple[Instruction, ...]
    start_priv: PrivMode = PrivMode.MACHINE
    medeleg: int = 0
    _words: tuple[int, ...] | None = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self) -> None:
        if not self.body:
            raise ValueError("program body must not be empty")
        if not 0 <= self.medeleg <= csrs.MEDELEG_WMASK or self.medeleg & ~csrs.MEDELEG_WMASK:
            raise ValueError(f"medeleg {self.medeleg:#x} outside the writable mask")
        object.__setattr__(self, "start_priv", PrivMode(self.start_priv))
        object.__setattr__(self, "body", tuple(self.body))

    @property
    def prologue(self) -> tuple[Instruction, ...]:
        return build_prologue(self.start_priv, self.medeleg)

    @property
    def epilogue(self) -> tuple[Instruction, ...]:
        return EPILOGUE

    @property
    def instructions(self) -> tuple[Instruction, ...]:
        return self.prologue + self.body + EPILOGUE

    @property
    def words(self) -> tuple[int, ...]:
        w = self._words
        if w is None:
            w = (_prologue_words(self.start_priv, self.medeleg)
                 + tuple(_encode_cached(i) for i in self.body) + _EPILOGUE_WORDS)
            object.__setattr__(self, "_words", w)
        return w

    @property
    def code_end(self) -> int:
        return MEM_BASE + 4 * len(self.words)

    def check_fits(self) -> None:
        if 4 * len(self.words) > DATA_OFFSET:
            raise ProgramLoadError(
                f"program of {len(self.words)} words overruns the code region "
                f"({DATA_OFFSET // 4} words available of {MEM_SIZE} bytes)")

    def with_body(self, body) -> "Program":
        return Program(tuple(body), self.start_priv, self.medeleg)
