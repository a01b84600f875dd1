"""Privilege modes, trap causes and the architectural state record."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import csrs

MEM_BASE = 0x8000_0000
MEM_SIZE = 1 << 20


class PrivMode(enum.IntEnum):
    USER = 0
    SUPERVISOR = 1
    MACHINE = 3

    @property
    def letter(self) -> str:
        return {0: "U", 1: "S", 3: "M"}[self.value]

    @classmethod
    def from_letter(cls, ch: str) -> "PrivMode":
        try:
            return {"U": cls.USER, "S": cls.SUPERVISOR, "M": cls.MACHINE}[ch]
        except KeyError:
            raise ValueError(f"unknown privilege letter {ch!r}") from None


class TrapCause(enum.IntEnum):
    INSTRUCTION_ADDRESS_MISALIGNED = 0
    ILLEGAL_INSTRUCTION = 2
    BREAKPOINT = 3
    LOAD_ADDRESS_MISALIGNED = 4
    LOAD_ACCESS_FAULT = 5
    STORE_ADDRESS_MISALIGNED = 6
    STORE_ACCESS_FAULT = 7
    ECALL_FROM_U = 8
    ECALL_FROM_S = 9
    ECALL_FROM_M = 11

    @classmethod
    def ecall_from(cls, priv: int) -> "TrapCause":
        return {0: cls.ECALL_FROM_U, 1: cls.ECALL_FROM_S, 3: cls.ECALL_FROM_M}[priv]


TRAP_CAUSES = tuple(int(c) for c in TrapCause)


def trap_target(cause: int, priv: int, medeleg: int) -> PrivMode:
    """Privilege that handles an exception raised at ``priv``."""
    if priv < PrivMode.MACHINE and (medeleg >> cause) & 1:
        return PrivMode.SUPERVISOR
    return PrivMode.MACHINE


@dataclass
class ArchState:
    """Mutable architectural state of one hart.

    ``x`` and ``f`` hold raw 64-bit patterns as int64; ``csr`` is indexed by
    the dense CSR index (see ``csrs``); ``mem`` covers
    ``[MEM_BASE, MEM_BASE + MEM_SIZE)``.
    """

    pc: int = MEM_BASE
    priv: PrivMode = PrivMode.MACHINE
    x: np.ndarray = field(default_factory=lambda: np.zeros(32, dtype=np.int64))
    f: np.ndarray = field(default_factory=lambda: np.zeros(32, dtype=np.int64))
    csr: np.ndarray = field(
        default_factory=lambda: np.array(csrs.reset_values(), dtype=np.uint64).view(np.int64)
    )
    mem: np.ndarray = field(default_factory=lambda: np.zeros(MEM_SIZE, dtype=np.uint8))

    def copy(self) -> "ArchState":
        return ArchState(self.pc, self.priv, self.x.copy(), self.f.copy(), self.csr.copy(),
                         self.mem.copy())

    def read_csr(self, name: str) -> int:
        return int(self.csr[csrs.CSR_BY_NAME[name].index]) & csrs.MASK64

    def write_csr(self, name: str, value: int) -> None:
        self.csr[csrs.CSR_BY_NAME[name].index] = np.uint64(value & csrs.MASK64).view(np.int64)

    def xreg(self, i: int) -> int:
        return int(self.x[i]) & csrs.MASK64

    def set_xreg(self, i: int, value: int) -> None:
        if i:
            self.x[i] = np.uint64(value & csrs.MASK64).view(np.int64)

    def load_words(self, address: int, words) -> None:
        off = address - MEM_BASE
        data = np.asarray(list(words), dtype=np.uint32).view(np.uint8)
        self.mem[off:off + data.size] = data
