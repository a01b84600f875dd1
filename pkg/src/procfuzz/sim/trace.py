"""Extended trace logs: one record per retired instruction plus CSR snapshots.

Logs are stored column-wise (numpy) because the fuzz loop only ever looks at
a few columns; ``entries`` materialises the per-instruction records on demand.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..isa import csrs
from ..isa.instruction import disasm_word
from ..isa.opcodes import MNEMONICS
from ..isa.state import PrivMode, TrapCause
from ..selection import CsrSelection, SelectionMismatch
from . import kernel as K

# row columns kept in a log (the defect column lives in ``fired``)
ROW_COLS = K.C_BUG

END_REASONS = {K.ST_LIMIT: "limit", K.ST_EXIT: "exit", K.ST_DOUBLE_TRAP: "double-trap",
               K.ST_FETCH_FAULT: "fetch-fault"}
END_CODES = {v: k for k, v in END_REASONS.items()}

MASK64 = csrs.MASK64


def u64(v) -> int:
    return int(v) & MASK64


@dataclass(frozen=True)
class Writeback:
    kind: str  # "x" or "f"
    reg: int
    value: int

    def __str__(self) -> str:
        return f"{self.kind}{self.reg} 0x{self.value:016x}"


@dataclass(frozen=True)
class ExtendedTraceEntry:
    index: int
    pc: int
    encoding: int
    disasm: str
    priv: PrivMode
    writeback: Writeback | None
    csr_write: tuple[int, int] | None
    csr_snapshot: tuple[tuple[str, int], ...]
    trap: TrapCause | None

    @property
    def mnemonic(self) -> str:
        return self.disasm.split(" ", 1)[0] if not self.disasm.startswith(".word") else "illegal"

    def csr(self, name: str) -> int:
        return dict(self.csr_snapshot)[name]


def op_mnemonic(op: int) -> str:
    return MNEMONICS[op] if op >= 0 else "illegal"


class TraceLog:
    """A recorded run under one CSR selection.

    ``rows`` has the kernel's first ``ROW_COLS`` columns (pc, encoding, op,
    priv, writeback kind/reg/value, trap, committed CSR write addr/value);
    ``values`` holds the monitored CSR values after each entry, one column per
    CSR in ``selection.monitored`` order. ``fired`` marks entries a DUT defect
    altered and is not part of the log's identity.
    """

    def __init__(self, rows: np.ndarray, values: np.ndarray, selection: CsrSelection,
                 end: str = "exit", fired: np.ndarray | None = None) -> None:
        if rows.ndim != 2 or rows.shape[1] != ROW_COLS:
            raise ValueError("rows must be an (n, %d) array" % ROW_COLS)
        if values.shape != (rows.shape[0], len(selection.monitored)):
            raise ValueError("values must have one column per monitored CSR")
        if end not in END_CODES:
            raise ValueError(f"unknown end reason {end!r}")
        self.rows = rows
        self.values = values
        self.selection = selection
        self.end = end
        self.fired = fired if fired is not None else np.zeros(rows.shape[0], dtype=np.int64)

    def __len__(self) -> int:
        return self.rows.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TraceLog):
            return NotImplemented
        return (self.selection.monitored == other.selection.monitored
                and self.selection.name == other.selection.name
                and self.end == other.end
                and np.array_equal(self.rows, other.rows)
                and np.array_equal(self.values, other.values))

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"TraceLog({len(self)} entries, selection={self.selection.name}, end={self.end})"

    @cached_property
    def mnemonics(self) -> list[str]:
        return [op_mnemonic(int(o)) for o in self.rows[:, K.C_OP]]

    def entry(self, i: int) -> ExtendedTraceEntry:
        r = self.rows[i]
        wbk = int(r[K.C_WBK])
        wb = None
        if wbk:
            wb = Writeback("x" if wbk == 1 else "f", int(r[K.C_WBR]), u64(r[K.C_WBV]))
        cwa = int(r[K.C_CWA])
        trap = int(r[K.C_TRAP])
        return ExtendedTraceEntry(
            index=i,
            pc=u64(r[K.C_PC]),
            encoding=int(r[K.C_ENC]),
            disasm=disasm_word(int(r[K.C_ENC])),
            priv=PrivMode(int(r[K.C_PRIV])),
            writeback=wb,
            csr_write=None if cwa < 0 else (cwa, u64(r[K.C_CWV])),
            csr_snapshot=tuple((n, u64(v)) for n, v in zip(self.selection.monitored, self.values[i])),
            trap=None if trap < 0 else TrapCause(trap),
        )

    @property
    def entries(self) -> list[ExtendedTraceEntry]:
        return [self.entry(i) for i in range(len(self))]

    def csr_column(self, name: str) -> np.ndarray:
        try:
            col = self.selection.monitored.index(name)
        except ValueError:
            raise KeyError(f"{name} is not monitored by selection {self.selection.name}") from None
        return self.values[:, col]

    def require_selection(self, selection: CsrSelection) -> None:
        if (selection.name != self.selection.name
                or selection.monitored != self.selection.monitored):
            raise SelectionMismatch(
                f"log recorded under selection {self.selection.name!r} "
                f"({','.join(self.selection.monitored)}), not {selection.name!r}")

    def with_selection(self, selection: CsrSelection) -> "TraceLog":
        """Project onto a sub-selection of the monitored CSRs."""
        cols = []
        for name in selection.monitored:
            if name not in self.selection.monitored:
                raise SelectionMismatch(f"{name} was not recorded in this log")
            cols.append(self.selection.monitored.index(name))
        return TraceLog(self.rows, self.values[:, cols], selection, self.end, self.fired)


def empty_log(selection: CsrSelection) -> TraceLog:
    return TraceLog(np.zeros((0, ROW_COLS), dtype=np.int64),
                    np.zeros((0, len(selection.monitored)), dtype=np.int64), selection, "exit")
