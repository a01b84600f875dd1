"""Reference ISA interpreter producing extended trace logs."""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .. import program as layout
from .._accel import kernel_context
from ..isa import csrs
from ..isa.state import MEM_BASE, MEM_SIZE, ArchState, PrivMode
from ..program import Program, ProgramLoadError
from ..selection import SELECTED, CsrSelection
from . import kernel as K
from .trace import END_REASONS, ROW_COLS, ExtendedTraceEntry, TraceLog

__all__ = ["ExecLimits", "Machine", "ProgramLoadError", "RunResult", "run", "run_from_state", "step"]


@dataclass(frozen=True)
class ExecLimits:
    """Termination bounds. A run also stops at ``ecall`` with x10 == 0."""

    max_retired: int = 1024
    exit_register: int = layout.EXIT_REG

    def __post_init__(self) -> None:
        if self.max_retired < 1:
            raise ValueError("max_retired must be positive")
        if self.exit_register != layout.EXIT_REG:
            raise ValueError("the exit convention is fixed to x10")


@dataclass
class RunResult:
    log: TraceLog
    retired: int
    status: int

    @property
    def end(self) -> str:
        return END_REASONS[self.status]


class Machine:
    """Reusable interpreter buffers for one worker.

    Between runs only the memory a run touched (code image and stored bytes)
    is cleared, which keeps short runs cheap.
    """

    def __init__(self, max_retired: int = 1024) -> None:
        self.mem = np.zeros(MEM_SIZE, dtype=np.uint8)
        self.x = np.zeros(32, dtype=np.int64)
        self.f = np.zeros(32, dtype=np.int64)
        self.csr = np.zeros(csrs.NUM_CSRS, dtype=np.int64)
        self.misc = np.zeros(K.NMISC, dtype=np.int64)
        self.cfg = np.zeros(K.NCFG, dtype=np.int64)
        self._reset_csr = np.array(csrs.reset_values(), dtype=np.uint64).view(np.int64)
        self._capacity = 0
        self._ensure(max_retired)
        self._dirty: list[tuple[int, int]] = []

    def _ensure(self, n: int) -> None:
        if n > self._capacity:
            self.out = np.zeros((n, K.NCOL), dtype=np.int64)
            self.snap = np.zeros((n, csrs.NUM_CSRS), dtype=np.int64)
            self._capacity = n

    def _clear(self) -> None:
        for lo, hi in self._dirty:
            self.mem[lo:hi] = 0
        self._dirty.clear()

    def load(self, words) -> int:
        self._clear()
        data = np.asarray(words, dtype=np.uint32).view(np.uint8)
        if data.size > MEM_SIZE:
            raise ProgramLoadError(f"image of {data.size} bytes exceeds {MEM_SIZE} bytes")
        self.mem[:data.size] = data
        self._dirty.append((0, data.size))
        return MEM_BASE + data.size

    def run_program(self, program: Program, selection: CsrSelection = SELECTED,
                    limits: ExecLimits = ExecLimits(), bugs: int = 0,
                    hazard_window: int = 3) -> RunResult:
        program.check_fits()
        code_hi = self.load(program.words)
        self.x[:] = 0
        self.f[:] = 0
        self.csr[:] = self._reset_csr
        m = self.misc
        m[:] = 0
        m[K.M_PC] = MEM_BASE
        m[K.M_PRIV] = int(PrivMode.MACHINE)
        m[K.M_LAST_FP] = K.FAR_PAST
        m[K.M_LAST_DIV] = K.FAR_PAST
        m[K.M_STORE_LO] = MEM_SIZE
        m[K.M_STORE_HI] = 0
        c = self.cfg
        c[K.K_MEM_BASE] = MEM_BASE
        c[K.K_CODE_LO] = MEM_BASE
        c[K.K_CODE_HI] = code_hi
        c[K.K_HANDLER_LO] = layout.HANDLER_LO
        c[K.K_HANDLER_HI] = layout.HANDLER_HI
        c[K.K_BODY_LO] = layout.BODY_START
        c[K.K_MTVEC] = layout.M_HANDLER
        c[K.K_STVEC] = layout.S_HANDLER
        c[K.K_BUGS] = bugs
        c[K.K_WINDOW] = hazard_window
        c[K.K_MAX_RETIRED] = limits.max_retired
        self._ensure(limits.max_retired)
        with kernel_context():
            n, status = K.execute(self.mem, c, self.x, self.f, self.csr, m, self.out, self.snap)
        n = int(n)
        if m[K.M_STORE_HI] > m[K.M_STORE_LO]:
            self._dirty.append((int(m[K.M_STORE_LO]), int(m[K.M_STORE_HI])))
        rows = self.out[:n, :ROW_COLS].copy()
        values = self.snap[:n][:, selection.indices]
        fired = self.out[:n, K.C_BUG].copy()
        log = TraceLog(rows, values, selection, END_REASONS[int(status)], fired)
        return RunResult(log, n, int(status))


_local = threading.local()


def _machine() -> Machine:
    m = getattr(_local, "machine", None)
    if m is None:
        m = _local.machine = Machine()
    return m


def run(program: Program, limits: ExecLimits = ExecLimits(),
        selection: CsrSelection = SELECTED) -> TraceLog:
    """Execute ``program`` on the reference model and return its trace log."""
    return _machine().run_program(program, selection, limits).log


def run_from_state(state: ArchState, selection: CsrSelection = SELECTED, max_retired: int = 1,
                   bugs: int = 0) -> tuple[ArchState, TraceLog]:
    """Execute up to ``max_retired`` instructions starting from ``state``.

    The whole memory counts as loaded code and the harness trap vectors are
    used; the input state is not modified. The log ends with "limit" unless an
    exit ``ecall``, a double trap or a fetch fault stops it first.
    """
    nxt = state.copy()
    misc = np.zeros(K.NMISC, dtype=np.int64)
    misc[K.M_PC] = nxt.pc
    misc[K.M_PRIV] = int(nxt.priv)
    misc[K.M_LAST_FP] = K.FAR_PAST
    misc[K.M_LAST_DIV] = K.FAR_PAST
    misc[K.M_STORE_LO] = MEM_SIZE
    cfg = np.zeros(K.NCFG, dtype=np.int64)
    cfg[K.K_MEM_BASE] = MEM_BASE
    cfg[K.K_CODE_LO] = MEM_BASE
    cfg[K.K_CODE_HI] = MEM_BASE + MEM_SIZE
    cfg[K.K_BODY_LO] = MEM_BASE
    cfg[K.K_MTVEC] = layout.M_HANDLER
    cfg[K.K_STVEC] = layout.S_HANDLER
    cfg[K.K_BUGS] = bugs
    cfg[K.K_WINDOW] = 3
    cfg[K.K_MAX_RETIRED] = max_retired
    out = np.zeros((max_retired, K.NCOL), dtype=np.int64)
    snap = np.zeros((max_retired, csrs.NUM_CSRS), dtype=np.int64)
    with kernel_context():
        n, status = K.execute(nxt.mem, cfg, nxt.x, nxt.f, nxt.csr, misc, out, snap)
    n = int(n)
    nxt.pc = int(misc[K.M_PC]) & csrs.MASK64
    nxt.priv = PrivMode(int(misc[K.M_PRIV]))
    log = TraceLog(out[:n, :ROW_COLS].copy(), snap[:n][:, selection.indices], selection,
                   END_REASONS[int(status)], out[:n, K.C_BUG].copy())
    return nxt, log


def step(state: ArchState, selection: CsrSelection = SELECTED,
         bugs: int = 0) -> tuple[ArchState, ExtendedTraceEntry]:
    """Execute the single instruction at ``state.pc``; see ``run_from_state``."""
    nxt, log = run_from_state(state, selection, 1, bugs)
    if len(log) != 1:
        raise ValueError(f"pc 0x{state.pc:x} does not address a loaded instruction")
    return nxt, log.entry(0)
