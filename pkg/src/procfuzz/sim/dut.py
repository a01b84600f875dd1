"""Device-under-test model: the golden interpreter plus injectable defects.

Each defect is a switch inside the shared kernel. The DUT records, per
entry, which defects altered it, which is how campaign exposures are
attributed when several defects are enabled at once.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from ..program import Program
from ..selection import SELECTED, CsrSelection
from . import kernel as K
from .golden import ExecLimits, RunResult, _machine
from .trace import TraceLog


class BugId(enum.Enum):
    FflagsRawHazard = K.BUG_FFLAGS_RAW
    FsSetOnFcsrWriteWhenOff = K.BUG_FS_WHEN_OFF
    SepcLowBitsWritable = K.BUG_SEPC_LOW_BITS
    ReadOnlyCsrWriteSilent = K.BUG_RO_WRITE_SILENT
    ZeroRegBypassLeak = K.BUG_X0_BYPASS
    FsGratuitousDirty = K.BUG_FS_GRATUITOUS
    TransitionSensitiveSynthetic = K.BUG_TRANSITION

    @property
    def bit(self) -> int:
        return self.value

    @classmethod
    def parse(cls, name: str) -> "BugId":
        try:
            return cls[name]
        except KeyError:
            raise ValueError(f"unknown bug {name!r}; known: {', '.join(b.name for b in cls)}") from None


ALL_BUGS = tuple(BugId)

# trigger and effect of each defect, for reports and --help output
TRIGGERS = {
    BugId.FflagsRawHazard: "fflags/fcsr read within the hazard window after an fp op returns the pre-op flags",
    BugId.FsSetOnFcsrWriteWhenOff: "fp CSR access with mstatus.FS = Off sets FS dirty instead of trapping",
    BugId.SepcLowBitsWritable: "csr write to sepc keeps bits 1:0",
    BugId.ReadOnlyCsrWriteSilent: "write to a read-only CSR is dropped without an illegal-instruction trap",
    BugId.ZeroRegBypassLeak: "x0 read within the hazard window after div/rem with rd = x0 returns the quotient",
    BugId.FsGratuitousDirty: "fp CSR write of an unchanged value still marks FS dirty",
    BugId.TransitionSensitiveSynthetic: (
        "next writeback flipped after an ecall from U delegated to S, when U was entered from S by a body sret"),
}


def bug_mask(bugs) -> int:
    m = 0
    for b in bugs:
        m |= BugId(b).bit
    return m


def bugs_in(mask: int) -> tuple[BugId, ...]:
    return tuple(b for b in BugId if mask & b.bit)


def parse_bug_list(text: str) -> frozenset[BugId]:
    """``all``, ``none`` or a comma-separated list of BugId names."""
    t = text.strip()
    if t.lower() == "all":
        return frozenset(BugId)
    if t.lower() in ("none", ""):
        return frozenset()
    return frozenset(BugId.parse(part.strip()) for part in t.split(",") if part.strip())


@dataclass(frozen=True)
class DutConfig:
    enabled_bugs: frozenset[BugId] = field(default_factory=frozenset)
    hazard_window: int = 3
    slowdown_factor: int = 79

    def __post_init__(self) -> None:
        object.__setattr__(self, "enabled_bugs", frozenset(BugId(b) for b in self.enabled_bugs))
        if self.hazard_window < 1:
            raise ValueError("hazard_window must be at least 1")
        if self.slowdown_factor < 1:
            raise ValueError("slowdown_factor must be at least 1")

    @property
    def mask(self) -> int:
        return bug_mask(self.enabled_bugs)

    def only(self, bug: BugId) -> "DutConfig":
        return DutConfig(frozenset({bug}), self.hazard_window, self.slowdown_factor)


def dut_execute(program: Program, cfg: DutConfig, limits: ExecLimits = ExecLimits(),
                selection: CsrSelection = SELECTED) -> RunResult:
    return _machine().run_program(program, selection, limits, cfg.mask, cfg.hazard_window)


def dut_run(program: Program, cfg: DutConfig, limits: ExecLimits = ExecLimits(),
            selection: CsrSelection = SELECTED) -> TraceLog:
    """Execute ``program`` on the defective model; ``log.fired`` marks altered entries."""
    return dut_execute(program, cfg, limits, selection).log
