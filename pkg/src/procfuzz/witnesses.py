"""Hand-written trigger programs for each injectable defect.

Every positive witness must diverge at ``trigger_pc`` (first execution) in
``field``; the negative witness sits next to the trigger condition without
meeting it and must not diverge.
"""

from __future__ import annotations

from dataclasses import dataclass

from .program import BODY_START, S_HANDLER, Program
from .sim.dut import BugId
from .traceio import assemble


@dataclass(frozen=True)
class Witness:
    bug: BugId
    positive: Program
    negative: Program
    field: str
    trigger_pc: int
    note: str


def _body_pc(k: int) -> int:
    return BODY_START + 4 * k


def _prog(text: str) -> Program:
    return assemble(text)


WITNESSES: dict[BugId, Witness] = {}


def _add(w: Witness) -> None:
    WITNESSES[w.bug] = w


_add(Witness(
    BugId.FflagsRawHazard,
    _prog("""
        .priv M
        lui x1, 0x3f800           # 1.0f
        fmv.w.x f1, x1
        fdiv.s f2, f1, f0         # 1/0 raises DZ
        csrrs x5, fflags, x0      # reads 0x08; the hazard returns 0x00
    """),
    _prog("""
        .priv M
        lui x1, 0x3f800
        fmv.w.x f1, x1
        fdiv.s f2, f1, f0
        addi x2, x0, 1
        addi x2, x0, 2
        addi x2, x0, 3            # reader is outside the 3-entry window
        csrrs x5, fflags, x0
    """),
    "writeback", _body_pc(3), "csrrs of fflags right after fdiv.s"))

_add(Witness(
    BugId.FsSetOnFcsrWriteWhenOff,
    _prog("""
        .priv M
        lui x1, 0x6
        csrrc x0, mstatus, x1     # FS <- Off
        csrrwi x0, frm, 1         # must trap illegal-instruction
    """),
    _prog("""
        .priv M
        csrrwi x0, frm, 1         # FS is Initial: legal
    """),
    "csr:mstatus", _body_pc(2), "frm write with mstatus.FS = Off"))

_add(Witness(
    BugId.SepcLowBitsWritable,
    _prog("""
        .priv M
        lui x1, 0x80000
        addi x1, x1, 3
        csrrw x0, sepc, x1        # golden clears bits 1:0
    """),
    _prog("""
        .priv M
        lui x1, 0x80000
        addi x1, x1, 4
        csrrw x0, sepc, x1
    """),
    "csr:sepc", _body_pc(2), "sepc write with bits 1:0 set"))

_add(Witness(
    BugId.ReadOnlyCsrWriteSilent,
    _prog("""
        .priv M
        addi x1, x0, 5
        csrrw x0, mhartid, x1     # must trap illegal-instruction
    """),
    _prog("""
        .priv M
        csrrs x1, mhartid, x0     # read only: legal
    """),
    "csr:mstatus", _body_pc(1), "write to mhartid"))

_add(Witness(
    BugId.ZeroRegBypassLeak,
    _prog("""
        .priv M
        addi x1, x0, 7
        addi x2, x0, 2
        div x0, x1, x2            # quotient 3 is discarded
        add x3, x0, x0            # golden 0; the leak gives 6
    """),
    _prog("""
        .priv M
        addi x1, x0, 7
        addi x2, x0, 2
        div x4, x1, x2
        add x3, x0, x0
    """),
    "writeback", _body_pc(3), "x0 read right after div with rd = x0"))

_add(Witness(
    BugId.FsGratuitousDirty,
    _prog("""
        .priv M
        csrrwi x0, frm, 0         # frm is already 0; FS stays Initial
    """),
    _prog("""
        .priv M
        csrrwi x0, frm, 2         # real change: FS becomes Dirty in both
    """),
    "csr:mstatus", _body_pc(0), "frm write of its current value"))

# N1 = U entered from S by an sret in the body, N2 = S entered by an ecall
# from U delegated through medeleg. In S the ecall goes to M and the body sret
# drops to U at the body start; the repeated ecall now traps to S, and the
# S stub's first writeback is corrupted.
_add(Witness(
    BugId.TransitionSensitiveSynthetic,
    _prog("""
        .priv S
        .medeleg 0x100
        ecall
        sret
        addi x1, x0, 1
    """),
    # N0 -> N2 directly: the harness enters U, the same ecall goes to S
    _prog("""
        .priv U
        .medeleg 0x100
        ecall
        sret
        addi x1, x0, 1
    """),
    "writeback", S_HANDLER, "delegated ecall from a U mode entered by a body sret"))


def witness(bug: BugId | str) -> Witness:
    return WITNESSES[BugId[bug] if isinstance(bug, str) else bug]
