import numpy as np
import pytest

from procfuzz.coverage import extract_transitions
from procfuzz.isa import csrs
from procfuzz.isa.instruction import Instruction, encode
from procfuzz.isa.state import MEM_BASE, ArchState, PrivMode, TrapCause
from procfuzz.program import BODY_START, M_HANDLER, S_HANDLER, Program, ProgramLoadError
from procfuzz.selection import ALL_CSR, SELECTED
from procfuzz.sim.golden import ExecLimits, Machine, run, run_from_state, step

from helpers import prog, random_programs


def _state_with(priv, mstatus, *instrs):
    st = ArchState()
    st.priv = priv
    st.write_csr("mstatus", mstatus)
    st.pc = BODY_START
    st.load_words(BODY_START, [encode(i) for i in instrs])
    return st


def test_sret_tuple_from_supervisor_state():
    # the addi gives the log a row holding the pre-sret state
    st = _state_with(PrivMode.SUPERVISOR, 0x8000000A00006000,
                     Instruction("addi", rd=1, rs1=0, imm=0), Instruction("sret"))
    st.write_csr("sepc", BODY_START + 0x40)
    nxt, log = run_from_state(st, SELECTED, 2)
    assert nxt.priv == PrivMode.USER
    assert nxt.pc == BODY_START + 0x40
    assert log.entry(1).csr("mstatus") == 0x8000000A00006020
    ts = [t for t in extract_transitions(log, SELECTED) if t.mnemonic == "sret"]
    assert len(ts) == 1 and ts[0].group == "privileged"
    assert ts[0].s0[:16] == "8000000a00006000"
    assert ts[0].s1[:16] == "8000000a00006020"
    assert ts[0].s0[16:] == ts[0].s1[16:]


def test_step_sret():
    st = _state_with(PrivMode.SUPERVISOR, 0x8000000A00006000, Instruction("sret"))
    nxt, entry = step(st)
    assert nxt.priv == PrivMode.USER
    assert entry.csr("mstatus") == 0x8000000A00006020


def test_fdiv_sets_nx_uf_tuple():
    st = _state_with(PrivMode.MACHINE, 0x8000000A00006000,
                     Instruction("addi", rd=1, rs1=0, imm=0),
                     Instruction("fdiv.s", rd=3, rs1=1, rs2=2, rm=7))
    st.f[1] = np.uint64(0xFFFFFFFF00800000).view(np.int64)  # smallest normal
    st.f[2] = np.uint64(0xFFFFFFFF40400000).view(np.int64)  # 3.0
    nxt, log = run_from_state(st, SELECTED, 2)
    assert log.entry(1).csr("fflags") == 0x03
    fp = [t for t in extract_transitions(log, SELECTED) if t.group == "unprivileged-fp"]
    assert [(t.mnemonic, t.s0, t.s1) for t in fp] == [("fdiv.s", "0000", "0003")]
    # FS was already Dirty, so the privileged group does not move
    assert nxt.read_csr("mstatus") == 0x8000000A00006000


def test_run_from_state_leaves_input_untouched():
    st = _state_with(PrivMode.MACHINE, 0, Instruction("addi", rd=1, rs1=0, imm=5))
    before = st.copy()
    nxt, _ = step(st)
    assert st.xreg(1) == 0 and np.array_equal(st.csr, before.csr)
    assert nxt.xreg(1) == 5 and nxt.pc == BODY_START + 4


def test_step_outside_memory_raises():
    st = ArchState()
    st.pc = MEM_BASE - 4
    with pytest.raises(ValueError):
        step(st)


def test_determinism():
    for p in random_programs(50, seed=3):
        assert run(p) == run(p)


def test_machine_reuse_matches_fresh_machine():
    ps = random_programs(40, seed=11)
    shared = Machine()
    for p in ps:
        assert shared.run_program(p).log == Machine().run_program(p).log


def test_empty_body_effect_exits_immediately():
    log = run(prog("addi x0, x0, 0"))
    assert log.end == "exit"
    # prologue (13) + body (1) + addi/ecall of the epilogue
    assert len(log) == 16
    assert log.entry(13).pc == BODY_START


def test_frm_write_dirties_fs():
    log = run(prog("csrrwi x0, frm, 2"))
    e = log.entry(13)
    assert e.csr("frm") == 2
    assert (e.csr("mstatus") >> csrs.MSTATUS_FS_SHIFT) & 3 == csrs.FS_DIRTY
    assert e.csr("mstatus") >> 63 == 1
    assert e.csr_write == (csrs.CSR_ADDRESS["frm"], 2)


def test_limit_end():
    log = run(prog("jal x0, 0"), ExecLimits(max_retired=100))
    assert log.end == "limit" and len(log) == 100


def test_retired_equals_log_length():
    m = Machine()
    for p in random_programs(30, seed=5):
        r = m.run_program(p)
        assert r.retired == len(r.log)


def test_program_too_large():
    p = Program((Instruction("addi", rd=1, rs1=1, imm=1),) * 0x20000)
    with pytest.raises(ProgramLoadError):
        run(p)


def test_snapshots_match_stepwise_execution():
    """A whole run and a single-step replay agree on every snapshot."""
    for p in random_programs(25, seed=8):
        log = run(p, selection=ALL_CSR)
        if log.end != "exit":
            continue
        st = ArchState()
        st.load_words(MEM_BASE, p.words)
        for i in range(len(log)):
            st, e = step(st, ALL_CSR)
            assert e.pc == log.entry(i).pc
            assert np.array_equal(np.array([v for _, v in e.csr_snapshot], dtype=np.uint64),
                                  log.values[i].astype(np.uint64)), (i, e.disasm)


# cause -> body lines that raise it
TRAP_BODIES = {
    TrapCause.INSTRUCTION_ADDRESS_MISALIGNED: ["jal x0, 2"],
    TrapCause.ILLEGAL_INSTRUCTION: ["csrrw x0, mhartid, x1"],
    TrapCause.BREAKPOINT: ["ebreak"],
    TrapCause.LOAD_ADDRESS_MISALIGNED: ["lw x1, 1(x9)"],
    TrapCause.LOAD_ACCESS_FAULT: ["lw x1, 0(x0)"],
    TrapCause.STORE_ADDRESS_MISALIGNED: ["sw x1, 1(x9)"],
    TrapCause.STORE_ACCESS_FAULT: ["sw x1, 0(x0)"],
    TrapCause.ECALL_FROM_U: ["ecall"],
    TrapCause.ECALL_FROM_S: ["ecall"],
    TrapCause.ECALL_FROM_M: ["ecall"],
}
ECALL_PRIV = {TrapCause.ECALL_FROM_U: "U", TrapCause.ECALL_FROM_S: "S", TrapCause.ECALL_FROM_M: "M"}


def _cases():
    for cause, body in TRAP_BODIES.items():
        privs = [ECALL_PRIV[cause]] if cause in ECALL_PRIV else ["U", "S", "M"]
        for priv in privs:
            for delegate in (False, True):
                if delegate and not (csrs.MEDELEG_WMASK >> cause) & 1:
                    continue
                yield cause, priv, delegate


@pytest.mark.parametrize("cause,priv,delegate", list(_cases()))
def test_trap_routing(cause, priv, delegate):
    medeleg = (1 << cause) if delegate else 0
    log = run(prog(*TRAP_BODIES[cause], priv=priv, medeleg=medeleg))
    e = log.entry(13)
    assert e.pc == BODY_START and e.priv.letter == priv
    assert e.trap == cause
    to_s = delegate and priv != "M"
    handler = log.entry(14)
    assert handler.pc == (S_HANDLER if to_s else M_HANDLER)
    assert handler.priv == (PrivMode.SUPERVISOR if to_s else PrivMode.MACHINE)
    assert e.csr("scause" if to_s else "mcause") == cause
    # the handler skips the faulting instruction and execution reaches the exit
    assert log.end == "exit"
