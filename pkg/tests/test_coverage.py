import random

from hypothesis import given, settings, strategies as st

from procfuzz.coverage import (
    TransitionMap, TransitionTuple, ValueCoverageMap, extract_transitions,
    filter_explicit_writes, group_transitions, is_interesting, triage,
    value_coverage_is_interesting, visited_states,
)
from procfuzz.isa import csrs
from procfuzz.selection import ALL_CSR, FP_CSR, PRIVILEGED, SELECTED, UNPRIVILEGED_FP, CsrSelection
from procfuzz.sim.golden import run

from helpers import prog, random_programs
from oracles import brute_force_transitions

PRIV_ONLY = CsrSelection("priv-only", dict(SELECTED.groups)[PRIVILEGED],
                         ((PRIVILEGED, dict(SELECTED.groups)[PRIVILEGED]),))


def _plain(ts):
    return [(t.group, t.mnemonic, t.s0, t.s1, t.index) for t in ts]


def test_extraction_matches_brute_force():
    for sel in (SELECTED, FP_CSR, ALL_CSR):
        for p in random_programs(60, seed=31):
            log = run(p, selection=sel)
            assert _plain(extract_transitions(log, sel)) == brute_force_transitions(log, sel)


def test_groups_are_independent():
    """A group's tuples do not depend on which other groups are monitored."""
    for p in random_programs(60, seed=32):
        both = group_transitions(extract_transitions(run(p, selection=SELECTED), SELECTED))
        fp = extract_transitions(run(p, selection=FP_CSR), FP_CSR)
        pv = extract_transitions(run(p, selection=PRIV_ONLY), PRIV_ONLY)
        assert _plain(both.get(UNPRIVILEGED_FP, [])) == _plain(fp)
        assert _plain(both.get(PRIVILEGED, [])) == _plain(pv)


def _body_tuples(p, selection=SELECTED):
    log = run(p, selection=selection)
    ts = filter_explicit_writes(extract_transitions(log, selection), log)
    return [t for t in ts if t.index == 13]


def test_filter_drops_explicit_status_write():
    p = prog("addi x1, x0, 2", "csrrs x0, mstatus, x1")
    log = run(p)
    raw = [t for t in extract_transitions(log, SELECTED) if t.index == 14]
    assert [t.mnemonic for t in raw] == ["csrrs"]
    kept = filter_explicit_writes(raw, log)
    assert kept == []


def test_filter_keeps_implicit_changes():
    # sret changes mstatus implicitly
    assert [t.mnemonic for t in _body_tuples(prog("sret", priv="S"))] == ["sret"]
    # a frm write dirties mstatus.FS; neither tuple is an explicit status write
    ts = _body_tuples(prog("csrrwi x0, frm, 1"))
    assert sorted(t.group for t in ts) == [PRIVILEGED, UNPRIVILEGED_FP]


def test_filter_keeps_trapping_status_write():
    ts = _body_tuples(prog("csrrs x0, mstatus, x1", priv="U"))
    assert [t.mnemonic for t in ts] == ["csrrs"]
    assert ts[0].s1[16:32] == f"{2:016x}"  # mcause = illegal instruction


def test_filter_in_a_sequence():
    # the frm write keeps both of its tuples; clearing FS afterwards changes
    # only mstatus (FS and SD) and is dropped
    p = prog("csrrwi x0, frm, 3", "lui x1, 0x6", "csrrc x0, mstatus, x1")
    log = run(p)
    ts = filter_explicit_writes(extract_transitions(log, SELECTED), log)
    assert [t.index for t in ts if t.index >= 13] == [13, 13]


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1))
def test_map_monotone_and_idempotent(seed):
    tmap = TransitionMap(SELECTED.group_names)
    sizes = [0]
    for p in random_programs(8, seed=seed):
        log = run(p)
        ts = filter_explicit_writes(extract_transitions(log, SELECTED), log)
        fresh = {(t.group, t.key) for t in ts if t not in tmap}
        interesting, added = is_interesting(tmap, ts)
        assert added == len(fresh)
        assert interesting == (added >= 1)
        assert len(tmap) >= sizes[-1]
        sizes.append(len(tmap))
        assert is_interesting(tmap, ts) == (False, 0)
        assert all(t in tmap for t in ts)
    assert len(tmap) == sum(tmap.per_group.values())


def test_operand_variation_collapses():
    a = _body_tuples(prog("lui x1, 0x3f800", "fmv.w.x f1, x1", "fdiv.s f2, f1, f0"))
    b = _body_tuples(prog("lui x3, 0x3f800", "fmv.w.x f5, x3", "fdiv.s f7, f5, f0"))
    tmap = TransitionMap()
    tmap.add(a)
    assert is_interesting(tmap, b) == (False, 0)


def test_transition_sees_new_edge_that_value_coverage_misses():
    """Same states reached by a different instruction: new tuple, no new state."""
    first = run(prog("csrrwi x0, frm, 1"))
    second = run(prog("csrrsi x0, frm, 1"))
    tmap, vmap = TransitionMap(), ValueCoverageMap()
    assert triage(tmap, first, SELECTED)[0]
    assert value_coverage_is_interesting(vmap, first, SELECTED)[0]
    assert triage(tmap, second, SELECTED)[0]
    assert value_coverage_is_interesting(vmap, second, SELECTED) == (False, 0)


def test_visited_states_include_reset():
    log = run(prog("addi x1, x0, 1"))
    states = visited_states(log, SELECTED)
    reset = "".join(f"{csrs.CSR_BY_NAME[c].reset:0{csrs.CSR_BY_NAME[c].hex_width}x}"
                    for c in dict(SELECTED.groups)[PRIVILEGED])
    assert (PRIVILEGED, reset) in states
    vmap = ValueCoverageMap()
    assert value_coverage_is_interesting(vmap, log, SELECTED)[0]
    assert value_coverage_is_interesting(vmap, log, SELECTED) == (False, 0)


def test_map_export_lines_sorted_and_unique():
    tmap = TransitionMap()
    rng = random.Random(0)
    for _ in range(200):
        tmap.add([TransitionTuple(rng.choice("ab"), rng.choice(["x", "y"]), "0", str(rng.randrange(4)))])
    lines = tmap.export_lines()
    assert lines == sorted(set(lines)) and len(lines) == len(tmap)
