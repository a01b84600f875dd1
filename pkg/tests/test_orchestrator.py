import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from procfuzz.orchestrator import (
    CampaignConfig, CampaignReport, ConfigError, Exposure, TrialReport, compare_traces, fuzz,
    measure_speedup, run_trial,
)
from procfuzz.selection import SELECTED
from procfuzz.sim import kernel as K
from procfuzz.sim.dut import ALL_BUGS, BugId, DutConfig, dut_run
from procfuzz.sim.golden import run
from procfuzz.sim.trace import TraceLog

from helpers import random_programs

ALL = DutConfig(frozenset(ALL_BUGS))


def test_compare_is_reflexive():
    for p in random_programs(50, seed=51):
        log = run(p)
        assert compare_traces(log, log) is None


def test_mismatch_is_minimal():
    seen = 0
    for p in random_programs(400, seed=52):
        g, d = run(p), dut_run(p, ALL)
        mm = compare_traces(g, d)
        if mm is None:
            continue
        seen += 1
        i = mm.index
        assert np.array_equal(g.rows[:i], d.rows[:i]) and np.array_equal(g.values[:i], d.values[:i])
        if mm.field != "length":
            assert not (np.array_equal(g.rows[i], d.rows[i]) and np.array_equal(g.values[i], d.values[i]))
    assert seen > 10


FIELD_COLS = [(K.C_PC, "pc"), (K.C_ENC, "encoding"), (K.C_PRIV, "priv"), (K.C_WBV, "writeback"),
              (K.C_TRAP, "trap")]


@given(st.integers(0, 10_000), st.sampled_from(FIELD_COLS + [("csr", 0), ("csr", 7)]))
def test_mismatch_reports_perturbed_field(pos, target):
    log = run(random_programs(1, seed=53)[0])
    i = pos % len(log)
    rows, values = log.rows.copy(), log.values.copy()
    if target[0] == "csr":
        values[i, target[1]] ^= 1
        want = "csr:" + SELECTED.monitored[target[1]]
    else:
        col, want = target
        if col == K.C_PRIV:
            rows[i, col] = {3: 1, 1: 0, 0: 3}[int(rows[i, col])]
        elif col == K.C_WBV:
            rows[i, K.C_WBK] = 1
            rows[i, K.C_WBV] ^= 0x10
        else:
            rows[i, col] += 1
    other = TraceLog(rows, values, log.selection, log.end)
    mm = compare_traces(log, other)
    assert mm is not None and mm.index == i and mm.field == want


def test_length_mismatch():
    log = run(random_programs(1, seed=54)[0])
    short = TraceLog(log.rows[:-2], log.values[:-2], log.selection, "limit")
    mm = compare_traces(log, short)
    assert mm.field == "length" and mm.index == len(log) - 2
    assert mm.dut.startswith("absent")


def _small(mode, bugs=ALL, iters=300, **kw):
    return CampaignConfig(mode=mode, dut=bugs, max_iterations=iters, master_seed=3, **kw)


def test_triage_gate_counters():
    rep = run_trial(_small("csr-transition"), 0)
    assert rep.dut_runs == rep.interesting
    assert rep.generated == rep.iterations == 300
    assert 0 < rep.interesting < rep.generated
    assert rep.corpus_size == rep.interesting
    nc = run_trial(_small("no-cov"), 0)
    assert nc.dut_runs == nc.generated and nc.interesting == 0
    vc = run_trial(_small("value-cov"), 0)
    assert vc.dut_runs == vc.interesting


def test_cost_accounting():
    for mode in ("csr-transition", "no-cov", "value-cov"):
        rep = run_trial(_small(mode), 0)
        assert rep.cost == rep.golden_retired + 79 * rep.dut_retired
        assert rep.trajectory[-1] == (rep.iterations, rep.map_size, rep.interesting, rep.cost)


def test_discarding_saves_cost_at_equal_iterations():
    guided = run_trial(_small("csr-transition", DutConfig()), 0)
    blind = run_trial(_small("no-cov", DutConfig()), 0)
    assert guided.interesting < guided.generated
    assert guided.cost < blind.cost


def test_determinism_bit_identical():
    cfg = _small("csr-transition", trials=2)
    a, b = fuzz(cfg), fuzz(cfg)
    assert a.to_json() == b.to_json()
    assert a.trajectory_csv() == b.trajectory_csv()


def test_bug_free_campaign_has_no_mismatches():
    for mode in ("csr-transition", "no-cov"):
        rep = run_trial(_small(mode, DutConfig(), iters=1000), 0)
        assert rep.mismatches == 0 and rep.exposures == {}


def test_zero_budget_is_empty():
    rep = fuzz(_small("csr-transition", iters=0))
    t = rep.trials[0]
    assert t.iterations == t.generated == t.cost == 0 and t.exposures == {}
    assert all(v["exposed_trials"] == 0 for v in rep.aggregate()["bugs"].values())


def test_report_schema():
    d = json.loads(fuzz(_small("csr-transition")).to_json())
    assert d["schema"] == "procfuzz.report/1"
    assert set(d) == {"schema", "config", "trials", "aggregate"}
    assert d["config"]["mode"] == "csr-transition"
    assert {"exposed_trials", "median_cost", "median_iteration"} <= set(
        d["aggregate"]["bugs"]["SepcLowBitsWritable"])


def test_exposures_are_attributed():
    rep = run_trial(_small("csr-transition", iters=1500), 0)
    assert rep.exposures, "a 1500-iteration run should expose something"
    for name, e in rep.exposures.items():
        assert BugId[name] in ALL_BUGS
        assert e.cost <= rep.cost and e.iteration < rep.iterations


def test_config_errors():
    with pytest.raises(ConfigError):
        CampaignConfig(mode="bogus")
    with pytest.raises(ConfigError):
        CampaignConfig(trials=0)
    with pytest.raises(ConfigError):
        CampaignConfig(max_iterations=-1)


def _report(costs):
    """Report with one trial per cost; None marks an unexposed trial."""
    trials = []
    for k, c in enumerate(costs):
        t = TrialReport(k, k)
        if c is not None:
            t.exposures["SepcLowBitsWritable"] = Exposure("SepcLowBitsWritable", 1, c, {})
        trials.append(t)
    return CampaignReport({"bugs": ["SepcLowBitsWritable"]}, trials)


def test_measure_speedup():
    a = _report([10, 20, 30])
    assert measure_speedup(a, a)["ratios"] == {"SepcLowBitsWritable": 1.0}
    b = _report([20, 40, 60])
    assert measure_speedup(a, b)["ratios"]["SepcLowBitsWritable"] == 2.0
    censored = _report([10, None, None])
    assert censored.median_cost("SepcLowBitsWritable") is None
    out = measure_speedup(a, censored)
    assert out["ratios"]["SepcLowBitsWritable"] is None and out["median_ratio"] is None
    assert math.isinf(censored.exposure_costs("SepcLowBitsWritable")[1])
    with pytest.raises(ConfigError):
        measure_speedup(a, _report([1, 2]))
