"""The fuzz loop, differential comparison and campaign reporting.

One iteration: pick and mutate a seed (or generate one while the initial
population is filled), run it on the golden model, triage its transitions,
and run the DUT only when the input is interesting (every input in
``no-cov`` mode). Cost is simulated: one unit per golden-retired instruction
and ``slowdown_factor`` units per DUT-retired instruction.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .coverage import TransitionMap, ValueCoverageMap, triage, value_coverage_is_interesting
from .isa.instruction import csr_label
from .isa.state import PrivMode, TrapCause
from .mutator import Corpus, GenConfig, Generator, pick_seed
from .program import Program
from .selection import SELECTED, CsrSelection
from .sim import kernel as K
from .sim.dut import BugId, DutConfig, bugs_in, dut_execute
from .sim.golden import ExecLimits, _machine
from .sim.trace import TraceLog, u64

MODES = ("csr-transition", "no-cov", "value-cov")


class ConfigError(ValueError):
    pass


# -- differential comparison ----------------------------------------------------
@dataclass(frozen=True)
class Mismatch:
    """First divergence between a golden and a DUT log."""

    index: int
    field: str  # pc | encoding | priv | writeback | csr:<name> | trap | length
    golden: str
    dut: str
    program: Program | None = None

    def describe(self) -> str:
        return f"entry {self.index}: {self.field} golden={self.golden} dut={self.dut}"

    def to_dict(self) -> dict:
        return {"index": self.index, "field": self.field, "golden": self.golden, "dut": self.dut}


def _wb_text(row) -> str:
    kind = int(row[K.C_WBK])
    if kind == 0:
        return "none"
    return f"{'x' if kind == 1 else 'f'}{int(row[K.C_WBR])} 0x{u64(row[K.C_WBV]):016x}"


def _trap_text(v: int) -> str:
    return "none" if v < 0 else TrapCause(v).name


def _cw_text(row) -> str:
    a = int(row[K.C_CWA])
    return "none" if a < 0 else f"{csr_label(a)} 0x{u64(row[K.C_CWV]):016x}"


def _entry_text(log: TraceLog, i: int) -> str:
    if i >= len(log):
        return f"absent (log ended: {log.end})"
    return log.entry(i).disasm


def _field_diff(golden: TraceLog, dut: TraceLog, i: int) -> tuple[str, str, str]:
    g = golden.rows[i]
    d = dut.rows[i]
    if g[K.C_PC] != d[K.C_PC]:
        return "pc", f"0x{u64(g[K.C_PC]):016x}", f"0x{u64(d[K.C_PC]):016x}"
    if g[K.C_ENC] != d[K.C_ENC]:
        return "encoding", f"0x{int(g[K.C_ENC]):08x}", f"0x{int(d[K.C_ENC]):08x}"
    if g[K.C_PRIV] != d[K.C_PRIV]:
        return "priv", PrivMode(int(g[K.C_PRIV])).letter, PrivMode(int(d[K.C_PRIV])).letter
    if g[K.C_WBK] != d[K.C_WBK] or g[K.C_WBR] != d[K.C_WBR] or g[K.C_WBV] != d[K.C_WBV]:
        return "writeback", _wb_text(g), _wb_text(d)
    gv = golden.values[i]
    dv = dut.values[i]
    for c, name in enumerate(golden.selection.monitored):
        if gv[c] != dv[c]:
            return f"csr:{name}", f"0x{u64(gv[c]):016x}", f"0x{u64(dv[c]):016x}"
    if g[K.C_CWA] != d[K.C_CWA] or g[K.C_CWV] != d[K.C_CWV]:
        a = int(g[K.C_CWA]) if g[K.C_CWA] >= 0 else int(d[K.C_CWA])
        return f"csr:{csr_label(a)}", _cw_text(g), _cw_text(d)
    return "trap", _trap_text(int(g[K.C_TRAP])), _trap_text(int(d[K.C_TRAP]))


def compare_traces(golden: TraceLog, dut: TraceLog, program: Program | None = None) -> Mismatch | None:
    """Earliest divergence, checking fields in pc, encoding, priv, writeback,
    CSR, trap order; a log that ends early diverges at its first absent entry."""
    golden.require_selection(dut.selection)
    n = min(len(golden), len(dut))
    diff = ((golden.rows[:n] != dut.rows[:n]).any(axis=1)
            | (golden.values[:n] != dut.values[:n]).any(axis=1))
    idx = np.flatnonzero(diff)
    if idx.size:
        i = int(idx[0])
        f, gtext, dtext = _field_diff(golden, dut, i)
        return Mismatch(i, f, gtext, dtext, program)
    if len(golden) != len(dut) or golden.end != dut.end:
        return Mismatch(n, "length", _entry_text(golden, n), _entry_text(dut, n), program)
    return None


# -- campaigns ----------------------------------------------------------------------
@dataclass(frozen=True)
class CampaignConfig:
    mode: str = "csr-transition"
    selection: CsrSelection = SELECTED
    dut: DutConfig = field(default_factory=DutConfig)
    max_iterations: int = 20_000
    max_cost: int | None = None
    master_seed: int = 0
    trials: int = 1
    jobs: int = 1
    limits: ExecLimits = field(default_factory=ExecLimits)
    gen: GenConfig | None = None
    trajectory_every: int = 100
    # ends a trial early once every enabled bug is exposed; off by default so
    # iteration counts and interesting rates cover the whole budget
    stop_when_all_exposed: bool = False

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"--mode must be one of {', '.join(MODES)}, not {self.mode!r}")
        if self.max_iterations < 0:
            raise ConfigError("--iters must be non-negative")
        if self.max_cost is not None and self.max_cost < 0:
            raise ConfigError("max_cost must be non-negative")
        if self.trials < 1:
            raise ConfigError("--trials must be at least 1")
        if self.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        if self.trajectory_every < 1:
            raise ConfigError("trajectory_every must be at least 1")
        if self.mode != "no-cov" and not self.selection.monitored:
            raise ConfigError("coverage modes need a non-empty CSR selection")

    def gen_config(self) -> GenConfig:
        return self.gen if self.gen is not None else GenConfig.for_selection(self.selection)

    def trial_seed(self, trial: int) -> int:
        return random.Random(f"procfuzz:{self.master_seed}:{trial}").getrandbits(63)

    def to_dict(self) -> dict:
        g = self.gen_config()
        return {
            "mode": self.mode,
            "selection": {"name": self.selection.name, "monitored": list(self.selection.monitored),
                          "groups": {k: list(v) for k, v in self.selection.groups}},
            "bugs": sorted(b.name for b in self.dut.enabled_bugs),
            "hazard_window": self.dut.hazard_window,
            "slowdown_factor": self.dut.slowdown_factor,
            "max_iterations": self.max_iterations,
            "max_cost": self.max_cost,
            "master_seed": self.master_seed,
            "trials": self.trials,
            "max_retired": self.limits.max_retired,
            "initial_corpus": g.initial_corpus,
            "max_len": g.max_len,
            "stop_when_all_exposed": self.stop_when_all_exposed,
        }


@dataclass
class Exposure:
    bug: str
    iteration: int
    cost: int
    mismatch: dict


@dataclass
class TrialReport:
    trial: int
    seed: int
    iterations: int = 0
    generated: int = 0
    interesting: int = 0
    dut_runs: int = 0
    mismatches: int = 0
    golden_retired: int = 0
    dut_retired: int = 0
    cost: int = 0
    map_size: int = 0
    corpus_size: int = 0
    exposures: dict = field(default_factory=dict)  # bug name -> Exposure
    trajectory: list = field(default_factory=list)  # (iteration, map size, interesting, cost)
    corpus: list = field(default_factory=list, repr=False)  # (program, iteration, tuples); not in JSON

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("corpus", "trajectory")}
        d["exposures"] = {k: asdict(v) for k, v in sorted(self.exposures.items())}
        return d


def _attribute(program: Program, golden: TraceLog, dut_log: TraceLog, mm: Mismatch,
               cfg: CampaignConfig, exposed: dict) -> list[BugId]:
    """Bugs that explain a mismatch: those whose trigger fired up to the
    divergence and which reproduce a mismatch when enabled alone."""
    upto = min(mm.index + 1, len(dut_log))
    fired = int(np.bitwise_or.reduce(dut_log.fired[:upto])) if upto else 0
    cands = [b for b in bugs_in(fired) if b in cfg.dut.enabled_bugs and b.name not in exposed]
    if len(cfg.dut.enabled_bugs) == 1:
        return cands
    out = []
    for b in cands:
        alone = dut_execute(program, cfg.dut.only(b), cfg.limits, cfg.selection).log
        if compare_traces(golden, alone) is not None:
            out.append(b)
    return out


def run_trial(cfg: CampaignConfig, trial: int) -> TrialReport:
    seed = cfg.trial_seed(trial)
    rep = TrialReport(trial, seed)
    rng = random.Random(seed)
    gen = Generator(cfg.gen_config())
    corpus = Corpus()
    tmap = TransitionMap(cfg.selection.group_names)
    vmap = ValueCoverageMap()
    machine = _machine()
    sel = cfg.selection
    slow = cfg.dut.slowdown_factor
    mask = cfg.dut.mask
    window = cfg.dut.hazard_window
    init = cfg.gen_config().initial_corpus
    enabled = {b.name for b in cfg.dut.enabled_bugs}
    cost = 0
    for it in range(cfg.max_iterations):
        if cfg.max_cost is not None and cost >= cfg.max_cost:
            break
        if it < init or len(corpus) == 0:
            prog = gen.program(rng)
        else:
            prog = gen.mutate(pick_seed(corpus, rng), rng)
        rep.generated += 1
        golden = machine.run_program(prog, sel, cfg.limits).log
        n = len(golden)
        rep.golden_retired += n
        cost += n
        if cfg.mode == "csr-transition":
            hit, added = triage(tmap, golden, sel)
        elif cfg.mode == "value-cov":
            hit, added = value_coverage_is_interesting(vmap, golden, sel)
        else:
            hit, added = False, 0
        if hit:
            rep.interesting += 1
            corpus.add(prog, it, added)
        elif cfg.mode == "no-cov" and it < init:
            corpus.add(prog, it, 0)
        if hit or cfg.mode == "no-cov":
            d = machine.run_program(prog, sel, cfg.limits, mask, window).log
            rep.dut_runs += 1
            rep.dut_retired += len(d)
            cost += slow * len(d)
            mm = compare_traces(golden, d, prog)
            if mm is not None:
                rep.mismatches += 1
                for b in _attribute(prog, golden, d, mm, cfg, rep.exposures):
                    rep.exposures[b.name] = Exposure(b.name, it, cost, mm.to_dict())
        rep.iterations = it + 1
        if (it + 1) % cfg.trajectory_every == 0:
            rep.trajectory.append((it + 1, len(tmap) if cfg.mode != "value-cov" else len(vmap),
                                   rep.interesting, cost))
        if cfg.stop_when_all_exposed and enabled and enabled <= rep.exposures.keys():
            break
    rep.cost = cost
    rep.map_size = len(tmap) if cfg.mode != "value-cov" else len(vmap)
    rep.corpus_size = len(corpus)
    rep.corpus = [(e.program, e.iteration, e.tuples) for e in corpus.entries]
    if not rep.trajectory or rep.trajectory[-1][0] != rep.iterations:
        rep.trajectory.append((rep.iterations, rep.map_size, rep.interesting, cost))
    return rep


def _median_or_none(values: list[float]) -> float | None:
    """Median where ``inf`` marks a censored (unexposed) trial; None if censored."""
    if not values:
        return None
    m = statistics.median(values)
    return None if math.isinf(m) else m


@dataclass
class CampaignReport:
    config: dict
    trials: list[TrialReport]

    @property
    def bugs(self) -> list[str]:
        return list(self.config["bugs"])

    def exposure_costs(self, bug: str) -> list[float]:
        return [t.exposures[bug].cost if bug in t.exposures else math.inf for t in self.trials]

    def exposure_iterations(self, bug: str) -> list[float]:
        return [t.exposures[bug].iteration if bug in t.exposures else math.inf for t in self.trials]

    def exposed_in(self, bug: str) -> int:
        return sum(bug in t.exposures for t in self.trials)

    def median_cost(self, bug: str) -> float | None:
        return _median_or_none(self.exposure_costs(bug))

    def aggregate(self) -> dict:
        tr = self.trials
        per_bug = {}
        for b in self.bugs:
            per_bug[b] = {
                "exposed_trials": self.exposed_in(b),
                "median_cost": self.median_cost(b),
                "median_iteration": _median_or_none(self.exposure_iterations(b)),
            }
        return {
            "median_iterations": statistics.median(t.iterations for t in tr) if tr else 0,
            "median_interesting": statistics.median(t.interesting for t in tr) if tr else 0,
            "median_dut_runs": statistics.median(t.dut_runs for t in tr) if tr else 0,
            "median_cost": statistics.median(t.cost for t in tr) if tr else 0,
            "interesting_fraction": (sum(t.interesting for t in tr) / max(1, sum(t.generated for t in tr))),
            "bugs": per_bug,
        }

    def to_dict(self) -> dict:
        return {"schema": "procfuzz.report/1", "config": self.config,
                "trials": [t.to_dict() for t in self.trials], "aggregate": self.aggregate()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def trajectory_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial", "iteration", "map_size", "interesting", "cost"])
        for t in self.trials:
            for row in t.trajectory:
                w.writerow([t.trial, *row])
        return buf.getvalue()


def _trial_worker(args) -> TrialReport:
    cfg, trial = args
    return run_trial(cfg, trial)


def fuzz(config: CampaignConfig) -> CampaignReport:
    """Run ``config.trials`` independent trials and collect their reports."""
    work = [(config, t) for t in range(config.trials)]
    if config.jobs > 1 and config.trials > 1:
        with ProcessPoolExecutor(max_workers=min(config.jobs, config.trials)) as ex:
            trials = list(ex.map(_trial_worker, work))
    else:
        trials = [_trial_worker(w) for w in work]
    return CampaignReport(config.to_dict(), trials)


def measure_speedup(report_a: CampaignReport, report_b: CampaignReport) -> dict:
    """Per-bug ratio of median cost-to-exposure, b over a (> 1: a is faster).

    A bug whose median is censored in either report gets ``None`` (NA).
    """
    if report_a.config["bugs"] != report_b.config["bugs"] or len(report_a.trials) != len(report_b.trials):
        raise ConfigError("reports must cover the same bugs and trial count")
    ratios: dict[str, float | None] = {}
    for b in report_a.bugs:
        ma = report_a.median_cost(b)
        mb = report_b.median_cost(b)
        ratios[b] = None if ma is None or mb is None or ma == 0 else mb / ma
    finite = [r for r in ratios.values() if r is not None]
    return {"ratios": ratios, "median_ratio": statistics.median(finite) if finite else None}
