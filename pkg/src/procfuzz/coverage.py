"""Transition unit: CSR-transition extraction, filtering, grouping and the map.

A transition is recorded per architectural-unit group whenever the group's
concatenated CSR values differ between an entry and its predecessor (the
first entry is compared with the reset values). Only the mnemonic of the
causing instruction is kept, so operand variations collapse onto one tuple.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .isa import csrs
from .isa.instruction import csr_write_targets, decode
from .selection import CsrSelection
from .sim import kernel as K
from .sim.trace import TraceLog

__all__ = [
    "TransitionTuple", "TransitionMap", "ValueCoverageMap", "concat_state",
    "extract_transitions", "filter_explicit_writes", "group_transitions",
    "is_interesting", "value_coverage_is_interesting", "triage",
]


@dataclass(frozen=True, order=True)
class TransitionTuple:
    group: str
    mnemonic: str
    s0: str
    s1: str
    # position in the log; not part of the tuple's identity
    index: int = field(default=-1, compare=False)

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.mnemonic, self.s0, self.s1)

    def __str__(self) -> str:
        return f"{self.group}: ({self.mnemonic}, {self.s0}, {self.s1})"


def concat_state(values: Iterable[int], widths: Iterable[int]) -> str:
    """Fixed-width lowercase hex per CSR, no separators."""
    return "".join(format(int(v) & csrs.MASK64, f"0{w}x") for v, w in zip(values, widths))


def _with_reset(log: TraceLog, selection: CsrSelection) -> np.ndarray:
    return np.vstack([selection.reset_values()[None, :], log.values])


def extract_transitions(log: TraceLog, selection: CsrSelection) -> list[TransitionTuple]:
    """All group transitions of ``log`` in log order (groups in selection order)."""
    log.require_selection(selection)
    n = len(log)
    if n == 0:
        return []
    vals = _with_reset(log, selection)
    widths = selection.hex_widths
    mn = log.mnemonics
    found: list[tuple[int, int, TransitionTuple]] = []
    for gi, g in enumerate(selection.group_names):
        cols = list(selection.columns(g))
        gv = vals[:, cols]
        gw = [widths[c] for c in cols]
        changed = np.flatnonzero((gv[1:] != gv[:-1]).any(axis=1))
        for k in changed.tolist():
            t = TransitionTuple(g, mn[k], concat_state(gv[k], gw), concat_state(gv[k + 1], gw), k)
            found.append((k, gi, t))
    found.sort(key=lambda e: (e[0], e[1]))
    return [t for _, _, t in found]


def _explicit_names(encoding: int) -> set[str]:
    out: set[str] = set()
    for addr in csr_write_targets(decode(encoding)):
        out.update(csrs.ALIASES.get(addr, ()))
    return out


def filter_explicit_writes(transitions: list[TransitionTuple], log: TraceLog) -> list[TransitionTuple]:
    """Drop tuples caused only by an explicit write to a status CSR.

    A tuple is removed when its instruction retired without trapping and every
    CSR that changed in the group is a status CSR the instruction wrote
    explicitly. Tuples with a co-occurring implicit change are kept.
    """
    if not transitions:
        return []
    sel = log.selection
    vals = _with_reset(log, sel)
    kept = []
    for t in transitions:
        k = t.index
        row = log.rows[k]
        if row[K.C_OP] < K.OP_CSRRW or row[K.C_OP] > K.OP_CSRRCI or row[K.C_TRAP] >= 0:
            kept.append(t)
            continue
        status = _explicit_names(int(row[K.C_ENC])) & csrs.STATUS_CSRS
        if not status:
            kept.append(t)
            continue
        changed = {sel.monitored[c] for c in sel.columns(t.group) if vals[k, c] != vals[k + 1, c]}
        if not changed <= status:
            kept.append(t)
    return kept


def group_transitions(transitions: Iterable[TransitionTuple]) -> dict[str, list[TransitionTuple]]:
    out: dict[str, list[TransitionTuple]] = {}
    for t in transitions:
        out.setdefault(t.group, []).append(t)
    return out


class TransitionMap:
    """Insert-only set of unique tuples, one set per group."""

    def __init__(self, groups: Iterable[str] = ()) -> None:
        self._sets: dict[str, set[tuple[str, str, str]]] = {g: set() for g in groups}
        self.total = 0

    def __len__(self) -> int:
        return self.total

    def __contains__(self, t: TransitionTuple) -> bool:
        return t.key in self._sets.get(t.group, ())

    @property
    def per_group(self) -> dict[str, int]:
        return {g: len(s) for g, s in self._sets.items()}

    def add(self, transitions: Iterable[TransitionTuple]) -> int:
        added = 0
        for t in transitions:
            s = self._sets.get(t.group)
            if s is None:
                s = self._sets[t.group] = set()
            key = t.key
            if key not in s:
                s.add(key)
                added += 1
        self.total += added
        return added

    def tuples(self) -> list[TransitionTuple]:
        return sorted(TransitionTuple(g, *k) for g, s in self._sets.items() for k in s)

    def export_lines(self) -> list[str]:
        return [f"{t.group}\t{t.mnemonic}\t{t.s0}\t{t.s1}" for t in self.tuples()]

    def copy(self) -> "TransitionMap":
        m = TransitionMap()
        m._sets = {g: set(s) for g, s in self._sets.items()}
        m.total = self.total
        return m


def is_interesting(tmap: TransitionMap, transitions: list[TransitionTuple]) -> tuple[bool, int]:
    added = tmap.add(transitions)
    return added >= 1, added


def triage(tmap: TransitionMap, log: TraceLog, selection: CsrSelection) -> tuple[bool, int]:
    """Extract, filter and insert; the fuzz loop's per-input decision."""
    return is_interesting(tmap, filter_explicit_writes(extract_transitions(log, selection), log))


class ValueCoverageMap:
    """Baseline that records visited group states (S1 only)."""

    def __init__(self) -> None:
        self._seen: set[tuple[str, str]] = set()

    def __len__(self) -> int:
        return len(self._seen)

    def add_states(self, states: Iterable[tuple[str, str]]) -> int:
        added = 0
        for s in states:
            if s not in self._seen:
                self._seen.add(s)
                added += 1
        return added


def visited_states(log: TraceLog, selection: CsrSelection) -> list[tuple[str, str]]:
    """Group states a log visits: the reset state plus every filtered S1."""
    if len(log) == 0:
        return []
    out = []
    reset = selection.reset_values()
    widths = selection.hex_widths
    for g in selection.group_names:
        cols = selection.columns(g)
        out.append((g, concat_state(reset[list(cols)], [widths[c] for c in cols])))
    ts = filter_explicit_writes(extract_transitions(log, selection), log)
    out.extend((t.group, t.s1) for t in ts)
    return out


def value_coverage_is_interesting(vmap: ValueCoverageMap, log: TraceLog,
                                  selection: CsrSelection) -> tuple[bool, int]:
    added = vmap.add_states(visited_states(log, selection))
    return added >= 1, added
