"""Which CSRs are monitored and how they are grouped into architectural units."""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .isa import csrs

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

PRIVILEGED = "privileged"
UNPRIVILEGED_FP = "unprivileged-fp"


class SelectionError(ValueError):
    pass


class SelectionMismatch(ValueError):
    """A log recorded under one selection was used with another."""


@dataclass(frozen=True)
class CsrSelection:
    name: str
    monitored: tuple[str, ...]
    groups: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self) -> None:
        if not self.monitored:
            raise SelectionError("a selection must monitor at least one CSR")
        unknown = [c for c in self.monitored if c not in csrs.CSR_BY_NAME]
        if unknown:
            raise SelectionError(f"unknown CSR(s) {', '.join(unknown)}")
        if len(set(self.monitored)) != len(self.monitored):
            raise SelectionError("monitored CSRs must be distinct")
        grouped = [c for _, members in self.groups for c in members]
        if sorted(grouped) != sorted(self.monitored):
            raise SelectionError("groups must partition the monitored CSRs exactly")
        names = [g for g, _ in self.groups]
        if len(set(names)) != len(names):
            raise SelectionError("group names must be distinct")
        for g, members in self.groups:
            if not members:
                raise SelectionError(f"group {g!r} is empty")

    @property
    def indices(self) -> np.ndarray:
        """Dense CSR indices of the monitored CSRs, in snapshot order."""
        return np.array([csrs.CSR_BY_NAME[c].index for c in self.monitored], dtype=np.int64)

    @property
    def hex_widths(self) -> tuple[int, ...]:
        return tuple(csrs.CSR_BY_NAME[c].hex_width for c in self.monitored)

    @property
    def group_names(self) -> tuple[str, ...]:
        return tuple(g for g, _ in self.groups)

    def columns(self, group: str) -> tuple[int, ...]:
        """Snapshot column positions of a group's CSRs, in monitored order."""
        members = dict(self.groups)[group]
        return tuple(i for i, c in enumerate(self.monitored) if c in members)

    def group_of(self, csr_name: str) -> str | None:
        for g, members in self.groups:
            if csr_name in members:
                return g
        return None

    def reset_values(self) -> np.ndarray:
        return np.array([csrs.CSR_BY_NAME[c].reset for c in self.monitored],
                        dtype=np.uint64).view(np.int64)

    def describe(self) -> str:
        return "; ".join(f"{g}={','.join(m)}" for g, m in self.groups)


_PRIV_BASE = ("mstatus", "mcause", "scause", "medeleg", "mcounteren", "scounteren")
_FP = ("frm", "fflags")

SELECTED = CsrSelection(
    "selected",
    _PRIV_BASE + _FP,
    ((PRIVILEGED, _PRIV_BASE), (UNPRIVILEGED_FP, _FP)),
)
FP_CSR = CsrSelection("fp-csr", _FP, ((UNPRIVILEGED_FP, _FP),))
_ALL_PRIV = _PRIV_BASE + ("sepc", "mepc", "mhartid", "minstret")
ALL_CSR = CsrSelection(
    "all-csr",
    _PRIV_BASE + _FP + ("sepc", "mepc", "mhartid", "minstret"),
    ((PRIVILEGED, _ALL_PRIV), (UNPRIVILEGED_FP, _FP)),
)

BUILTIN = {s.name: s for s in (SELECTED, FP_CSR, ALL_CSR)}


def selection_from_mapping(data: dict, default_name: str = "custom") -> CsrSelection:
    """Build a selection from a parsed TOML table.

    ``groups`` maps group names to CSR lists; ``monitored`` optionally fixes the
    snapshot order (default: the order groups list them).
    """
    groups = data.get("groups")
    if not isinstance(groups, dict) or not groups:
        raise SelectionError("selection file needs a non-empty [groups] table")
    pairs = []
    for g, members in groups.items():
        if not isinstance(members, list) or not all(isinstance(m, str) for m in members):
            raise SelectionError(f"group {g!r} must be a list of CSR names")
        pairs.append((str(g), tuple(members)))
    monitored = data.get("monitored")
    if monitored is None:
        monitored = [m for _, ms in pairs for m in ms]
    return CsrSelection(str(data.get("name", default_name)), tuple(monitored), tuple(pairs))


def load_selection(spec: str) -> CsrSelection:
    """Resolve ``selected``/``fp-csr``/``all-csr`` or ``@path`` to a TOML file."""
    if spec in BUILTIN:
        return BUILTIN[spec]
    if spec.startswith("@"):
        path = Path(spec[1:])
        try:
            data = tomllib.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise SelectionError(f"cannot read selection file {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise SelectionError(f"malformed selection file {path}: {exc}") from exc
        return selection_from_mapping(data, default_name=path.stem)
    raise SelectionError(f"unknown selection {spec!r} (expected one of "
                         f"{', '.join(BUILTIN)} or @file)")
