"""Text formats: extended trace logs, program files, transition maps, corpora.

Trace log line grammar (one line per retired instruction)::

    core 0: <priv> 0x<pc:16> (0x<enc:8>) <disasm> [<csr>,...] [x<r>|f<r> 0x<v:16>]
        [c<addr:3>_<name> 0x<v:16>] [trap <cause>]

``<priv>`` is 0/1/3 as in Spike commit logs, CSR values are fixed-width
lowercase hex in selection order. A header of ``#`` lines names the
selection and how the run ended.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .coverage import TransitionMap, TransitionTuple
from .isa import csrs
from .isa.instruction import Instruction, csr_label, disasm, disasm_word
from .isa.opcodes import BY_MNEMONIC, RM_BY_NAME
from .isa.state import PrivMode, TrapCause
from .program import EPILOGUE, Program
from .selection import BUILTIN, CsrSelection, SelectionError
from .sim import kernel as K
from .sim.trace import END_CODES, ROW_COLS, ExtendedTraceEntry, TraceLog, Writeback, u64

LOG_MAGIC = "# procfuzz-trace v1"
PROGRAM_MAGIC = "# procfuzz-program v1"


class ParseError(ValueError):
    def __init__(self, line: int, column: int, message: str) -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.message = message


class AssembleError(ValueError):
    def __init__(self, message: str, line: int | None = None) -> None:
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


# -- trace logs ------------------------------------------------------------------------
def _format_row(row, values, widths) -> str:
    enc = int(row[K.C_ENC])
    snap = ",".join(format(u64(v), f"0{w}x") for v, w in zip(values, widths))
    parts = [f"core 0: {int(row[K.C_PRIV])} 0x{u64(row[K.C_PC]):016x} (0x{enc:08x}) "
             f"{disasm_word(enc)} [{snap}]"]
    wbk = int(row[K.C_WBK])
    if wbk:
        parts.append(f"{'x' if wbk == 1 else 'f'}{int(row[K.C_WBR])} 0x{u64(row[K.C_WBV]):016x}")
    cwa = int(row[K.C_CWA])
    if cwa >= 0:
        parts.append(f"c{cwa:03x}_{csr_label(cwa)} 0x{u64(row[K.C_CWV]):016x}")
    trap = int(row[K.C_TRAP])
    if trap >= 0:
        parts.append(f"trap {trap}")
    return " ".join(parts)


def serialize_log(log: TraceLog) -> str:
    sel = log.selection
    groups = ";".join(f"{g}={','.join(m)}" for g, m in sel.groups)
    lines = [
        LOG_MAGIC,
        f"# selection: {sel.name}",
        f"# csrs: {','.join(sel.monitored)}",
        f"# groups: {groups}",
        f"# end: {log.end}",
    ]
    widths = sel.hex_widths
    for i in range(len(log)):
        lines.append(_format_row(log.rows[i], log.values[i], widths))
    return "\n".join(lines) + "\n"


_LINE = re.compile(
    r"core\s+0:\s+(?P<priv>[013])\s+0x(?P<pc>[0-9a-f]{16})\s+\(0x(?P<enc>[0-9a-f]{8})\)\s+"
    r"(?P<dis>[^\[\]]+?)\s+\[(?P<snap>[^\[\]]*)\](?P<rest>.*)$")
_WB = re.compile(r"\s+(?P<k>[xf])(?P<r>\d{1,2})\s+0x(?P<v>[0-9a-f]{16})")
_CW = re.compile(r"\s+c(?P<a>[0-9a-f]{3})_(?P<n>[a-z0-9x]+)\s+0x(?P<v>[0-9a-f]{16})")
_TRAP = re.compile(r"\s+trap\s+(?P<c>\d+)")


def _header(lines: list[str]) -> tuple[dict, int]:
    if not lines or lines[0].rstrip() != LOG_MAGIC:
        raise ParseError(1, 1, f"expected {LOG_MAGIC!r}")
    head = {}
    i = 1
    while i < len(lines) and lines[i].startswith("#"):
        body = lines[i][1:].strip()
        if ":" not in body:
            raise ParseError(i + 1, 2, "header lines are '# key: value'")
        k, v = body.split(":", 1)
        head[k.strip()] = v.strip()
        i += 1
    for key in ("selection", "csrs", "end"):
        if key not in head:
            raise ParseError(i, 1, f"missing header '# {key}:'")
    return head, i


def _selection_from_header(head: dict, line: int) -> CsrSelection:
    monitored = tuple(c for c in head["csrs"].split(",") if c)
    name = head["selection"]
    if "groups" in head and head["groups"]:
        pairs = []
        for part in head["groups"].split(";"):
            if "=" not in part:
                raise ParseError(line, 1, f"malformed group {part!r}")
            g, ms = part.split("=", 1)
            pairs.append((g, tuple(m for m in ms.split(",") if m)))
        try:
            sel = CsrSelection(name, monitored, tuple(pairs))
        except SelectionError as exc:
            raise ParseError(line, 1, str(exc)) from None
    elif name in BUILTIN:
        sel = BUILTIN[name]
    else:
        raise ParseError(line, 1, f"unknown selection {name!r} and no groups header")
    if name in BUILTIN and sel != BUILTIN[name]:
        raise ParseError(line, 1, f"header does not match the built-in selection {name!r}")
    return sel


def parse_log(text: str) -> TraceLog:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    head, start = _header(lines)
    sel = _selection_from_header(head, start)
    if head["end"] not in END_CODES:
        raise ParseError(start, 1, f"unknown end reason {head['end']!r}")
    widths = sel.hex_widths
    rows = np.zeros((len(lines) - start, ROW_COLS), dtype=np.int64)
    values = np.zeros((len(lines) - start, len(sel.monitored)), dtype=np.int64)
    for n, line in enumerate(lines[start:]):
        ln = start + n + 1
        m = _LINE.match(line)
        if m is None:
            raise ParseError(ln, _first_bad_column(line), "malformed trace line")
        enc = int(m["enc"], 16)
        expected = disasm_word(enc)
        if m["dis"] != expected:
            raise ParseError(ln, m.start("dis") + 1, f"disassembly {m['dis']!r} does not match "
                                                     f"encoding (expected {expected!r})")
        snap = m["snap"].split(",") if m["snap"] else []
        if len(snap) != len(widths):
            raise ParseError(ln, m.start("snap") + 1,
                             f"expected {len(widths)} CSR values, found {len(snap)}")
        col = m.start("snap") + 1
        for j, (tok, w) in enumerate(zip(snap, widths)):
            if len(tok) != w or re.fullmatch(r"[0-9a-f]+", tok) is None:
                raise ParseError(ln, col, f"CSR value {tok!r} is not {w} lowercase hex digits")
            values[n, j] = np.uint64(int(tok, 16)).view(np.int64) if w == 16 else int(tok, 16)
            col += len(tok) + 1
        r = rows[n]
        r[K.C_PC] = np.uint64(int(m["pc"], 16)).view(np.int64)
        r[K.C_ENC] = enc
        r[K.C_OP] = K.decode_op(enc)
        r[K.C_PRIV] = int(m["priv"])
        r[K.C_TRAP] = -1
        r[K.C_CWA] = -1
        rest = m["rest"]
        pos = 0
        wm = _WB.match(rest, pos)
        if wm:
            r[K.C_WBK] = 1 if wm["k"] == "x" else 2
            r[K.C_WBR] = int(wm["r"])
            r[K.C_WBV] = np.uint64(int(wm["v"], 16)).view(np.int64)
            if r[K.C_WBR] > 31:
                raise ParseError(ln, m.start("rest") + wm.start("r") + 1, "register out of range")
            pos = wm.end()
        cm = _CW.match(rest, pos)
        if cm:
            addr = int(cm["a"], 16)
            if cm["n"] != csr_label(addr):
                raise ParseError(ln, m.start("rest") + cm.start("n") + 1, "CSR name does not match address")
            r[K.C_CWA] = addr
            r[K.C_CWV] = np.uint64(int(cm["v"], 16)).view(np.int64)
            pos = cm.end()
        tm = _TRAP.match(rest, pos)
        if tm:
            cause = int(tm["c"])
            if cause not in TrapCause._value2member_map_:
                raise ParseError(ln, m.start("rest") + tm.start("c") + 1, f"unknown trap cause {cause}")
            r[K.C_TRAP] = cause
            pos = tm.end()
        tail = rest[pos:]
        if tail.strip():
            col = m.start("rest") + pos + len(tail) - len(tail.lstrip()) + 1
            raise ParseError(ln, col, f"unexpected trailing text {tail.strip()!r}")
    return TraceLog(rows, values, sel, head["end"])


def _first_bad_column(line: str) -> int:
    """Best-effort column for a line the full pattern rejected."""
    checks = [
        (r"core\s+0:\s+", "core prefix"),
        (r"[013]\s+", "privilege"),
        (r"0x[0-9a-f]{16}\s+", "pc"),
        (r"\(0x[0-9a-f]{8}\)\s+", "encoding"),
        (r"[^\[\]]+?\s+", "disassembly"),
        (r"\[[^\[\]]*\]", "CSR bracket group"),
    ]
    pos = 0
    for pat, _ in checks:
        m = re.compile(pat).match(line, pos)
        if m is None:
            return pos + 1
        pos = m.end()
    return pos + 1


_SPIKE = re.compile(
    r"core\s+(?P<core>\d+):\s+(?:(?P<priv>[013])\s+)?0x(?P<pc>[0-9a-fA-F]+)\s+"
    r"\(0x(?P<enc>[0-9a-fA-F]+)\)\s*(?P<rest>.*)$")
_SPIKE_WB = re.compile(r"^(?P<pre>.*?)\s*(?P<k>[xf])\s*(?P<r>\d{1,2})\s+0x(?P<v>[0-9a-fA-F]+)\s*$")


def parse_spike_commit_line(line: str, index: int = 0) -> ExtendedTraceEntry:
    """Read the ``core N: [priv] 0x<pc> (0x<insn>) ...`` shape of Spike logs.

    CSR snapshots are not part of that shape, so the entry's snapshot is empty.
    """
    m = _SPIKE.match(line.strip())
    if m is None:
        raise ParseError(1, 1, "not a Spike commit line")
    rest = m["rest"]
    wb = None
    w = _SPIKE_WB.match(rest)
    if w:
        wb = Writeback(w["k"], int(w["r"]), int(w["v"], 16))
        rest = w["pre"]
    enc = int(m["enc"], 16)
    priv = PrivMode(int(m["priv"])) if m["priv"] is not None else PrivMode.MACHINE
    return ExtendedTraceEntry(index=index, pc=int(m["pc"], 16), encoding=enc,
                              disasm=rest.strip() or disasm_word(enc), priv=priv,
                              writeback=wb, csr_write=None, csr_snapshot=(), trap=None)


# -- program files -------------------------------------------------------------------
_ABI = {
    "zero": 0, "ra": 1, "sp": 2, "gp": 3, "tp": 4, "t0": 5, "t1": 6, "t2": 7, "s0": 8, "fp": 8,
    "s1": 9, "a0": 10, "a1": 11, "a2": 12, "a3": 13, "a4": 14, "a5": 15, "a6": 16, "a7": 17,
    "s2": 18, "s3": 19, "s4": 20, "s5": 21, "s6": 22, "s7": 23, "s8": 24, "s9": 25, "s10": 26,
    "s11": 27, "t3": 28, "t4": 29, "t5": 30, "t6": 31,
}


def _xreg(tok: str) -> int:
    tok = tok.strip()
    if tok in _ABI:
        return _ABI[tok]
    if re.fullmatch(r"x([0-9]|[12][0-9]|3[01])", tok):
        return int(tok[1:])
    raise AssembleError(f"bad integer register {tok!r}")


def _freg(tok: str) -> int:
    tok = tok.strip()
    if re.fullmatch(r"f([0-9]|[12][0-9]|3[01])", tok):
        return int(tok[1:])
    raise AssembleError(f"bad fp register {tok!r}")


def _int(tok: str) -> int:
    try:
        return int(tok.strip(), 0)
    except ValueError:
        raise AssembleError(f"bad immediate {tok!r}") from None


def _csr_addr(tok: str) -> int:
    tok = tok.strip()
    if tok in csrs.CSR_ADDRESS:
        return csrs.CSR_ADDRESS[tok]
    if re.fullmatch(r"0x[0-9a-fA-F]{1,3}", tok):
        return int(tok, 16)
    raise AssembleError(f"unknown CSR {tok!r}")


_MEM = re.compile(r"^\s*(?P<imm>[-+]?(?:0x[0-9a-fA-F]+|\d+))\s*\(\s*(?P<reg>\w+)\s*\)\s*$")


def assemble_line(text: str) -> Instruction:
    """Assemble one instruction in the syntax ``disasm`` produces."""
    text = text.strip()
    if not text:
        raise AssembleError("empty instruction")
    parts = text.split(None, 1)
    m = parts[0]
    spec = BY_MNEMONIC.get(m)
    if spec is None:
        raise AssembleError(f"unsupported mnemonic {m!r}")
    ops = [o.strip() for o in parts[1].split(",")] if len(parts) > 1 else []
    f = spec.fmt

    def need(k: int) -> None:
        if len(ops) != k:
            raise AssembleError(f"{m} takes {k} operand(s), got {len(ops)}")

    try:
        if f == "SYS":
            need(0)
            return Instruction(m)
        if f == "R":
            need(3)
            return Instruction(m, _xreg(ops[0]), _xreg(ops[1]), _xreg(ops[2]))
        if f in ("I", "ISH", "ISHW"):
            need(3)
            return Instruction(m, _xreg(ops[0]), _xreg(ops[1]), imm=_int(ops[2]))
        if f in ("L", "JALR", "S"):
            need(2)
            mm = _MEM.match(ops[1])
            if mm is None:
                raise AssembleError(f"bad memory operand {ops[1]!r}")
            if f == "S":
                return Instruction(m, rs1=_xreg(mm["reg"]), rs2=_xreg(ops[0]), imm=_int(mm["imm"]))
            return Instruction(m, _xreg(ops[0]), _xreg(mm["reg"]), imm=_int(mm["imm"]))
        if f == "B":
            need(3)
            return Instruction(m, rs1=_xreg(ops[0]), rs2=_xreg(ops[1]), imm=_int(ops[2]))
        if f in ("U", "J"):
            need(2)
            return Instruction(m, _xreg(ops[0]), imm=_int(ops[1]))
        if f == "CSR":
            need(3)
            return Instruction(m, _xreg(ops[0]), _xreg(ops[2]), csr=_csr_addr(ops[1]))
        if f == "CSRI":
            need(3)
            uimm = _int(ops[2])
            if not 0 <= uimm < 32:
                raise AssembleError(f"{m}: immediate {uimm} outside [0, 31]")
            return Instruction(m, _xreg(ops[0]), uimm, csr=_csr_addr(ops[1]))
        if f in ("FR", "FR1"):
            k = 3 if f == "FR" else 2
            if len(ops) not in (k, k + 1):
                raise AssembleError(f"{m} takes {k} registers and an optional rounding mode")
            rm = 7
            if len(ops) == k + 1:
                if ops[k] not in RM_BY_NAME:
                    raise AssembleError(f"unknown rounding mode {ops[k]!r}")
                rm = RM_BY_NAME[ops[k]]
            if f == "FR":
                return Instruction(m, _freg(ops[0]), _freg(ops[1]), _freg(ops[2]), rm=rm)
            return Instruction(m, _freg(ops[0]), _freg(ops[1]), rm=rm)
        need(2)
        if m == "fmv.x.w":
            return Instruction(m, _xreg(ops[0]), _freg(ops[1]))
        return Instruction(m, _freg(ops[0]), _xreg(ops[1]))
    except ValueError as exc:
        if isinstance(exc, AssembleError):
            raise
        raise AssembleError(str(exc)) from None


def disassemble(program: Program) -> str:
    lines = [
        PROGRAM_MAGIC,
        f".priv {program.start_priv.letter}",
        f".medeleg 0x{program.medeleg:03x}",
        ".prologue",
        *(f"    {disasm(i)}" for i in program.prologue),
        ".body",
        *(disasm(i) for i in program.body),
        ".epilogue",
        *(f"    {disasm(i)}" for i in program.epilogue),
    ]
    return "\n".join(lines) + "\n"


def assemble(text: str) -> Program:
    """Parse a program file; the prologue and epilogue sections are optional
    but, when present, must match what ``.priv``/``.medeleg`` imply."""
    priv = PrivMode.MACHINE
    medeleg = 0
    section = "body"
    seen_body_marker = False
    sections: dict[str, list[tuple[int, Instruction]]] = {"prologue": [], "body": [], "epilogue": []}
    for ln, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("."):
            key, _, arg = line.partition(" ")
            arg = arg.strip()
            if key == ".priv":
                try:
                    priv = PrivMode.from_letter(arg)
                except ValueError as exc:
                    raise AssembleError(str(exc), ln) from None
            elif key == ".medeleg":
                try:
                    medeleg = int(arg, 0)
                except ValueError:
                    raise AssembleError(f"bad medeleg {arg!r}", ln) from None
            elif key in (".prologue", ".body", ".epilogue"):
                section = key[1:]
                seen_body_marker |= section == "body"
            else:
                raise AssembleError(f"unknown directive {key!r}", ln)
            continue
        try:
            sections[section].append((ln, assemble_line(line)))
        except AssembleError as exc:
            raise AssembleError(str(exc), ln) from None
    body = tuple(i for _, i in sections["body"])
    if not body:
        raise AssembleError("program body is empty")
    try:
        prog = Program(body, priv, medeleg)
    except ValueError as exc:
        raise AssembleError(str(exc)) from None
    for name, expected in (("prologue", prog.prologue), ("epilogue", tuple(EPILOGUE))):
        got = tuple(i for _, i in sections[name])
        if got and got != expected:
            raise AssembleError(f"{name} section does not match the harness for "
                                f".priv {priv.letter} .medeleg 0x{medeleg:x}", sections[name][0][0])
    return prog


def read_program(path: str | Path) -> Program:
    return assemble(Path(path).read_text(encoding="utf-8"))


def write_program(path: str | Path, program: Program) -> None:
    Path(path).write_text(disassemble(program), encoding="utf-8", newline="\n")


# -- transition maps and corpora ------------------------------------------------------
def export_map(tmap: TransitionMap) -> str:
    lines = tmap.export_lines()
    return "\n".join(lines) + ("\n" if lines else "")


def import_map(text: str) -> TransitionMap:
    tmap = TransitionMap()
    tuples = []
    for ln, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 4 or not all(parts):
            raise ParseError(ln, 1, "map lines are group<TAB>mnemonic<TAB>s0<TAB>s1")
        tuples.append(TransitionTuple(*parts))
    tmap.add(tuples)
    return tmap


def write_corpus(directory: str | Path, entries) -> None:
    """Write ``(program, iteration, tuples)`` triples as ``NNNNN.s`` + ``.json``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for k, (program, iteration, tuples) in enumerate(entries):
        write_program(d / f"{k:05d}.s", program)
        meta = {"iteration": iteration, "tuples": tuples}
        (d / f"{k:05d}.json").write_text(json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8")


def read_corpus(directory: str | Path) -> list[tuple[Program, dict]]:
    d = Path(directory)
    out = []
    for p in sorted(d.glob("*.s")):
        meta_path = p.with_suffix(".json")
        meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
        out.append((read_program(p), meta))
    return out
