"""``procfuzz`` command line: fuzz, replay, analyze, trace and witness.

Exit codes are a stable contract: 0 success (equal logs, interesting input),
1 negative verdict (mismatch, nothing new), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import os
import random
import shutil
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .coverage import TransitionMap, extract_transitions, filter_explicit_writes, group_transitions
from .orchestrator import MODES, CampaignConfig, ConfigError, compare_traces, fuzz
from .selection import SelectionError, SelectionMismatch, load_selection
from .sim.dut import TRIGGERS, BugId, DutConfig, dut_run, parse_bug_list
from .sim.golden import run as golden_run
from .traceio import (ParseError, export_map, import_map, parse_log, read_program,
                      serialize_log, write_corpus, write_program)
from .witnesses import WITNESSES

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE = 0, 1, 2

# fuzz flags that a config file may set, with their defaults
FUZZ_DEFAULTS = {
    "mode": "csr-transition",
    "selection": "selected",
    "bugs": "all",
    "iters": 20_000,
    "trials": 1,
    "seed": None,
    "out": "procfuzz-out",
    "jobs": 1,
}
_INT_KEYS = ("iters", "trials", "seed", "jobs")


class UsageError(Exception):
    """Bad user input; reported on stderr with exit code 2."""


def _err(msg: str) -> None:
    print(f"procfuzz: error: {msg}", file=sys.stderr)


# -- fuzz -------------------------------------------------------------------------------
def _read_config_file(path: str) -> dict:
    try:
        data = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path}: {exc.strerror or exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"--config: malformed TOML in {path}: {exc}") from exc
    unknown = sorted(set(data) - set(FUZZ_DEFAULTS))
    if unknown:
        raise UsageError(f"--config: unknown key(s) {', '.join(unknown)}; "
                         f"known: {', '.join(FUZZ_DEFAULTS)}")
    for k in _INT_KEYS:
        if k in data and (not isinstance(data[k], int) or isinstance(data[k], bool)):
            raise UsageError(f"--config: {k} must be an integer")
    for k in ("mode", "selection", "bugs", "out"):
        if k in data and not isinstance(data[k], str):
            raise UsageError(f"--config: {k} must be a string")
    return data


def resolve_fuzz_settings(args: argparse.Namespace, environ=os.environ) -> tuple[dict, str]:
    """Merge defaults, config file, environment and flags (later wins).

    Returns the settings and where the seed came from.
    """
    settings = dict(FUZZ_DEFAULTS)
    seed_src = "default"
    if args.config:
        file_cfg = _read_config_file(args.config)
        settings.update(file_cfg)
        if "seed" in file_cfg:
            seed_src = "config"
    for k in FUZZ_DEFAULTS:
        v = getattr(args, k, None)
        if v is not None:
            settings[k] = v
            if k == "seed":
                seed_src = "flag"
    if settings["seed"] is None:
        env = environ.get("PROCFUZZ_SEED")
        if env is not None and env.strip():
            try:
                settings["seed"] = int(env, 0)
            except ValueError:
                raise UsageError(f"PROCFUZZ_SEED: not an integer: {env!r}") from None
            seed_src = "PROCFUZZ_SEED"
        else:
            settings["seed"] = random.SystemRandom().getrandbits(32)
            seed_src = "entropy"
    return settings, seed_src


def build_campaign(settings: dict) -> CampaignConfig:
    if settings["mode"] not in MODES:
        raise UsageError(f"--mode: expected one of {', '.join(MODES)}, got {settings['mode']!r}")
    try:
        sel = load_selection(settings["selection"])
    except SelectionError as exc:
        raise UsageError(f"--selection: {exc}") from exc
    try:
        bugs = parse_bug_list(settings["bugs"])
    except ValueError as exc:
        raise UsageError(f"--bugs: {exc}") from exc
    for flag, key in (("--iters", "iters"), ("--trials", "trials"), ("--jobs", "jobs")):
        if settings[key] < (0 if key == "iters" else 1):
            raise UsageError(f"{flag}: must be {'non-negative' if key == 'iters' else 'at least 1'}")
    try:
        return CampaignConfig(mode=settings["mode"], selection=sel, dut=DutConfig(bugs),
                              max_iterations=settings["iters"], master_seed=settings["seed"],
                              trials=settings["trials"], jobs=settings["jobs"])
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc


def effective_config_block(settings: dict) -> str:
    """TOML text that reproduces the campaign when passed back as --config."""
    lines = ["# effective config"]
    for k in FUZZ_DEFAULTS:
        v = settings[k]
        lines.append(f"{k} = {v}" if isinstance(v, int) else f'{k} = "{v}"')
    return "\n".join(lines) + "\n"


def cmd_fuzz(args: argparse.Namespace) -> int:
    settings, seed_src = resolve_fuzz_settings(args)
    cfg = build_campaign(settings)
    print(effective_config_block(settings), end="")
    if seed_src == "entropy":
        print(f"# seed {settings['seed']} drawn from entropy; pass --seed {settings['seed']} to repeat")
    out = Path(settings["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"--out: cannot create {out}: {exc.strerror or exc}") from exc
    report = fuzz(cfg)
    (out / "report.json").write_text(report.to_json(), encoding="utf-8", newline="\n")
    (out / "trajectory.csv").write_text(report.trajectory_csv(), encoding="utf-8", newline="\n")
    corpus_dir = out / "corpus"
    if corpus_dir.is_dir():
        shutil.rmtree(corpus_dir)  # stale entries from an earlier campaign
    for t in report.trials:
        write_corpus(out / "corpus" / f"trial-{t.trial:02d}", t.corpus)
    agg = report.aggregate()
    print(f"trials {len(report.trials)}  interesting fraction {agg['interesting_fraction']:.3f}  "
          f"median cost {agg['median_cost']}")
    for bug, row in agg["bugs"].items():
        med = "censored" if row["median_cost"] is None else f"{row['median_cost']:.0f}"
        print(f"  {bug:30s} exposed {row['exposed_trials']}/{len(report.trials)}  median cost {med}")
    print(f"wrote {out / 'report.json'}, {out / 'trajectory.csv'}, {out / 'corpus'}")
    return EXIT_OK


# -- replay / trace -------------------------------------------------------------------
def _load_program(path: str):
    try:
        return read_program(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except ValueError as exc:  # AssembleError, ProgramLoadError, bad UTF-8
        raise UsageError(f"{path}: {exc}") from exc


def _selection_arg(spec: str):
    try:
        return load_selection(spec)
    except SelectionError as exc:
        raise UsageError(f"--selection: {exc}") from exc


def _bugs_arg(spec: str) -> DutConfig:
    try:
        return DutConfig(parse_bug_list(spec))
    except ValueError as exc:
        raise UsageError(f"--bugs: {exc}") from exc


def cmd_replay(args: argparse.Namespace) -> int:
    prog = _load_program(args.program)
    sel = _selection_arg(args.selection)
    dut_cfg = _bugs_arg(args.bugs)
    golden = golden_run(prog, selection=sel)
    dut = dut_run(prog, dut_cfg, selection=sel)
    if not args.quiet:
        print("== golden ==")
        print(serialize_log(golden), end="")
        print("== dut ==")
        print(serialize_log(dut), end="")
    mm = compare_traces(golden, dut, prog)
    if mm is None:
        print(f"logs equal ({len(golden)} entries)")
        return EXIT_OK
    print(f"mismatch at entry {mm.index}: field {mm.field}")
    print(f"  golden: {mm.golden}")
    print(f"  dut:    {mm.dut}")
    return EXIT_NEGATIVE


def cmd_trace(args: argparse.Namespace) -> int:
    prog = _load_program(args.program)
    sel = _selection_arg(args.selection)
    dut_cfg = _bugs_arg(args.bugs)
    log = dut_run(prog, dut_cfg, selection=sel) if dut_cfg.enabled_bugs else golden_run(prog, selection=sel)
    text = serialize_log(log)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8", newline="\n")
    else:
        print(text, end="")
    return EXIT_OK


# -- analyze ----------------------------------------------------------------------------
def cmd_analyze(args: argparse.Namespace) -> int:
    sel = _selection_arg(args.selection)
    try:
        log = parse_log(Path(args.log).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read {args.log}: {exc.strerror or exc}") from exc
    except ParseError as exc:
        raise UsageError(f"{args.log}: {exc}") from exc
    tmap = TransitionMap(sel.group_names)
    if args.map_in:
        try:
            tmap = import_map(Path(args.map_in).read_text(encoding="utf-8"))
        except OSError as exc:
            raise UsageError(f"--map-in: cannot read {args.map_in}: {exc.strerror or exc}") from exc
        except ParseError as exc:
            raise UsageError(f"--map-in: {exc}") from exc
    try:
        extracted = extract_transitions(log, sel)
    except SelectionMismatch as exc:
        _err(str(exc))
        return EXIT_USAGE
    kept = filter_explicit_writes(extracted, log)
    print(f"extracted ({len(extracted)}):")
    for t in extracted:
        print(f"  [{t.index}] {t}")
    print(f"filtered ({len(kept)}):")
    for t in kept:
        print(f"  [{t.index}] {t}")
    print("grouped:")
    before = len(tmap)
    for group, ts in group_transitions(kept).items():
        fresh = sum(t not in tmap for t in set(ts))
        print(f"  {group}: {len(ts)} tuples, {fresh} new")
    added = tmap.add(kept)
    print(f"map {before} -> {len(tmap)} tuples")
    if args.map_out:
        Path(args.map_out).write_text(export_map(tmap), encoding="utf-8", newline="\n")
    print("interesting" if added else "not interesting")
    return EXIT_OK if added else EXIT_NEGATIVE


# -- witness --------------------------------------------------------------------------
def cmd_witness(args: argparse.Namespace) -> int:
    bugs = list(WITNESSES)
    if args.bug:
        try:
            bugs = [BugId.parse(args.bug)]
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    for b in bugs:
        w = WITNESSES[b]
        print(f"{b.name}: {TRIGGERS[b]}")
        print(f"  diverges in {w.field} at pc 0x{w.trigger_pc:x} ({w.note})")
        if args.emit:
            d = Path(args.emit)
            d.mkdir(parents=True, exist_ok=True)
            write_program(d / f"{b.name}.pos.s", w.positive)
            write_program(d / f"{b.name}.neg.s", w.negative)
    return EXIT_OK


# -- parser -----------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="procfuzz", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"procfuzz {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fuzz", help="run a fuzzing campaign")
    f.add_argument("--config", help="TOML file whose keys mirror the flags below")
    f.add_argument("--mode", help=f"one of {', '.join(MODES)} (default csr-transition)")
    f.add_argument("--selection", help="selected | fp-csr | all-csr | @file.toml (default selected)")
    f.add_argument("--bugs", help="comma list of bug names, all or none (default all)")
    f.add_argument("--iters", type=int, help="iterations per trial (default 20000)")
    f.add_argument("--trials", type=int, help="independent trials (default 1)")
    f.add_argument("--seed", type=int, help="master seed (fallback: PROCFUZZ_SEED, then entropy)")
    f.add_argument("--out", help="output directory (default procfuzz-out)")
    f.add_argument("--jobs", type=int, help="worker processes (default 1)")
    f.set_defaults(func=cmd_fuzz)

    r = sub.add_parser("replay", help="run a program on golden and DUT and compare")
    r.add_argument("program")
    r.add_argument("--bugs", default="none")
    r.add_argument("--selection", default="selected")
    r.add_argument("-q", "--quiet", action="store_true", help="print only the verdict")
    r.set_defaults(func=cmd_replay)

    t = sub.add_parser("trace", help="write the extended trace log of a program")
    t.add_argument("program")
    t.add_argument("--bugs", default="none", help="trace the DUT with these bugs instead of golden")
    t.add_argument("--selection", default="selected")
    t.add_argument("-o", "--output")
    t.set_defaults(func=cmd_trace)

    a = sub.add_parser("analyze", help="run the transition unit on a trace log")
    a.add_argument("log")
    a.add_argument("--selection", default="selected")
    a.add_argument("--map-in")
    a.add_argument("--map-out")
    a.set_defaults(func=cmd_analyze)

    w = sub.add_parser("witness", help="describe or emit the per-bug witness programs")
    w.add_argument("bug", nargs="?")
    w.add_argument("--emit", metavar="DIR", help="write <bug>.pos.s / <bug>.neg.s here")
    w.set_defaults(func=cmd_witness)
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage or help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        _err(str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
