"""Throughput of the interpreter kernel: numba JIT against the numpy fallback.

Each backend runs in its own interpreter because the JIT flag is read at
import time. Both time the same generated programs on the golden model and on
the DUT with every bug enabled, and report retired instructions per second.

    python3 benchmarks/bench_kernel.py --programs 200
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, random, sys, time
from procfuzz import _accel
from procfuzz.mutator import Generator, GenConfig
from procfuzz.selection import SELECTED
from procfuzz.sim.dut import DutConfig, ALL_BUGS, dut_execute
from procfuzz.sim.golden import _machine

n, seed = int(sys.argv[1]), int(sys.argv[2])
rng = random.Random(seed)
gen = Generator(GenConfig.for_selection(SELECTED))
progs = [gen.program(rng) for _ in range(n)]
m = _machine()
dut = DutConfig(frozenset(ALL_BUGS))
for p in progs[:5]:  # compile / warm caches outside the timed loop
    m.run_program(p, SELECTED)
    dut_execute(p, DutConfig(frozenset(ALL_BUGS)), selection=SELECTED)
t0 = time.perf_counter()
golden = sum(len(m.run_program(p, SELECTED).log) for p in progs)
t1 = time.perf_counter()
buggy = sum(len(dut_execute(p, dut, selection=SELECTED).log) for p in progs)
t2 = time.perf_counter()
print(json.dumps({"backend": _accel.backend_name(), "programs": n,
                  "golden_retired": golden, "golden_s": t1 - t0,
                  "dut_retired": buggy, "dut_s": t2 - t1}))
"""


def run_backend(disable_jit: bool, programs: int, seed: int) -> dict:
    env = dict(os.environ)
    env["PROCFUZZ_DISABLE_JIT"] = "1" if disable_jit else "0"
    out = subprocess.run([sys.executable, "-c", WORKER, str(programs), str(seed)],
                         env=env, check=True, capture_output=True, text=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--programs", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rows = [run_backend(False, args.programs, args.seed), run_backend(True, args.programs, args.seed)]
    if rows[0]["golden_retired"] != rows[1]["golden_retired"] or rows[0]["dut_retired"] != rows[1]["dut_retired"]:
        print("backends disagree on retired instruction counts", file=sys.stderr)
        return 1
    print(f"{'backend':8s} {'golden inst/s':>14s} {'dut inst/s':>14s}")
    for r in rows:
        print(f"{r['backend']:8s} {r['golden_retired'] / r['golden_s']:14.0f} "
              f"{r['dut_retired'] / r['dut_s']:14.0f}")
    jit, py = rows
    print(f"speedup  {py['golden_s'] / jit['golden_s']:14.1f}x {py['dut_s'] / jit['dut_s']:14.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
