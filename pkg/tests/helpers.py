"""Small builders shared by the test modules."""

import random

from procfuzz.mutator import Generator, GenConfig
from procfuzz.selection import SELECTED
from procfuzz.traceio import assemble


def random_programs(n, seed=0, gen_cfg=None):
    g = Generator(gen_cfg or GenConfig.for_selection(SELECTED))
    rng = random.Random(seed)
    return [g.program(rng) for _ in range(n)]


def prog(*lines, priv="M", medeleg=0):
    """Program from assembler body lines."""
    text = f".priv {priv}\n.medeleg 0x{medeleg:x}\n" + "\n".join(lines) + "\n"
    return assemble(text)
