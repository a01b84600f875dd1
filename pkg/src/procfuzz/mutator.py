"""Random program generation, seed selection and mutation.

All randomness comes from ``random.Random`` instances seeded by the caller,
so a (seed, config) pair always reproduces the same programs.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field, replace
from typing import Sequence

from .isa import csrs
from .isa.instruction import Instruction
from .isa.opcodes import BY_MNEMONIC, CLASSES, TABLE
from .isa.state import PrivMode
from .program import MAX_LEN, Program
from .selection import SELECTED, CsrSelection

DEFAULT_CLASS_WEIGHTS = {
    "integer": 40,
    "muldiv": 10,
    "loadstore": 15,
    "branch": 10,
    "csr": 15,
    "fp": 10,
    "system": 10,
}


class MutationOp(enum.Enum):
    RemoveInstruction = "remove"
    AppendInstruction = "append"
    ReplaceInstruction = "replace"
    PerturbOperand = "operand"
    PerturbImmediate = "immediate"


DEFAULT_OP_WEIGHTS = {
    MutationOp.RemoveInstruction: 20,
    MutationOp.AppendInstruction: 25,
    MutationOp.ReplaceInstruction: 25,
    MutationOp.PerturbOperand: 15,
    MutationOp.PerturbImmediate: 15,
}


class EmptyCorpus(LookupError):
    pass


@dataclass(frozen=True)
class GenConfig:
    """Generator and mutator parameters.

    ``class_weights`` are relative; they need not sum to 100.
    ``monitored_csrs`` is the pool Zicsr instructions draw from with
    probability ``monitored_bias``; otherwise any implemented CSR is used.
    """

    class_weights: dict = field(default_factory=lambda: dict(DEFAULT_CLASS_WEIGHTS))
    op_weights: dict = field(default_factory=lambda: dict(DEFAULT_OP_WEIGHTS))
    max_len: int = MAX_LEN
    min_init_len: int = 4
    max_init_len: int = 24
    initial_corpus: int = 32
    max_mutations: int = 4
    monitored_csrs: tuple[str, ...] = SELECTED.monitored
    monitored_bias: float = 0.8

    def __post_init__(self) -> None:
        unknown = set(self.class_weights) - set(CLASSES)
        if unknown:
            raise ValueError(f"unknown instruction classes {sorted(unknown)}")
        if any(w < 0 for w in self.class_weights.values()) or sum(self.class_weights.values()) <= 0:
            raise ValueError("class weights must be non-negative with a positive sum")
        if not 1 <= self.min_init_len <= self.max_init_len <= self.max_len:
            raise ValueError("need 1 <= min_init_len <= max_init_len <= max_len")
        if self.max_mutations < 1:
            raise ValueError("max_mutations must be at least 1")
        if not 0.0 <= self.monitored_bias <= 1.0:
            raise ValueError("monitored_bias must be in [0, 1]")
        ops = {MutationOp(k) if not isinstance(k, MutationOp) else k: v
               for k, v in self.op_weights.items()}
        object.__setattr__(self, "op_weights", ops)

    @classmethod
    def for_selection(cls, selection: CsrSelection, **kw) -> "GenConfig":
        return cls(monitored_csrs=selection.monitored, **kw)


# registers programs use; the harness owns x9 (data pointer), x10, x30, x31
DEST_REGS = (0, 1, 2, 3, 4, 5, 6, 7, 8, 11, 12, 13, 14, 15)
SRC_REGS = DEST_REGS + (9, 10)
FP_REGS = tuple(range(8))

_BY_CLASS: dict[str, list[str]] = {}
for _s in TABLE:
    _BY_CLASS.setdefault(_s.cls, []).append(_s.mnemonic)
# ebreak is left out of the system vocabulary; jalr is left out because no
# body register holds a code address, so it would only ever fault the fetch
_BY_CLASS["system"] = ["ecall", "sret", "mret", "wfi"]
_BY_CLASS["branch"].remove("jalr")

_IMPLEMENTED = tuple(sorted(csrs.CSR_ADDRESS.values()))
_SPECIAL_IMM = (0, 1, -1, 2, 3, 4, 8, 16, 31, 0x7FF, -0x800)
# binary32 patterns worth moving into f registers (upper 20 bits go through lui)
_FP_PATTERNS = (0x00000000, 0x80000000, 0x3F800000, 0x40400000, 0x7F7FFFFF, 0x00800000,
                0x00000001, 0x7F800000, 0xFF800000, 0x7FC00000, 0x7F800001, 0x3EAAAAAB)
_DELEGABLE = tuple(b for b in range(10) if (csrs.MEDELEG_WMASK >> b) & 1)


class Generator:
    """Draws random instructions and programs from a weighted vocabulary."""

    def __init__(self, cfg: GenConfig | None = None) -> None:
        self.cfg = cfg or GenConfig()
        cw = [(c, w) for c, w in self.cfg.class_weights.items() if w > 0]
        self._classes = [c for c, _ in cw]
        self._class_w = [w for _, w in cw]
        self._ops = list(self.cfg.op_weights)
        self._op_w = [self.cfg.op_weights[o] for o in self._ops]
        self._monitored = tuple(csrs.CSR_ADDRESS[c] for c in self.cfg.monitored_csrs)

    # -- operands ---------------------------------------------------------------
    def _csr(self, rng: random.Random) -> int:
        if self._monitored and rng.random() < self.cfg.monitored_bias:
            return rng.choice(self._monitored)
        return rng.choice(_IMPLEMENTED)

    @staticmethod
    def _imm12(rng: random.Random) -> int:
        if rng.random() < 0.5:
            return rng.choice(_SPECIAL_IMM)
        return rng.randint(-2048, 2047)

    @staticmethod
    def _mem_offset(rng: random.Random, size: int) -> int:
        # mostly aligned; occasionally misaligned to exercise the trap path
        off = rng.randrange(0, 256, size)
        if rng.random() < 0.1:
            off += rng.randint(1, 3)
        return off

    def instruction(self, rng: random.Random, cls: str | None = None) -> Instruction:
        if cls is None:
            cls = rng.choices(self._classes, self._class_w)[0]
        m = rng.choice(_BY_CLASS[cls])
        return self._operands(rng, m)

    def _operands(self, rng: random.Random, m: str) -> Instruction:
        fmt = BY_MNEMONIC[m].fmt
        rd = rng.choice(DEST_REGS)
        rs1 = rng.choice(SRC_REGS)
        rs2 = rng.choice(SRC_REGS)
        if fmt == "R":
            return Instruction(m, rd, rs1, rs2)
        if fmt == "I":
            return Instruction(m, rd, rs1, imm=self._imm12(rng))
        if fmt == "ISH":
            return Instruction(m, rd, rs1, imm=rng.randrange(64))
        if fmt == "ISHW":
            return Instruction(m, rd, rs1, imm=rng.randrange(32))
        if fmt == "U":
            r = rng.random()
            if r < 0.2:
                imm = rng.choice(_FP_PATTERNS) >> 12
            elif r < 0.4:
                imm = rng.choice((0, 1, 0x80000, 0xFFFFF))
            else:
                imm = rng.randrange(1 << 20)
            return Instruction(m, rd, imm=imm)
        if fmt == "L":
            size = 1 << (BY_MNEMONIC[m].funct3 & 3)
            base = 9 if rng.random() < 0.9 else rs1
            return Instruction(m, rd, base, imm=self._mem_offset(rng, size))
        if fmt == "S":
            size = 1 << (BY_MNEMONIC[m].funct3 & 3)
            base = 9 if rng.random() < 0.9 else rs1
            return Instruction(m, rs1=base, rs2=rs2, imm=self._mem_offset(rng, size))
        if fmt == "B":
            # short forward skips; the odd backward edge is bounded by max_retired
            off = rng.choice((4, 8, 12, 16)) if rng.random() < 0.9 else rng.choice((-4, -8))
            return Instruction(m, rs1=rs1, rs2=rs2, imm=off)
        if fmt == "J":
            return Instruction(m, rd, imm=rng.choice((4, 8, 12)))
        if fmt == "JALR":
            return Instruction(m, rd, rs1, imm=rng.choice((0, 4, 8)))
        if fmt == "CSR":
            return Instruction(m, rd, rs1, csr=self._csr(rng))
        if fmt == "CSRI":
            return Instruction(m, rd, rng.randrange(32), csr=self._csr(rng))
        if fmt == "FR":
            rm = 7 if rng.random() < 0.7 else rng.choice((0, 1, 2, 3, 4))
            return Instruction(m, rng.choice(FP_REGS), rng.choice(FP_REGS), rng.choice(FP_REGS), rm=rm)
        if fmt == "FR1":
            rm = 7 if rng.random() < 0.7 else rng.choice((0, 1, 2, 3, 4))
            return Instruction(m, rng.choice(FP_REGS), rng.choice(FP_REGS), rm=rm)
        if m == "fmv.x.w":
            return Instruction(m, rd, rng.choice(FP_REGS))
        if m == "fmv.w.x":
            return Instruction(m, rng.choice(FP_REGS), rs1)
        return Instruction(m)

    def program(self, rng: random.Random) -> Program:
        n = rng.randint(self.cfg.min_init_len, self.cfg.max_init_len)
        body = tuple(self.instruction(rng) for _ in range(n))
        priv = rng.choice((PrivMode.MACHINE, PrivMode.SUPERVISOR, PrivMode.USER))
        medeleg = 0
        for b in _DELEGABLE:
            if rng.random() < 0.5:
                medeleg |= 1 << b
        return Program(body, priv, medeleg)

    # -- mutation -----------------------------------------------------------------
    def _perturb_operand(self, rng: random.Random, ins: Instruction) -> Instruction:
        fmt = ins.spec.fmt
        slots = []
        if fmt in ("R", "I", "ISH", "ISHW", "U", "L", "J", "JALR", "CSR", "CSRI"):
            slots.append("rd")
        if fmt in ("R", "I", "ISH", "ISHW", "B", "JALR", "CSR", "L", "S"):
            slots.append("rs1")
        if fmt in ("R", "B", "S"):
            slots.append("rs2")
        if fmt in ("CSR", "CSRI"):
            slots.append("csr")
        if fmt in ("FR", "FR1", "FMV"):
            slots += ["frd", "frs"]
        if not slots:
            return self._operands(rng, ins.mnemonic)
        slot = rng.choice(slots)
        if slot == "csr":
            return replace(ins, csr=self._csr(rng))
        if slot == "rd":
            return replace(ins, rd=rng.choice(DEST_REGS))
        if slot == "rs1" and fmt == "CSR":
            return replace(ins, rs1=rng.choice(SRC_REGS))
        if slot in ("rs1", "rs2"):
            return replace(ins, **{slot: rng.choice(SRC_REGS)})
        if ins.mnemonic == "fmv.x.w":
            if slot == "frd":
                return replace(ins, rd=rng.choice(DEST_REGS))
            return replace(ins, rs1=rng.choice(FP_REGS))
        if ins.mnemonic == "fmv.w.x":
            if slot == "frd":
                return replace(ins, rd=rng.choice(FP_REGS))
            return replace(ins, rs1=rng.choice(SRC_REGS))
        if slot == "frd":
            return replace(ins, rd=rng.choice(FP_REGS))
        field_name = "rs1" if fmt == "FR1" or rng.random() < 0.5 else "rs2"
        return replace(ins, **{field_name: rng.choice(FP_REGS)})

    def _perturb_immediate(self, rng: random.Random, ins: Instruction) -> Instruction:
        fmt = ins.spec.fmt
        if fmt == "CSRI":
            return replace(ins, rs1=rng.randrange(32))
        if fmt in ("FR", "FR1"):
            return replace(ins, rm=rng.choice((0, 1, 2, 3, 4, 7)))
        if fmt in ("I", "L", "S", "ISH", "ISHW", "U", "B", "J", "JALR"):
            return self._operands(rng, ins.mnemonic) if fmt in ("B", "J", "JALR", "L", "S") \
                else replace(ins, imm=self._operands(rng, ins.mnemonic).imm)
        # no immediate: fall back to a fresh instruction of the same class
        return self.instruction(rng, ins.cls)

    def apply(self, op: MutationOp, body: list[Instruction], rng: random.Random) -> MutationOp:
        """Apply one op in place; returns the op actually applied."""
        if op is MutationOp.RemoveInstruction and len(body) <= 1:
            op = rng.choice((MutationOp.AppendInstruction, MutationOp.ReplaceInstruction))
        if op is MutationOp.AppendInstruction and len(body) >= self.cfg.max_len:
            op = MutationOp.ReplaceInstruction
        if op is MutationOp.RemoveInstruction:
            del body[rng.randrange(len(body))]
        elif op is MutationOp.AppendInstruction:
            body.insert(rng.randint(0, len(body)), self.instruction(rng))
        elif op is MutationOp.ReplaceInstruction:
            body[rng.randrange(len(body))] = self.instruction(rng)
        elif op is MutationOp.PerturbOperand:
            i = rng.randrange(len(body))
            body[i] = self._perturb_operand(rng, body[i])
        else:
            i = rng.randrange(len(body))
            body[i] = self._perturb_immediate(rng, body[i])
        return op

    def mutate(self, parent: Program, rng: random.Random) -> Program:
        # ops can cancel out or redraw the same value; a mutant equal to its
        # parent would only cost a simulation, so draw again (bounded)
        for _ in range(8):
            body = list(parent.body)
            for _ in range(rng.randint(1, self.cfg.max_mutations)):
                op = rng.choices(self._ops, self._op_w)[0]
                self.apply(op, body, rng)
            if tuple(body) != parent.body:
                break
        return parent.with_body(body)


def gen_random_program(seed: int, cfg: GenConfig | None = None) -> Program:
    return Generator(cfg).program(random.Random(seed))


def mutate(parent: Program, seed: int, cfg: GenConfig | None = None) -> Program:
    return Generator(cfg).mutate(parent, random.Random(seed))


@dataclass
class CorpusEntry:
    program: Program
    iteration: int
    tuples: int


class Corpus:
    def __init__(self) -> None:
        self.entries: list[CorpusEntry] = []

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, program: Program, iteration: int, tuples: int) -> None:
        self.entries.append(CorpusEntry(program, iteration, tuples))

    @property
    def programs(self) -> list[Program]:
        return [e.program for e in self.entries]


def pick_seed(corpus: Corpus | Sequence[Program], rng: random.Random | int) -> Program:
    """Uniform choice over the corpus."""
    if isinstance(rng, int):
        rng = random.Random(rng)
    items = corpus.entries if isinstance(corpus, Corpus) else corpus
    if len(items) == 0:
        raise EmptyCorpus("seed corpus is empty; populate it before picking")
    e = items[rng.randrange(len(items))]
    return e.program if isinstance(e, CorpusEntry) else e
