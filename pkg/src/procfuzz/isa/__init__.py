"""Modeled RISC-V subset: encodings, CSRs, privilege and trap definitions."""

from .instruction import (
    IllegalEncoding,
    Instruction,
    csr_write_targets,
    decode,
    disasm,
    encode,
)
from .state import MEM_BASE, MEM_SIZE, ArchState, PrivMode, TrapCause, trap_target

__all__ = [
    "ArchState",
    "IllegalEncoding",
    "Instruction",
    "MEM_BASE",
    "MEM_SIZE",
    "PrivMode",
    "TrapCause",
    "csr_write_targets",
    "decode",
    "disasm",
    "encode",
    "trap_target",
]
