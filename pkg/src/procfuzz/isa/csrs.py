"""Control and status registers of the modeled RV64 hart.

Every implemented CSR has a dense internal index (used as a column in the
simulator's snapshot matrix), an architectural address, a writable-bit mask
and a hex width used when CSR values are concatenated into coverage strings.
"""

from __future__ import annotations

from dataclasses import dataclass

# dense indices, also the column order of the kernel's snapshot matrix
MSTATUS = 0
MCAUSE = 1
SCAUSE = 2
MEDELEG = 3
MCOUNTEREN = 4
SCOUNTEREN = 5
FRM = 6
FFLAGS = 7
SEPC = 8
MEPC = 9
MHARTID = 10
MINSTRET = 11
NUM_CSRS = 12

# fcsr is an accessor alias for frm:fflags, not separate storage
FCSR = 12
FCSR_ADDR = 0x003

MASK64 = (1 << 64) - 1

# mstatus fields
MSTATUS_SIE = 1 << 1
MSTATUS_MIE = 1 << 3
MSTATUS_SPIE = 1 << 5
MSTATUS_MPIE = 1 << 7
MSTATUS_SPP = 1 << 8
MSTATUS_MPP_SHIFT = 11
MSTATUS_MPP = 3 << MSTATUS_MPP_SHIFT
MSTATUS_FS_SHIFT = 13
MSTATUS_FS = 3 << MSTATUS_FS_SHIFT
MSTATUS_XS = 3 << 15
MSTATUS_MPRV = 1 << 17
MSTATUS_SUM = 1 << 18
MSTATUS_MXR = 1 << 19
MSTATUS_TVM = 1 << 20
MSTATUS_TW = 1 << 21
MSTATUS_TSR = 1 << 22
MSTATUS_UXL = 3 << 32
MSTATUS_SXL = 3 << 34
MSTATUS_SD_SHIFT = 63

MSTATUS_WMASK = (
    MSTATUS_SIE | MSTATUS_MIE | MSTATUS_SPIE | MSTATUS_MPIE | MSTATUS_SPP
    | MSTATUS_MPP | MSTATUS_FS | MSTATUS_MPRV | MSTATUS_SUM | MSTATUS_MXR
    | MSTATUS_TVM | MSTATUS_TW | MSTATUS_TSR
)
# UXL = SXL = 2 (64-bit), hardwired
MSTATUS_RESET = (2 << 32) | (2 << 34)

FS_OFF = 0
FS_INITIAL = 1
FS_CLEAN = 2
FS_DIRTY = 3

# exception causes that medeleg may delegate (ecall-from-M is never delegable)
MEDELEG_WMASK = 0x3FD
COUNTEREN_WMASK = 0x7
EPC_WMASK = ~3 & MASK64
CAUSE_WMASK = MASK64


@dataclass(frozen=True)
class CsrInfo:
    name: str
    address: int
    index: int
    width: int
    reset: int = 0

    @property
    def hex_width(self) -> int:
        """Digits used when this CSR is rendered into a concatenated state string."""
        return ((self.width + 7) // 8) * 2

    @property
    def min_priv(self) -> int:
        return (self.address >> 8) & 3

    @property
    def read_only(self) -> bool:
        return (self.address >> 10) == 3


CSRS: tuple[CsrInfo, ...] = (
    CsrInfo("mstatus", 0x300, MSTATUS, 64, MSTATUS_RESET),
    CsrInfo("mcause", 0x342, MCAUSE, 64),
    CsrInfo("scause", 0x142, SCAUSE, 64),
    CsrInfo("medeleg", 0x302, MEDELEG, 64),
    CsrInfo("mcounteren", 0x306, MCOUNTEREN, 32),
    CsrInfo("scounteren", 0x106, SCOUNTEREN, 32),
    CsrInfo("frm", 0x002, FRM, 3),
    CsrInfo("fflags", 0x001, FFLAGS, 5),
    CsrInfo("sepc", 0x141, SEPC, 64),
    CsrInfo("mepc", 0x341, MEPC, 64),
    CsrInfo("mhartid", 0xF14, MHARTID, 64),
    CsrInfo("minstret", 0xB02, MINSTRET, 64),
)

CSR_BY_NAME: dict[str, CsrInfo] = {c.name: c for c in CSRS}
CSR_BY_ADDR: dict[int, CsrInfo] = {c.address: c for c in CSRS}

# symbolic names accepted by the assembler, including the fcsr alias
CSR_ADDRESS: dict[str, int] = {c.name: c.address for c in CSRS}
CSR_ADDRESS["fcsr"] = FCSR_ADDR
CSR_NAME: dict[int, str] = {a: n for n, a in CSR_ADDRESS.items()}

FP_CSR_ADDRS = frozenset({CSR_ADDRESS["fflags"], CSR_ADDRESS["frm"], FCSR_ADDR})

# storage CSRs touched by an access to each architectural address
ALIASES: dict[int, tuple[str, ...]] = {a: (n,) for n, a in CSR_ADDRESS.items()}
ALIASES[FCSR_ADDR] = ("frm", "fflags")

READ_ONLY = frozenset({"mhartid"})

# status CSRs whose explicit writes the transition filter discards; fflags is
# deliberately absent because software writes to it are ordinary coverage
STATUS_CSRS = frozenset({"mstatus", "mcause", "scause"})


def reset_values() -> list[int]:
    return [c.reset for c in CSRS]


def csr_index(address: int) -> int:
    """Internal index for an address, FCSR for the alias, -1 if unimplemented."""
    if address == FCSR_ADDR:
        return FCSR
    info = CSR_BY_ADDR.get(address)
    return -1 if info is None else info.index


def address_table() -> list[int]:
    """Dense address->index table (4096 entries) for the kernel."""
    table = [-1] * 4096
    for c in CSRS:
        table[c.address] = c.index
    table[FCSR_ADDR] = FCSR
    return table
