"""Independent reference models used only by the tests.

They favour obviousness over speed: exact rational arithmetic for binary32,
Python big integers for the integer ALU.
"""

from __future__ import annotations

import math
from fractions import Fraction

NX, UF, OF, DZ, NV = 1, 2, 4, 8, 16
QNAN = 0x7FC00000
MAX_BITS = 0x7F7FFFFF
MASK64 = (1 << 64) - 1


def f32_value(bits: int):
    """Fraction for finite patterns, 'inf'/'-inf'/'nan'/'snan' strings otherwise."""
    sign = -1 if bits >> 31 else 1
    e = (bits >> 23) & 0xFF
    m = bits & 0x7FFFFF
    if e == 0xFF:
        if m == 0:
            return "inf" if sign > 0 else "-inf"
        return "nan" if m & 0x400000 else "snan"
    if e == 0:
        return sign * Fraction(m, 1 << 149)
    return sign * Fraction(m | 0x800000) * Fraction(2) ** (e - 150)


def _round_int(n: Fraction, rm: int, negative: bool) -> int:
    fl = math.floor(n)
    rem = n - fl
    if rem == 0:
        return fl
    if rm == 1:  # rtz
        return fl
    if rm == 2:  # rdn on magnitude
        return fl + 1 if negative else fl
    if rm == 3:  # rup on magnitude
        return fl if negative else fl + 1
    if rem > Fraction(1, 2):
        return fl + 1
    if rem < Fraction(1, 2):
        return fl
    if rm == 4:
        return fl + 1
    return fl + (fl & 1)


def _exponent(mag: Fraction) -> int:
    e = mag.numerator.bit_length() - mag.denominator.bit_length()
    while Fraction(2) ** e > mag:
        e -= 1
    while Fraction(2) ** (e + 1) <= mag:
        e += 1
    return e


def round_exact(x: Fraction, rm: int) -> tuple[int, int]:
    """Round a nonzero rational to binary32 under mode rm; (bits, flags)."""
    negative = x < 0
    mag = -x if negative else x
    sign = 0x80000000 if negative else 0
    e = _exponent(mag)
    # unbounded exponent rounding decides overflow and tininess
    q_unb = Fraction(2) ** (e - 23)
    v_unb = _round_int(mag / q_unb, rm, negative) * q_unb
    inexact_unb = v_unb != mag
    if v_unb >= Fraction(2) ** 128:
        flags = OF | NX
        to_inf = rm in (0, 4) or (rm == 2 and negative) or (rm == 3 and not negative)
        return (sign | (0x7F800000 if to_inf else MAX_BITS)), flags
    q = Fraction(1, 1 << 149) if e < -126 else q_unb
    n = _round_int(mag / q, rm, negative)
    v = n * q
    flags = 0
    if v != mag:
        flags |= NX
        if v_unb < Fraction(2) ** -126:
            flags |= UF
    del inexact_unb
    if v == 0:
        return sign, flags
    if v < Fraction(2) ** -126:
        return sign | int(v / Fraction(1, 1 << 149)), flags
    ve = _exponent(v)
    mant = int(v / Fraction(2) ** (ve - 23)) - (1 << 23)
    return sign | ((ve + 127) << 23) | mant, flags


def fp_reference(op: str, a: int, b: int, rm: int) -> tuple[int, int]:
    va, vb = f32_value(a), f32_value(b)
    if op == "sub":
        b ^= 0x80000000
        vb = f32_value(b)
        op = "add"
    nan_in = [v for v in ((va,) if op == "sqrt" else (va, vb)) if v in ("nan", "snan")]
    if nan_in:
        return QNAN, NV if "snan" in nan_in else 0
    sa, sb = a >> 31, b >> 31
    if op == "sqrt":
        if va == "inf":
            return a, 0
        if va == "-inf" or (va < 0):
            return QNAN, NV
        if va == 0:
            return a, 0
        # sqrt of a rational: bracket by exact integer square roots at high precision
        return _round_sqrt(va, rm)
    if op == "add":
        if isinstance(va, str) or isinstance(vb, str):
            if isinstance(va, str) and isinstance(vb, str):
                return (QNAN, NV) if va != vb else (a, 0)
            return (a, 0) if isinstance(va, str) else (b, 0)
        s = va + vb
        if s == 0:
            if va == 0 and vb == 0 and sa == sb:
                return a, 0
            return (0x80000000 if rm == 2 else 0), 0
        return round_exact(s, rm)
    sign = (sa ^ sb) << 31
    inf_a, inf_b = isinstance(va, str), isinstance(vb, str)
    if op == "mul":
        if (inf_a and vb == 0) or (inf_b and va == 0):
            return QNAN, NV
        if inf_a or inf_b:
            return sign | 0x7F800000, 0
        if va == 0 or vb == 0:
            return sign, 0
        return round_exact(va * vb, rm)
    if op == "div":
        if (inf_a and inf_b) or (not inf_a and not inf_b and va == 0 and vb == 0):
            return QNAN, NV
        if inf_a:
            return sign | 0x7F800000, 0
        if inf_b:
            return sign, 0
        if vb == 0:
            return sign | 0x7F800000, DZ
        if va == 0:
            return sign, 0
        return round_exact(va / vb, rm)
    raise ValueError(op)


def _round_sqrt(v: Fraction, rm: int) -> tuple[int, int]:
    # scale so the integer square root carries far more than 24 bits
    shift = 400
    num = v.numerator << (2 * shift)
    r = math.isqrt(num // v.denominator)
    exact = Fraction(r, 1 << shift)
    if exact * exact == v:
        return round_exact(exact, rm)
    # strictly between r and r+1 (scaled): a sticky half-step keeps rounding correct
    return round_exact(Fraction(2 * r + 1, 1 << (shift + 1)), rm)


def sx(v: int) -> int:
    v &= MASK64
    return v - (1 << 64) if v >> 63 else v


def sx32(v: int) -> int:
    v &= 0xFFFFFFFF
    return v - (1 << 32) if v >> 31 else v


def _trunc_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a < 0) == (b < 0) else -q


def alu_reference(m: str, a: int, b: int) -> int:
    """Unsigned 64-bit result of an R-type integer op on unsigned operands."""
    sa, sb = sx(a), sx(b)
    a32, b32 = sx32(a), sx32(b)
    ua32, ub32 = a & 0xFFFFFFFF, b & 0xFFFFFFFF
    res = {
        "add": lambda: a + b,
        "sub": lambda: a - b,
        "sll": lambda: a << (b & 63),
        "slt": lambda: int(sa < sb),
        "sltu": lambda: int(a < b),
        "xor": lambda: a ^ b,
        "srl": lambda: a >> (b & 63),
        "sra": lambda: sa >> (b & 63),
        "or": lambda: a | b,
        "and": lambda: a & b,
        "addw": lambda: sx32(a + b),
        "subw": lambda: sx32(a - b),
        "sllw": lambda: sx32(a << (b & 31)),
        "srlw": lambda: sx32(ua32 >> (b & 31)),
        "sraw": lambda: a32 >> (b & 31),
        "mul": lambda: a * b,
        "mulh": lambda: (sa * sb) >> 64,
        "mulhsu": lambda: (sa * b) >> 64,
        "mulhu": lambda: (a * b) >> 64,
        "div": lambda: -1 if sb == 0 else (sa if (sa == -(1 << 63) and sb == -1) else _trunc_div(sa, sb)),
        "divu": lambda: MASK64 if b == 0 else a // b,
        "rem": lambda: sa if sb == 0 else (0 if (sa == -(1 << 63) and sb == -1) else sa - sb * _trunc_div(sa, sb)),
        "remu": lambda: a if b == 0 else a % b,
        "mulw": lambda: sx32(a * b),
        "divw": lambda: -1 if b32 == 0 else sx32(a32 if (a32 == -(1 << 31) and b32 == -1) else _trunc_div(a32, b32)),
        "divuw": lambda: -1 if ub32 == 0 else sx32(ua32 // ub32),
        "remw": lambda: a32 if b32 == 0 else (0 if (a32 == -(1 << 31) and b32 == -1) else sx32(a32 - b32 * _trunc_div(a32, b32))),
        "remuw": lambda: sx32(ua32) if ub32 == 0 else sx32(ua32 % ub32),
    }[m]()
    return res & MASK64


def brute_force_transitions(log, selection):
    """Group transitions by comparing each entry's snapshot record with the
    previous one (reset values before the first), built from the per-entry
    record API instead of the column arrays."""
    from procfuzz.isa import csrs

    prev = {c: csrs.CSR_BY_NAME[c].reset for c in selection.monitored}
    out = []
    for e in log.entries:
        cur = dict(e.csr_snapshot)
        for g, members in selection.groups:
            names = [c for c in selection.monitored if c in members]
            if any(prev[c] != cur[c] for c in names):
                s0 = "".join(f"{prev[c]:0{csrs.CSR_BY_NAME[c].hex_width}x}" for c in names)
                s1 = "".join(f"{cur[c]:0{csrs.CSR_BY_NAME[c].hex_width}x}" for c in names)
                out.append((g, e.mnemonic, s0, s1, e.index))
        prev = cur
    return out
