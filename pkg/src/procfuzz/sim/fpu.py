"""Single-precision arithmetic with exact IEEE-754 exception flags.

Results are computed in binary64 and narrowed to binary32 with
round-to-nearest-even; for +, -, *, / and sqrt that double rounding is
innocuous because 53 >= 2*24 + 2. Other rounding modes, inexactness and the
underflow/overflow decisions need the sign of ``exact - t`` for a few
binary32-sized probes ``t``; ``_cmp_exact`` computes it exactly per operation
(TwoSum error term for addition, exact products otherwise).

Tininess is detected after rounding, as RISC-V requires.
"""

from __future__ import annotations

import math

from .._accel import jit

OP_ADD = 0
OP_SUB = 1
OP_MUL = 2
OP_DIV = 3
OP_SQRT = 4

RM_RNE = 0
RM_RTZ = 1
RM_RDN = 2
RM_RUP = 3
RM_RMM = 4

FLAG_NX = 1
FLAG_UF = 2
FLAG_OF = 4
FLAG_DZ = 8
FLAG_NV = 16

CANONICAL_NAN = 0x7FC00000
POS_INF = 0x7F800000
NEG_INF = 0xFF800000
MAX_FINITE = 0x7F7FFFFF
SIGN = 0x80000000

TWO_128 = 2.0 ** 128
TWO_149 = 2.0 ** 149
MIN_NORMAL = 2.0 ** -126
MIN_SUB = 2.0 ** -149
MAX_F = (2.0 - 2.0 ** -23) * 2.0 ** 127
# largest binary32 magnitude below 2^-126 at full precision, and the midpoint to it
BELOW_MIN_NORMAL = 2.0 ** -126 - 2.0 ** -150
MID_MIN_NORMAL = 2.0 ** -126 - 2.0 ** -151


@jit
def bits_to_float(bits):
    """Value of a binary32 pattern as a float (finite inputs only)."""
    e = (bits >> 23) & 0xFF
    m = bits & 0x7FFFFF
    if e == 0:
        v = math.ldexp(float(m), -149)
    else:
        v = math.ldexp(float(m | 0x800000), e - 150)
    if bits & SIGN:
        return -v
    return v


@jit
def float_to_bits(v):
    """Pattern of a float that is exactly representable in binary32 (or inf)."""
    neg = v < 0.0 or (v == 0.0 and math.copysign(1.0, v) < 0.0)
    a = abs(v)
    if math.isinf(a):
        out = POS_INF
    elif a == 0.0:
        out = 0
    elif a < MIN_NORMAL:
        out = int(a * TWO_149)
    else:
        m, e = math.frexp(a)
        out = ((e + 126) << 23) | (int(m * 16777216.0) - 0x800000)
    if neg:
        out |= SIGN
    return out


@jit
def narrow_rne(d):
    """Round a finite float to the nearest binary32 value, ties to even.

    Done with exact float operations rather than a float32 cast, which the
    compiler is free to fold away when the result is widened again.
    """
    if d == 0.0:
        return d
    m, e = math.frexp(abs(d))
    # |d| = m * 2^e with m in [0.5, 1); keep p significant bits
    p = 24 if e - 1 >= -126 else e + 149
    scaled = math.ldexp(m, p)
    fl = math.floor(scaled)
    frac = scaled - fl
    if frac > 0.5 or (frac == 0.5 and int(fl) & 1 == 1):
        fl += 1.0
    v = math.ldexp(fl, e - p)
    if v > MAX_F:
        v = math.inf
    return -v if d < 0.0 else v


@jit
def _is_nan(bits):
    return (bits & 0x7F800000) == 0x7F800000 and (bits & 0x7FFFFF) != 0


@jit
def _is_snan(bits):
    return _is_nan(bits) and (bits & 0x400000) == 0


@jit
def _is_inf(bits):
    return (bits & 0x7FFFFFFF) == POS_INF


@jit
def _sgn(v):
    if v > 0.0:
        return 1
    if v < 0.0:
        return -1
    return 0


@jit
def _cmp_exact(op, a, b, d, e, t):
    """Sign of (exact result - t); t must have at most 26 significant bits."""
    if op == OP_ADD:
        return _sgn((d - t) + e)
    if op == OP_MUL:
        return _sgn(d - t)
    if op == OP_DIV:
        s = _sgn(a - t * b)
        return s if b > 0.0 else -s
    # sqrt: exact result is positive here
    if t < 0.0:
        return 1
    return _sgn(a - t * t)


@jit
def _step(bits, up):
    """Adjacent binary32 toward +inf (up) or -inf."""
    if bits & 0x7FFFFFFF == 0:
        return 1 if up else (SIGN | 1)
    neg = (bits & SIGN) != 0
    if up != neg:
        return bits + 1
    return bits - 1


@jit
def _ulp(bits):
    mag = bits & 0x7FFFFFFF
    e = mag >> 23
    if e == 0:
        return MIN_SUB
    return math.ldexp(1.0, e - 150)


@jit
def _round_finite(op, a, b, d, e, rm):
    """Round the nonzero finite exact result to binary32; returns (bits, flags)."""
    flags = 0
    neg = d < 0.0
    c = narrow_rne(d)
    if math.isinf(c):
        # beyond the round-to-nearest overflow threshold
        if rm == RM_RNE or rm == RM_RMM:
            return (NEG_INF if neg else POS_INF), FLAG_OF | FLAG_NX
        toward_zero = rm == RM_RTZ or (rm == RM_RDN and not neg) or (rm == RM_RUP and neg)
        if toward_zero:
            lim = -TWO_128 if neg else TWO_128
            r = _cmp_exact(op, a, b, d, e, lim)
            f = FLAG_NX
            if (r >= 0 and not neg) or (r <= 0 and neg):
                f |= FLAG_OF
            return (MAX_FINITE | SIGN) if neg else MAX_FINITE, f
        return (NEG_INF if neg else POS_INF), FLAG_OF | FLAG_NX

    bits = float_to_bits(c)
    r = _cmp_exact(op, a, b, d, e, c)
    if r != 0:
        flags |= FLAG_NX
        if rm == RM_RTZ:
            if (r > 0) == ((bits & SIGN) != 0) and c != 0.0:
                bits = _step(bits, r > 0)
        elif rm == RM_RDN:
            if r < 0:
                bits = _step(bits, False)
        elif rm == RM_RUP:
            if r > 0:
                bits = _step(bits, True)
        elif rm == RM_RMM:
            # ties went to even toward zero: move away on an exact midpoint
            away_pos = r > 0 and not neg
            away_neg = r < 0 and neg
            if away_pos or away_neg:
                half = _ulp(bits) * 0.5
                mid = abs(c) + half
                if neg:
                    mid = -mid
                if _cmp_exact(op, a, b, d, e, mid) == 0:
                    bits = _step(bits, away_pos)
        if _is_inf(bits):
            flags |= FLAG_OF
    # tininess after rounding with unbounded exponent
    if r != 0:
        if rm == RM_RNE or rm == RM_RMM:
            thr = MID_MIN_NORMAL
            tiny = _cmp_exact(op, a, b, d, e, thr) < 0 and _cmp_exact(op, a, b, d, e, -thr) > 0
        elif rm == RM_RTZ:
            tiny = (_cmp_exact(op, a, b, d, e, MIN_NORMAL) < 0
                    and _cmp_exact(op, a, b, d, e, -MIN_NORMAL) > 0)
        elif rm == RM_RDN:
            if neg:
                tiny = _cmp_exact(op, a, b, d, e, -BELOW_MIN_NORMAL) >= 0
            else:
                tiny = _cmp_exact(op, a, b, d, e, MIN_NORMAL) < 0
        else:
            if neg:
                tiny = _cmp_exact(op, a, b, d, e, -MIN_NORMAL) > 0
            else:
                tiny = _cmp_exact(op, a, b, d, e, BELOW_MIN_NORMAL) <= 0
        if tiny:
            flags |= FLAG_UF
    return bits, flags


@jit
def fp_op(op, abits, bbits, rm):
    """Execute one binary32 operation; ``rm`` is a resolved static mode 0..4.

    Returns (result_bits, accrued_flags).
    """
    abits &= 0xFFFFFFFF
    bbits &= 0xFFFFFFFF
    if op == OP_SUB:
        bbits ^= SIGN
        op = OP_ADD
    if op == OP_SQRT:
        if _is_nan(abits):
            return CANONICAL_NAN, (FLAG_NV if _is_snan(abits) else 0)
        if abits & 0x7FFFFFFF == 0:
            return abits, 0
        if abits & SIGN:
            return CANONICAL_NAN, FLAG_NV
        if _is_inf(abits):
            return abits, 0
        a = bits_to_float(abits)
        d = math.sqrt(a)
        return _round_finite(op, a, 0.0, d, 0.0, rm)

    if _is_nan(abits) or _is_nan(bbits):
        fl = FLAG_NV if (_is_snan(abits) or _is_snan(bbits)) else 0
        return CANONICAL_NAN, fl
    sa = abits & SIGN
    sb = bbits & SIGN
    ainf = _is_inf(abits)
    binf = _is_inf(bbits)
    azero = abits & 0x7FFFFFFF == 0
    bzero = bbits & 0x7FFFFFFF == 0
    if op == OP_ADD:
        if ainf and binf:
            if sa != sb:
                return CANONICAL_NAN, FLAG_NV
            return abits, 0
        if ainf:
            return abits, 0
        if binf:
            return bbits, 0
        a = bits_to_float(abits)
        b = bits_to_float(bbits)
        d = a + b
        # TwoSum error term: a + b == d + e exactly
        bv = d - a
        av = d - bv
        e = (a - av) + (b - bv)
        if d == 0.0:
            # a == -b exactly, or both zero
            if azero and bzero and sa == sb:
                return abits, 0
            return (SIGN if rm == RM_RDN else 0), 0
        return _round_finite(op, a, b, d, e, rm)
    sign = sa ^ sb
    if op == OP_MUL:
        if (ainf and bzero) or (binf and azero):
            return CANONICAL_NAN, FLAG_NV
        if ainf or binf:
            return POS_INF | sign, 0
        if azero or bzero:
            return sign, 0
        a = bits_to_float(abits)
        b = bits_to_float(bbits)
        return _round_finite(op, a, b, a * b, 0.0, rm)
    # division
    if (ainf and binf) or (azero and bzero):
        return CANONICAL_NAN, FLAG_NV
    if ainf:
        return POS_INF | sign, 0
    if binf:
        return sign, 0
    if bzero:
        return POS_INF | sign, FLAG_DZ
    if azero:
        return sign, 0
    a = bits_to_float(abits)
    b = bits_to_float(bbits)
    return _round_finite(op, a, b, a / b, 0.0, rm)
