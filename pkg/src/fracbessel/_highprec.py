"""Arbitrary-precision helpers built on gmpy2/MPFR.

The layered Mittag-Leffler sums cancel catastrophically for large negative
arguments, so the series engine escalates from float64 to MPFR with a
working precision sized from the largest term magnitude.  The dominant cost
at high precision is Gamma evaluation; when the exponents are (within a few
ulp) small rationals p/q, consecutive Gamma arguments in a residue class
differ by integers and can be reached by Pochhammer products instead of
fresh Gamma calls.
"""

from __future__ import annotations

import math
import threading
from fractions import Fraction
from math import lcm

import gmpy2

#: extra bits carried beyond the cancellation estimate
GUARD_BITS = 96
#: precision requests are rounded up to a multiple of this, to make ladder
#: caches reusable and results independent of request history
BITS_BUCKET = 128
#: refuse evaluations needing more precision than this (arguments too large
#: for direct summation)
BITS_CAP = 6 * 1024

_RATIONALIZE_MAX_DEN = 64


def bits_for(peak_nats: float, tol: float) -> int:
    """Working precision for a sum whose largest term is exp(peak_nats)."""
    raw = (max(peak_nats, 0.0) - math.log(tol)) / math.log(2.0) + GUARD_BITS
    return int(math.ceil(raw / BITS_BUCKET) * BITS_BUCKET)


def rationalize(x: float, max_den: int = _RATIONALIZE_MAX_DEN) -> Fraction | None:
    """Return p/q with q <= max_den if it matches x to a few ulp, else None."""
    fr = Fraction(x).limit_denominator(max_den)
    if abs(fr - Fraction(x)) <= 4e-16 * max(1.0, abs(x)):
        return fr
    return None


def mpfr(x, bits: int):
    return gmpy2.mpfr(x, bits)


def mpfr_frac(fr: Fraction, bits: int):
    return gmpy2.mpfr(gmpy2.mpq(fr.numerator, fr.denominator), bits)


class GammaLadder:
    """Gamma(b + sum a_i * l_i) for integer multi-indices l.

    When every a_i (and b) rationalizes to p_i/q_i, arguments reduce to
    b + N/Q with integer N, and within a residue class N mod Q the values
    follow from integer Pochhammer steps.  Otherwise falls back to one MPFR
    gamma call per distinct argument.
    """

    def __init__(self, a_vec: tuple[float, ...], b: float, bits: int):
        self.bits = bits
        self.ctx = gmpy2.context(precision=bits)
        self.a_vec = a_vec
        self.b = b
        fracs = [rationalize(a) for a in a_vec]
        bfrac = rationalize(b)
        self.exact = bfrac is not None and all(f is not None for f in fracs)
        self._memo: dict = {}
        if self.exact:
            q = lcm(bfrac.denominator, *[f.denominator for f in fracs]) if fracs else bfrac.denominator
            self.Q = q
            self.P = tuple(f.numerator * (q // f.denominator) for f in fracs)
            self.bfrac = bfrac
            self._anchor: dict[int, int] = {}
        self._lock = threading.Lock()

    def _arg_exact(self, n: int):
        fr = self.bfrac + Fraction(n, self.Q)
        return mpfr_frac(fr, self.bits)

    def _gamma_at(self, n: int):
        memo = self._memo
        got = memo.get(n)
        if got is not None:
            return got
        ctx = self.ctx
        r = n % self.Q
        anchor = self._anchor.get(r)
        if anchor is None:
            g = ctx.gamma(self._arg_exact(n))
            memo[n] = g
            self._anchor[r] = n
            return g
        g = memo[anchor]
        one = mpfr(1, self.bits)
        if n > anchor:
            x = self._arg_exact(anchor)
            for _ in range((n - anchor) // self.Q):
                g = ctx.mul(g, x)
                x = ctx.add(x, one)
            self._anchor[r] = n
        else:
            x = self._arg_exact(n)
            acc = mpfr(1, self.bits)
            for _ in range((anchor - n) // self.Q):
                acc = ctx.mul(acc, x)
                x = ctx.add(x, one)
            g = ctx.div(g, acc)
        memo[n] = g
        return g

    def gamma_row(self, row) -> "gmpy2.mpfr":
        """Gamma(b + sum_i a_i * row_i); row is a sequence of ints."""
        with self._lock:
            if self.exact:
                n = 0
                for p, l in zip(self.P, row):
                    n += p * int(l)
                return self._gamma_at(n)
            key = tuple(int(l) for l in row)
            got = self._memo.get(key)
            if got is not None:
                return got
            ctx = self.ctx
            arg = mpfr(self.b, self.bits)
            for a, l in zip(self.a_vec, row):
                li = int(l)
                if li:
                    arg = ctx.add(arg, ctx.mul(mpfr(a, self.bits), mpfr(li, self.bits)))
            g = ctx.gamma(arg)
            self._memo[key] = g
            return g


_ladders: dict = {}
_ladders_lock = threading.Lock()
_LADDER_CACHE_MAX = 48


def get_ladder(a_vec: tuple[float, ...], b: float, bits: int) -> GammaLadder:
    """Shared, memoized ladders; results do not depend on cache state."""
    key = (a_vec, b, bits)
    with _ladders_lock:
        lad = _ladders.get(key)
        if lad is None:
            if len(_ladders) >= _LADDER_CACHE_MAX:
                _ladders.pop(next(iter(_ladders)))
            lad = GammaLadder(a_vec, b, bits)
            _ladders[key] = lad
        return lad
