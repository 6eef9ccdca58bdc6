"""Multinomial Mittag-Leffler function and its classical reductions.

The m-argument function

    E_{(a_1..a_m),b}(z_1..z_m) = sum_{k>=0} sum_{l_1+..+l_m=k}
        k!/(l_1!..l_m!) * prod_i z_i^{l_i} / Gamma(b + sum_i a_i l_i)

is summed by total-degree layers.  Terms are assembled in log space with
sign tracking; the sum stops when three consecutive layers each contribute
less than tol times the running sum.  For strongly cancelling arguments
(large negative z) float64 cannot represent the intermediate layers, so the
evaluation escalates to MPFR with a working precision sized from the
largest layer magnitude; evaluations whose precision or layer demands
exceed hard caps raise MLNonConvergenceError instead of returning garbage.

The solver evaluates the same series with arguments of the form
c_i * z^{q_i} along whole vectors of z; ml_at_powers is that entry point
and shares the per-(exponents, offset) coefficient tables.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from math import comb

import gmpy2
import numpy as np
from scipy.special import gammaln

from . import _highprec as hp
from .fractional import TimeOperator

TINY = 1e-308
MIN_TOL = 1e-15
DEFAULT_TOL = 1e-13
_OVERFLOW_NATS = 690.0
_EPS = 1.2e-16

#: per-layer composition counts are C(k+m-1, m-1); caps keep the cumulative
#: enumeration bounded (~4e6 compositions).  The m=1 series is linear in the
#: layer count and may legitimately need tens of thousands of layers for
#: slowly converging small-exponent cases.
_CAP_SINGLE = 60000
_CAP_PAIR = 3000
_COMP_BUDGET = 4_000_000


class MLNonConvergenceError(RuntimeError):
    """Layer summation did not converge within the caps.

    Signals arguments too large for direct summation of the defining
    series (or a precision demand beyond the supported maximum).
    """

    def __init__(self, layers_used: int, last_layer: float, msg: str):
        self.layers_used = layers_used
        self.last_layer = last_layer
        super().__init__(f"{msg} (layers_used={layers_used}, last layer magnitude ~{last_layer:.3e})")


@dataclass(frozen=True)
class MLParams:
    """Argument bundle: exponents (a_1..a_m), offset b, arguments (z_1..z_m)."""

    exponents: tuple[float, ...]
    offset: float
    args: tuple[float, ...]

    def __post_init__(self):
        exps = tuple(float(a) for a in self.exponents)
        args = tuple(float(z) for z in self.args)
        object.__setattr__(self, "exponents", exps)
        object.__setattr__(self, "args", args)
        object.__setattr__(self, "offset", float(self.offset))
        if len(exps) < 1:
            raise ValueError("need at least one exponent")
        if len(exps) != len(args):
            raise ValueError("exponents and args must have equal length")
        if any(a <= 0.0 for a in exps):
            raise ValueError("all exponents must be positive")
        if self.offset <= 0.0:
            raise ValueError("offset must be positive")


@dataclass(frozen=True)
class MLValue:
    value: float
    layers_used: int
    tail_estimate: float


_cap_cache: dict[int, int] = {}


def _layer_cap(m: int) -> int:
    got = _cap_cache.get(m)
    if got is None:
        if m == 1:
            got = _CAP_SINGLE
        elif m == 2:
            got = _CAP_PAIR
        else:
            total = 0
            k = 0
            while total + comb(k + m - 1, m - 1) <= _COMP_BUDGET:
                total += comb(k + m - 1, m - 1)
                k += 1
            got = max(k - 1, 8)
        _cap_cache[m] = got
    return got


_comp_cache: dict[tuple[int, int], np.ndarray] = {}
_comp_lock = threading.Lock()


def _compositions(k: int, m: int) -> np.ndarray:
    """Weak compositions of k into m parts (colex: last part varies slowest)."""
    if m == 1:
        return np.array([[k]], dtype=np.int32)
    if m == 2:
        j = np.arange(k + 1, dtype=np.int32)
        return np.stack([k - j, j], axis=1)
    blocks = []
    for j in range(k + 1):
        sub = _comp_layer(k - j, m - 1)
        col = np.full((sub.shape[0], 1), j, dtype=np.int32)
        blocks.append(np.hstack([sub, col]))
    return np.vstack(blocks)


def _comp_layer(k: int, m: int) -> np.ndarray:
    key = (k, m)
    got = _comp_cache.get(key)
    if got is None:
        with _comp_lock:
            got = _comp_cache.get(key)
            if got is None:
                got = _compositions(k, m)
                _comp_cache[key] = got
    return got


class _SeriesTable:
    """Per-(exponents, offset) layer coefficients.

    Double layers hold ln[k!/(prod l_i!) / Gamma(b + a.l)] (always a positive
    coefficient since b > 0); MPFR mirrors are built on demand per precision
    bucket, with Gamma values from a shared ladder.
    """

    def __init__(self, exponents: tuple[float, ...], offset: float):
        self.a = np.asarray(exponents, float)
        self.exponents = exponents
        self.b = float(offset)
        self.m = len(exponents)
        self._layers: list[tuple[np.ndarray, np.ndarray]] = []
        self._hp: dict[int, list[list]] = {}
        self._lock = threading.Lock()

    def layer(self, k: int) -> tuple[np.ndarray, np.ndarray, float]:
        """(compositions, ln coefficient, largest Gamma argument) of layer k."""
        if k >= len(self._layers):
            with self._lock:
                while len(self._layers) <= k:
                    kk = len(self._layers)
                    L = _comp_layer(kk, self.m)
                    ln_mult = gammaln(kk + 1.0) - gammaln(L + 1.0).sum(axis=1)
                    args = self.b + L @ self.a
                    lnC = ln_mult - gammaln(args)
                    self._layers.append((L, lnC, float(args.max())))
        return self._layers[k]

    @staticmethod
    def _hp_row(kk: int, row, bits: int, ladder, ctx):
        mult = gmpy2.mpz(1)
        rem = kk
        for li in row:
            mult *= gmpy2.bincoef(rem, li)
            rem -= li
        g = ladder.gamma_row(row)
        return row, ctx.div(gmpy2.mpfr(mult, bits), g)

    def hp_rows(self, k: int, bits: int, idx=None) -> list:
        """Rows [(l_tuple, C_mpfr)] for layer k at the given precision.

        With `idx` (indices into the layer's composition order) and no
        cached layer, only the requested rows are computed (and not
        cached): magnitude pruning typically needs a small slice of big
        layers.  Ladder-backed Gamma values are canonical, so ad-hoc and
        cached rows are bit-identical.
        """
        with self._lock:
            layers = self._hp.get(bits)
            if layers is None:
                layers = []
                self._hp[bits] = layers
                if len(self._hp) > 6:
                    oldest = next(iter(self._hp))
                    if oldest != bits:
                        self._hp.pop(oldest)
        if k < len(layers):
            got = layers[k]
            return got if idx is None else [got[j] for j in idx]
        ladder = hp.get_ladder(self.exponents, self.b, bits)
        ctx = gmpy2.context(precision=bits)
        if idx is not None:
            L = _comp_layer(k, self.m)
            if 3 * len(idx) < L.shape[0]:
                rows = L[idx].tolist()
                return [self._hp_row(k, row, bits, ladder, ctx) for row in rows]
        with self._lock:
            while len(layers) <= k:
                kk = len(layers)
                L = _comp_layer(kk, self.m)
                layer = [self._hp_row(kk, row, bits, ladder, ctx) for row in L.tolist()]
                layers.append(layer)
        got = layers[k]
        return got if idx is None else [got[j] for j in idx]


_tables: dict[tuple, _SeriesTable] = {}
_tables_lock = threading.Lock()
_TABLES_MAX = 64


def _get_table(exponents: tuple[float, ...], offset: float) -> _SeriesTable:
    key = (exponents, offset)
    with _tables_lock:
        tab = _tables.get(key)
        if tab is None:
            if len(_tables) >= _TABLES_MAX:
                _tables.pop(next(iter(_tables)))
            tab = _SeriesTable(exponents, offset)
            _tables[key] = tab
        return tab


def _peak_nats(a_vec, abs_u, m: int) -> float:
    """Analytic overestimate of the largest layer log-magnitude."""
    tot = 0.0
    kstar = 0.0
    for a, u in zip(a_vec, abs_u):
        if u > 1.0:
            tot += float(u) ** (1.0 / a)
            kstar += float(u) ** (1.0 / a) / a
    if m > 1:
        tot += math.log(m) * kstar
    return tot


def layers_estimate(a_vec, abs_u) -> int:
    """Predicted layer demand: the series peaks near sum_i |u_i|^(1/a_i)/a_i
    and needs roughly 2.8x that to decay back below tolerance."""
    kstar = 0.0
    for a, u in zip(a_vec, abs_u):
        if u > 1.0:
            kstar += float(u) ** (1.0 / a) / a
    return int(2.8 * kstar) + 80


def check_feasible(a_vec, abs_u, tol: float) -> None:
    """Raise MLNonConvergenceError when the direct sum cannot fit the
    layer/precision caps (arguments too large)."""
    m = len(a_vec)
    need_layers = layers_estimate(a_vec, abs_u)
    cap = _layer_cap(m)
    if need_layers > cap:
        raise MLNonConvergenceError(
            0, math.inf,
            f"predicted layer demand ~{need_layers} exceeds the cap {cap} for "
            f"{m}-argument sums: arguments too large for direct summation")
    bits = hp.bits_for(_peak_nats(a_vec, abs_u, m), tol)
    if bits > hp.BITS_CAP:
        raise MLNonConvergenceError(
            0, math.inf,
            f"predicted working precision ~{bits} bits exceeds the cap {hp.BITS_CAP}: "
            "arguments too large for direct summation")


def _eval_double_nodes(table: _SeriesTable, lnc, neg_c, zero_c, q, lnz, tol):
    """Layered float64 sweep over all nodes at once.

    Returns (S, done, esc, layers, tail, maxW, lnS_est): nodes flagged in
    `esc` overflowed or cancelled beyond float64 and need the MPFR path;
    nodes in neither mask hit the layer cap.
    """
    n = len(lnz)
    m = table.m
    cap = _layer_cap(m)
    S = np.zeros(n)
    comp = np.zeros(n)
    run = np.zeros(n, np.int32)
    done = np.zeros(n, bool)
    esc = np.zeros(n, bool)
    layers = np.full(n, 0, np.int32)
    maxW = np.full(n, -np.inf)
    absWmax = np.zeros(n)
    sumAbs = np.zeros(n)
    last3 = np.zeros((3, n))
    last_contrib = np.zeros(n)
    arg_max = 0.0
    any_zero = bool(zero_c.any())
    any_neg = bool(neg_c.any())
    for k in range(cap + 1):
        act = np.flatnonzero(~(done | esc))
        if act.size == 0:
            break
        L, lnC0, amax_k = table.layer(k)
        arg_max = max(arg_max, amax_k)
        if any_zero:
            keep = ~(L[:, zero_c] > 0).any(axis=1)
            L = L[keep]
            lnC0 = lnC0[keep]
        layers[act] = k + 1
        if L.shape[0] == 0:
            contrib = np.zeros(act.size)
            absk = np.zeros(act.size)
            wa = np.full(act.size, -np.inf)
        else:
            A = lnC0 + L @ lnc
            B = (L @ q).astype(float)
            if any_neg:
                sgn = 1.0 - 2.0 * (L[:, neg_c].sum(axis=1).astype(np.int64) & 1)
            else:
                sgn = np.ones(L.shape[0])
            W = A[:, None] + B[:, None] * lnz[None, act]
            wa = W.max(axis=0)
            over = wa > _OVERFLOW_NATS
            if over.any():
                esc[act[over]] = True
                sel = ~over
                act = act[sel]
                if act.size == 0:
                    continue
                W = W[:, sel]
                wa = wa[sel]
            E = np.exp(W)
            contrib = (sgn[:, None] * E).sum(axis=0)
            absk = E.sum(axis=0)
            aW = np.abs(W).max(axis=0)
            absWmax[act] = np.maximum(absWmax[act], aW)
        maxW[act] = np.maximum(maxW[act], wa)
        sumAbs[act] += absk
        # Neumaier accumulation
        s0 = S[act]
        t = s0 + contrib
        big = np.abs(s0) >= np.abs(contrib)
        comp[act] += np.where(big, (s0 - t) + contrib, (contrib - t) + s0)
        S[act] = t
        last3[k % 3, act] = np.abs(contrib)
        last_contrib[act] = np.abs(contrib)
        small = np.abs(contrib) <= tol * np.maximum(np.abs(S[act]), TINY)
        run[act] = np.where(small, run[act] + 1, 0)
        if k >= 4:
            fin = act[run[act] >= 3]
            done[fin] = True
    S = S + comp
    # float64 trustworthiness: per-term rounding is dominated by the Gamma
    # argument b + L.a being rounded in float64 (error ~ psi(x) * x * eps),
    # plus the log-space assembly (~ eps * |W|); summed over |terms|
    good = done.copy()
    per_term = _EPS * (absWmax + 8.0 + 3.0 * (m + 1) * arg_max * math.log(arg_max + 2.0))
    err = per_term * sumAbs + _EPS * np.abs(S)
    bad = good & (err > tol * np.maximum(np.abs(S), TINY))
    esc |= bad
    done &= ~bad
    tail = last3.max(axis=0) / np.maximum(np.abs(S), TINY)
    lnS = np.where(np.abs(S) > 0, np.log(np.maximum(np.abs(S), TINY)), 0.0)
    return S, done, esc, layers, tail, maxW, lnS, last_contrib


def _eval_hp_node(table: _SeriesTable, coeffs, powers, z: float, tol: float,
                  peak_guess: float, lns_guess: float):
    """MPFR evaluation at one node, iterating the precision until the
    achieved cancellation slack covers tol.

    Rows whose float64 log-magnitude sits more than the working precision
    below the running maximum cannot affect the sum and are skipped; the
    float64 layer tables provide those magnitudes cheaply.
    """
    m = table.m
    cap = _layer_cap(m)
    bits = hp.bits_for(peak_guess + max(0.0, -lns_guess), tol)
    lnu_dbl = np.empty(m)
    for i, (c, qi) in enumerate(zip(coeffs, powers)):
        if c == 0.0:
            lnu_dbl[i] = -1e60  # zero argument: rows with l_i > 0 vanish
        else:
            lnu_dbl[i] = math.log(abs(c)) + (qi * math.log(z) if qi != 0.0 else 0.0)
    check_feasible(table.exponents, np.exp(np.maximum(lnu_dbl, -700.0)), tol)
    for _attempt in range(6):
        if bits > hp.BITS_CAP:
            raise MLNonConvergenceError(0, math.inf,
                                        "working precision beyond cap: arguments too large for direct summation")
        ctx = gmpy2.context(precision=bits)
        one = gmpy2.mpfr(1, bits)
        us = []
        for c, qi in zip(coeffs, powers):
            if c == 0.0:
                us.append(gmpy2.mpfr(0, bits))
            elif qi == 0.0:
                us.append(gmpy2.mpfr(c, bits))
            else:
                zp = ctx.exp(ctx.mul(gmpy2.mpfr(qi, bits), ctx.log(gmpy2.mpfr(z, bits))))
                us.append(ctx.mul(gmpy2.mpfr(c, bits), zp))
        pows = [[one] for _ in range(m)]
        S = gmpy2.mpfr(0, bits)
        max_term = gmpy2.mpfr(0, bits)
        run = 0
        layers_used = 0
        last3 = [0.0, 0.0, 0.0]
        converged = False
        w_run = -math.inf
        drop = -(bits - 12) * math.log(2.0)
        for k in range(cap + 1):
            L, lnC, _ = table.layer(k)
            W = lnC + L @ lnu_dbl
            wmax = float(W.max()) if len(W) else -math.inf
            w_run = max(w_run, wmax)
            keep = np.flatnonzero(W >= w_run + drop)
            contrib = gmpy2.mpfr(0, bits)
            if keep.size:
                for i in range(m):
                    while len(pows[i]) <= k:
                        pows[i].append(ctx.mul(pows[i][-1], us[i]))
                for row, C in table.hp_rows(k, bits, keep):
                    term = C
                    for i, li in enumerate(row):
                        if li:
                            term = ctx.mul(term, pows[i][li])
                    contrib = ctx.add(contrib, term)
                    at = abs(term)
                    if at > max_term:
                        max_term = at
            S = ctx.add(S, contrib)
            layers_used = k + 1
            ac = abs(contrib)
            last3[k % 3] = float(gmpy2.log(ac)) if ac > 0 else -math.inf
            if ac <= tol * abs(S) or (ac == 0 and abs(S) == 0):
                run += 1
                if run >= 3 and k >= 4:
                    converged = True
                    break
            else:
                run = 0
        if not converged:
            raise MLNonConvergenceError(layers_used, float(max_term) if max_term < gmpy2.mpfr("1e300") else math.inf,
                                        "layer cap reached without convergence")
        ln_max = float(gmpy2.log(max_term)) if max_term > 0 else -math.inf
        ln_S = float(gmpy2.log(abs(S))) if abs(S) > 0 else -math.inf
        achieved = (bits - 12) * math.log(2.0) - (ln_max - ln_S if ln_S > -math.inf else math.inf)
        if achieved >= -math.log(tol):
            tail = math.exp(max(last3) - ln_S) if ln_S > -math.inf and max(last3) > -math.inf else 0.0
            return float(S), layers_used, tail, ln_max
        bigger = hp.bits_for(ln_max + max(0.0, -min(ln_S, 0.0)), tol)
        bits = max(bigger, int(bits * 1.6) + hp.BITS_BUCKET)
        bits = int(math.ceil(bits / hp.BITS_BUCKET) * hp.BITS_BUCKET)
    raise MLNonConvergenceError(0, math.inf, "precision iteration failed to stabilize")


def ml_at_powers(exponents, offset, coeffs, powers, z_nodes, tol: float = DEFAULT_TOL):
    """E_{(exponents),offset}(c_1 z^{q_1}, .., c_m z^{q_m}) over z_nodes >= 0.

    Vectorized backend for the mode kernels; z = 0 gives 1/Gamma(offset)
    exactly.  Returns (values, layers_used, tail_rel) with scalars reduced
    over the nodes.
    """
    exponents = tuple(float(a) for a in exponents)
    coeffs = tuple(float(c) for c in coeffs)
    powers = tuple(float(qi) for qi in powers)
    if any(a <= 0 for a in exponents):
        raise ValueError("exponents must be positive")
    if float(offset) <= 0:
        raise ValueError("offset must be positive")
    if tol < MIN_TOL:
        raise ValueError(f"tol must be >= {MIN_TOL}")
    z = np.atleast_1d(np.asarray(z_nodes, float))
    if np.any(z < 0.0):
        raise ValueError("nodes must be >= 0")
    table = _get_table(exponents, float(offset))
    out = np.empty_like(z)
    zero_nodes = z == 0.0
    if zero_nodes.any():
        out[zero_nodes] = 1.0 / math.gamma(float(offset))
    layers_max = 1
    tail_max = 0.0
    idx = np.flatnonzero(~zero_nodes)
    if idx.size:
        zz = z[idx]
        lnz = np.log(zz)
        carr = np.asarray(coeffs)
        lnc = np.where(carr != 0.0, np.log(np.abs(np.where(carr != 0.0, carr, 1.0))), 0.0)
        neg_c = carr < 0.0
        zero_c = carr == 0.0
        q = np.asarray(powers)
        S, done, esc, layers, tail, maxW, lnS, last = _eval_double_nodes(
            table, lnc, neg_c, zero_c, q, lnz, tol)
        stuck = ~(done | esc)
        if stuck.any():
            i = int(np.flatnonzero(stuck)[0])
            raise MLNonConvergenceError(int(layers[i]), float(last[i]),
                                        "layer cap reached without convergence")
        layers_max = max(layers_max, int(layers.max()))
        tail_max = max(tail_max, float(tail[done].max()) if done.any() else 0.0)
        vals = S
        for j in np.flatnonzero(esc):
            zj = float(zz[j])
            abs_u = [abs(c) * zj ** qi for c, qi in zip(coeffs, powers)]
            peak = max(_peak_nats(exponents, abs_u, table.m), float(maxW[j]))
            lns_guess = float(lnS[j]) if done[j] or np.isfinite(lnS[j]) else 0.0
            v, lay, tl, _ = _eval_hp_node(table, coeffs, powers, zj, tol, peak, min(lns_guess, 0.0))
            vals[j] = v
            layers_max = max(layers_max, lay)
            tail_max = max(tail_max, tl)
        out[idx] = vals
    if np.isscalar(z_nodes) or np.asarray(z_nodes).ndim == 0:
        return float(out[0]), layers_max, tail_max
    return out, layers_max, tail_max


def ml_multinomial(p: MLParams, tol: float = DEFAULT_TOL) -> MLValue:
    """Evaluate the multinomial Mittag-Leffler function E_{(a),b}(z)."""
    if not isinstance(p, MLParams):
        raise TypeError("expected MLParams")
    if tol < MIN_TOL:
        raise ValueError(f"tol must be >= {MIN_TOL}")
    m = len(p.exponents)
    value, layers, tail = ml_at_powers(p.exponents, p.offset, p.args,
                                       (0.0,) * m, 1.0, tol)
    return MLValue(value=value, layers_used=layers, tail_estimate=tail)


# ---------------------------------------------------------------------------
# two-parameter reduction, independently coded (split-series algorithm)
# ---------------------------------------------------------------------------

def _two_param_double(a: float, b: float, z: float, tol: float):
    """Blocked direct summation of sum_k z^k / Gamma(b + a k) in float64."""
    cap = _CAP_SINGLE
    lnz = math.log(abs(z))
    S = 0.0
    c = 0.0
    run = 0
    sumAbs = 0.0
    maxW = -math.inf
    absWmax = 0.0
    last3 = [0.0, 0.0, 0.0]
    block = 512
    k0 = 0
    while k0 <= cap:
        ks = np.arange(k0, min(k0 + block, cap + 1))
        W = ks * lnz - gammaln(b + a * ks)
        wmax = float(W.max())
        if wmax > _OVERFLOW_NATS:
            return None, maxW if maxW > -math.inf else wmax, 0, 0.0
        maxW = max(maxW, wmax)
        absWmax = max(absWmax, float(np.abs(W).max()))
        terms = np.exp(W)
        sumAbs += float(terms.sum())
        if z < 0.0:
            terms = terms * np.where(ks & 1, -1.0, 1.0)
        for j, v in enumerate(terms):
            t = S + v
            if abs(S) >= abs(v):
                c += (S - t) + v
            else:
                c += (v - t) + S
            S = t
            k = int(ks[j])
            last3[k % 3] = abs(v)
            if abs(v) <= tol * max(abs(S + c), TINY):
                run += 1
                if run >= 3 and k >= 4:
                    total = S + c
                    amax = b + a * k
                    per_term = _EPS * (absWmax + 8.0 + 6.0 * amax * math.log(amax + 2.0))
                    err = per_term * sumAbs + _EPS * abs(total)
                    if err > tol * max(abs(total), TINY):
                        return None, maxW, k + 1, abs(v)
                    return total, maxW, k + 1, max(last3) / max(abs(total), TINY)
            else:
                run = 0
        k0 += block
    raise MLNonConvergenceError(cap, float(last3[cap % 3]), "layer cap reached without convergence")


def _two_param_hp(a: float, b: float, z: float, tol: float, peak: float) -> float:
    """MPFR evaluation.  For a = p/q (small rationals) the series splits
    into q subseries with integer-step Gamma arguments,

        E_{p/q,b}(z) = sum_{r<q} z^r sum_j (z^q)^j / Gamma(b + a r + p j),

    each driven by a pure term recurrence; only q Gamma seeds are needed.
    Irrational exponents fall back to one Gamma call per term.
    """
    afr = hp.rationalize(a)
    bfr = hp.rationalize(b)
    bits = hp.bits_for(peak, tol)
    for _attempt in range(6):
        if bits > hp.BITS_CAP:
            raise MLNonConvergenceError(0, math.inf,
                                        "working precision beyond cap: arguments too large for direct summation")
        ctx = gmpy2.context(precision=bits)
        max_term_ln = -math.inf
        terms_used = 0
        if afr is not None and bfr is not None and afr.denominator <= 64:
            p_, q_ = afr.numerator, afr.denominator
            zmp = gmpy2.mpfr(z, bits)
            w = ctx.pow(zmp, q_)
            total = gmpy2.mpfr(0, bits)
            zr = gmpy2.mpfr(1, bits)
            for r in range(q_):
                cfr = bfr + afr * r
                x0 = hp.mpfr_frac(cfr, bits)
                g = ctx.gamma(x0)
                term = ctx.div(gmpy2.mpfr(1, bits), g)
                s = term
                x = x0
                one = gmpy2.mpfr(1, bits)
                j = 0
                floor = ctx.div_2exp(abs(term), bits + 8)
                while True:
                    j += 1
                    if j > _CAP_SINGLE:
                        raise MLNonConvergenceError(j, float(abs(term)),
                                                    "layer cap reached without convergence")
                    f = gmpy2.mpfr(1, bits)
                    for _ in range(p_):
                        f = ctx.mul(f, x)
                        x = ctx.add(x, one)
                    term = ctx.div(ctx.mul(term, w), f)
                    s = ctx.add(s, term)
                    at = abs(term)
                    if at > 0:
                        max_term_ln = max(max_term_ln, float(gmpy2.log(at)) + (r * math.log(abs(z)) if z != 0 else 0.0))
                    asum = abs(s)
                    if j > 3 and at <= ctx.div_2exp(asum if asum > 0 else floor, bits - 4):
                        break
                terms_used += j
                total = ctx.add(total, ctx.mul(zr, s))
                zr = ctx.mul(zr, zmp)
            S = total
        else:
            S = gmpy2.mpfr(0, bits)
            zmp = gmpy2.mpfr(z, bits)
            amp = gmpy2.mpfr(a, bits)
            bmp = gmpy2.mpfr(b, bits)
            zp = gmpy2.mpfr(1, bits)
            run = 0
            for k in range(_CAP_SINGLE + 1):
                g = ctx.gamma(ctx.add(bmp, ctx.mul(amp, gmpy2.mpfr(k, bits))))
                term = ctx.div(zp, g)
                S = ctx.add(S, term)
                zp = ctx.mul(zp, zmp)
                at = abs(term)
                if at > 0:
                    max_term_ln = max(max_term_ln, float(gmpy2.log(at)))
                if at <= tol * abs(S):
                    run += 1
                    if run >= 3 and k >= 4:
                        break
                else:
                    run = 0
            else:
                raise MLNonConvergenceError(_CAP_SINGLE, 0.0, "layer cap reached without convergence")
        ln_S = float(gmpy2.log(abs(S))) if abs(S) > 0 else -math.inf
        achieved = (bits - 12) * math.log(2.0) - (max_term_ln - ln_S if ln_S > -math.inf else math.inf)
        if achieved >= -math.log(tol):
            return float(S)
        bits = max(hp.bits_for(max_term_ln + max(0.0, -min(ln_S, 0.0)), tol),
                   int(bits * 1.6) + hp.BITS_BUCKET)
        bits = int(math.ceil(bits / hp.BITS_BUCKET) * hp.BITS_BUCKET)
    raise MLNonConvergenceError(0, math.inf, "precision iteration failed to stabilize")


def ml_two_param(a: float, b: float, z: float, tol: float = DEFAULT_TOL) -> float:
    """Classical E_{a,b}(z) = sum_k z^k / Gamma(b + a k).

    Independent of ml_multinomial (different decomposition of the sum), so
    the two can cross-check each other.
    """
    a = float(a)
    b = float(b)
    z = float(z)
    if a <= 0.0 or b <= 0.0:
        raise ValueError("a and b must be positive")
    if tol < MIN_TOL:
        raise ValueError(f"tol must be >= {MIN_TOL}")
    if z == 0.0:
        return 1.0 / math.gamma(b)
    val, maxW, _layers, _tail = _two_param_double(a, b, z, tol)
    if val is not None:
        return val
    peak = max(abs(z) ** (1.0 / a), maxW, 1.0)
    return _two_param_hp(a, b, z, tol, peak)


def u0_bar(op: TimeOperator, gamma_sq: float, t: float, tol: float = DEFAULT_TOL) -> float:
    """Homogeneous unit-initial-value mode response

        U0(t) = E_{(alpha-alpha_1,..,alpha-alpha_n,alpha),1}(
                    lambda_1 t^(alpha-alpha_1), .., -gamma^2 t^alpha).

    Equals 1 at t = 0.  Degenerate exponents alpha - alpha_i = 0 cannot be
    represented (TimeOperator enforces alpha_i < alpha strictly).
    """
    if t < 0.0:
        raise ValueError("t must be >= 0")
    gamma_sq = float(gamma_sq)
    if gamma_sq <= 0.0:
        raise ValueError("gamma_sq must be positive")
    if t == 0.0:
        return 1.0
    exps = tuple(op.alpha - ai for _, ai in op.terms) + (op.alpha,)
    if any(e <= 0.0 for e in exps):
        raise ValueError("degenerate exponent alpha - alpha_i <= 0")
    coeffs = tuple(lam for lam, _ in op.terms) + (-gamma_sq,)
    value, _, _ = ml_at_powers(exps, 1.0, coeffs, exps, float(t), tol)
    return value
