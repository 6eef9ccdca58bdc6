"""Independent high-precision oracles used by the tests.

These deliberately do not share code with the package: brute-force layered
summation in mpmath, direct Bessel series summation, and quadrature of the
Caputo defining integral.  Gamma arguments are assembled in mpf arithmetic;
assembling them in float64 injects rounding noise that the huge layer
magnitudes amplify catastrophically.
"""

import math

import mpmath
import numpy as np


def _compositions(k, m):
    if m == 1:
        return [[k]]
    out = []
    for j in range(k + 1):
        for sub in _compositions(k - j, m - 1):
            out.append(sub + [j])
    return out


def ml_needed_dps(exponents, args) -> int:
    """Working digits from the largest layer magnitude (plus margin)."""
    peak = 0.0
    kstar = 0.0
    for a, z in zip(exponents, args):
        if abs(z) > 1.0:
            peak += abs(z) ** (1.0 / a)
            kstar += abs(z) ** (1.0 / a) / a
    if len(exponents) > 1:
        peak += math.log(len(exponents)) * kstar
    return int(0.4343 * peak) + 50


def ml_needed_degree(exponents, args) -> int:
    """Layers until the terms decay back below tolerance."""
    kstar = 0.0
    for a, z in zip(exponents, args):
        if abs(z) > 1.0:
            kstar += abs(z) ** (1.0 / a) / a
    return int(2.8 * kstar) + 100


def ml_brute(exponents, offset, args, degree=None, dps=None) -> float:
    """Brute-force summation of the multinomial series to a fixed degree."""
    if dps is None:
        dps = ml_needed_dps(exponents, args)
    if degree is None:
        degree = ml_needed_degree(exponents, args)
    m = len(exponents)
    with mpmath.workdps(dps):
        a = [mpmath.mpf(x) for x in exponents]
        b = mpmath.mpf(offset)
        z = [mpmath.mpf(x) for x in args]
        total = mpmath.mpf(0)
        for k in range(degree + 1):
            for comp in _compositions(k, m):
                coef = mpmath.mpf(1)
                rem = k
                for li in comp:
                    coef *= mpmath.binomial(rem, li)
                    rem -= li
                num = mpmath.mpf(1)
                arg = b
                skip = False
                for zi, ai, li in zip(z, a, comp):
                    if li:
                        if zi == 0:
                            skip = True
                            break
                        num *= zi**li
                        arg += ai * li
                if skip:
                    continue
                total += coef * num / mpmath.gamma(arg)
        return float(total)


def bessel_series(nu, z, dps=40) -> float:
    """Term-wise summation of J_nu(z) = sum (-1)^i (z/2)^(2i+nu) / (i! Gamma(i+nu+1))."""
    with mpmath.workdps(dps):
        nu_m = mpmath.mpf(nu)
        half = mpmath.mpf(z) / 2
        total = mpmath.mpf(0)
        term_scale = half**nu_m / mpmath.gamma(nu_m + 1)
        i = 0
        term = term_scale
        while True:
            total += term
            i += 1
            term = -term * half * half / (i * (i + nu_m))
            if abs(term) < mpmath.mpf(10) ** (-dps) * (abs(total) + 1):
                break
            if i > 10000:
                raise RuntimeError("series did not converge")
        return float(total)


def bessel_zero_bisect(nu, k, dps=30) -> float:
    """k-th positive zero via sign-change bisection on the series."""
    with mpmath.workdps(dps):
        f = lambda x: mpmath.besselj(nu, x)
        lo = mpmath.mpf(0.1)
        found = 0
        step = mpmath.mpf(0.05)
        x = lo
        prev = f(x)
        while found < k:
            x += step
            cur = f(x)
            if prev * cur < 0:
                found += 1
                if found == k:
                    return float(mpmath.findroot(f, (x - step, x), solver="bisect"))
            prev = cur
        raise RuntimeError("unreachable")


def caputo_quadrature(g_deriv, t, beta, k) -> float:
    """Caputo derivative by adaptive quadrature of the defining integral,

        1/Gamma(k - beta) * int_0^t g^(k)(z) (t - z)^(beta - k + 1 power) dz,

    with g_deriv the k-th classical derivative (callable)."""
    if t == 0:
        return 0.0
    with mpmath.workdps(30):
        bm = mpmath.mpf(beta)
        km = mpmath.mpf(k)
        val = mpmath.quad(
            lambda z: g_deriv(z) * (mpmath.mpf(t) - z) ** (km - bm - 1), [0, t])
        return float(val / mpmath.gamma(km - bm))


def integrate_01(f, dps=25) -> float:
    """Reference integral over (0, 1) via mpmath adaptive quadrature."""
    with mpmath.workdps(dps):
        return float(mpmath.quad(f, [0, 1]))


def dalembert_mode(gamma, f_vals, t_grid) -> np.ndarray:
    """Classical wave-equation mode response

        U(t) = int_0^t sin(gamma z)/gamma * f(t - z) dz

    by composite Gauss-Legendre on a fine fixed grid (independent of the
    solver's quadrature), with f linearly interpolated."""
    from numpy.polynomial.legendre import leggauss
    x, w = leggauss(12)
    out = np.zeros_like(t_grid)
    for i, t in enumerate(t_grid):
        if t == 0:
            continue
        periods = max(16, int(np.ceil(gamma * t / 2.0)))
        edges = np.linspace(0.0, t, periods + 1)
        mid = (edges[:-1] + edges[1:]) / 2
        half = np.diff(edges) / 2
        z = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        wts = (half[:, None] * w[None, :]).ravel()
        fv = np.interp(t - z, t_grid, f_vals)
        out[i] = np.dot(wts, np.sin(gamma * z) / gamma * fv)
    return out
