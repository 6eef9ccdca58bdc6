"""Gamma/log-gamma, Bessel functions of the first kind, and their zeros.

J_nu(z) = sum_i (-1)^i (z/2)^(2i+nu) / (i! Gamma(i+nu+1)), nu >= 0; the
positive zeros gamma_1 < gamma_2 < ... drive everything downstream (they are
the eigenvalue square roots of the singular spatial operator).  Evaluation
delegates to scipy's AMOS-backed jv, which is accurate to ~1e-15 absolute on
the argument range used here (z <= ~240); zeros are found by safeguarded
Newton from McMahon asymptotic seeds with a bisection fallback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import jv
from scipy.optimize import brentq

#: absolute residual |J_nu(gamma_k)| required of a refined zero
ZERO_TOL = 1e-12

#: arguments above this are outside the validated evaluation envelope
MAX_ARGUMENT = 240.0


class ZeroBracketError(RuntimeError):
    """Raised when a sign change cannot be bracketed for some zero index."""

    def __init__(self, nu: float, k: int, msg: str = ""):
        self.nu = nu
        self.k = k
        super().__init__(f"failed to bracket zero k={k} of J_nu, nu={nu}" + (f": {msg}" if msg else ""))


def log_gamma(x: float) -> float:
    """ln Gamma(x) for x > 0."""
    x = float(x)
    if not x > 0.0:
        raise ValueError(f"log_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def _check_order(nu: float) -> float:
    nu = float(nu)
    if not nu >= 0.0 or not np.isfinite(nu):
        raise ValueError(f"Bessel order must be >= 0, got {nu}")
    return nu


def bessel_j(nu: float, z):
    """J_nu(z) for z >= 0 (scalar or array)."""
    nu = _check_order(nu)
    arr = np.asarray(z, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("bessel_j requires z >= 0")
    out = jv(nu, arr)
    return float(out) if np.isscalar(z) or arr.ndim == 0 else out

def bessel_j_prime(nu: float, z):
    """J_nu'(z) via the recurrence (J_{nu-1} - J_{nu+1}) / 2."""
    nu = _check_order(nu)
    arr = np.asarray(z, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("bessel_j_prime requires z >= 0")
    out = 0.5 * (jv(nu - 1.0, arr) - jv(nu + 1.0, arr))
    return float(out) if np.isscalar(z) or arr.ndim == 0 else out


def bessel_j_dd(nu: float, z):
    """J_nu''(z) for z > 0, from the Bessel ODE:

        J'' = -J'/z + (nu^2/z^2 - 1) J
    """
    nu = _check_order(nu)
    arr = np.asarray(z, dtype=float)
    if np.any(arr <= 0.0):
        raise ValueError("bessel_j_dd requires z > 0")
    j = jv(nu, arr)
    jp = 0.5 * (jv(nu - 1.0, arr) - jv(nu + 1.0, arr))
    out = -jp / arr + (nu * nu / (arr * arr) - 1.0) * j
    return float(out) if np.isscalar(z) or arr.ndim == 0 else out


def mcmahon_seed(nu: float, k: int) -> float:
    """McMahon approximation for the k-th positive zero of J_nu."""
    a = (k + 0.5 * nu - 0.25) * math.pi
    mu = 4.0 * nu * nu
    # first correction term; enough to land within a fraction of pi
    return a - (mu - 1.0) / (8.0 * a)


@dataclass(frozen=True)
class BesselZeroTable:
    """Strictly increasing positive zeros gamma_1..gamma_K of J_nu."""

    nu: float
    zeros: np.ndarray = field(repr=False)

    def __post_init__(self):
        zeros = np.asarray(self.zeros, float)
        object.__setattr__(self, "zeros", zeros)
        if zeros.ndim != 1 or len(zeros) < 1:
            raise ValueError("zeros must be a non-empty 1-D array")
        if zeros[0] <= 0.0 or np.any(np.diff(zeros) <= 0.0):
            raise ValueError("zeros must be positive and strictly increasing")
        resid = np.abs(bessel_j(self.nu, zeros))
        scale = np.maximum(1.0, np.abs(bessel_j_prime(self.nu, zeros)))
        if np.any(resid > ZERO_TOL * scale):
            k = int(np.argmax(resid / scale)) + 1
            raise ValueError(f"zero k={k} has residual {resid[k-1]:.3e} above tolerance")

    def __len__(self) -> int:
        return len(self.zeros)

    def __getitem__(self, k: int) -> float:
        """1-based access: table[k] is gamma_k."""
        if not 1 <= k <= len(self.zeros):
            raise IndexError(f"zero index {k} out of range 1..{len(self.zeros)}")
        return float(self.zeros[k - 1])


def _refine_newton(nu: float, x0: float, lo: float, hi: float) -> float | None:
    x = x0
    for _ in range(60):
        f = jv(nu, x)
        fp = 0.5 * (jv(nu - 1.0, x) - jv(nu + 1.0, x))
        if fp == 0.0:
            return None
        step = f / fp
        x_new = x - step
        if not (lo < x_new < hi):
            return None
        if abs(step) <= 1e-15 * x:
            x = x_new
            break
        x = x_new
    # one polishing iteration
    f = jv(nu, x)
    fp = 0.5 * (jv(nu - 1.0, x) - jv(nu + 1.0, x))
    if fp != 0.0:
        x = x - f / fp
    return x if abs(jv(nu, x)) <= ZERO_TOL else None


def bessel_zeros(nu: float, count: int) -> BesselZeroTable:
    """First `count` positive zeros of J_nu, each refined to |J_nu| <= 1e-12."""
    nu = _check_order(nu)
    count = int(count)
    if count < 1:
        raise ValueError("count must be >= 1")
    zeros = np.empty(count)
    prev = 0.0
    for k in range(1, count + 1):
        seed = mcmahon_seed(nu, k)
        lo = max(prev * (1.0 + 1e-12) + 1e-9, seed - 0.5 * math.pi)
        hi = seed + 0.5 * math.pi
        x = _refine_newton(nu, max(seed, lo), lo, hi)
        if x is None or x <= prev:
            # bisection fallback: widen around the seed until a sign change
            lo_b, hi_b = lo, hi
            for _ in range(8):
                if jv(nu, lo_b) * jv(nu, hi_b) < 0.0:
                    break
                lo_b = max(prev + 1e-9, lo_b - 0.25 * math.pi)
                hi_b += 0.25 * math.pi
            else:
                raise ZeroBracketError(nu, k, "no sign change near McMahon seed")
            x = brentq(lambda t: jv(nu, t), lo_b, hi_b, xtol=1e-15, rtol=8.9e-16)
            f = jv(nu, x)
            fp = 0.5 * (jv(nu - 1.0, x) - jv(nu + 1.0, x))
            if fp != 0.0:
                x -= f / fp
        if abs(jv(nu, x)) > ZERO_TOL:
            raise ZeroBracketError(nu, k, f"residual {abs(jv(nu, x)):.3e} above tolerance")
        zeros[k - 1] = x
        prev = x
    return BesselZeroTable(nu=nu, zeros=zeros)
