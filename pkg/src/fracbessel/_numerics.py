"""Shared numerical utilities: compensated sums, quadrature node caches,
and a piecewise-Chebyshev interpolant used for kernel tabulation."""

from __future__ import annotations

import threading

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi


def neumaier_sum(values) -> float:
    """Compensated (Neumaier) sum of a 1-D sequence, in the given order."""
    s = 0.0
    c = 0.0
    for v in values:
        v = float(v)
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return s + c


class NeumaierAccumulator:
    """Elementwise compensated accumulation over numpy arrays."""

    def __init__(self, shape):
        self.s = np.zeros(shape)
        self.c = np.zeros(shape)

    def add(self, v: np.ndarray) -> None:
        t = self.s + v
        big = np.abs(self.s) >= np.abs(v)
        self.c += np.where(big, (self.s - t) + v, (v - t) + self.s)
        self.s = t

    def total(self) -> np.ndarray:
        return self.s + self.c


_quad_lock = threading.Lock()
_gj_cache: dict = {}
_gl_cache: dict = {}


def gauss_jacobi_01(n: int, beta: float):
    """Nodes/weights for int_0^1 s^beta f(s) ds (weight absorbed).

    Returns (s, w) with s in (0,1); integrals on [0,t] with weight z^beta
    follow by z = t*s and a factor t**(beta+1).
    """
    key = (n, round(beta, 14))
    with _quad_lock:
        got = _gj_cache.get(key)
        if got is None:
            u, w = roots_jacobi(n, 0.0, beta)
            s = (1.0 + u) / 2.0
            # (1+u)^beta du = (2s)^beta 2 ds
            w = w / 2.0 ** (beta + 1.0)
            got = (s, w)
            _gj_cache[key] = got
        return got


def gauss_legendre(n: int):
    with _quad_lock:
        got = _gl_cache.get(n)
        if got is None:
            got = leggauss(n)
            _gl_cache[n] = got
        return got


def composite_legendre_01(panels: int, order: int = 8):
    """Composite Gauss-Legendre nodes/weights on (0,1)."""
    x, w = gauss_legendre(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    mid = (edges[:-1] + edges[1:]) / 2.0
    half = np.diff(edges) / 2.0
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    return nodes, wts


def _cheb_lobatto(n: int):
    """Chebyshev-Lobatto points on [-1,1] ascending with barycentric weights."""
    j = np.arange(n)
    x = -np.cos(np.pi * j / (n - 1))
    w = np.ones(n)
    w[1::2] = -1.0
    w[0] *= 0.5
    w[-1] *= 0.5
    return x, w


class PiecewiseChebyshev:
    """Barycentric Chebyshev-Lobatto interpolant on contiguous panels.

    Exact at the panel nodes (panel boundaries included), vectorized over
    query points.  Panels and per-panel degree are fixed at construction.
    """

    def __init__(self, breaks: np.ndarray, npts: int, fvals: np.ndarray):
        breaks = np.asarray(breaks, float)
        if breaks.ndim != 1 or len(breaks) < 2 or np.any(np.diff(breaks) <= 0):
            raise ValueError("breaks must be strictly increasing")
        self.breaks = breaks
        self.npts = int(npts)
        self.xi, self.bw = _cheb_lobatto(self.npts)
        fvals = np.asarray(fvals, float)
        if fvals.shape != (len(breaks) - 1, self.npts):
            raise ValueError("fvals shape mismatch")
        self.fvals = fvals

    @classmethod
    def build(cls, breaks, npts, func):
        """Evaluate func on the union of panel nodes (deduplicated ends)."""
        breaks = np.asarray(breaks, float)
        xi, _ = _cheb_lobatto(npts)
        a = breaks[:-1][:, None]
        b = breaks[1:][:, None]
        nodes = (a + b) / 2.0 + (b - a) / 2.0 * xi[None, :]
        # shared panel endpoints: evaluate once
        flat = nodes.ravel()
        uniq, inv = np.unique(flat, return_inverse=True)
        vals = np.asarray(func(uniq), float)
        fvals = vals[inv].reshape(nodes.shape)
        return cls(breaks, npts, fvals), uniq

    @property
    def nodes(self) -> np.ndarray:
        a = self.breaks[:-1][:, None]
        b = self.breaks[1:][:, None]
        return ((a + b) / 2.0 + (b - a) / 2.0 * self.xi[None, :]).ravel()

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        shape = x.shape
        xf = x.ravel()
        if xf.size and (xf.min() < self.breaks[0] - 1e-12 or xf.max() > self.breaks[-1] + 1e-12):
            raise ValueError("query outside interpolation range")
        xf = np.clip(xf, self.breaks[0], self.breaks[-1])
        idx = np.clip(np.searchsorted(self.breaks, xf, side="right") - 1, 0, len(self.breaks) - 2)
        a = self.breaks[idx]
        b = self.breaks[idx + 1]
        t = 2.0 * (xf - a) / (b - a) - 1.0
        d = t[:, None] - self.xi[None, :]
        exact = np.isclose(d, 0.0, atol=1e-15)
        d = np.where(exact, 1.0, d)
        num = (self.bw[None, :] / d * self.fvals[idx, :]).sum(axis=1)
        den = (self.bw[None, :] / d).sum(axis=1)
        out = num / den
        hit = exact.any(axis=1)
        if hit.any():
            which = exact[hit].argmax(axis=1)
            out[hit] = self.fvals[idx[hit], which]
        return out.reshape(shape)


def fit_power_law(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares fit log|y| = log c + p log x; returns (p, c)."""
    x = np.asarray(x, float)
    y = np.abs(np.asarray(y, float))
    keep = y > 0
    lx = np.log(x[keep])
    ly = np.log(y[keep])
    p, logc = np.polyfit(lx, ly, 1)
    return float(p), float(np.exp(logc))
