"""Numerical Caputo derivatives and the two operators of the equation.

These discretizations are verification oracles only: the solver itself is
spectral/analytic.  The Caputo derivative of order beta in (0,1) uses the
classical L1 scheme (piecewise-linear data, exact kernel moments); for
beta in (1,2) the identity D^beta g = D^(beta-1) g' reduces it to an L1
application on a finite-difference derivative; integer orders fall back to
standard central differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .specfun import log_gamma

MAX_LOWER_TERMS = 4


@dataclass(frozen=True)
class TimeOperator:
    """L(g) = D^alpha g - sum_i lambda_i D^(alpha_i) g (Caputo derivatives).

    Orders satisfy 0 < alpha_i <= 1 and alpha_i < alpha <= 2 (strict: equal
    leading/lower orders would give the mode functions a degenerate zero
    exponent); at most four lower-order terms.
    """

    alpha: float
    terms: tuple[tuple[float, float], ...] = ()  # (lambda_i, alpha_i)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((float(l), float(a)) for l, a in self.terms))
        if not 0.0 < self.alpha <= 2.0:
            raise ValueError(f"leading order must be in (0, 2], got {self.alpha}")
        if len(self.terms) > MAX_LOWER_TERMS:
            raise ValueError(f"at most {MAX_LOWER_TERMS} lower-order terms supported, got {len(self.terms)}")
        for lam, ai in self.terms:
            if not 0.0 < ai <= 1.0:
                raise ValueError(f"lower order must be in (0, 1], got {ai}")
            if not ai < self.alpha:
                raise ValueError(f"lower order {ai} must be strictly below leading order {self.alpha}")
            if not np.isfinite(lam):
                raise ValueError("coefficients must be finite")

    @property
    def n(self) -> int:
        return len(self.terms)

    def key(self) -> tuple:
        return (self.alpha,) + self.terms


@dataclass(frozen=True)
class SampledFunction:
    """Real samples on a uniform grid 0 = t_0 < ... < t_N = T."""

    t_grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        t = np.asarray(self.t_grid, float)
        v = np.asarray(self.values, float)
        object.__setattr__(self, "t_grid", t)
        object.__setattr__(self, "values", v)
        if t.ndim != 1 or v.shape != t.shape:
            raise ValueError("t_grid and values must be matching 1-D arrays")
        if len(t) < 9:
            raise ValueError("need at least 8 intervals")
        dt = np.diff(t)
        if t[0] != 0.0 or np.any(dt <= 0.0):
            raise ValueError("grid must start at 0 and increase")
        if not np.allclose(dt, dt[0], rtol=1e-10, atol=0.0):
            raise ValueError("grid must be uniform")

    @property
    def dt(self) -> float:
        return float(self.t_grid[1] - self.t_grid[0])

    @property
    def n_intervals(self) -> int:
        return len(self.t_grid) - 1


def _l1_weights(beta: float, n: int) -> np.ndarray:
    i = np.arange(n, dtype=float)
    return (i + 1.0) ** (1.0 - beta) - i ** (1.0 - beta)


def _l1_fractional(values: np.ndarray, dt: float, beta: float) -> np.ndarray:
    """L1 scheme for beta in (0,1): exact kernel integration of the
    piecewise-linear interpolant."""
    n = len(values) - 1
    w = _l1_weights(beta, n)
    dg = np.diff(values)
    conv = np.convolve(dg, w)[:n]
    out = np.zeros(n + 1)
    out[1:] = conv * dt ** (-beta) / math.exp(log_gamma(2.0 - beta))
    return out


def _derivative(values: np.ndarray, dt: float) -> np.ndarray:
    """Second-order first derivative: central interior, one-sided ends."""
    g = values
    out = np.empty_like(g)
    out[1:-1] = (g[2:] - g[:-2]) / (2.0 * dt)
    out[0] = (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * dt)
    out[-1] = (3.0 * g[-1] - 4.0 * g[-2] + g[-3]) / (2.0 * dt)
    return out


def _second_derivative(values: np.ndarray, dt: float) -> np.ndarray:
    g = values
    out = np.empty_like(g)
    out[1:-1] = (g[2:] - 2.0 * g[1:-1] + g[:-2]) / dt**2
    out[0] = (2.0 * g[0] - 5.0 * g[1] + 4.0 * g[2] - g[3]) / dt**2
    out[-1] = (2.0 * g[-1] - 5.0 * g[-2] + 4.0 * g[-3] - g[-4]) / dt**2
    return out


def caputo(g: SampledFunction, beta: float) -> SampledFunction:
    """Caputo derivative of order beta in (0, 2] on the grid of g.

    beta = 0 would be the identity branch of the definition; it is accepted
    as a pass-through.  Values at t=0 are 0 for fractional orders (empty
    integration interval).
    """
    beta = float(beta)
    if beta < 0.0 or beta > 2.0:
        raise ValueError(f"order must be in (0, 2], got {beta}")
    v = g.values
    dt = g.dt
    if beta == 0.0:
        out = v.copy()
    elif beta == 1.0:
        out = _derivative(v, dt)
    elif beta == 2.0:
        out = _second_derivative(v, dt)
    elif beta < 1.0:
        out = _l1_fractional(v, dt, beta)
    else:
        if g.n_intervals < 16:
            raise ValueError("orders in (1,2) need at least 16 intervals")
        out = _l1_fractional(_derivative(v, dt), dt, beta - 1.0)
    return SampledFunction(t_grid=g.t_grid, values=out)


def apply_L(op: TimeOperator, g: SampledFunction) -> SampledFunction:
    """L(g) = D^alpha g - sum_i lambda_i D^(alpha_i) g, nodewise."""
    out = caputo(g, op.alpha).values.copy()
    for lam, ai in op.terms:
        out -= lam * caputo(g, ai).values
    return SampledFunction(t_grid=g.t_grid, values=out)


def apply_bessel(values: np.ndarray, x_grid: np.ndarray, nu: float) -> np.ndarray:
    """B_nu(u) = u_xx + u_x/x - nu^2 u/x^2 by second-order differences.

    Residual oracle only; one-sided stencils at both ends.  Requires a
    uniform grid on [x_min, 1] with x_min >= 1e-3 and at least 32 nodes.
    """
    x = np.asarray(x_grid, float)
    u = np.asarray(values, float)
    if x.ndim != 1 or u.shape != x.shape:
        raise ValueError("values and x_grid must be matching 1-D arrays")
    if len(x) < 32:
        raise ValueError("grid too coarse: need at least 32 nodes")
    if x[0] < 1e-3:
        raise ValueError("x_min must be >= 1e-3 (operator is singular at x=0)")
    dx = np.diff(x)
    if np.any(dx <= 0.0) or not np.allclose(dx, dx[0], rtol=1e-10, atol=0.0):
        raise ValueError("x_grid must be uniform and increasing")
    h = float(dx[0])
    ux = _derivative(u, h)
    uxx = _second_derivative(u, h)
    return uxx + ux / x - nu * nu * u / (x * x)
