"""Property suites: the oracle-backed invariants the artifact must satisfy.

Each suite returns CheckResult rows with the observed value next to its
tolerance; the CLI `check` subcommand prints them and the acceptance tests
assert them.  Random draws are seeded and redraw (with a bounded budget)
when a draw lands outside the direct-summation envelope.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from ._numerics import fit_power_law
from .fourier_bessel import compliant_poly, fb_expand, quadrature_nodes, SourceFunction
from .fractional import SampledFunction, TimeOperator
from .mittag_leffler import (MLNonConvergenceError, MLParams, check_feasible,
                             ml_multinomial, ml_two_param)
from .solver import solve_mode, verify_mode
from .specfun import bessel_j, bessel_j_prime, bessel_zeros, mcmahon_seed


@dataclass(frozen=True)
class CheckResult:
    name: str
    observed: float
    tolerance: float
    passed: bool
    detail: str
    seconds: float


def _result(name, observed, tolerance, detail="", t0=None, larger_is_better=False):
    ok = observed >= tolerance if larger_is_better else observed <= tolerance
    return CheckResult(name=name, observed=float(observed), tolerance=float(tolerance),
                       passed=bool(ok), detail=detail,
                       seconds=time.perf_counter() - t0 if t0 else 0.0)


def ml_reduction_suite(tol: float = 1e-12) -> list[CheckResult]:
    """m=1 multinomial vs the independently coded two-parameter series."""
    t0 = time.perf_counter()
    worst = 0.0
    worst_at = ""
    for a in (0.3, 0.8, 1.0, 1.7):
        for b in (0.5, 1.0, 2.3):
            for z in (-10.0, -3.0, -1.0, 0.0, 1.0, 3.0):
                v1 = ml_multinomial(MLParams((a,), b, (z,))).value
                v2 = ml_two_param(a, b, z)
                rel = abs(v1 - v2) / max(abs(v2), 1e-300)
                if rel > worst:
                    worst = rel
                    worst_at = f"a={a}, b={b}, z={z}"
    return [_result("ml_reduction_m1", worst, tol, worst_at, t0)]


def ml_classical_suite(tol_exp: float = 1e-12, tol_cos: float = 1e-10) -> list[CheckResult]:
    """E_(1),1(z) = exp(z) and E_(2),1(-g^2 t^2) = cos(g t)."""
    t0 = time.perf_counter()
    worst = 0.0
    for z in np.linspace(-5.0, 5.0, 21):
        got = ml_multinomial(MLParams((1.0,), 1.0, (float(z),))).value
        worst = max(worst, abs(got - math.exp(z)) / math.exp(z))
    r1 = _result("ml_exp_limit", worst, tol_exp, "z in [-5, 5]", t0)
    t0 = time.perf_counter()
    worst = 0.0
    for g in (1.0, 5.0, 20.0):
        for t in np.linspace(0.0, 2.0, 9):
            got = ml_multinomial(MLParams((2.0,), 1.0, (-(g * float(t)) ** 2,))).value
            worst = max(worst, abs(got - math.cos(g * t)))
    r2 = _result("ml_cos_limit", worst, tol_cos, "g in {1,5,20}, t in [0,2]", t0)
    return [r1, r2]


def _draw_operator(rng: np.random.Generator, n_max: int = 3) -> tuple[TimeOperator, float, float]:
    """One admissible (operator, t, gamma^2) draw inside the summation envelope."""
    for _ in range(200):
        n = int(rng.integers(0, n_max + 1))
        ais = np.sort(rng.uniform(0.08, 1.0, size=n))
        amax = float(ais[-1]) if n else 0.05
        alpha = float(rng.uniform(min(amax + 0.05, 1.95), 2.0))
        lams = rng.uniform(-1.0, 1.0, size=n)
        t = float(rng.uniform(0.1, 2.0))
        gsq = float(10.0 ** rng.uniform(math.log10(0.5), 2.0))
        op = TimeOperator(alpha=alpha, terms=tuple((float(l), float(a)) for l, a in zip(lams, ais)))
        exps = tuple(alpha - a for _, a in op.terms) + (alpha,)
        coeffs = tuple(l for l, _ in op.terms) + (-gsq,)
        absu = [abs(c) * t**q for c, q in zip(coeffs, exps)]
        try:
            check_feasible(exps, absu, 1e-12)
        except MLNonConvergenceError:
            continue
        # composition budget: keep the layered demand modest for m up to 4
        from .mittag_leffler import layers_estimate
        if layers_estimate(exps, absu) > 220 and len(exps) >= 3:
            continue
        return op, t, gsq
    raise RuntimeError("could not draw an admissible operator within budget")


def liu_identity_suite(n_draws: int = 50, seed: int = 20260809, tol: float = 1e-10) -> list[CheckResult]:
    """1 + sum_j lam_j t^(a-a_j) E_{(..),1+a-a_j}(..) = E_{(..),1}(..) with the
    eigenvalue term folded in as lam_{n+1} = -gamma^2, alpha_{n+1} = 0."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_at = ""
    for _ in range(n_draws):
        op, t, gsq = _draw_operator(rng)
        alpha = op.alpha
        exps = tuple(alpha - a for _, a in op.terms) + (alpha,)
        lams = tuple(l for l, _ in op.terms) + (-gsq,)
        als = tuple(a for _, a in op.terms) + (0.0,)
        args = tuple(l * t ** (alpha - a) for l, a in zip(lams, als))
        lhs = 1.0
        for j in range(len(lams)):
            ev = ml_multinomial(MLParams(exps, 1.0 + alpha - als[j], args)).value
            lhs += lams[j] * t ** (alpha - als[j]) * ev
        rhs = ml_multinomial(MLParams(exps, 1.0, args)).value
        rel = abs(lhs - rhs) / max(1.0, abs(rhs))
        if rel > worst:
            worst = rel
            worst_at = f"alpha={alpha:.3f}, n={op.n}, t={t:.3f}, gsq={gsq:.3f}"
    return [_result("liu_identity", worst, tol, worst_at, t0)]


def bessel_zero_suite(count: int = 20) -> list[CheckResult]:
    t0 = time.perf_counter()
    half = bessel_zeros(0.5, count)
    dev = max(abs(half[k] - k * math.pi) for k in range(1, count + 1))
    r1 = _result("zeros_half_integer_kpi", dev, 1e-12, f"k <= {count}", t0)
    t0 = time.perf_counter()
    worst = 0.0
    for nu in (0.0, 0.5, 1.0, 2.5):
        tab = bessel_zeros(nu, count)
        worst = max(worst, float(np.abs(bessel_j(nu, tab.zeros)).max()))
    r2 = _result("zeros_residual", worst, 1e-12, "nu in {0, 0.5, 1, 2.5}", t0)
    t0 = time.perf_counter()
    worst_growth = 0.0
    for nu in (0.0, 1.0, 2.5):
        tab = bessel_zeros(nu, count)
        gaps = np.array([abs(tab[k] - (k * math.pi + nu * math.pi / 2 - math.pi / 4))
                         for k in range(5, count + 1)])
        worst_growth = max(worst_growth, float(np.diff(gaps).max()))
    r3 = _result("zeros_asymptotic_gap_decreasing", worst_growth, 1e-14,
                 "gap growth for k >= 5 (<= 0 means decreasing)", t0)
    return [r1, r2, r3]


def orthogonality_suite(size: int = 12, tol: float = 1e-8) -> list[CheckResult]:
    t0 = time.perf_counter()
    worst = 0.0
    for nu in (0.5, 1.0, 2.5):
        tab = bessel_zeros(nu, size)
        x, w = quadrature_nodes(tab[size])
        jmat = bessel_j(nu, tab.zeros[:, None] * x[None, :])
        norms = 2.0 / bessel_j(nu + 1.0, tab.zeros) ** 2
        gram = norms[:, None] * (jmat * (w * x)[None, :]) @ jmat.T
        worst = max(worst, float(np.abs(gram - np.eye(size)).max()))
    return [_result("orthogonality_gram", worst, tol, f"{size}x{size}, nu in {{0.5,1,2.5}}", t0)]


def mode_residual_suite(order_floor: float = 1.5, frac_tol: float = 1e-2) -> list[CheckResult]:
    """Closed-form wave case refinement order, plus a fractional case."""
    t0 = time.perf_counter()
    op = TimeOperator(alpha=2.0)
    gamma = bessel_zeros(1.0, 1)[1]
    residuals = []
    for n in (256, 512, 1024):
        ts = np.linspace(0.0, 1.0, n + 1)
        fk = SampledFunction(t_grid=ts, values=np.ones(n + 1))
        mode = solve_mode(op, gamma, fk, M=0.0, T=1.0)
        residuals.append(verify_mode(op, mode, tol=1.0).observed)
    orders = [math.log2(residuals[i] / residuals[i + 1]) for i in range(2)]
    r1 = _result("mode_residual_order_alpha2", min(orders), order_floor,
                 f"residuals {['%.2e' % r for r in residuals]}", t0, larger_is_better=True)
    t0 = time.perf_counter()
    op2 = TimeOperator(alpha=0.8, terms=((-0.5, 0.4),))
    ts = np.linspace(0.0, 1.0, 1025)
    fk = SampledFunction(t_grid=ts, values=np.cos(2.1 * ts))
    mode = solve_mode(op2, gamma, fk, M=0.5, T=1.0)
    rep = verify_mode(op2, mode, tol=frac_tol)
    r2 = _result("mode_residual_fractional", rep.observed, frac_tol,
                 "alpha=0.8, n=1, M=0.5, N=1024", t0)
    return [r1, r2]


def decay_suite(f_exp_tol: float = -3.3, u_exp_tol: float = -1.3) -> list[CheckResult]:
    """Fitted decay exponents of |f_k| and max_t |U_k| vs gamma_k for a
    theorem-compliant source (fourth-order vanishing at 0, third at 1)."""
    t0 = time.perf_counter()
    nu, K, T = 1.0, 32, 0.25
    op = TimeOperator(alpha=1.7, terms=((-0.4, 0.8),))
    zeros = bessel_zeros(nu, K)
    src = SourceFunction.separable(g=lambda t: np.cos(1.3 * np.asarray(t)),
                                   h=compliant_poly(), theorem_compliant=True)
    ts = np.linspace(0.0, T, 129)
    coeffs = fb_expand(src, nu, zeros, ts)
    fmax = np.abs(coeffs.coeffs).max(axis=1)
    ks = np.arange(5, K + 1)
    p_f, _ = fit_power_law(zeros.zeros[4:], fmax[4:])
    r1 = _result("coefficient_decay_exponent", p_f, f_exp_tol,
                 "s=2 conditions predict -3.5", t0)
    t0 = time.perf_counter()
    umax = []
    for k in range(1, K + 1):
        fk = SampledFunction(t_grid=ts, values=coeffs.mode(k))
        mode = solve_mode(op, zeros[k], fk, M=0.3, T=T)
        umax.append(np.abs(mode.U_k.values).max())
    p_u, _ = fit_power_law(zeros.zeros[4:], np.array(umax)[4:])
    r2 = _result("mode_decay_exponent", p_u, u_exp_tol,
                 "series bound predicts -1.5", t0)
    return [r1, r2]


ALL_SUITES = {
    "ml_reduction": ml_reduction_suite,
    "ml_classical": ml_classical_suite,
    "liu_identity": liu_identity_suite,
    "bessel_zeros": bessel_zero_suite,
    "orthogonality": orthogonality_suite,
    "mode_residual": mode_residual_suite,
    "decay": decay_suite,
}


def run_all(overrides: dict | None = None, seed: int | None = None,
            only: list[str] | None = None) -> list[CheckResult]:
    """Run the suites; overrides map suite kwargs like {'ml_reduction': {'tol': 1e-2}}."""
    overrides = overrides or {}
    results: list[CheckResult] = []
    for name, fn in ALL_SUITES.items():
        if only and name not in only:
            continue
        kwargs = dict(overrides.get(name, {}))
        if seed is not None and name == "liu_identity":
            kwargs.setdefault("seed", seed)
        results.extend(fn(**kwargs))
    return results
