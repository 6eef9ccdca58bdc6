"""Batch front end: parse a TOML problem file, solve, and emit artifacts.

Exit codes: 0 success, 1 check-suite failure, 2 resonance detected,
3 Mittag-Leffler non-convergence (arguments outside the summation
envelope), 4 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import numpy as np

from . import checks
from .fourier_bessel import SourceFunction, bessel_mode_profile, compliant_poly
from .fractional import TimeOperator
from .mittag_leffler import MLNonConvergenceError, MLParams, ml_multinomial
from .solver import ProblemSpec, ResonanceError, assemble, select_mode_count
from .specfun import bessel_zeros

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_RESONANCE = 2
EXIT_ML = 3
EXIT_CONFIG = 4

#: tolerance names accepted by --tol overrides
TOLERANCE_KEYS = ("ml_tol", "quad_tol", "margin_tol", "residual_tol")


class ConfigError(ValueError):
    pass


def _load_toml(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(p, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from None


def _take(section: dict, key: str, default=None, required: bool = False):
    if key in section:
        return section.pop(key)
    if required:
        raise ConfigError(f"missing required key {key!r}")
    return default


def _reject_unknown(section: dict, where: str) -> None:
    if section:
        raise ConfigError(f"unknown keys in [{where}]: {', '.join(sorted(section))}")


def _build_operator(cfg: dict) -> TimeOperator:
    sec = dict(cfg.get("operator") or {})
    alpha = _take(sec, "alpha", required=True)
    terms = []
    for item in _take(sec, "terms", default=[]) or []:
        item = dict(item)
        lam = _take(item, "coefficient", required=True)
        order = _take(item, "order", required=True)
        _reject_unknown(item, "operator.terms")
        terms.append((float(lam), float(order)))
    _reject_unknown(sec, "operator")
    try:
        return TimeOperator(alpha=float(alpha), terms=tuple(terms))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _named_x_profile(name: str, params: dict, nu: float, zeros_hint: int):
    if name == "compliant_poly":
        p = int(params.pop("p", 4))
        q = int(params.pop("q", 3))
        scale = float(params.pop("scale", 1.0))
        return compliant_poly(p, q, scale), p >= 4 and q >= 3
    if name == "bessel_mode":
        j = int(params.pop("index", 1))
        scale = float(params.pop("scale", 1.0))
        tab = bessel_zeros(nu, max(j, zeros_hint))
        return bessel_mode_profile(nu, tab, j, scale), False
    if name == "poly":
        coeffs = [float(c) for c in params.pop("coeffs")]
        def h(x):
            x = np.asarray(x, float)
            return sum(c * x**i for i, c in enumerate(coeffs))
        return h, False
    raise ConfigError(f"unknown x_profile {name!r}")


def _named_t_profile(name: str, params: dict):
    if name == "one":
        scale = float(params.pop("scale", 1.0))
        return lambda t: scale * np.ones_like(np.asarray(t, float))
    if name == "cosine":
        amp = float(params.pop("amplitude", 1.0))
        omega = float(params.pop("omega", 1.0))
        return lambda t: amp * np.cos(omega * np.asarray(t, float))
    if name == "poly":
        coeffs = [float(c) for c in params.pop("coeffs")]
        def g(t):
            t = np.asarray(t, float)
            return sum(c * t**i for i, c in enumerate(coeffs))
        return g
    raise ConfigError(f"unknown t_profile {name!r}")


def read_tabulated_source(path: str) -> SourceFunction:
    """Read a tensor-grid source from the delimited format used for output
    grids: header row, then rows "t,x,value" row-major over t then x."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"tabulated source file not found: {path}")
    data = np.genfromtxt(p, delimiter=",", skip_header=1)
    if data.ndim != 2 or data.shape[1] != 3:
        raise ConfigError("tabulated source must have three columns (t, x, value)")
    t_nodes = np.unique(data[:, 0])
    x_nodes = np.unique(data[:, 1])
    if len(t_nodes) * len(x_nodes) != len(data):
        raise ConfigError("tabulated source must cover a full tensor grid")
    order = np.lexsort((data[:, 1], data[:, 0]))
    samples = data[order, 2].reshape(len(t_nodes), len(x_nodes))
    return SourceFunction.tabulated(t_nodes, x_nodes, samples, label=str(path))


def _build_source(cfg: dict, nu: float, modes_hint: int, base: Path) -> SourceFunction:
    sec = dict(cfg.get("source") or {})
    kind = _take(sec, "kind", default="separable")
    if kind == "tabulated":
        path = _take(sec, "path", required=True)
        _reject_unknown(sec, "source")
        return read_tabulated_source(str(base / path))
    if kind != "separable":
        raise ConfigError(f"unknown source kind {kind!r}")
    xname = _take(sec, "x_profile", required=True)
    tname = _take(sec, "t_profile", required=True)
    xp = dict(_take(sec, "x_params", default={}) or {})
    tp = dict(_take(sec, "t_params", default={}) or {})
    compliant = bool(_take(sec, "theorem_compliant", default=False))
    _reject_unknown(sec, "source")
    h, auto_ok = _named_x_profile(str(xname), xp, nu, modes_hint)
    _reject_unknown(xp, "source.x_params")
    g = _named_t_profile(str(tname), tp)
    _reject_unknown(tp, "source.t_params")
    label = f"{tname}(t)*{xname}(x)"
    return SourceFunction.separable(g=g, h=h, theorem_compliant=compliant, label=label)


def build_problem(cfg: dict, base: Path, modes_override: int | None = None,
                  tol_overrides: dict | None = None) -> ProblemSpec:
    cfg = dict(cfg)
    prob = dict(cfg.get("problem") or {})
    nu = float(_take(prob, "nu", required=True))
    M = float(_take(prob, "M", required=True))
    T = float(_take(prob, "T", required=True))
    _reject_unknown(prob, "problem")
    op = _build_operator(cfg)
    grid = dict(cfg.get("grid") or {})
    n_t = int(_take(grid, "n_t", default=256))
    n_x = int(_take(grid, "n_x", default=65))
    x_min = float(_take(grid, "x_min", default=0.02))
    K = _take(grid, "modes", default=None)
    _reject_unknown(grid, "grid")
    if modes_override is not None:
        K = modes_override
    K = int(K) if K is not None else None
    chk = dict(cfg.get("checks") or {})
    verify_modes = bool(_take(chk, "verify_modes", default=True))
    pde_residual = bool(_take(chk, "pde_residual", default=False))
    _reject_unknown(chk, "checks")
    tols = dict(cfg.get("tolerances") or {})
    kw = {}
    for key in TOLERANCE_KEYS:
        val = _take(tols, key, default=None)
        if val is not None:
            kw[key] = float(val)
    _reject_unknown(tols, "tolerances")
    for key, val in (tol_overrides or {}).items():
        if key not in TOLERANCE_KEYS:
            raise ConfigError(f"unknown tolerance {key!r} (expected one of {TOLERANCE_KEYS})")
        kw[key] = float(val)
    source = _build_source(cfg, nu, K or 32, base)
    try:
        return ProblemSpec(nu=nu, op=op, M=M, T=T, source=source, K=K, n_t=n_t,
                           n_x=n_x, x_min=x_min, verify_modes=verify_modes,
                           pde_residual=pde_residual, **kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _parse_tol_flags(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--tol expects name=value, got {item!r}")
        name, val = item.split("=", 1)
        out[name.strip()] = float(val)
    return out


def write_solution_grid(path: Path, sol) -> None:
    """Delimited text, header "t,x,u", row-major over t then x, 17
    significant digits, LF line endings."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,x,u\n")
        for i, t in enumerate(sol.t_grid):
            row = sol.values[i]
            for x, u in zip(sol.x_grid, row):
                fh.write(f"{t:.17g},{x:.17g},{u:.17g}\n")


def _report_text(spec: ProblemSpec, sol) -> str:
    d = sol.diagnostics
    lines = []
    add = lines.append
    add("fracbessel solve report")
    add("=======================")
    add(f"nu = {spec.nu}, alpha = {spec.op.alpha}, lower terms = {list(spec.op.terms)}")
    add(f"M = {spec.M}, T = {spec.T}, modes = {len(sol.modes)}")
    add(f"t nodes = {len(sol.t_grid)}, x nodes = {len(sol.x_grid)}, x_min = {sol.x_grid[0]:.6g}")
    add("")
    add("non-resonance margins")
    add("---------------------")
    for r in sol.nonresonance.rows:
        forb = f"{r.forbidden_m:.9g}" if r.forbidden_m is not None else "none (U0(T)=0)"
        add(f"  k={r.k:3d}  U0(T)={r.u0_at_T: .9e}  margin={r.margin:.3e}  forbidden M={forb}")
    add("")
    add("field diagnostics")
    add("-----------------")
    add(f"  max |u|                  : {d['max_abs_u']:.6e}")
    add(f"  nonlocal defect (abs/rel): {d['nonlocal_defect']:.3e} / {d['nonlocal_defect_rel']:.3e}")
    add(f"  boundary defect (abs/rel): {d['boundary_defect']:.3e} / {d['boundary_defect_rel']:.3e}")
    for xp, v in d["flux_defect"].items():
        add(f"  flux defect |x u_x|({xp:g}) : {v:.3e}")
    add(f"  tail indicator (C1 proxy): {d['tail_indicator']:.3e} (decay exponent {d['tail_decay_exponent']})")
    add(f"  tail estimate            : {d['tail_estimate']:.3e}")
    if "initial_rate" in d:
        add(f"  |u_t(0,.)| (alpha > 1)   : {d['initial_rate']:.3e}")
    if "pde_residual" in d:
        pr = d["pde_residual"]
        add(f"  PDE residual (8x8 probe) : {pr['max_abs']:.3e} (scale {pr['scale']:.3e}, ratio {pr['ratio']:.3e})")
    if "mode_residuals" in d:
        add("")
        add("per-mode ODE residuals (L1 oracle, normalized)")
        add("----------------------------------------------")
        for row in d["mode_residuals"]:
            add(f"  k={row['k']:3d}  gamma={row['gamma']:10.4f}  residual={row['observed']:.3e}")
    add("")
    return "\n".join(lines) + "\n"


def _diag_json(sol) -> dict:
    d = dict(sol.diagnostics)
    d["flux_defect"] = {str(k): v for k, v in d["flux_defect"].items()}
    d["margins"] = [
        {"k": r.k, "u0_at_T": r.u0_at_T, "margin": r.margin, "forbidden_m": r.forbidden_m}
        for r in sol.nonresonance.rows]
    d["modes"] = [{"k": m.k, "gamma": m.gamma, "amplitude": m.A,
                   "U0_at_T": m.U0_at_T, "max_abs_U": float(np.abs(m.U_k.values).max())}
                  for m in sol.modes]
    return d


def cmd_solve(args) -> int:
    try:
        cfg = _load_toml(args.config)
        base = Path(args.config).resolve().parent
        spec = build_problem(cfg, base, modes_override=args.modes,
                             tol_overrides=_parse_tol_flags(args.tol))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        sol = assemble(spec, threads=args.threads)
    except ResonanceError as exc:
        print(f"resonance: {exc}", file=sys.stderr)
        report = out / "report.txt"
        with open(report, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("resonance detected\n")
            for r in exc.report.rows:
                if not r.passed:
                    forb = f"{r.forbidden_m:.9g}" if r.forbidden_m is not None else "none"
                    fh.write(f"  mode k={r.k}: margin {r.margin:.3e}, forbidden M = {forb}\n")
        return EXIT_RESONANCE
    except MLNonConvergenceError as exc:
        print(f"mittag-leffler non-convergence: {exc}", file=sys.stderr)
        return EXIT_ML
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_solution_grid(out / "solution.csv", sol)
    with open(out / "report.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_report_text(spec, sol))
    with open(out / "diagnostics.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_diag_json(sol), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out / 'solution.csv'}, report.txt, diagnostics.json")
    return EXIT_OK


def cmd_check(args) -> int:
    overrides: dict = {}
    seed = None
    if args.config:
        try:
            cfg = _load_toml(args.config)
            sec = dict(cfg.get("check_suites") or {})
            for name in list(sec):
                overrides[name] = dict(sec.pop(name))
            run = dict(cfg.get("run") or {})
            seed = run.get("seed")
            op_sec = cfg.get("operator")
            if op_sec is not None:
                _build_operator(cfg)  # validates term count and orders
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        for item in _parse_tol_flags(args.tol).items():
            name, val = item
            suite, _, kw = name.partition(".")
            overrides.setdefault(suite, {})[kw or "tol"] = val
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        seed = args.seed
    if args.suite:
        unknown = [s for s in args.suite if s not in checks.ALL_SUITES]
        if unknown:
            print(f"config error: unknown suite(s): {', '.join(unknown)}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        results = checks.run_all(overrides, seed=seed, only=args.suite)
    except TypeError as exc:
        print(f"config error: bad suite override: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    width = max(len(r.name) for r in results)
    failed = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  observed {r.observed: .6e}  tolerance {r.tolerance: .6e}"
              f"  [{r.seconds:6.2f}s]  {status}  {r.detail}")
        failed += 0 if r.passed else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_CHECK_FAILED


def cmd_zeros(args) -> int:
    try:
        tab = bessel_zeros(args.nu, args.count)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    lines = ["k,gamma"]
    lines += [f"{k},{tab[k]:.17g}" for k in range(1, args.count + 1)]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_ml(args) -> int:
    try:
        exps = tuple(float(v) for v in args.exponents.split(","))
        zs = tuple(float(v) for v in args.args.split(","))
        params = MLParams(exponents=exps, offset=args.offset, args=zs)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        val = ml_multinomial(params, tol=args.ml_tol)
    except MLNonConvergenceError as exc:
        print(f"mittag-leffler non-convergence: {exc}", file=sys.stderr)
        return EXIT_ML
    print(f"value         = {val.value:.17g}")
    print(f"layers_used   = {val.layers_used}")
    print(f"tail_estimate = {val.tail_estimate:.3e}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracbessel",
                                     description="Fourier-Bessel solver for the nonlocal "
                                                 "multi-term time-fractional problem")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a problem file and write grid + diagnostics")
    p.add_argument("--config", required=True, help="TOML problem file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--modes", type=int, default=None, help="override mode count K")
    p.add_argument("--threads", type=int, default=1, help="parallel mode solves")
    p.add_argument("--tol", action="append", metavar="NAME=VALUE",
                   help=f"override a tolerance ({', '.join(TOLERANCE_KEYS)})")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("check", help="run the property/invariant suites")
    p.add_argument("--config", default=None, help="optional TOML file with [check_suites] overrides")
    p.add_argument("--seed", type=int, default=None, help="seed for randomized sweeps")
    p.add_argument("--suite", action="append", default=None,
                   help="run only the named suite(s); repeatable")
    p.add_argument("--tol", action="append", metavar="SUITE.KW=VALUE",
                   help="override a suite tolerance, e.g. ml_reduction.tol=1e-2")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("zeros", help="dump a Bessel zero table as delimited text")
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", default=None, help="output file (stdout if omitted)")
    p.set_defaults(fn=cmd_zeros)

    p = sub.add_parser("ml", help="evaluate one multinomial Mittag-Leffler value")
    p.add_argument("--exponents", required=True, help="comma-separated a_1..a_m")
    p.add_argument("--offset", type=float, required=True, help="offset b")
    p.add_argument("--args", required=True, help="comma-separated z_1..z_m")
    p.add_argument("--ml-tol", type=float, default=1e-13)
    p.set_defaults(fn=cmd_ml)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
