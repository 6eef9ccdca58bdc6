"""Explicit Fourier-Bessel solver for a multi-term time-fractional equation
with a Bessel operator in space and a nonlocal initial condition."""

from .specfun import (
    BesselZeroTable,
    ZeroBracketError,
    bessel_j,
    bessel_j_dd,
    bessel_j_prime,
    bessel_zeros,
    log_gamma,
)
from .mittag_leffler import (
    MLNonConvergenceError,
    MLParams,
    MLValue,
    ml_at_powers,
    ml_multinomial,
    ml_two_param,
    u0_bar,
)
from .fractional import (
    SampledFunction,
    TimeOperator,
    apply_L,
    apply_bessel,
    caputo,
)
from .fourier_bessel import (
    ModeCoefficients,
    SourceFunction,
    fb_coefficient,
    fb_expand,
    fb_reconstruct,
)
from .solver import (
    Mode,
    NonResonanceReport,
    ProblemSpec,
    ResonanceError,
    SolutionGrid,
    assemble,
    mode_convolution,
    nonresonance_check,
    solve_mode,
    verify_mode,
)

__version__ = "0.1.0"

__all__ = [
    "BesselZeroTable",
    "ZeroBracketError",
    "bessel_j",
    "bessel_j_dd",
    "bessel_j_prime",
    "bessel_zeros",
    "log_gamma",
    "MLNonConvergenceError",
    "MLParams",
    "MLValue",
    "ml_at_powers",
    "ml_multinomial",
    "ml_two_param",
    "u0_bar",
    "SampledFunction",
    "TimeOperator",
    "apply_L",
    "apply_bessel",
    "caputo",
    "ModeCoefficients",
    "SourceFunction",
    "fb_coefficient",
    "fb_expand",
    "fb_reconstruct",
    "Mode",
    "NonResonanceReport",
    "ProblemSpec",
    "ResonanceError",
    "SolutionGrid",
    "assemble",
    "mode_convolution",
    "nonresonance_check",
    "solve_mode",
    "verify_mode",
    "__version__",
]
