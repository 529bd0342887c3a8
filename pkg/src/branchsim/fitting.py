"""Damped-sinusoid fits of probability traces and the EID power law.

The fitted model is ``(1 - exp(-gamma t) cos(2 omega t)) / 2`` with the
Rabi frequency held at the value used to generate the trace. ``gamma`` is
the only free parameter unless the optional flags are set.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import BranchSimError, DomainError, UnconvergedFitError
from .numerics import minimize_scalar
from .rabi import ProbabilityTrace, RabiParams, freq_ladder, indist_curve

__all__ = [
    "FitWindow",
    "DampingFit",
    "EidResult",
    "MIN_FIT_SAMPLES",
    "DEFAULT_WINDOW_PERIODS",
    "model_damped",
    "fit_gamma",
    "fit_exponent",
    "default_window",
    "eid_sweep",
]

MIN_FIT_SAMPLES = 8
DEFAULT_WINDOW_PERIODS = 4
_REL_TOL = 1e-9


@dataclass(frozen=True)
class FitWindow:
    t_min: float
    t_max: float

    def __post_init__(self):
        if not 0.0 <= self.t_min < self.t_max:
            raise DomainError(f"need 0 <= t_min < t_max, got [{self.t_min}, {self.t_max}]")

    def as_dict(self) -> dict[str, float]:
        return {"t_min": self.t_min, "t_max": self.t_max}


@dataclass(frozen=True)
class DampingFit:
    """Result of :func:`fit_gamma`.

    ``converged`` is False when the minimizer sits on the upper bound of the
    search interval. ``amplitude`` and ``offset`` stay at 1/2 unless they
    were floated.
    """

    gamma: float
    omega: float
    rms: float
    window: FitWindow
    converged: bool
    gamma_hi: float
    amplitude: float = 0.5
    offset: float = 0.5

    @property
    def gamma_over_omega(self) -> float:
        return self.gamma / self.omega


@dataclass(frozen=True)
class EidResult:
    """Per-level damping factors, their ratios to level 0 and the fitted exponent."""

    levels: list[int]
    omegas: list[float]
    gammas: list[float]
    ratios: list[float]
    exponent: float
    exponent_stderr: float
    fits: list[DampingFit] = field(default_factory=list, repr=False)


def model_damped(omega: float, gamma: float, t):
    """``(1 - exp(-gamma t) cos(2 omega t)) / 2``."""
    t = np.asarray(t, dtype=np.float64)
    return 0.5 * (1.0 - np.exp(-gamma * t) * np.cos(2.0 * omega * t)) + 0.0


def _mse_fixed(t, p, omega):
    c = np.cos(2.0 * omega * t)

    def mse(gamma):
        r = p - 0.5 * (1.0 - np.exp(-gamma * t) * c)
        return float(np.mean(r * r))

    return mse


def _mse_free(t, p, omega, out=None):
    c = np.cos(2.0 * omega * t)
    ones = np.ones_like(t)

    def mse(gamma):
        # offset and amplitude enter linearly; solve them out for each gamma
        basis = np.column_stack([ones, -np.exp(-gamma * t) * c])
        coef, *_ = np.linalg.lstsq(basis, p, rcond=None)
        r = p - basis @ coef
        if out is not None:
            out[gamma] = coef
        return float(np.mean(r * r))

    return mse


def fit_gamma(
    trace: ProbabilityTrace,
    omega: float,
    window: FitWindow,
    gamma_hi: float,
    *,
    free_amplitude: bool = False,
    fit_omega: bool = False,
    omega_span: float = 0.05,
) -> DampingFit:
    """Least-squares damping factor of a trace over ``[0, gamma_hi]``.

    Parameters
    ----------
    trace : ProbabilityTrace
        Samples to fit; only those inside ``window`` are used.
    omega : float
        Rabi frequency of the model. Held fixed unless ``fit_omega``.
    window : FitWindow
        Time range of the fit.
    gamma_hi : float
        Upper end of the search interval. A minimizer on this bound is
        reported with ``converged=False``.
    free_amplitude : bool
        Float the offset and amplitude instead of holding both at 1/2.
    fit_omega : bool
        Also search omega within ``omega * (1 +/- omega_span)``.

    Returns
    -------
    DampingFit
    """
    if not gamma_hi > 0:
        raise DomainError(f"gamma_hi must be positive, got {gamma_hi}")
    if not omega > 0:
        raise DomainError(f"omega must be positive, got {omega}")
    sel = (trace.t >= window.t_min) & (trace.t <= window.t_max)
    t, p = trace.t[sel], trace.p[sel]
    if t.size < MIN_FIT_SAMPLES:
        raise DomainError(
            f"{t.size} samples inside the fit window, need at least {MIN_FIT_SAMPLES}"
        )
    tol = _REL_TOL * gamma_hi

    def solve(om):
        coefs = {}
        mse = _mse_free(t, p, om, coefs) if free_amplitude else _mse_fixed(t, p, om)
        g = minimize_scalar(mse, 0.0, gamma_hi, tol)
        err = mse(g)
        amp, off = (coefs[g][1], coefs[g][0]) if free_amplitude else (0.5, 0.5)
        return g, err, amp, off

    if fit_omega:
        om = minimize_scalar(lambda w: solve(w)[1], omega * (1.0 - omega_span),
                             omega * (1.0 + omega_span), _REL_TOL * omega)
    else:
        om = omega
    gamma, err, amp, off = solve(om)
    return DampingFit(
        gamma=gamma,
        omega=om,
        rms=math.sqrt(err),
        window=window,
        converged=gamma < gamma_hi * (1.0 - 1e-6),
        gamma_hi=gamma_hi,
        amplitude=amp,
        offset=off,
    )


def fit_exponent(levels, gammas) -> tuple[float, float]:
    """Power-law exponent of ``gamma_n / gamma_0`` against ``1 + n``.

    Ordinary least squares of ``log(gamma_n / gamma_0)`` on ``log(1 + n)``
    through the origin. The standard error counts only the levels above 0,
    since level 0 is fit exactly by construction. Undefined results are NaN
    with a warning.
    """
    levels = [int(n) for n in levels]
    gammas = [float(g) for g in gammas]
    if len(levels) != len(gammas):
        raise DomainError("levels and gammas differ in length")
    if 0 not in levels:
        raise DomainError("levels must include 0")
    if any(not g > 0 for g in gammas):
        raise DomainError(f"damping factors must be positive, got {gammas}")
    g0 = gammas[levels.index(0)]
    x = np.log1p(np.asarray(levels, dtype=np.float64))
    y = np.log(np.asarray(gammas) / g0)
    mask = x > 0
    m = int(mask.sum())
    if m == 0:
        warnings.warn("exponent undefined: no level above 0", RuntimeWarning, stacklevel=2)
        return math.nan, math.nan
    sxx = float(np.dot(x, x))
    slope = float(np.dot(x, y)) / sxx
    if m < 2:
        warnings.warn("exponent standard error undefined for one level", RuntimeWarning,
                      stacklevel=2)
        return slope, math.nan
    resid = y[mask] - slope * x[mask]
    stderr = math.sqrt(float(np.dot(resid, resid)) / (m - 1) / sxx)
    return slope, stderr


def default_window(omega: float, periods: int = DEFAULT_WINDOW_PERIODS) -> FitWindow:
    """The first ``periods`` full oscillations of ``sin^2(omega t)`` (period ``pi/omega``)."""
    return FitWindow(0.0, periods * math.pi / omega)


def eid_sweep(
    base: RabiParams,
    depth: int,
    levels,
    windows=None,
    samples_per_period: int = 50,
    gamma_hi_factor: float = 1.0,
) -> EidResult:
    """Damping factor of the indistinguishable model along the sideband ladder.

    For each level ``n`` the Rabi frequency is ``freq_ladder(base.omega, n)``;
    ``base.delta_t`` and ``base.beta`` are shared. ``windows`` maps levels to
    :class:`FitWindow` (missing levels use :func:`default_window`). The
    search interval is ``[0, gamma_hi_factor * omega_n]``.

    Raises
    ------
    UnconvergedFitError
        If a level's fit lands on either end of the search interval, or
        ``base.beta == 1`` so that there is no damping at all.
    """
    levels = [int(n) for n in levels]
    if not levels:
        raise DomainError("levels must be non-empty")
    if 0 not in levels:
        raise DomainError("levels must include 0")
    if samples_per_period < 1:
        raise DomainError("samples_per_period must be positive")
    if base.beta == 1.0:
        # isolated system: any fitted decay would be an interpolation artefact
        raise UnconvergedFitError(f"level {levels[0]}: no damping (beta = 1 is an isolated system)")
    windows = dict(windows or {})
    omegas, gammas, fits = [], [], []
    for n in levels:
        try:
            om = freq_ladder(base.omega, n)
            params = RabiParams(om, base.delta_t, base.beta)
            window = windows.get(n) or default_window(om)
            period = math.pi / om
            samples = max(MIN_FIT_SAMPLES, math.ceil(window.t_max / period * samples_per_period)) + 1
            t = np.linspace(0.0, window.t_max, samples)
            tr = ProbabilityTrace(t, indist_curve(params, depth, t))
            fit = fit_gamma(tr, om, window, gamma_hi_factor * om)
        except BranchSimError as exc:
            raise type(exc)(f"level {n}: {exc}") from exc
        if not fit.converged:
            raise UnconvergedFitError(f"level {n}: damping fit hit the upper bound")
        if fit.gamma <= 0.0:
            raise UnconvergedFitError(f"level {n}: no damping (gamma fitted at zero)")
        omegas.append(om)
        gammas.append(fit.gamma)
        fits.append(fit)
    g0 = gammas[levels.index(0)]
    ratios = [g / g0 for g in gammas]
    exponent, stderr = fit_exponent(levels, gammas)
    return EidResult(levels, omegas, gammas, ratios, exponent, stderr, fits)
