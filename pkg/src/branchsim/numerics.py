"""Scalar special functions and small numerical utilities.

Probability mass functions are evaluated in log space with a single final
exponentiation, so that trial counts in the thousands (produced by time
rescaling) never overflow a factorial.
"""
from __future__ import annotations

import cmath
import math
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, EvaluationError

__all__ = [
    "LOG_TAIL_CUTOFF",
    "log_binomial_coeff",
    "binomial_pmf",
    "binomial_log_weights",
    "binomial_weights",
    "multinomial_pmf",
    "laguerre_gen",
    "minimize_scalar",
    "complex_real_power",
]

# pmf terms this far below the running maximum are dropped from sums
LOG_TAIL_CUTOFF = math.log(1e-18)

# below this many factors the coefficient is summed factor by factor
_DIRECT_SUM_LIMIT = 10_000

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _check_nk(n: int, k: int) -> None:
    if n < 0 or k < 0:
        raise DomainError(f"n and k must be nonnegative, got n={n}, k={k}")
    if k > n:
        raise DomainError(f"k={k} exceeds n={n}")


def _xlogy(x: float, y: float) -> float:
    # 0 * log(0) is taken as 0 so that p in {0, 1} is handled exactly
    if x == 0:
        return 0.0
    if y == 0:
        return -math.inf
    return x * math.log(y)


def log_binomial_coeff(n: int, k: int) -> float:
    """Natural log of the binomial coefficient C(n, k).

    Small ``min(k, n-k)`` uses a compensated sum of ``log((n-m+i)/i)``,
    which avoids the cancellation between large log-gamma values; the rest
    goes through log-gamma.
    """
    _check_nk(n, k)
    m = min(k, n - k)
    if m == 0:
        return 0.0
    if m <= _DIRECT_SUM_LIMIT:
        i = np.arange(1, m + 1, dtype=np.float64)
        return math.fsum(np.log((n - m + i) / i))
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _stirlerr(n: np.ndarray) -> np.ndarray:
    """``log(n!) - log(sqrt(2 pi n) (n/e)^n)`` for integer ``n >= 1``."""
    n = np.asarray(n, dtype=np.float64)
    out = np.empty_like(n)
    small = n <= 15
    ns = n[small]
    out[small] = gammaln(ns + 1.0) - (ns + 0.5) * np.log(ns) + ns - _HALF_LOG_2PI
    nl = n[~small]
    nn = nl * nl
    s0, s1, s2, s3, s4 = 1 / 12, 1 / 360, 1 / 1260, 1 / 1680, 1 / 1188
    out[~small] = np.select(
        [nl > 500, nl > 80, nl > 35],
        [(s0 - s1 / nn) / nl,
         (s0 - (s1 - s2 / nn) / nn) / nl,
         (s0 - (s1 - (s2 - s3 / nn) / nn) / nn) / nl],
        (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / nl,
    )
    return out


def _bd0(x: np.ndarray, mean: np.ndarray) -> np.ndarray:
    """Deviance term ``x log(x/mean) + mean - x`` without cancellation."""
    x, mean = np.broadcast_arrays(np.asarray(x, float), np.asarray(mean, float))
    out = np.empty(x.shape)
    d = x - mean
    near = np.abs(d) < 0.1 * (x + mean)
    v = d[near] / (x[near] + mean[near])
    s = d[near] * v
    ej = 2.0 * x[near] * v
    v2 = v * v
    for j in range(1, 40):
        ej = ej * v2
        step = ej / (2 * j + 1)
        s = s + step
        if np.all(np.abs(step) <= 1e-17 * np.abs(s)):
            break
    out[near] = s
    xf, mf = x[~near], mean[~near]
    with np.errstate(divide="ignore"):
        out[~near] = xf * np.log(xf / mf) + mf - xf
    return out


def _binomial_logpmf(n: int, k: np.ndarray, beta: float) -> np.ndarray:
    # saddle-point form: relative accuracy near machine precision for large n
    k = np.asarray(k, dtype=np.float64)
    out = np.full(k.shape, -np.inf)
    q = 1.0 - beta
    if beta == 0.0 or beta == 1.0:
        out[k == (0 if beta == 0.0 else n)] = 0.0
        return out
    out[k == 0] = n * math.log1p(-beta)
    out[k == n] = n * math.log(beta)
    mid = (k > 0) & (k < n)
    if not mid.any():
        return out
    km = k[mid]
    out[mid] = (
        0.5 * np.log(n / (2.0 * math.pi * km * (n - km)))
        + _stirlerr(np.array([n]))[0] - _stirlerr(km) - _stirlerr(n - km)
        - _bd0(km, n * beta) - _bd0(n - km, n * q)
    )
    return out


def binomial_pmf(n: int, k: int, beta: float) -> float:
    """``C(n,k) beta**k (1-beta)**(n-k)``, with ``0**0 == 1``."""
    _check_nk(n, k)
    if not 0.0 <= beta <= 1.0:
        raise DomainError(f"beta must lie in [0, 1], got {beta}")
    return math.exp(float(_binomial_logpmf(n, np.array([k]), beta)[0]))


def binomial_log_weights(n: int, beta: float) -> np.ndarray:
    """Log of ``b(n, k, beta)`` for every ``k = 0..n`` (``-inf`` for zero mass)."""
    if n < 0:
        raise DomainError(f"n must be nonnegative, got {n}")
    if not 0.0 <= beta <= 1.0:
        raise DomainError(f"beta must lie in [0, 1], got {beta}")
    return _binomial_logpmf(n, np.arange(n + 1), beta)


def binomial_weights(n: int, beta: float, truncate: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Indices and weights of the binomial row ``b(n, ., beta)``.

    With ``truncate`` the entries whose log weight is more than
    :data:`LOG_TAIL_CUTOFF` below the largest one are dropped.

    Returns
    -------
    k : ndarray of int
        Retained trial counts, ascending.
    w : ndarray of float
        Corresponding probabilities.
    """
    logw = binomial_log_weights(n, beta)
    k = np.arange(n + 1)
    if truncate:
        keep = logw >= logw.max() + LOG_TAIL_CUTOFF
        k, logw = k[keep], logw[keep]
    return k, np.exp(logw)


def multinomial_pmf(n: int, counts, probs) -> float:
    """Three-outcome multinomial probability ``n!/(j!k!l!) p1**j p2**k p3**l``."""
    counts = tuple(int(c) for c in counts)
    probs = tuple(float(p) for p in probs)
    if len(counts) != 3 or len(probs) != 3:
        raise DomainError("counts and probs must be triples")
    if any(c < 0 for c in counts):
        raise DomainError(f"counts must be nonnegative, got {counts}")
    if sum(counts) != n:
        raise DomainError(f"counts {counts} do not sum to n={n}")
    if any(not 0.0 <= p <= 1.0 for p in probs):
        raise DomainError(f"probabilities must lie in [0, 1], got {probs}")
    logw = math.lgamma(n + 1) - math.fsum(math.lgamma(c + 1) for c in counts)
    logw += math.fsum(_xlogy(c, p) for c, p in zip(counts, probs))
    return math.exp(logw)


def laguerre_gen(n: int, alpha: float, x):
    """Generalized Laguerre polynomial ``L_n^alpha(x)`` by forward recurrence.

    ``x`` may be a scalar or an array.
    """
    if n < 0:
        raise DomainError(f"degree must be nonnegative, got {n}")
    x = np.asarray(x, dtype=np.float64)
    prev = np.ones_like(x)
    if n == 0:
        return prev[()]
    cur = 1.0 + alpha - x
    for m in range(1, n):
        prev, cur = cur, ((2 * m + 1 + alpha - x) * cur - (m + alpha) * prev) / (m + 1)
    return cur[()]


def minimize_scalar(
    objective: Callable[[float], float], lo: float, hi: float, tol: float
) -> float:
    """Bounded, derivative-free golden-section minimization.

    Exact ties between the two interior probes shrink the bracket from both
    sides, so a flat-bottomed (rounding-limited) minimum resolves to the
    centre of its plateau. The end points are compared against the interior
    result last, which lets boundary minima be returned exactly.

    Raises
    ------
    EvaluationError
        If ``objective`` returns a non-finite value.
    """
    if not lo < hi:
        raise DomainError(f"need lo < hi, got [{lo}, {hi}]")
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol}")

    def f(x: float) -> float:
        v = float(objective(x))
        if not math.isfinite(v):
            raise EvaluationError(f"objective is not finite at x={x!r}: {v!r}")
        return v

    a, b = float(lo), float(hi)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        elif fd < fc:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
        else:
            a, b = c, d
            c = b - _INV_PHI * (b - a)
            d = a + _INV_PHI * (b - a)
            fc, fd = f(c), f(d)
    x = 0.5 * (a + b)
    fx = f(x)
    flo, fhi = f(lo), f(hi)
    if flo <= fx and flo <= fhi:
        return float(lo)
    if fhi < fx:
        return float(hi)
    return x


def complex_real_power(base: complex, exponent: float) -> complex:
    """Principal-branch ``base ** exponent`` for a real exponent."""
    base = complex(base)
    if base == 0:
        if exponent <= 0:
            raise DomainError("zero base requires a positive exponent")
        return 0j
    return cmath.exp(exponent * cmath.log(base))
