"""Occupation-number statistics for n photons scattered at a beam splitter.

Four independent routes compute the same six moments:

* :func:`stats_lossless_closed` -- closed-form correlations,
* :func:`stats_partition_binomial` -- explicit binomial partition sums,
* :func:`stats_partition_multinomial` -- multinomial sums with a loss channel,
* :func:`stats_enumerate` -- brute force over every per-photon outcome string.

The last route is the oracle for the other three.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .errors import ConsistencyError, DomainError, ResourceLimitError
from .numerics import multinomial_pmf, binomial_pmf

__all__ = [
    "SplitterSpec",
    "EfficiencySpec",
    "SplitterChannels",
    "OccupationStats",
    "OutcomeWeights",
    "Convention",
    "MAX_ENUM_LOSSLESS",
    "MAX_ENUM_LOSSY",
    "derive_channels",
    "stats_lossless_closed",
    "stats_partition_binomial",
    "stats_partition_multinomial",
    "density_weights",
    "stats_enumerate",
]

MAX_ENUM_LOSSLESS = 16
MAX_ENUM_LOSSY = 12

_SUM_TOL = 1e-12


def _check_prob(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0):
        raise DomainError(f"{name} must lie in [0, 1], got {value}")


def _check_n(n: int) -> None:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise DomainError(f"photon number must be a positive integer, got {n}")


@dataclass(frozen=True)
class SplitterSpec:
    """Reflection and transmission probabilities ``R = |r11|^2``, ``T = |t21|^2``."""

    reflect: float
    transmit: float

    def __post_init__(self):
        _check_prob("reflect", self.reflect)
        _check_prob("transmit", self.transmit)
        if abs(self.reflect + self.transmit - 1.0) > _SUM_TOL:
            raise DomainError(
                f"reflect + transmit must equal 1, got {self.reflect + self.transmit!r}"
            )

    @classmethod
    def from_reflect(cls, reflect: float) -> "SplitterSpec":
        return cls(reflect, 1.0 - reflect)


@dataclass(frozen=True)
class EfficiencySpec:
    """Detector failure probabilities and the weight of the measurable system."""

    eps_r: float = 0.0
    eps_t: float = 0.0
    w_b: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            _check_prob(f.name, getattr(self, f.name))


@dataclass(frozen=True)
class SplitterChannels:
    """Effective registered-reflection, registered-transmission and loss probabilities."""

    r_eff: float
    t_eff: float
    loss: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            _check_prob(f.name, getattr(self, f.name))
        total = self.r_eff + self.t_eff + self.loss
        if abs(total - 1.0) > _SUM_TOL:
            raise DomainError(f"channel probabilities must sum to 1, got {total!r}")

    @classmethod
    def lossless(cls, spec: SplitterSpec) -> "SplitterChannels":
        return cls(spec.reflect, spec.transmit, 0.0)


@dataclass(frozen=True)
class OccupationStats:
    """The six first and second moments of the reflected/transmitted counts."""

    mean_r: float
    mean_t: float
    mean_rt: float
    var_r: float
    var_t: float
    cov_rt: float

    def as_tuple(self) -> tuple[float, ...]:
        return astuple(self)

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class OutcomeWeights:
    """Diagonal of the symmetrized n-photon density operator.

    ``entries`` maps each outcome string (one symbol per photon: ``r``,
    ``t`` and, when there is loss, ``l``) to its product weight. Keys are in
    lexicographic order.
    """

    n: int
    entries: dict[str, float]

    def total(self) -> float:
        return math.fsum(self.entries.values())


class Convention(str, enum.Enum):
    """Which photons make up the experimental ensemble."""

    ALL_PREPARED = "all"
    SCATTERED_ONLY = "scattered"


def derive_channels(
    spec: SplitterSpec, eff: EfficiencySpec, convention: Convention | str = Convention.ALL_PREPARED
) -> SplitterChannels:
    """Convert splitter and detector efficiencies into effective channel probabilities.

    ``ALL_PREPARED`` counts every photon prepared in the incident channel and
    therefore includes the weight ``w_b``; ``SCATTERED_ONLY`` counts only the
    photons scattered into the measurable system and ignores ``w_b``.
    """
    convention = Convention(convention)
    R, T = spec.reflect, spec.transmit
    if convention is Convention.ALL_PREPARED:
        r_eff = eff.w_b * (1.0 - eff.eps_r) * R
        t_eff = eff.w_b * (1.0 - eff.eps_t) * T
        loss = 1.0 - eff.w_b * (1.0 - eff.eps_r * R - eff.eps_t * T)
    else:
        r_eff = (1.0 - eff.eps_r) * R
        t_eff = (1.0 - eff.eps_t) * T
        loss = eff.eps_r * R + eff.eps_t * T
    try:
        return SplitterChannels(r_eff, t_eff, loss)
    except DomainError as exc:
        raise ConsistencyError(f"derived channels are not a distribution: {exc}") from exc


def stats_lossless_closed(n: int, spec: SplitterSpec) -> OccupationStats:
    """Closed-form occupation correlations for a lossless splitter."""
    _check_n(n)
    R, T = spec.reflect, spec.transmit
    nrt = n * R * T
    return OccupationStats(n * R, n * T, R * T * n * (n - 1), nrt, nrt, -nrt)


def stats_partition_binomial(n: int, spec: SplitterSpec) -> OccupationStats:
    """Moments from explicit sums over the binomial partition of n photons.

    Each sum is ``sum_k C(n,k) R^k T^(n-k) f(k)`` with ``k`` the number of
    reflected photons.
    """
    _check_n(n)
    R, T = spec.reflect, spec.transmit
    mr, mt = n * R, n * T
    w = [binomial_pmf(n, k, R) for k in range(n + 1)]
    ks = range(n + 1)

    def moment(f):
        return math.fsum(wk * f(k) for wk, k in zip(w, ks))

    return OccupationStats(
        mean_r=moment(lambda k: k),
        mean_t=moment(lambda k: n - k),
        mean_rt=moment(lambda k: k * (n - k)),
        var_r=moment(lambda k: (k - mr) ** 2),
        var_t=moment(lambda k: ((n - k) - mt) ** 2),
        cov_rt=moment(lambda k: (k - mr) * ((n - k) - mt)),
    )


def stats_partition_multinomial(n: int, channels: SplitterChannels) -> OccupationStats:
    """Moments from triple sums over the multinomial partition ``j + k + l = n``.

    ``j`` photons are registered as reflected, ``k`` as transmitted and
    ``l`` are never registered. Unmeasured photons contribute through the
    zero operator, i.e. only ``j`` and ``k`` enter the counting functions.
    """
    _check_n(n)
    p = (channels.r_eff, channels.t_eff, channels.loss)
    mr, mt = n * channels.r_eff, n * channels.t_eff
    terms = []
    for j in range(n + 1):
        for k in range(n + 1 - j):
            terms.append((j, k, multinomial_pmf(n, (j, k, n - j - k), p)))

    def moment(f):
        return math.fsum(w * f(j, k) for j, k, w in terms)

    return OccupationStats(
        mean_r=moment(lambda j, k: j),
        mean_t=moment(lambda j, k: k),
        mean_rt=moment(lambda j, k: j * k),
        var_r=moment(lambda j, k: (j - mr) ** 2),
        var_t=moment(lambda j, k: (k - mt) ** 2),
        cov_rt=moment(lambda j, k: (j - mr) * (k - mt)),
    )


def _symbols(channels: SplitterChannels) -> tuple[tuple[str, float], ...]:
    # sorted by symbol so that itertools.product yields lexicographic strings
    if channels.loss == 0.0:
        return (("r", channels.r_eff), ("t", channels.t_eff))
    return (("l", channels.loss), ("r", channels.r_eff), ("t", channels.t_eff))


def _check_enum_cap(n: int, channels: SplitterChannels) -> None:
    _check_n(n)
    cap = MAX_ENUM_LOSSLESS if channels.loss == 0.0 else MAX_ENUM_LOSSY
    if n > cap:
        raise ResourceLimitError(
            f"enumeration of {len(_symbols(channels))}**{n} outcomes exceeds cap n <= {cap}"
        )


def _outcome_table(n: int, channels: SplitterChannels):
    """Per-string reflected count, transmitted count and weight, lexicographic order."""
    syms = _symbols(channels)
    base = len(syms)
    idx = np.arange(base**n)
    r_digit = [s for s, _ in syms].index("r")
    n_r = np.zeros(idx.size, dtype=np.int64)
    n_t = np.zeros(idx.size, dtype=np.int64)
    for pos in range(n):
        digit = (idx // base**pos) % base
        n_r += digit == r_digit
        n_t += digit == r_digit + 1
    n_l = n - n_r - n_t
    w = channels.r_eff**n_r * channels.t_eff**n_t
    if base == 3:
        w = w * channels.loss**n_l
    return n_r.astype(np.float64), n_t.astype(np.float64), w


def density_weights(n: int, channels: SplitterChannels) -> OutcomeWeights:
    """Every per-photon outcome string with its product weight ``R'^j T'^k eta^l``."""
    _check_enum_cap(n, channels)
    syms = _symbols(channels)
    entries = {}
    for combo in itertools.product(syms, repeat=n):
        key = "".join(s for s, _ in combo)
        entries[key] = math.prod(p for _, p in combo)
    return OutcomeWeights(n=n, entries=entries)


def _fsum(x: np.ndarray) -> float:
    return math.fsum(x.tolist())


def stats_enumerate(n: int, channels: SplitterChannels) -> OccupationStats:
    """Brute-force moments: count ``r`` and ``t`` symbols in every outcome string."""
    _check_enum_cap(n, channels)
    n_r, n_t, w = _outcome_table(n, channels)
    mean_r = _fsum(w * n_r)
    mean_t = _fsum(w * n_t)
    dr = n_r - mean_r
    dt = n_t - mean_t
    return OccupationStats(
        mean_r=mean_r,
        mean_t=mean_t,
        mean_rt=_fsum(w * n_r * n_t),
        var_r=_fsum(w * dr * dr),
        var_t=_fsum(w * dt * dt),
        cov_rt=_fsum(w * dr * dt),
    )
