"""Ground-state Born probabilities for a two-level system undergoing Rabi oscillations.

Members are actively prepared in the excited state at ``t = 0``. Four models
are provided:

``closed``
    isolated evolution, ``sin^2(omega t)``.
``indist``
    indistinguishable members and interference events. Binomially weighted
    branches are built by dynamic programming over the recursion depth and
    mapped back to continuous time through ``n -> t / (beta dt)``.
``approx``
    the truncated analytic form, dominated by branches where every interval
    precedes the interference event.
``dist``
    distinguishable members, each garbled with probability ``1 - eta`` at
    every node time ``m dt``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, DomainError, ResourceLimitError
from .numerics import binomial_weights, complex_real_power, laguerre_gen

__all__ = [
    "RabiParams",
    "DistParams",
    "DpGrid",
    "ProbabilityTrace",
    "Model",
    "DEFAULT_DEPTH",
    "DEFAULT_DP_BUDGET",
    "MAX_DIST_NODES",
    "LAMB_DICKE",
    "closed_pg",
    "build_dp_grid",
    "default_n_max",
    "indist_pg",
    "indist_curve",
    "approx_pg",
    "gamma_quadratic",
    "freq_ladder",
    "dist_pg",
    "dist_curve",
    "trace",
]

DEFAULT_DEPTH = 5
# cap on depth * n_max**2 for the indistinguishable DP table
DEFAULT_DP_BUDGET = 4e9
MAX_DIST_NODES = 50_000
LAMB_DICKE = 0.202

_PROB_SLACK = 1e-12


@dataclass(frozen=True)
class RabiParams:
    """Indistinguishable-ensemble model: Rabi frequency, interference timescale, beta."""

    omega: float
    delta_t: float
    beta: float

    def __post_init__(self):
        if not self.omega > 0:
            raise DomainError(f"omega must be positive, got {self.omega}")
        if not self.delta_t > 0:
            raise DomainError(f"delta_t must be positive, got {self.delta_t}")
        if not 0.0 < self.beta <= 1.0:
            raise DomainError(f"beta must lie in (0, 1], got {self.beta}")


@dataclass(frozen=True)
class DistParams:
    """Distinguishable-ensemble model; ``eta`` is the probability of *not* being garbled."""

    omega: float
    delta_t: float
    eta: float

    def __post_init__(self):
        if not self.omega > 0:
            raise DomainError(f"omega must be positive, got {self.omega}")
        if not self.delta_t > 0:
            raise DomainError(f"delta_t must be positive, got {self.delta_t}")
        if not 0.0 <= self.eta <= 1.0:
            raise DomainError(f"eta must lie in [0, 1], got {self.eta}")


@dataclass(frozen=True, eq=False)
class DpGrid:
    """Ground-state probabilities ``pg[j, k]`` at recursion depth ``j`` and time ``k dt``.

    The table is read-only once built.
    """

    params: RabiParams
    depth: int
    n_max: int
    pg: np.ndarray

    def row(self, j: int) -> np.ndarray:
        return self.pg[j]


@dataclass(frozen=True, eq=False)
class ProbabilityTrace:
    """Sampled ground-state probability ``p`` at strictly increasing times ``t``."""

    t: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        p = np.asarray(self.p, dtype=np.float64)
        if t.ndim != 1 or t.shape != p.shape:
            raise DomainError("t and p must be 1-d arrays of equal length")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise DomainError("sample times must be strictly increasing")
        if np.any(p < -_PROB_SLACK) or np.any(p > 1 + _PROB_SLACK):
            raise ConsistencyError("trace probabilities fall outside [0, 1]")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "p", np.clip(p, 0.0, 1.0))

    def __len__(self):
        return self.t.size

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.t.tolist(), self.p.tolist()))


class Model(str, enum.Enum):
    CLOSED = "closed"
    INDIST = "indist"
    APPROX = "approx"
    DIST = "dist"


def closed_pg(omega: float, t):
    """Ground-state probability of the isolated system, ``sin^2(omega t)``."""
    return np.sin(omega * np.asarray(t, dtype=np.float64)) ** 2 + 0.0


def default_n_max(params: RabiParams, t_max: float) -> int:
    """Smallest grid that covers interpolation up to ``t_max``."""
    return math.ceil(t_max / (params.beta * params.delta_t)) + 1


def build_dp_grid(
    params: RabiParams,
    depth: int,
    n_max: int,
    *,
    truncate: bool = True,
    budget: float = DEFAULT_DP_BUDGET,
) -> DpGrid:
    """Tabulate the depth recursion of binomially weighted branches.

    Row 0 is the closed evolution ``sin^2(omega k dt)``. Row ``j`` at step
    ``n`` sums, over the step ``k`` of the last passive preparation, the
    weight ``b(n, k, beta)`` times the probability of reaching the ground
    state in the remaining ``n - k`` steps from the row ``j - 1`` mixture at
    ``k``. The excited-state weight is taken as ``1 - P_g``.

    With ``truncate`` the binomial tail below 1e-18 of its peak is skipped.
    """
    if depth < 0 or n_max < 0:
        raise DomainError(f"depth and n_max must be nonnegative, got {depth}, {n_max}")
    cost = depth * float(n_max) ** 2
    if cost > budget:
        raise ResourceLimitError(
            f"DP table of depth {depth} and n_max {n_max} costs {cost:.3g} > budget {budget:.3g}"
        )
    steps = np.arange(n_max + 1)
    sin2 = np.sin(params.omega * params.delta_t * steps) ** 2
    pg = np.empty((depth + 1, n_max + 1))
    pg[0] = sin2
    for n in range(n_max + 1):
        k, w = binomial_weights(n, params.beta, truncate=truncate)
        s = sin2[n - k]
        flip = 1.0 - 2.0 * s
        for j in range(1, depth + 1):
            # P_g cos^2 + (1 - P_g) sin^2 == sin^2 + P_g (1 - 2 sin^2)
            pg[j, n] = np.dot(w, s + pg[j - 1, k] * flip)
    pg.setflags(write=False)
    return DpGrid(params=params, depth=depth, n_max=n_max, pg=pg)


def _interp_row(grid: DpGrid, t: np.ndarray) -> np.ndarray:
    p = grid.params
    x = t / (p.beta * p.delta_t)
    if np.any(x > grid.n_max):
        raise DomainError("requested time lies beyond the DP grid")
    return np.interp(x, np.arange(grid.n_max + 1), grid.pg[grid.depth])


def indist_curve(params: RabiParams, depth: int, t, *, truncate: bool = True,
                 budget: float = DEFAULT_DP_BUDGET) -> np.ndarray:
    """:func:`indist_pg` over an array of times, sharing one DP table."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise DomainError("times must be nonnegative")
    t_max = float(t.max()) if t.size else 0.0
    grid = build_dp_grid(params, depth, default_n_max(params, t_max),
                         truncate=truncate, budget=budget)
    return _interp_row(grid, t)


def indist_pg(params: RabiParams, depth: int, t: float, **kwargs) -> float:
    """Ground-state probability at time ``t`` for the indistinguishable model.

    The discrete step index is ``t / (beta dt)``; values between grid steps
    are linearly interpolated.
    """
    return float(indist_curve(params, depth, np.array([t]), **kwargs)[0])


def _approx_bases(params: RabiParams) -> tuple[complex, complex]:
    phase = 2.0 * params.delta_t * params.omega
    z_minus = 1.0 - params.beta * (1.0 - complex(math.cos(phase), -math.sin(phase)))
    z_plus = 1.0 - params.beta * (1.0 - complex(math.cos(phase), math.sin(phase)))
    # a base at rounding level is zero up to the error in cos/sin of the phase
    if abs(z_minus) < 1e-12 or abs(z_plus) < 1e-12:
        raise DomainError("approximation base vanishes for these parameters")
    return z_minus, z_plus


def approx_pg(params: RabiParams, t):
    """Truncated analytic approximation of the indistinguishable model.

    ``(2 - z_-**e - z_+**e) / 4`` with ``z_(-/+) = 1 - beta (1 - exp(-/+ 2i dt omega))``
    and ``e = t / (beta dt)``. Accepts a scalar or an array of times.
    """
    z_minus, z_plus = _approx_bases(params)
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0):
        raise DomainError("times must be nonnegative")
    scale = 1.0 / (params.beta * params.delta_t)
    out = np.empty(t_arr.shape)
    for idx, ti in np.ndenumerate(t_arr):
        e = ti * scale
        val = 0.25 * (2.0 - complex_real_power(z_minus, e) - complex_real_power(z_plus, e))
        if abs(val.imag) >= 1e-10:
            raise ConsistencyError(f"imaginary residue {val.imag!r} at t={ti!r}")
        out[idx] = val.real
    return out[()] if out.ndim == 0 else out


def gamma_quadratic(params: RabiParams) -> float:
    """Leading-order damping factor ``2 (1 - beta) omega^2 dt`` of the approximation."""
    return 2.0 * (1.0 - params.beta) * params.omega**2 * params.delta_t


def freq_ladder(omega: float, level: int) -> float:
    """Rabi frequency of the ``|n> -> |n+1>`` sideband transition at the given level."""
    if level < 0:
        raise DomainError(f"level must be nonnegative, got {level}")
    x = LAMB_DICKE**2
    return float(
        omega * LAMB_DICKE * math.exp(-x / 2.0) * laguerre_gen(level, 1.0, x) / math.sqrt(level + 1)
    )


def _dist_nodes(params: DistParams, n_nodes: int) -> np.ndarray:
    """``a[j] = p_{j-1}(j dt)`` for ``j = 1..n_nodes`` (index 0 unused).

    Rolls the node table ``p_j(m dt)`` forward one row at a time, so memory
    stays linear in the number of nodes.
    """
    if n_nodes > MAX_DIST_NODES:
        raise ResourceLimitError(
            f"{n_nodes} interference nodes exceed the limit of {MAX_DIST_NODES}"
        )
    eta = params.eta
    sin2 = np.sin(params.omega * params.delta_t * np.arange(n_nodes + 1)) ** 2
    row = sin2.copy()  # p_0 at the node times
    nodes = np.zeros(n_nodes + 1)
    for j in range(1, n_nodes + 1):
        a = row[j]
        nodes[j] = a
        s = sin2[: n_nodes + 1 - j]
        row[j:] = eta * row[j:] + (1.0 - eta) * (a * (1.0 - s) + (1.0 - a) * s)
    return nodes


def dist_curve(params: DistParams, t) -> np.ndarray:
    """:func:`dist_pg` over an array of times, sharing one node table."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise DomainError("times must be nonnegative")
    steps = np.floor(t / params.delta_t).astype(np.int64)
    n_nodes = int(steps.max()) if t.size else 0
    nodes = _dist_nodes(params, n_nodes)
    eta, om, dt = params.eta, params.omega, params.delta_t
    p = np.sin(om * t) ** 2
    for j in range(1, n_nodes + 1):
        live = steps >= j
        a = nodes[j]
        s = np.sin(om * (t[live] - j * dt)) ** 2
        p[live] = eta * p[live] + (1.0 - eta) * (a * (1.0 - s) + (1.0 - a) * s)
    return p


def dist_pg(params: DistParams, t: float) -> float:
    """Ground-state probability at ``t`` for distinguishable members.

    No time rescaling is applied: the node index ``floor(t / dt)`` already
    counts elapsed time.
    """
    return float(dist_curve(params, np.array([t]))[0])


def trace(model: Model | str, params, t_max: float, samples: int,
          depth: int = DEFAULT_DEPTH) -> ProbabilityTrace:
    """Uniformly sample a model on ``[0, t_max]``.

    ``params`` is a :class:`RabiParams` for ``closed``, ``indist`` and
    ``approx`` (only ``omega`` is used by ``closed``) and a
    :class:`DistParams` for ``dist``.
    """
    model = Model(model)
    if not t_max > 0:
        raise DomainError(f"t_max must be positive, got {t_max}")
    if samples < 2:
        raise DomainError(f"need at least 2 samples, got {samples}")
    t = np.linspace(0.0, t_max, samples)
    if model is Model.CLOSED:
        p = closed_pg(params.omega, t)
    elif model is Model.DIST:
        if not isinstance(params, DistParams):
            raise DomainError("the dist model requires DistParams")
        p = dist_curve(params, t)
    else:
        if not isinstance(params, RabiParams):
            raise DomainError(f"the {model.value} model requires RabiParams")
        if model is Model.INDIST:
            p = indist_curve(params, depth, t)
        else:
            p = approx_pg(params, t)
    return ProbabilityTrace(t, p)
