"""Self-verification suites run by ``branchsim verify``.

Each suite compares two independent routes to the same quantity and
returns a :class:`SuiteResult`. A suite can be asked to perturb one of its
routes (``fault=True``) to confirm that the checker itself detects a
discrepancy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import fitting, rabi, splitter

FAULT = 1e-6


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    detail: str


def _rel_err(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def _close(a, b, rtol: float) -> bool:
    return all(_rel_err(x, y) <= rtol or abs(x - y) <= 1e-14 for x, y in zip(a, b))


def _channels(R: float, loss: float) -> splitter.SplitterChannels:
    r_eff = R * (1.0 - loss)
    return splitter.SplitterChannels(r_eff, 1.0 - loss - r_eff, loss)


def splitter_oracle(quick: bool = False, fault: bool = False) -> SuiteResult:
    n_max = 6 if quick else 12
    worst = 0.0
    bad = []
    for n in range(1, n_max + 1):
        for R in (0.1, 0.3, 0.5, 0.7, 0.9):
            for loss in (0.0, 0.15, 0.3):
                ch = _channels(R, loss)
                ref = splitter.stats_enumerate(n, ch).as_tuple()
                routes = {"multinomial": splitter.stats_partition_multinomial(n, ch).as_tuple()}
                if loss == 0.0:
                    spec = splitter.SplitterSpec.from_reflect(R)
                    routes["closed"] = splitter.stats_lossless_closed(n, spec).as_tuple()
                    routes["binomial"] = splitter.stats_partition_binomial(n, spec).as_tuple()
                if fault:
                    routes["multinomial"] = tuple(v + FAULT for v in routes["multinomial"])
                for name, vals in routes.items():
                    worst = max(worst, max(_rel_err(a, b) for a, b in zip(vals, ref)))
                    if not _close(vals, ref, 1e-10):
                        bad.append(f"{name}(n={n},R={R},loss={loss})")
    detail = f"worst rel err {worst:.2e}" + (f"; mismatches: {', '.join(bad[:3])}" if bad else "")
    return SuiteResult("splitter-oracle", not bad, detail)


def lossy_asymmetry(quick: bool = False, fault: bool = False) -> SuiteResult:
    spec = splitter.SplitterSpec(0.5, 0.5)
    eff = splitter.EfficiencySpec(eps_r=0.1, eps_t=0.2)
    ch = splitter.derive_channels(spec, eff, splitter.Convention.SCATTERED_ONLY)
    ok = True
    for n in (1, 3, 5, 8):
        st = splitter.stats_partition_multinomial(n, ch)
        var_r = st.var_r + (FAULT if fault else 0.0)
        expect_r = n * ch.r_eff * (ch.t_eff + ch.loss)
        expect_t = n * ch.t_eff * (ch.r_eff + ch.loss)
        # lossless nR(1-R) with R replaced by R'
        substituted = n * ch.r_eff * (1.0 - ch.r_eff)
        ok &= abs(var_r - expect_r) <= 1e-12 and abs(st.var_t - expect_t) <= 1e-12
        ok &= abs(substituted - expect_r) <= 1e-12 and var_r != st.var_t
    return SuiteResult("lossy-asymmetry", ok, f"channels {ch.r_eff:.2f}/{ch.t_eff:.2f}/{ch.loss:.2f}")


_REDUCTION_SETS = [(1.0, 0.05), (1.0, 0.3), (2.5, 0.1), (0.4, 0.7), (3.0, 0.02)]


def closed_reduction(quick: bool = False, fault: bool = False) -> SuiteResult:
    worst = 0.0
    n_max = 40 if quick else 120
    for om, dt in _REDUCTION_SETS:
        nodes = np.arange(n_max + 1) * dt
        exact = np.sin(om * nodes) ** 2
        grid = rabi.build_dp_grid(rabi.RabiParams(om, dt, 1.0), 5, n_max)
        got = grid.pg[5] + (FAULT if fault else 0.0)
        worst = max(worst, float(np.max(np.abs(got - exact))))
        dist = rabi.dist_curve(rabi.DistParams(om, dt, 1.0), nodes)
        worst = max(worst, float(np.max(np.abs(dist - exact))))
    return SuiteResult("closed-reduction", worst <= 1e-10, f"max abs err {worst:.2e}")


def one_event_direct(om: float, dt: float, beta: float, n: int) -> float:
    """Single-event sum evaluated term by term with exact integer coefficients."""
    total = 0.0
    for k in range(n + 1):
        b = math.comb(n, k) * beta**k * (1.0 - beta) ** (n - k)
        sk, ck = math.sin(om * k * dt) ** 2, math.cos(om * k * dt) ** 2
        sr, cr = math.sin(om * (n - k) * dt) ** 2, math.cos(om * (n - k) * dt) ** 2
        total += b * (sk * cr + ck * sr)
    return total


def depth_one(quick: bool = False, fault: bool = False) -> SuiteResult:
    n_max = 40 if quick else 100
    worst = 0.0
    for om, dt, beta in ((1.0, 0.7, 0.995), (1.3, 0.11, 0.9), (0.5, 0.3, 0.6)):
        grid = rabi.build_dp_grid(rabi.RabiParams(om, dt, beta), 1, n_max, truncate=False)
        for n in range(n_max + 1):
            got = grid.pg[1, n] + (FAULT if fault else 0.0)
            worst = max(worst, abs(got - one_event_direct(om, dt, beta, n)))
    return SuiteResult("depth-one", bool(worst <= 1e-12), f"max abs err {worst:.2e}")


def exchange_rule(quick: bool = False, fault: bool = False) -> SuiteResult:
    """Track the excited-state table separately and compare with ``1 - P_g``."""
    n_max = 25 if quick else 50
    worst = 0.0
    for om, dt, beta in ((1.0, 0.7, 0.995), (0.9, 0.2, 0.8)):
        grid = rabi.build_dp_grid(rabi.RabiParams(om, dt, beta), 3, n_max, truncate=False)
        steps = np.arange(n_max + 1)
        g = np.sin(om * dt * steps) ** 2
        e = np.cos(om * dt * steps) ** 2
        for j in range(1, 4):
            g_new, e_new = np.empty_like(g), np.empty_like(e)
            for n in range(n_max + 1):
                w = np.array([math.comb(n, k) * beta**k * (1 - beta) ** (n - k) for k in range(n + 1)])
                s = np.sin(om * (n - steps[: n + 1]) * dt) ** 2
                c = np.cos(om * (n - steps[: n + 1]) * dt) ** 2
                g_new[n] = np.dot(w, g[: n + 1] * c + e[: n + 1] * s)
                # exchange rule: swap the roles of the two weights
                e_new[n] = np.dot(w, e[: n + 1] * c + g[: n + 1] * s)
            g, e = g_new, e_new
            dp_e = 1.0 - grid.pg[j] + (FAULT if fault else 0.0)
            worst = max(worst, float(np.max(np.abs(dp_e - e))), float(np.max(np.abs(grid.pg[j] - g))))
    return SuiteResult("exchange-rule", worst <= 1e-12, f"max abs err {worst:.2e}")


def dist_recursion(quick: bool = False, fault: bool = False) -> SuiteResult:
    """Node-table evaluation against the plain (exponential) recursion."""
    params = rabi.DistParams(1.0, 0.3, 0.9)

    def p(n, t):
        if n == 0:
            return math.sin(params.omega * t) ** 2
        a = p(n - 1, n * params.delta_t)
        s = math.sin(params.omega * (t - n * params.delta_t)) ** 2
        return params.eta * p(n - 1, t) + (1 - params.eta) * (a * (1 - s) + (1 - a) * s)

    t = np.linspace(0.0, (8 if quick else 12) * params.delta_t * 0.999, 37)
    got = rabi.dist_curve(params, t) + (FAULT if fault else 0.0)
    ref = np.array([p(int(math.floor(ti / params.delta_t)), ti) for ti in t])
    worst = float(np.max(np.abs(got - ref)))
    return SuiteResult("dist-recursion", worst <= 1e-12, f"max abs err {worst:.2e}")


def quadratic_law(quick: bool = False, fault: bool = False) -> SuiteResult:
    worst = 0.0
    odts = (0.02,) if quick else (0.01, 0.02, 0.05)
    for beta in (0.99, 0.995):
        for odt in odts:
            params = rabi.RabiParams(1.0, odt, beta)
            tr = rabi.trace(rabi.Model.APPROX, params, 200.0, 4001)
            fit = fitting.fit_gamma(tr, 1.0, fitting.FitWindow(0.0, 200.0), 0.1)
            g = fit.gamma * (1.25 if fault else 1.0)
            worst = max(worst, abs(g / rabi.gamma_quadratic(params) - 1.0))
    return SuiteResult("quadratic-law", worst <= 0.10, f"max rel dev {worst:.2e}")


def fit_recovery(quick: bool = False, fault: bool = False) -> SuiteResult:
    worst = 0.0
    for g in (0.001, 0.01, 0.05, 0.2):
        t = np.linspace(0.0, 40.0, 801)
        tr = rabi.ProbabilityTrace(t, fitting.model_damped(1.0, g, t))
        fit = fitting.fit_gamma(tr, 1.0, fitting.FitWindow(0.0, 40.0), 1.0)
        got = fit.gamma + (FAULT if fault else 0.0)
        worst = max(worst, abs(got - g) / g)
    return SuiteResult("fit-recovery", worst <= 1e-6, f"max rel err {worst:.2e}")


SUITES: dict[str, Callable[..., SuiteResult]] = {
    "splitter-oracle": splitter_oracle,
    "lossy-asymmetry": lossy_asymmetry,
    "closed-reduction": closed_reduction,
    "depth-one": depth_one,
    "exchange-rule": exchange_rule,
    "dist-recursion": dist_recursion,
    "quadratic-law": quadratic_law,
    "fit-recovery": fit_recovery,
}


def run_all(quick: bool = False, inject: str | None = None) -> list[SuiteResult]:
    return [fn(quick=quick, fault=(name == inject)) for name, fn in SUITES.items()]
