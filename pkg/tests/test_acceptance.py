"""Acceptance criteria, one test per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the terminal summary ends
with one PASS/FAIL line per criterion.
"""
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from branchsim import fitting, rabi, splitter, verify

criterion = pytest.mark.criterion


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def rel_err(a, b):
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def channels(R, loss):
    r_eff = R * (1 - loss)
    return splitter.SplitterChannels(r_eff, 1 - loss - r_eff, loss)


def fit_trace(tr, omega, t_max):
    return fitting.fit_gamma(tr, omega, fitting.FitWindow(0.0, t_max), omega)


@criterion(1, "splitter routes agree on all six moments (1e-10 rel, < 5 s)")
def test_splitter_oracle_equivalence():
    worst = 0.0
    with Timer() as tm:
        for n in range(1, 13):
            for R in (0.1, 0.3, 0.5, 0.7, 0.9):
                for loss in (0.0, 0.15, 0.3):
                    ch = channels(R, loss)
                    ref = splitter.stats_enumerate(n, ch).as_tuple()
                    routes = [splitter.stats_partition_multinomial(n, ch)]
                    if loss == 0.0:
                        spec = splitter.SplitterSpec.from_reflect(R)
                        routes += [splitter.stats_lossless_closed(n, spec),
                                   splitter.stats_partition_binomial(n, spec)]
                    for st in routes:
                        for a, b in zip(st.as_tuple(), ref):
                            if abs(a - b) > 1e-15:
                                worst = max(worst, rel_err(a, b))
    print(f"\n[1] worst rel err {worst:.2e}, {tm.elapsed:.2f} s")
    assert worst <= 1e-10
    assert tm.elapsed < 5.0


@criterion(2, "lossy variance asymmetry and R -> R' substitution (1e-12)")
def test_lossy_asymmetry():
    ch = splitter.derive_channels(splitter.SplitterSpec(0.5, 0.5),
                                  splitter.EfficiencySpec(eps_r=0.1, eps_t=0.2),
                                  splitter.Convention.SCATTERED_ONLY)
    for n in range(1, 13):
        st = splitter.stats_partition_multinomial(n, ch)
        var_r = n * ch.r_eff * (ch.t_eff + ch.loss)
        var_t = n * ch.t_eff * (ch.r_eff + ch.loss)
        assert abs(st.var_r - var_r) <= 1e-12
        assert abs(st.var_t - var_t) <= 1e-12
        assert abs(n * ch.r_eff * (1 - ch.r_eff) - st.var_r) <= 1e-12
        assert abs(st.var_r - st.var_t) > 1e-3


@criterion(3, "indist trace at Omega dt = 0.7, beta = 0.995 fits gamma/Omega = 0.039 +/- 0.005")
def test_indist_damping_rate():
    with Timer() as tm:
        params = rabi.RabiParams(1.0, 0.7, 0.995)
        t_max = 40.0  # about 12.7 periods of sin^2
        tr = rabi.trace(rabi.Model.INDIST, params, t_max, 400, depth=5)
        fit = fit_trace(tr, 1.0, t_max)
    print(f"\n[3] gamma/Omega = {fit.gamma_over_omega:.5f}, {tm.elapsed:.2f} s")
    assert t_max * 1.0 / math.pi >= 6
    assert fit.converged
    assert abs(fit.gamma_over_omega - 0.039) <= 0.005
    assert tm.elapsed < 10.0


REDUCTION_SETS = [(1.0, 0.05), (1.0, 0.3), (2.5, 0.1), (0.4, 0.7), (3.0, 0.02)]


@criterion(4, "beta = 1 and eta = 1 reduce to sin^2 at grid nodes (1e-10, < 1 s)")
def test_closed_reductions():
    worst = 0.0
    with Timer() as tm:
        for om, dt in REDUCTION_SETS:
            n_max = 200
            nodes = np.arange(n_max + 1) * dt
            exact = np.sin(om * nodes) ** 2
            grid = rabi.build_dp_grid(rabi.RabiParams(om, dt, 1.0), 5, n_max)
            worst = max(worst, float(np.max(np.abs(grid.pg - exact))))
            worst = max(worst, float(np.max(np.abs(
                rabi.indist_curve(rabi.RabiParams(om, dt, 1.0), 5, nodes) - exact))))
            dist = rabi.dist_curve(rabi.DistParams(om, dt, 1.0), nodes)
            worst = max(worst, float(np.max(np.abs(dist - exact))))
    print(f"\n[4] max abs err {worst:.2e}, {tm.elapsed:.3f} s")
    assert worst <= 1e-10
    assert tm.elapsed < 1.0


@criterion(5, "approx traces follow 2(1-beta) Omega^2 dt within 10% (< 10 s)")
def test_quadratic_law():
    devs = []
    with Timer() as tm:
        for beta in (0.99, 0.995):
            for odt in (0.01, 0.02, 0.05):
                params = rabi.RabiParams(1.0, odt, beta)
                tr = rabi.trace(rabi.Model.APPROX, params, 200.0, 4001)
                fit = fitting.fit_gamma(tr, 1.0, fitting.FitWindow(0.0, 200.0), 0.1)
                devs.append(abs(fit.gamma / rabi.gamma_quadratic(params) - 1))
    print(f"\n[5] max rel dev {max(devs):.2e}, {tm.elapsed:.2f} s")
    assert max(devs) <= 0.10
    assert tm.elapsed < 10.0


@criterion(6, "sideband sweep levels 0..6: exponent 0.7 +/- 0.1, ratios inside guides (< 60 s)")
def test_sideband_ladder_exponent():
    with Timer() as tm:
        omega0 = rabi.freq_ladder(1.0, 0)
        base = rabi.RabiParams(1.0, 0.2 / omega0, 0.995)
        res = fitting.eid_sweep(base, 5, list(range(7)))
    print(f"\n[6] exponent {res.exponent:.4f} +/- {res.exponent_stderr:.4f}, "
          f"ratios {np.round(res.ratios, 4).tolist()}, {tm.elapsed:.2f} s")
    assert base.delta_t * res.omegas[0] == pytest.approx(0.2, rel=1e-12)
    assert abs(res.exponent - 0.7) <= 0.1
    for n, r in zip(res.levels, res.ratios):
        assert (1 + n) ** 0.6 - 1e-12 <= r <= (1 + n) ** 0.8 + 1e-12, f"level {n}: ratio {r}"
    assert tm.elapsed < 60.0


@criterion(7, "dist traces at Omega dt = 0.08: eta 0.99 -> 0.05 +/- 0.008, eta 0.997 -> 0.015 +/- 0.003")
def test_distinguishable_damping_rates():
    got = {}
    with Timer() as tm:
        for eta in (0.99, 0.997):
            params = rabi.DistParams(1.0, 0.08, eta)
            tr = rabi.trace(rabi.Model.DIST, params, 40.0, 400)
            got[eta] = fit_trace(tr, 1.0, 40.0).gamma_over_omega
    print(f"\n[7] gamma/Omega {got}, {tm.elapsed:.2f} s")
    assert tm.elapsed < 10.0
    ok = abs(got[0.99] - 0.05) <= 0.008 and abs(got[0.997] - 0.015) <= 0.003
    assert ok, (f"eta=0.99: gamma/Omega = {got[0.99]:.4f} (want 0.05 +/- 0.008); "
                f"eta=0.997: gamma/Omega = {got[0.997]:.4f} (want 0.015 +/- 0.003)")


@criterion(8, "dist damping at Omega and 4 Omega agree within 10% (< 10 s)")
def test_distinguishable_omega_independence():
    gammas = []
    with Timer() as tm:
        for om in (1.0, 4.0):
            params = rabi.DistParams(om, 0.08, 0.99)
            tr = rabi.trace(rabi.Model.DIST, params, 40.0, 1600)
            gammas.append(fit_trace(tr, om, 40.0).gamma)
    print(f"\n[8] gamma {gammas}, {tm.elapsed:.2f} s")
    assert rel_err(gammas[0], gammas[1]) <= 0.10
    assert tm.elapsed < 10.0


def _hand_expanded_n4(om, dt, beta):
    b = lambda k: math.comb(4, k) * beta**k * (1 - beta) ** (4 - k)
    s2 = lambda m: math.sin(om * m * dt) ** 2
    c2 = lambda m: math.cos(om * m * dt) ** 2
    return (b(4) * (s2(4) * c2(0) + c2(4) * s2(0))
            + b(3) * (s2(3) * c2(1) + c2(3) * s2(1))
            + b(2) * (s2(2) * c2(2) + c2(2) * s2(2))
            + b(1) * (s2(1) * c2(3) + c2(1) * s2(3))
            + b(0) * (s2(0) * c2(4) + c2(0) * s2(4)))


@criterion(9, "DP row 1 equals the direct single-event sum for n <= 100 (1e-12, < 1 s)")
def test_depth_one():
    worst = 0.0
    with Timer() as tm:
        for om, dt, beta in ((1.0, 0.7, 0.995), (1.3, 0.11, 0.9), (0.5, 0.3, 0.6)):
            grid = rabi.build_dp_grid(rabi.RabiParams(om, dt, beta), 1, 100, truncate=False)
            for n in range(101):
                worst = max(worst, abs(grid.pg[1, n] - verify.one_event_direct(om, dt, beta, n)))
            worst = max(worst, abs(grid.pg[1, 4] - _hand_expanded_n4(om, dt, beta)))
    print(f"\n[9] max abs err {worst:.2e}, {tm.elapsed:.3f} s")
    assert worst <= 1e-12
    assert tm.elapsed < 1.0


def _cli(*args, cwd):
    proc = subprocess.run([sys.executable, "-m", "branchsim", *args], capture_output=True,
                          cwd=cwd, check=False)
    return proc.returncode, proc.stdout, proc.stderr


INVOCATIONS = {
    "splitter": ["splitter", "--n", "5", "--r", "0.5", "--eps-r", "0.1", "--eps-t", "0.2",
                 "--convention", "scattered", "--method", "all", "--format", "json"],
    "rabi-trace": ["rabi-trace", "--model", "indist", "--omega", "1", "--dt", "0.7",
                   "--beta", "0.995", "--t-max", "40", "--samples", "400"],
    "fit": ["fit", "--input", "trace.csv", "--omega", "1"],
    "eid": ["eid", "--omega0", "1", "--dt", "0.2", "--levels", "0..6"],
    "verify": ["verify", "--quick"],
}


@criterion(10, "identical CLI invocations give byte-identical output")
@pytest.mark.parametrize("command", list(INVOCATIONS))
def test_cli_determinism(command, tmp_path):
    _cli("rabi-trace", "--model", "indist", "--omega", "1", "--dt", "0.7", "--beta", "0.995",
         "--t-max", "40", "--samples", "400", "--out", "trace.csv", cwd=tmp_path)
    first = _cli(*INVOCATIONS[command], cwd=tmp_path)
    second = _cli(*INVOCATIONS[command], cwd=tmp_path)
    assert first[0] == 0, first[2].decode()
    assert first == second
