"""Command-line interface.

Subcommands: ``splitter``, ``rabi-trace``, ``fit``, ``eid`` and ``verify``.
Every subcommand also accepts ``--config FILE``, a JSON object whose keys
mirror the long flag names; flags given on the command line take precedence.

Exit codes: 0 ok, 1 verification failure, 2 invalid parameters,
3 resource limit, 4 unconverged fit.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from . import __version__, fitting, rabi, splitter, verify
from .errors import (
    BranchSimError,
    DomainError,
    ResourceLimitError,
    UnconvergedFitError,
)

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3
EXIT_UNCONVERGED = 4

TRACE_HEADER = ("t", "p_g", "p_e")
EID_HEADER = ("level", "omega_n", "gamma_n", "ratio")
SPLITTER_HEADER = ("method", "n", "r_eff", "t_eff", "loss",
                   "mean_r", "mean_t", "mean_rt", "var_r", "var_t", "cov_rt")


class UsageError(DomainError):
    pass


def fmt(x: float) -> str:
    """Round-trippable decimal with 17 significant digits."""
    return format(float(x), ".17g")


def _flag(x: Any) -> bool:
    if isinstance(x, bool):
        return x
    if isinstance(x, str) and x.lower() in ("1", "true", "yes"):
        return True
    if isinstance(x, str) and x.lower() in ("0", "false", "no"):
        return False
    raise UsageError(f"expected a boolean, got {x!r}")


def _levels(x: Any) -> list[int]:
    """``"0..6"``, ``"0,2,4"`` or a list of integers."""
    if isinstance(x, (list, tuple)):
        return [int(v) for v in x]
    text = str(x).strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",") if v.strip()]


def _windows(x: Any) -> dict[int, list[float]]:
    """``["6:0:30", ...]`` from flags, or ``{"6": [0, 30]}`` from a config file."""
    out = {}
    if isinstance(x, dict):
        for k, v in x.items():
            out[int(k)] = [float(v[0]), float(v[1])]
        return out
    for item in x:
        parts = str(item).split(":")
        if len(parts) != 3:
            raise UsageError(f"window must be LEVEL:T_MIN:T_MAX, got {item!r}")
        out[int(parts[0])] = [float(parts[1]), float(parts[2])]
    return out


@dataclass(frozen=True)
class Option:
    name: str
    convert: Callable[[Any], Any]
    default: Any = None
    choices: tuple | None = None
    help: str = ""
    action: str | None = None


SPLITTER_OPTS = [
    Option("n", int, None, help="number of incident photons"),
    Option("r", float, None, help="reflection probability R (T = 1 - R)"),
    Option("eps-r", float, 0.0, help="failure probability of the reflected-port detector"),
    Option("eps-t", float, 0.0, help="failure probability of the transmitted-port detector"),
    Option("w-b", float, 1.0, help="weight of the measurable system"),
    Option("convention", str, "all", ("all", "scattered"),
           help="ensemble of all prepared photons or only scattered ones"),
    Option("method", str, "multinomial",
           ("closed", "binomial", "multinomial", "enumerate", "all")),
    Option("format", str, "csv", ("csv", "json")),
    Option("out", str, None, help="output file (default stdout)"),
]

TRACE_OPTS = [
    Option("model", str, "indist", tuple(m.value for m in rabi.Model)),
    Option("omega", float, 1.0, help="Rabi frequency"),
    Option("dt", float, None, help="interference timescale"),
    Option("beta", float, None, help="indist/approx: probability an interval precedes an event"),
    Option("eta", float, None, help="dist: probability of not being perturbed at a node"),
    Option("depth", int, rabi.DEFAULT_DEPTH, help="indist recursion depth"),
    Option("t-max", float, None, help="end of the sampled interval"),
    Option("samples", int, 400),
    Option("out", str, None, help="output CSV (default stdout)"),
]

FIT_OPTS = [
    Option("input", str, None, help="trace CSV with header t,p_g,p_e"),
    Option("omega", float, None, help="Rabi frequency of the model"),
    Option("t-min", float, 0.0),
    Option("t-max", float, None, help="default: last sample time"),
    Option("gamma-hi", float, None, help="upper end of the gamma search (default: omega)"),
    Option("free-amplitude", _flag, False, action="store_true"),
    Option("fit-omega", _flag, False, action="store_true"),
]

EID_OPTS = [
    Option("omega0", float, 1.0, help="Rabi frequency of level 0"),
    Option("dt", float, None, help="interference timescale"),
    Option("beta", float, 0.995),
    Option("depth", int, rabi.DEFAULT_DEPTH),
    Option("levels", _levels, "0..6", help="e.g. 0..6 or 0,1,2"),
    Option("window", _windows, [], help="per-level fit window LEVEL:T_MIN:T_MAX (repeatable)",
           action="append"),
    Option("samples-per-period", int, 50),
    Option("gamma-hi-factor", float, 1.0),
    Option("format", str, "json", ("json", "csv")),
    Option("out", str, None),
]

VERIFY_OPTS = [
    Option("quick", _flag, False, action="store_true", help="reduced grids"),
    Option("inject-fault", str, None, tuple(verify.SUITES),
           help="perturb one suite to check that the checker fails it"),
]


def _add_options(parser: argparse.ArgumentParser, opts: list[Option]) -> None:
    parser.add_argument("--config", help="JSON file of option values")
    for o in opts:
        dest = o.name.replace("-", "_")
        if o.action == "store_true":
            parser.add_argument(f"--{o.name}", dest=dest, action="store_true", help=o.help)
        elif o.action == "append":
            parser.add_argument(f"--{o.name}", dest=dest, action="append", help=o.help)
        else:
            parser.add_argument(f"--{o.name}", dest=dest, choices=o.choices, help=o.help)


def _resolve(args: argparse.Namespace, opts: list[Option]) -> dict[str, Any]:
    """Merge defaults, config file and command-line flags into one parameter dict."""
    file_values: dict[str, Any] = {}
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(doc, dict):
            raise UsageError("config file must hold a JSON object")
        doc = {k.replace("_", "-"): v for k, v in doc.items()}
        doc.pop("command", None)
        known = {o.name for o in opts}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        file_values = doc
    merged = {}
    for o in opts:
        flag = getattr(args, o.name.replace("-", "_"), None)
        if o.action == "store_true":
            flag = True if flag else None
        value = flag if flag is not None else file_values.get(o.name, o.default)
        if value is not None:
            try:
                value = o.convert(value)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"--{o.name}: {exc}") from exc
            if o.choices and value not in o.choices:
                raise UsageError(f"--{o.name} must be one of {', '.join(o.choices)}")
        merged[o.name.replace("-", "_")] = value
    return merged


def _require(params: dict[str, Any], *names: str) -> None:
    missing = [n for n in names if params.get(n) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join(
            "--" + n.replace("_", "-") for n in missing))


def _echo(params: dict[str, Any]) -> dict[str, Any]:
    return {k: v for k, v in params.items() if k != "out"}


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    return x


def _dump_json(payload: dict[str, Any]) -> str:
    return json.dumps(_json_safe(payload), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _dump_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else (str(v) if isinstance(v, int) else fmt(v))
                         for v in row])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_splitter(params: dict[str, Any]) -> int:
    _require(params, "n", "r")
    n = params["n"]
    spec = splitter.SplitterSpec.from_reflect(params["r"])
    eff = splitter.EfficiencySpec(params["eps_r"], params["eps_t"], params["w_b"])
    channels = splitter.derive_channels(spec, eff, params["convention"])
    lossless = channels.loss == 0.0
    method = params["method"]
    if method == "all":
        methods = (["closed", "binomial"] if lossless else []) + ["multinomial", "enumerate"]
    else:
        methods = [method]
        if method in ("closed", "binomial") and not lossless:
            raise UsageError(f"method {method!r} has no loss channel; use multinomial or enumerate")
    lossless_spec = splitter.SplitterSpec(channels.r_eff, channels.t_eff) if lossless else None
    routes = {
        "closed": lambda: splitter.stats_lossless_closed(n, lossless_spec),
        "binomial": lambda: splitter.stats_partition_binomial(n, lossless_spec),
        "multinomial": lambda: splitter.stats_partition_multinomial(n, channels),
        "enumerate": lambda: splitter.stats_enumerate(n, channels),
    }
    results = {m: routes[m]() for m in methods}
    if params["format"] == "json":
        text = _dump_json({
            "params": _echo(params),
            "channels": {"r_eff": channels.r_eff, "t_eff": channels.t_eff, "loss": channels.loss},
            "results": {m: st.as_dict() for m, st in results.items()},
        })
    else:
        rows = [(m, n, channels.r_eff, channels.t_eff, channels.loss, *st.as_tuple())
                for m, st in results.items()]
        text = _dump_csv(SPLITTER_HEADER, rows)
    _emit(text, params["out"])
    return EXIT_OK


def _trace_params(params: dict[str, Any]):
    model = rabi.Model(params["model"])
    if model is rabi.Model.CLOSED:
        return rabi.RabiParams(params["omega"], params["dt"] or 1.0, 1.0)
    _require(params, "dt")
    if model is rabi.Model.DIST:
        _require(params, "eta")
        return rabi.DistParams(params["omega"], params["dt"], params["eta"])
    _require(params, "beta")
    return rabi.RabiParams(params["omega"], params["dt"], params["beta"])


def cmd_rabi_trace(params: dict[str, Any]) -> int:
    _require(params, "t_max")
    model_params = _trace_params(params)
    tr = rabi.trace(params["model"], model_params, params["t_max"], params["samples"],
                    depth=params["depth"])
    rows = ((t, p, 1.0 - p) for t, p in zip(tr.t.tolist(), tr.p.tolist()))
    _emit(_dump_csv(TRACE_HEADER, rows), params["out"])
    return EXIT_OK


def read_trace_csv(path: str | Path) -> rabi.ProbabilityTrace:
    """Parse a trace CSV with header ``t,p_g,p_e``."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    if not rows or tuple(c.strip() for c in rows[0]) != TRACE_HEADER:
        raise UsageError(f"{path}: header must be {','.join(TRACE_HEADER)}")
    t, p = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise UsageError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
        try:
            t.append(float(row[0]))
            p.append(float(row[1]))
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: {exc}") from exc
    try:
        return rabi.ProbabilityTrace(t, p)
    except BranchSimError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def cmd_fit(params: dict[str, Any]) -> int:
    _require(params, "input", "omega")
    tr = read_trace_csv(params["input"])
    if len(tr) == 0:
        raise UsageError("trace is empty")
    t_max = params["t_max"] if params["t_max"] is not None else float(tr.t[-1])
    window = fitting.FitWindow(params["t_min"], t_max)
    gamma_hi = params["gamma_hi"] if params["gamma_hi"] is not None else params["omega"]
    fit = fitting.fit_gamma(tr, params["omega"], window, gamma_hi,
                            free_amplitude=params["free_amplitude"],
                            fit_omega=params["fit_omega"])
    payload = {
        "gamma": fit.gamma,
        "gamma_over_omega": fit.gamma_over_omega,
        "rms": fit.rms,
        "window": window.as_dict(),
        "converged": fit.converged,
        "params": _echo(params),
    }
    if params["free_amplitude"]:
        payload["amplitude"], payload["offset"] = fit.amplitude, fit.offset
    if params["fit_omega"]:
        payload["omega_fit"] = fit.omega
    sys.stdout.write(_dump_json(payload))
    if not fit.converged:
        print("fit did not converge: gamma sits on the upper search bound", file=sys.stderr)
        return EXIT_UNCONVERGED
    return EXIT_OK


def cmd_eid(params: dict[str, Any]) -> int:
    _require(params, "dt")
    base_omega = params["omega0"] / rabi.freq_ladder(1.0, 0)
    base = rabi.RabiParams(base_omega, params["dt"], params["beta"])
    windows = {lvl: fitting.FitWindow(*w) for lvl, w in (params["window"] or {}).items()}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = fitting.eid_sweep(base, params["depth"], params["levels"], windows,
                                params["samples_per_period"], params["gamma_hi_factor"])
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if params["format"] == "csv":
        rows = zip(res.levels, res.omegas, res.gammas, res.ratios)
        text = _dump_csv(EID_HEADER, rows)
        print(f"exponent {fmt(res.exponent)} stderr {fmt(res.exponent_stderr)}", file=sys.stderr)
    else:
        text = _dump_json({
            "params": _echo(params),
            "levels": [
                {"level": n, "omega_n": om, "gamma_n": g, "ratio": r,
                 "window": f.window.as_dict()}
                for n, om, g, r, f in zip(res.levels, res.omegas, res.gammas, res.ratios, res.fits)
            ],
            "exponent": res.exponent,
            "exponent_stderr": res.exponent_stderr,
        })
    _emit(text, params["out"])
    return EXIT_OK


def cmd_verify(params: dict[str, Any]) -> int:
    results = verify.run_all(quick=params["quick"], inject=params["inject_fault"])
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


COMMANDS = {
    "splitter": (SPLITTER_OPTS, cmd_splitter, "occupation statistics at a beam splitter"),
    "rabi-trace": (TRACE_OPTS, cmd_rabi_trace, "sample a Rabi model to CSV"),
    "fit": (FIT_OPTS, cmd_fit, "fit a damped sinusoid to a trace CSV"),
    "eid": (EID_OPTS, cmd_eid, "damping factors along the sideband frequency ladder"),
    "verify": (VERIFY_OPTS, cmd_verify, "run the oracle-equivalence suites"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="branchsim",
        description="Born probabilities and occupation statistics for branching open systems.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (opts, _, help_text) in COMMANDS.items():
        _add_options(sub.add_parser(name, help=help_text, description=help_text), opts)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    opts, handler, _ = COMMANDS[args.command]
    try:
        params = _resolve(args, opts)
        return handler(params)
    except ResourceLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except UnconvergedFitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNCONVERGED
    except BranchSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
