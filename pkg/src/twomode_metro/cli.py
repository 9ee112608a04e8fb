"""Command-line front end: analyze, sweep, estimate, bounds.

Configuration comes from an optional JSON file (``--config``) overlaid with
command-line flags.  Every CSV starts with ``#`` comment lines holding the
fully resolved configuration.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import criteria, estimation, fockspace
from .errors import (
    ConfigError,
    EstimatorUndefined,
    InvalidArgument,
    InvalidMoments,
    InvalidPovm,
    NotIncoherentError,
    NumericalInconsistency,
    TruncationError,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

STATE_PARAMS = {
    "caves": ("alpha_mag", "phi_alpha", "r", "theta_zeta"),
    "fock": ("n_a", "n_b"),
    "noon": ("N",),
    "separable": ("seed", "max_N", "n_terms"),
}
POVM_KINDS = ("number_difference", "parity", "photon_counting")
ANALYTIC_COLUMNS = ("chi2_analytic", "xi2_analytic")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class StateSpec:
    kind: str = "caves"
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class SweepSpec:
    param: str = "r"
    min: float = 0.0
    max: float = 1.0
    steps: int = 11


@dataclass
class RunConfig:
    command: str = "analyze"
    state: StateSpec = field(default_factory=StateSpec)
    cutoff: int | str = "auto"
    tail: float = fockspace.TAIL_THRESHOLD
    frame: str | dict = "mach_zehnder"
    povm: str = "number_difference"
    port: str = "b"
    theta_true: float | None = None
    m: int = 1
    n_trials: int = 500
    seed: int = 0
    window: list[float] | None = None
    sweep: SweepSpec = field(default_factory=SweepSpec)
    mean_N: float | None = None
    mean_N2: float | None = None
    out: str | None = None
    resolved_cutoff: list[int] | None = None

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    def validate(self) -> None:
        if self.command not in ("analyze", "sweep", "estimate", "bounds"):
            raise ConfigError(f"unknown command {self.command!r}")
        kind = self.state.kind
        if kind not in STATE_PARAMS:
            raise ConfigError(f"unknown state kind {kind!r}; choose from {sorted(STATE_PARAMS)}")
        unknown = set(self.state.params) - set(STATE_PARAMS[kind])
        if unknown:
            raise ConfigError(f"state kind {kind!r} does not take {sorted(unknown)}")
        if self.cutoff != "auto" and (not isinstance(self.cutoff, int) or self.cutoff < 1):
            raise ConfigError("cutoff must be 'auto' or an integer >= 1")
        if not 0 < self.tail < 1:
            raise ConfigError("tail must lie in (0, 1)")
        if not isinstance(self.m, int) or self.m < 1:
            raise ConfigError("m must be an integer >= 1")
        if not isinstance(self.n_trials, int) or self.n_trials < 1:
            raise ConfigError("n_trials must be an integer >= 1")
        if self.povm not in POVM_KINDS:
            raise ConfigError(f"povm must be one of {POVM_KINDS}")
        if self.port not in ("a", "b"):
            raise ConfigError("port must be 'a' or 'b'")
        if self.command == "sweep":
            sw = self.sweep
            if not isinstance(sw.steps, int) or sw.steps < 1:
                raise ConfigError("sweep steps must be an integer >= 1")
            if sw.param not in STATE_PARAMS[kind]:
                raise ConfigError(f"cannot sweep {sw.param!r} for state kind {kind!r}")
        if self.window is not None and (len(self.window) != 2 or self.window[0] >= self.window[1]):
            raise ConfigError("window must be [theta_min, theta_max] with theta_min < theta_max")
        if self.mean_N is not None and self.mean_N <= 0:
            raise ConfigError("mean_N must be positive")
        if self.mean_N2 is not None and self.mean_N is None:
            raise ConfigError("mean_N2 requires mean_N")
        self.frame_obj()

    def frame_obj(self) -> fockspace.SpinFrame:
        if self.frame == "mach_zehnder":
            return fockspace.mach_zehnder_frame()
        if isinstance(self.frame, dict) and {"n1", "n2"} <= set(self.frame):
            try:
                return fockspace.SpinFrame.from_vectors(self.frame["n1"], self.frame["n2"])
            except InvalidArgument as exc:
                raise ConfigError(f"bad frame: {exc}") from exc
        raise ConfigError("frame must be 'mach_zehnder' or {'n1': [...], 'n2': [...]}")


def _load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def _config_from_dict(data: dict) -> RunConfig:
    data = dict(data)
    state = data.pop("state", {}) or {}
    sweep = data.pop("sweep", {}) or {}
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    try:
        cfg = RunConfig(**data)
        cfg.state = StateSpec(kind=state.get("kind", "caves"), params=dict(state.get("params", {})))
        cfg.sweep = SweepSpec(**sweep)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _parse_cutoff(text: str) -> int | str:
    if text == "auto":
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("cutoff must be 'auto' or an integer") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twomode-metro", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("analyze", "sweep", "estimate", "bounds"):
        p = sub.add_parser(name)
        p.add_argument("--config")
        p.add_argument("--out")
        p.add_argument("--seed", type=int)
        p.add_argument("--cutoff", type=_parse_cutoff)
        p.add_argument("--tail", type=float)
        p.add_argument("--state", dest="state_kind", choices=sorted(STATE_PARAMS))
        for par in ("alpha_mag", "phi_alpha", "r", "theta_zeta"):
            p.add_argument(f"--{par.replace('_', '-')}", dest=par, type=float)
        for par in ("n_a", "n_b", "N", "max_N", "n_terms", "state_seed"):
            p.add_argument(f"--{par.replace('_', '-')}", dest=par, type=int)
        p.add_argument("--m", type=int)
        if name == "sweep":
            p.add_argument("--param", dest="sweep_param")
            p.add_argument("--min", dest="sweep_min", type=float)
            p.add_argument("--max", dest="sweep_max", type=float)
            p.add_argument("--steps", dest="sweep_steps", type=int)
        if name == "estimate":
            p.add_argument("--povm", choices=POVM_KINDS)
            p.add_argument("--port", choices=("a", "b"))
            p.add_argument("--theta", dest="theta_true", type=float)
            p.add_argument("--n-trials", dest="n_trials", type=int)
            p.add_argument("--window", nargs=2, type=float)
        if name == "bounds":
            p.add_argument("--mean-N", dest="mean_N", type=float)
            p.add_argument("--mean-N2", dest="mean_N2", type=float)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    data = _load_config_file(args.config) if args.config else {}
    cfg = _config_from_dict(data)
    cfg.command = args.command
    ns = vars(args)
    for key in ("out", "seed", "cutoff", "tail", "m", "povm", "port", "theta_true",
                "n_trials", "window", "mean_N", "mean_N2"):
        if ns.get(key) is not None:
            setattr(cfg, key, ns[key])
    if ns.get("state_kind"):
        if ns["state_kind"] != cfg.state.kind:
            cfg.state = StateSpec(kind=ns["state_kind"])
    for par in ("alpha_mag", "phi_alpha", "r", "theta_zeta", "n_a", "n_b", "N", "max_N", "n_terms"):
        if ns.get(par) is not None:
            cfg.state.params[par] = ns[par]
    if ns.get("state_seed") is not None:
        cfg.state.params["seed"] = ns["state_seed"]
    for key in ("param", "min", "max", "steps"):
        val = ns.get(f"sweep_{key}")
        if val is not None:
            setattr(cfg.sweep, key, val)
    cfg.validate()
    if cfg.command == "sweep" or (cfg.command == "bounds" and cfg.mean_N is not None):
        return cfg
    # resolve "auto" before anything else runs; sweeps resolve per point
    b = resolve_basis(cfg)
    cfg.resolved_cutoff = [b.cutoff_a, b.cutoff_b]
    return cfg


# ---------------------------------------------------------------------------
# state construction
# ---------------------------------------------------------------------------

def _caves_params(params: dict) -> fockspace.CavesParams:
    try:
        return fockspace.CavesParams(
            alpha_mag=float(params.get("alpha_mag", 0.0)),
            phi_alpha=float(params.get("phi_alpha", 0.0)),
            r=float(params.get("r", 0.0)),
            theta_zeta=params.get("theta_zeta"),
        )
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from exc


def resolve_basis(cfg: RunConfig, params: dict | None = None) -> fockspace.FockBasis:
    """Explicit cutoffs are symmetric; "auto" picks per-mode cutoffs."""
    params = cfg.state.params if params is None else params
    kind = cfg.state.kind
    if cfg.cutoff != "auto":
        return fockspace.build_basis(int(cfg.cutoff))
    if kind == "caves":
        return fockspace.auto_cutoff(_caves_params(params), cfg.tail)
    if kind == "fock":
        return fockspace.build_basis(max(1, int(params.get("n_a", 0)), int(params.get("n_b", 0))))
    if kind == "noon":
        return fockspace.build_basis(max(1, int(params.get("N", 1))))
    return fockspace.build_basis(max(1, int(params.get("max_N", 4))))


def make_state(cfg: RunConfig, params: dict | None = None):
    """(state, CavesParams or None) for the configured state spec."""
    params = cfg.state.params if params is None else params
    kind = cfg.state.kind
    basis = resolve_basis(cfg, params)
    if kind == "caves":
        p = _caves_params(params)
        return fockspace.caves_state(p, basis, cfg.tail), p
    if kind == "fock":
        return fockspace.fock_state(int(params.get("n_a", 0)), int(params.get("n_b", 0)), basis), None
    if kind == "noon":
        return fockspace.noon_state(int(params.get("N", 1)), basis), None
    state = fockspace.random_separable_state(
        int(params.get("seed", cfg.seed)),
        int(params.get("max_N", 4)),
        int(params.get("n_terms", 1)),
        basis,
    )
    return state, None


# ---------------------------------------------------------------------------
# CSV helpers
# ---------------------------------------------------------------------------

def format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return format(v, ".17g")
    return str(value)


def parse_cell(text: str):
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def write_csv(fh, cfg: RunConfig, columns, rows, extra_comments=()):
    fh.write(f"# config: {cfg.to_json()}\n")
    for line in extra_comments:
        fh.write(f"# {line}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_cell(row[c]) for c in columns])


def read_csv(text: str) -> tuple[list[str], list[dict], list[str]]:
    """(columns, rows, comment lines) from text written by :func:`write_csv`."""
    comments = [ln[1:].strip() for ln in text.splitlines() if ln.startswith("#")]
    body = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    reader = csv.reader(body)
    columns = next(reader)
    rows = [dict(zip(columns, map(parse_cell, r))) for r in reader]
    return columns, rows, comments


def _emit(cfg: RunConfig, columns, rows, extra_comments=(), stdout=None):
    stdout = sys.stdout if stdout is None else stdout
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            write_csv(fh, cfg, columns, rows, extra_comments)
    else:
        write_csv(stdout, cfg, columns, rows, extra_comments)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _analytic(p: fockspace.CavesParams | None) -> dict:
    if p is None or not p.phase_locked:
        return {"chi2_analytic": math.nan, "xi2_analytic": math.nan}
    return {
        "chi2_analytic": criteria.caves_chi2_analytic(p),
        "xi2_analytic": criteria.caves_xi2_analytic(p),
    }


def _analysis_row(cfg: RunConfig, params: dict) -> tuple[dict, criteria.MetroReport]:
    state, p = make_state(cfg, params)
    rep = criteria.report(state, cfg.frame_obj(), cfg.m)
    sizes = {"cutoff_a": state.basis.cutoff_a, "cutoff_b": state.basis.cutoff_b}
    return {**rep.row(), **_analytic(p), **sizes}, rep


def cmd_analyze(cfg: RunConfig, stdout=None) -> criteria.MetroReport:
    stdout = sys.stdout if stdout is None else stdout
    row, rep = _analysis_row(cfg, cfg.state.params)
    table = [
        ("<N>", rep.mean_N), ("<N^2>", rep.mean_N2), ("F_Q", rep.fq),
        ("chi^2", rep.chi2), ("xi^2", rep.xi2), ("dtheta_QCR", rep.dtheta_qcr),
        ("dtheta_SN", rep.sn_limit), ("bound_inc", rep.hl_bounds.bound_inc),
        ("bound_HL", rep.hl_bounds.bound_hl), ("bound_coh", rep.hl_bounds.bound_coh),
        ("entangled", rep.entangled), ("spin-squeezed", rep.squeezed),
    ]
    if cfg.state.kind == "caves":
        table.insert(4, ("chi^2 (closed form)", row["chi2_analytic"]))
        table.insert(6, ("xi^2 (closed form)", row["xi2_analytic"]))
    for name, val in table:
        print(f"{name:>22}  {format_cell(val)}", file=stdout)
    columns = criteria.REPORT_COLUMNS + ANALYTIC_COLUMNS + ("cutoff_a", "cutoff_b")
    if cfg.out:
        _emit(cfg, columns, [row], stdout=stdout)
    return rep


def cmd_sweep(cfg: RunConfig, stdout=None) -> list[dict]:
    sw = cfg.sweep
    values = np.linspace(sw.min, sw.max, sw.steps)
    rows = []
    for v in values:
        params = dict(cfg.state.params)
        params[sw.param] = int(v) if sw.param in ("n_a", "n_b", "N", "max_N", "n_terms", "seed") else float(v)
        row, _ = _analysis_row(cfg, params)
        rows.append({sw.param: params[sw.param], **row})
    columns = (sw.param,) + criteria.REPORT_COLUMNS + ANALYTIC_COLUMNS + ("cutoff_a", "cutoff_b")
    _emit(cfg, columns, rows, stdout=stdout)
    return rows


def _make_povm(cfg: RunConfig, basis):
    if cfg.povm == "number_difference":
        return estimation.povm_number_difference(basis)
    if cfg.povm == "parity":
        return estimation.povm_parity(basis, cfg.port)
    return estimation.povm_photon_counting(basis)


def cmd_estimate(cfg: RunConfig, stdout=None) -> estimation.EstimationRun:
    stdout = sys.stdout if stdout is None else stdout
    state, _ = make_state(cfg)
    frame = cfg.frame_obj()
    axis = frame.n2
    povm = _make_povm(cfg, state.basis)
    theta = cfg.theta_true
    if theta is None:
        theta, _ = estimation.find_working_point(state, axis, povm)
    run = estimation.run_estimation(
        state, theta, axis, povm, cfg.m, cfg.n_trials, cfg.seed, cfg.window
    )
    fq = criteria.fisher_information(state, axis)
    qcr = criteria.qcr_bound(fq, cfg.m)
    sn = criteria.shot_noise_limit(state.mean_N(), cfg.m)
    hl = 1.0 / (cfg.m * state.mean_N())
    summary = (
        f"summary theta_true={format_cell(run.theta_true)} mean={format_cell(run.mean)} "
        f"std={format_cell(run.std)} rms={format_cell(run.rms_error)} "
        f"qcr={format_cell(qcr)} sn={format_cell(sn)} hl={format_cell(hl)} "
        f"rms/qcr={format_cell(run.rms_error / qcr)} sub_shot_noise={format_cell(run.rms_error < sn)}"
    )
    rows = [{"trial": i, "theta_est": float(t)} for i, t in enumerate(run.estimates)]
    rows += [
        {"trial": "mean", "theta_est": run.mean},
        {"trial": "std", "theta_est": run.std},
        {"trial": "rms", "theta_est": run.rms_error},
    ]
    print(summary, file=stdout if cfg.out else sys.stderr)
    _emit(cfg, ("trial", "theta_est"), rows, extra_comments=[summary], stdout=stdout)
    return run


BOUND_REGIMES = (
    ("sn_limit", "1/sqrt(m<N>)", "separable states (any N statistics)"),
    ("bound_inc", "max[1/sqrt(m<N^2>), 1/(m<N>)]", "SSR states / incoherent mixtures"),
    ("bound_hl", "1/(m<N>)", "Heisenberg limit: SSR states, or coherent states with SSR POVMs"),
    ("bound_coh", "1/sqrt(m<N^2>)", "coherent states measured with coherent POVMs"),
)


def cmd_bounds(cfg: RunConfig, stdout=None) -> dict:
    stdout = sys.stdout if stdout is None else stdout
    if cfg.mean_N is not None:
        mean_N = cfg.mean_N
        mean_N2 = cfg.mean_N2 if cfg.mean_N2 is not None else mean_N**2
    else:
        state, _ = make_state(cfg)
        mean_N, mean_N2 = state.mean_N(), state.mean_N2()
    hb = criteria.heisenberg_bounds(mean_N, mean_N2, cfg.m)
    vals = {
        "mean_N": mean_N, "mean_N2": mean_N2, "m": cfg.m,
        "sn_limit": criteria.shot_noise_limit(mean_N, cfg.m),
        "bound_inc": hb.bound_inc, "bound_hl": hb.bound_hl, "bound_coh": hb.bound_coh,
    }
    print(f"<N>={format_cell(mean_N)}  <N^2>={format_cell(mean_N2)}  m={cfg.m}", file=stdout)
    for key, formula, regime in BOUND_REGIMES:
        print(f"{key:>10}  {format_cell(vals[key]):>24}  {formula:<32} {regime}", file=stdout)
    if cfg.out:
        _emit(cfg, tuple(vals), [vals], stdout=stdout)
    return vals


COMMANDS = {
    "analyze": cmd_analyze,
    "sweep": cmd_sweep,
    "estimate": cmd_estimate,
    "bounds": cmd_bounds,
}


def main(argv=None, stdout=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return_code = EXIT_OK
        COMMANDS[cfg.command](cfg, stdout=stdout)
    except (ConfigError, InvalidArgument, InvalidMoments, InvalidPovm, TruncationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalInconsistency, EstimatorUndefined, NotIncoherentError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return return_code


if __name__ == "__main__":
    sys.exit(main())
