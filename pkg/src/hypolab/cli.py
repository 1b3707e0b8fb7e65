"""Experiment runner: config parsing, orchestration, report emission.

Config files are flat key/value text with dotted sections::

    potential.kind = double_well
    grid.N_x = 128
    evolve.dt = 0.02

Command-line flags override file values.  Subcommands: gap, tune, verify,
evolve, sample, sweep, all.  The full report is printed as JSON; with --out
it is also written to report.json plus one CSV per trace and a summary.txt
digest.  Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 IO error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .corrector import (
    bochner_residual,
    bochner_test_suite,
    build_corrector,
    dissipation_form_min_eig,
    verify_corrector_bounds,
)
from .discretize import (
    assemble_operators,
    build_grid,
    build_velocity_basis,
    check_structure,
    poincare_constant,
)
from .errors import ConfigurationError, PreconditionError
from .evolve import (
    estimate_rate,
    initial_condition,
    integrate,
    lyapunov_derivative_check,
    verify_decay_bound,
)
from .model import Potential, default_domain, gibbs_model
from .sampler import SdeConfig, estimate_observable_decay, run_ensemble
from .tuning import TuningInputs, check_ratio_consistency, optimize_friction

SUBCOMMANDS = ("gap", "tune", "verify", "evolve", "sample", "sweep", "all")
BOUND_SLACK = 0.05  # acceptance tolerance on the corrector bounds


@dataclass
class ExperimentConfig:
    potential_kind: str = "quadratic"
    potential_params: tuple = ()
    grid_l_dom: float | None = None
    grid_n_x: int = 128
    grid_n_v: int = 20
    tuning_m: float | None = None
    tuning_k: float | None = None
    tuning_gamma: float | None = None
    tuning_eps: float | None = None
    tuning_alpha: float | None = None
    evolve_t_end_factor: float = 5.0
    evolve_dt: float = 0.02
    evolve_f0: str = "random"
    seed: int = 2024
    sde_d: int = 1
    sde_particles: int = 10000
    sde_dt: float = 0.01
    sde_steps: int = 2000
    sde_gamma: float | None = None
    sde_record_every: int = 10
    sde_init_shift: float = 2.0
    sweep_gammas: tuple = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0)
    sweep_target: str = "sample"

    def echo(self) -> dict:
        """Flat dotted-key view; parsing the echo reproduces the config."""
        out = {}
        for key, name in _KEYMAP.items():
            value = getattr(self, name)
            if value is None:
                continue
            if isinstance(value, tuple):
                out[key] = ",".join(repr(float(v)) for v in value)
            else:
                out[key] = value if isinstance(value, str) else repr(value)
        return out


_KEYMAP = {
    "potential.kind": "potential_kind",
    "potential.params": "potential_params",
    "grid.L_dom": "grid_l_dom",
    "grid.N_x": "grid_n_x",
    "grid.N_v": "grid_n_v",
    "tuning.m": "tuning_m",
    "tuning.K": "tuning_k",
    "tuning.gamma": "tuning_gamma",
    "tuning.eps": "tuning_eps",
    "tuning.alpha": "tuning_alpha",
    "evolve.t_end_factor": "evolve_t_end_factor",
    "evolve.dt": "evolve_dt",
    "evolve.f0": "evolve_f0",
    "seed": "seed",
    "sde.d": "sde_d",
    "sde.particles": "sde_particles",
    "sde.dt": "sde_dt",
    "sde.steps": "sde_steps",
    "sde.gamma": "sde_gamma",
    "sde.record_every": "sde_record_every",
    "sde.init_shift": "sde_init_shift",
    "sweep.gammas": "sweep_gammas",
    "sweep.target": "sweep_target",
}

_FLOAT_TUPLES = {"potential.params", "sweep.gammas"}
_STRINGS = {"potential.kind", "evolve.f0", "sweep.target"}
_INTS = {"grid.N_x", "grid.N_v", "seed", "sde.d", "sde.particles", "sde.steps",
         "sde.record_every"}


def parse_config_text(text: str) -> dict:
    """Parse the flat key = value document into a string map."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYMAP:
            raise ConfigurationError(f"{key}: unknown configuration key")
        out[key] = value
    return out


def build_config(raw: dict) -> ExperimentConfig:
    cfg = ExperimentConfig()
    for key, value in raw.items():
        name = _KEYMAP[key]
        try:
            if key in _FLOAT_TUPLES:
                parsed = tuple(float(v) for v in str(value).split(",") if v.strip())
            elif key in _STRINGS:
                parsed = str(value)
            elif key in _INTS:
                parsed = int(str(value))
            else:
                parsed = float(str(value))
        except ValueError as exc:
            raise ConfigurationError(f"{key}: {exc}")
        setattr(cfg, name, parsed)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig):
    def bad(key, msg):
        raise ConfigurationError(f"{key}: {msg}")

    if cfg.potential_kind not in ("quadratic", "double_well", "cosine_bump"):
        bad("potential.kind", f"unknown kind {cfg.potential_kind!r}")
    if cfg.grid_n_x < 16:
        bad("grid.N_x", "must be >= 16")
    if cfg.grid_n_v < 4:
        bad("grid.N_v", "must be >= 4")
    if cfg.grid_l_dom is not None and cfg.grid_l_dom <= 0:
        bad("grid.L_dom", "must be positive")
    for key, value in (
        ("tuning.m", cfg.tuning_m),
        ("tuning.gamma", cfg.tuning_gamma),
        ("tuning.eps", cfg.tuning_eps),
        ("tuning.alpha", cfg.tuning_alpha),
    ):
        if value is not None and value <= 0:
            bad(key, "must be positive")
    if cfg.tuning_k is not None and cfg.tuning_k < 0:
        bad("tuning.K", "must be nonnegative")
    if cfg.evolve_dt <= 0:
        bad("evolve.dt", "must be positive")
    if cfg.evolve_t_end_factor <= 0:
        bad("evolve.t_end_factor", "must be positive")
    if cfg.evolve_f0 not in ("zero", "gap", "velocity", "random", "all"):
        bad("evolve.f0", f"unknown initial-condition kind {cfg.evolve_f0!r}")
    if cfg.sde_particles < 100:
        bad("sde.particles", "must be >= 100")
    if cfg.sde_d < 1:
        bad("sde.d", "must be >= 1")
    if cfg.sde_dt <= 0 or cfg.sde_steps < 1:
        bad("sde.dt", "dt and steps must be positive")
    if cfg.sweep_target not in ("evolve", "sample"):
        bad("sweep.target", "must be 'evolve' or 'sample'")
    if not cfg.sweep_gammas:
        bad("sweep.gammas", "must list at least one gamma")


@dataclass
class RunReport:
    version: str
    command: str
    config: dict
    results: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    manifest: list = field(default_factory=list)
    traces: list = field(default_factory=list)  # (filename, csv-row iterable)

    def add_verdict(self, name, status, margin=None):
        self.verdicts.append({"name": name, "status": status, "margin": margin})

    @property
    def failed(self) -> bool:
        return any(v["status"] == "fail" for v in self.verdicts)

    def as_dict(self) -> dict:
        return {
            "version": self.version,
            "command": self.command,
            "config": self.config,
            "results": self.results,
            "verdicts": self.verdicts,
            "timings": self.timings,
            "manifest": self.manifest,
        }


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def report_json(report: RunReport) -> str:
    return json.dumps(report.as_dict(), indent=2, default=_json_default)


class _Workspace:
    """Lazily built grid/operators shared across subcommand stages."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.potential = Potential(cfg.potential_kind, cfg.potential_params)
        self.model = gibbs_model(self.potential)
        self._ops = None
        self._corr = None

    @property
    def l_dom(self) -> float:
        if self.cfg.grid_l_dom is not None:
            return self.cfg.grid_l_dom
        return default_domain(self.potential)

    def ops(self):
        if self._ops is None:
            grid = build_grid(self.model, self.l_dom, self.cfg.grid_n_x)
            basis = build_velocity_basis(self.cfg.grid_n_v)
            self._ops = assemble_operators(grid, basis)
            poincare_constant(self._ops)
        return self._ops

    def tuning_inputs(self) -> TuningInputs:
        m = self.cfg.tuning_m if self.cfg.tuning_m is not None else self.ops().m_h
        k = self.cfg.tuning_k if self.cfg.tuning_k is not None else self.model.K
        return TuningInputs(
            m=m, K=k, gamma=self.cfg.tuning_gamma, eps=self.cfg.tuning_eps
        )

    def tuned(self):
        inputs = self.tuning_inputs()
        return optimize_friction(inputs.m, inputs.K)

    def corrector(self):
        if self._corr is None:
            alpha = self.cfg.tuning_alpha
            self._corr = build_corrector(self.ops(), alpha)
        return self._corr


def _stage_gap(ws: _Workspace, report: RunReport):
    t0 = time.perf_counter()
    ops = ws.ops()
    report.results["gap"] = {
        "m_h": ops.m_h,
        "K": ws.model.K,
        "analytic_m": ws.model.analytic_m,
        "L_dom": ws.l_dom,
        "N_x": ops.n_x,
        "N_v": ops.n_v,
    }
    report.add_verdict("gap_positive", "pass" if ops.m_h > 0 else "fail", ops.m_h)
    report.timings["gap"] = time.perf_counter() - t0


def _stage_tune(ws: _Workspace, report: RunReport):
    t0 = time.perf_counter()
    tuned = ws.tuned()
    report.results["tuning"] = tuned.as_dict()
    chain = check_ratio_consistency(tuned.m, tuned.K)
    report.results["tuning"]["ratio_chain"] = chain
    ordering = 0 < tuned.eps_star < tuned.eps_max < 2 * tuned.gamma_star / tuned.a
    report.add_verdict(
        "eps_ordering", "pass" if ordering else "fail", tuned.eps_max - tuned.eps_star
    )
    rel = abs(tuned.Lambda - 2 * tuned.lambda_coer / 3)
    report.add_verdict("lambda_relation", "pass" if rel == 0.0 else "fail", rel)
    report.add_verdict(
        "ratio_chain", "pass" if chain["chain_holds"] else "fail",
        chain["det_over_trace"] - chain["lambda_coer"],
    )
    report.timings["tune"] = time.perf_counter() - t0


def _stage_verify(ws: _Workspace, report: RunReport):
    cfg = ws.cfg
    t0 = time.perf_counter()
    ops = ws.ops()
    structure = check_structure(ops)
    report.results["structure"] = structure.as_dict()
    report.add_verdict(
        "structure_exact", "pass", 1e-12 - structure.worst_exact()
    )
    report.timings["structure"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    corr = ws.corrector()
    norms = verify_corrector_bounds(corr)
    tuned = ws.tuned()
    gamma = cfg.tuning_gamma if cfg.tuning_gamma is not None else tuned.gamma_star
    eps = cfg.tuning_eps if cfg.tuning_eps is not None else tuned.eps_star
    min_eig, slack = dissipation_form_min_eig(corr, eps, gamma)
    norms.min_eig_q = min_eig
    norms.lambda_coer = tuned.lambda_coer
    norms.slack = slack
    report.results["corrector"] = norms.as_dict()
    for name, excess in zip(("bound_A", "bound_LaA", "bound_ALa_fast"), norms.excess):
        report.add_verdict(name, "pass" if excess <= BOUND_SLACK else "fail",
                           BOUND_SLACK - excess)
    coercive = min_eig >= tuned.lambda_coer * (1 - BOUND_SLACK)
    report.add_verdict("dissipation_coercive", "pass" if coercive else "fail",
                       min_eig / tuned.lambda_coer - (1 - BOUND_SLACK))
    report.timings["corrector"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    resids = {
        name: bochner_residual(ops, values)
        for name, values in bochner_test_suite(ops.grid).items()
    }
    report.results["bochner_residuals"] = resids
    report.add_verdict("bochner_inequality", "pass", None)
    report.timings["bochner"] = time.perf_counter() - t0


def _stage_evolve(ws: _Workspace, report: RunReport):
    cfg = ws.cfg
    t0 = time.perf_counter()
    ops = ws.ops()
    tuned = ws.tuned()
    gamma = cfg.tuning_gamma if cfg.tuning_gamma is not None else tuned.gamma_star
    eps = cfg.tuning_eps if cfg.tuning_eps is not None else tuned.eps_star
    corr = ws.corrector()
    is_tuned_gamma = abs(gamma - tuned.gamma_star) <= 1e-12 * tuned.gamma_star
    t_end = cfg.evolve_t_end_factor / tuned.Lambda
    kinds = ("gap", "velocity", "random") if cfg.evolve_f0 == "all" else (cfg.evolve_f0,)
    rates = {}
    for kind in kinds:
        f0 = initial_condition(ops, kind, seed=cfg.seed)
        t_stop = 0.0 if kind == "zero" else t_end  # zero state: t=0 row only
        trace = integrate(
            ops, f0, gamma, t_stop, cfg.evolve_dt,
            corrector=corr, eps=eps, Lambda=tuned.Lambda,
        )
        tag = f"{kind}" if len(kinds) > 1 else None
        suffix = f"_{tag}" if tag else ""
        name = f"decay_{ws.potential.name}_{gamma:g}{suffix}.csv"
        report.traces.append((name, trace))
        drift = float(np.abs(trace.mean - trace.mean[0]).max())
        report.add_verdict(f"mean_conserved{suffix}",
                           "pass" if drift <= 1e-10 else "fail", 1e-10 - drift)
        if kind == "zero":
            report.add_verdict(f"decay_bound{suffix}", "pass", 1.0)
            continue
        if is_tuned_gamma:
            holds, margin = verify_decay_bound(trace)
            report.add_verdict(f"decay_bound{suffix}",
                               "pass" if holds else "fail", margin)
            fitted = estimate_rate(trace)
            rates[f"evolve_{kind}"] = fitted
            above = fitted >= tuned.Lambda * (1 - 1e-6)
            report.add_verdict(f"rate_above_Lambda{suffix}",
                               "pass" if above else "fail",
                               fitted / tuned.Lambda - 1)
            resid = lyapunov_derivative_check(ops, corr, trace)
            report.results.setdefault("lyapunov_residuals", {})[kind] = resid
        else:
            report.add_verdict(f"decay_bound{suffix}", "skipped", None)
            rates[f"evolve_{kind}"] = estimate_rate(trace)
    report.results.setdefault("rates", {}).update(rates)
    report.results["evolve"] = {
        "gamma": gamma, "eps": eps, "Lambda": tuned.Lambda,
        "t_end": t_end, "dt": cfg.evolve_dt, "kinds": list(kinds),
    }
    report.timings["evolve"] = time.perf_counter() - t0


def _sde_config(ws: _Workspace) -> SdeConfig:
    cfg = ws.cfg
    if cfg.sde_gamma is not None:
        gamma = cfg.sde_gamma
    elif cfg.tuning_gamma is not None:
        gamma = cfg.tuning_gamma
    else:
        gamma = ws.tuned().gamma_star
    return SdeConfig(
        potential=ws.potential,
        d=cfg.sde_d,
        particles=cfg.sde_particles,
        dt=cfg.sde_dt,
        steps=cfg.sde_steps,
        gamma=gamma,
        seed=cfg.seed,
        record_every=cfg.sde_record_every,
        init_shift=cfg.sde_init_shift,
    )


def _first_moment_rate(gamma: float, a: float) -> float:
    """Slow decay rate of the 2x2 first-moment ODE d/dt (Ex, Ev)."""
    eigs = np.linalg.eigvals(np.array([[0.0, 1.0], [-a, -gamma]]))
    return float(-np.max(eigs.real))


def _stage_sample(ws: _Workspace, report: RunReport):
    cfg = ws.cfg
    t0 = time.perf_counter()
    sde = _sde_config(ws)
    trace = run_ensemble(sde)
    report.traces.append((f"sde_{ws.potential.name}_{sde.gamma:g}.csv", trace))
    v_sq = float((trace.final_v_var + trace.final_v_mean**2).mean())
    se_v = np.sqrt(2.0 / (sde.particles * sde.d))  # var of v^2 under kappa is 2
    report.results["sample"] = {
        "gamma": sde.gamma,
        "final_v_var": trace.final_v_var.tolist(),
        "final_x_var": trace.final_x_var.tolist(),
        "final_v_mean": trace.final_v_mean.tolist(),
        "final_x_mean": trace.final_x_mean.tolist(),
        "diverged": trace.diverged,
    }
    z_v = abs(v_sq - 1.0) / se_v
    report.add_verdict("equilibrium_v_sq", "pass" if z_v <= 3.0 else "fail", 3.0 - z_v)
    if ws.potential.kind == "quadratic":
        a = ws.potential.params[0]
        x_sq = float((trace.final_x_var + trace.final_x_mean**2).mean())
        se_x = np.sqrt(2.0 / (sde.particles * sde.d)) / a
        z_x = abs(x_sq - 1.0 / a) / se_x
        report.add_verdict("equilibrium_x_sq", "pass" if z_x <= 3.0 else "fail",
                           3.0 - z_x)
        if cfg.sde_init_shift != 0.0:
            rate = estimate_observable_decay(sde, cfg.sde_init_shift)
            oracle = _first_moment_rate(sde.gamma, a)
            rel = abs(rate - oracle) / oracle
            report.results["rates"] = report.results.get("rates", {})
            report.results["rates"]["sample_first_moment"] = rate
            report.results["rates"]["sample_first_moment_oracle"] = oracle
            report.add_verdict("first_moment_rate", "pass" if rel <= 0.15 else "fail",
                               0.15 - rel)
        else:
            report.add_verdict("first_moment_rate", "skipped", None)
    else:
        report.add_verdict("equilibrium_x_sq", "skipped", None)
        report.add_verdict("first_moment_rate", "skipped", None)
    report.timings["sample"] = time.perf_counter() - t0


def _stage_sweep(ws: _Workspace, report: RunReport):
    cfg = ws.cfg
    t0 = time.perf_counter()
    rates = {}
    if cfg.sweep_target == "sample":
        base = _sde_config(ws)
        for gamma in cfg.sweep_gammas:
            sde = replace(base, gamma=gamma)
            rates[f"{gamma:g}"] = estimate_observable_decay(sde, cfg.sde_init_shift)
    else:
        ops = ws.ops()
        tuned = ws.tuned()
        corr = ws.corrector()
        for gamma in cfg.sweep_gammas:
            dt = min(cfg.evolve_dt, 0.1 / gamma * 0.999)
            f0 = initial_condition(ops, "random", seed=cfg.seed)
            trace = integrate(ops, f0, gamma, cfg.evolve_t_end_factor / tuned.Lambda,
                              dt, corrector=corr, eps=tuned.eps_star,
                              Lambda=tuned.Lambda)
            rates[f"{gamma:g}"] = estimate_rate(trace)
    report.results["sweep"] = {"target": cfg.sweep_target, "rates": rates}
    if ws.potential.kind == "quadratic" and "2" in rates and len(rates) > 1:
        best = max(rates, key=rates.get)
        report.add_verdict("sweep_argmax_critical", "pass" if best == "2" else "fail",
                           None)
    else:
        report.add_verdict("sweep_argmax_critical", "skipped", None)
    report.timings["sweep"] = time.perf_counter() - t0


def run_experiment(command: str, cfg: ExperimentConfig) -> RunReport:
    if command not in SUBCOMMANDS:
        raise ConfigurationError(f"unknown subcommand {command!r}")
    report = RunReport(version=__version__, command=command, config=dict(cfg.echo()))
    ws = _Workspace(cfg)
    stages = {
        "gap": (_stage_gap,),
        "tune": (_stage_tune,),
        "verify": (_stage_verify,),
        "evolve": (_stage_gap, _stage_tune, _stage_evolve),
        "sample": (_stage_sample,),
        "sweep": (_stage_sweep,),
        "all": (_stage_gap, _stage_tune, _stage_verify, _stage_evolve, _stage_sample),
    }
    for stage in stages[command]:
        stage(ws, report)
    return report


def emit_report(report: RunReport, outdir) -> list:
    """Write report.json, trace CSVs, and summary.txt; returns the manifest."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = []
    for name, trace in report.traces:
        path = out / name
        with open(path, "w") as fh:
            for row in trace.csv_rows():
                fh.write(row + "\n")
        manifest.append(name)
    report.manifest = manifest
    lines = []
    for v in report.verdicts:
        margin = "" if v["margin"] is None else f" margin={v['margin']:.6g}"
        lines.append(f"{v['status'].upper():7s} {v['name']}{margin}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    (out / "report.json").write_text(report_json(report) + "\n")
    return manifest + ["summary.txt", "report.json"]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hypolab",
        description="Numerical laboratory for kinetic hypocoercivity estimates",
    )
    parser.add_argument("command", choices=SUBCOMMANDS)
    parser.add_argument("--config", type=str, default=None)
    parser.add_argument("--out", type=str, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--gamma", type=float, default=None)
    parser.add_argument("--eps", type=float, default=None)
    parser.add_argument("--nx", type=int, default=None)
    parser.add_argument("--nv", type=int, default=None)
    args = parser.parse_args(argv)

    try:
        raw = {}
        if args.config:
            raw = parse_config_text(Path(args.config).read_text())
        if args.seed is not None:
            raw["seed"] = str(args.seed)
        if args.gamma is not None:
            raw["tuning.gamma"] = repr(args.gamma)
            raw["sde.gamma"] = repr(args.gamma)
        if args.eps is not None:
            raw["tuning.eps"] = repr(args.eps)
        if args.nx is not None:
            raw["grid.N_x"] = str(args.nx)
        if args.nv is not None:
            raw["grid.N_v"] = str(args.nv)
        cfg = build_config(raw)
    except (ConfigurationError, PreconditionError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4

    try:
        report = run_experiment(args.command, cfg)
    except (ConfigurationError, PreconditionError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # numerical failures
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3

    try:
        if args.out:
            emit_report(report, args.out)
        print(report_json(report))
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4
    return 0 if not report.failed else 1


if __name__ == "__main__":
    sys.exit(main())
