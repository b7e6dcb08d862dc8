"""Experiment runner: declarative INI configs, one subcommand per study.

Config files are flat UTF-8 key = value text under section headers.  Every
run resolves its configuration (defaults filled in), writes the data files,
a manifest echoing the resolved configuration, and one figure per study
unless --no-plot is given.  Re-running from a manifest reproduces the data
files byte for byte; a --workers flag changes wall-clock only, never
results.
"""

from __future__ import annotations

import argparse
import configparser
import io
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import __version__, streams
from .cumulant import (
    CumulantProfile,
    LevyModel,
    NormalLaw,
    TwoPointLaw,
    brownian,
    optimal_particles,
)
from .errors import ConfigError, InsufficientSignal, NoCramerRoot, ToolkitError
from .flemingviot import (
    BirthDeathDomain,
    BrownianDomain,
    burn_in,
    convergence_curve,
    fv_system,
)
from .parallel import ParallelSpec, sweep_phase_transition
from .paths import SimConfig
from .queueing import (
    QueueConfig,
    naive_pi_hat,
    renewal_estimator,
    fv_pi_hat,
    stationary_pi,
    variance_link_check,
)
from .restart import (
    BrownianQsd,
    EmpiricalMeasure,
    TruncatedExponential,
    restart_gain_report,
    simulate_restarted_passage,
)
from .tables import ResultTable

__all__ = ["ExperimentSpec", "parse_config", "run", "list_recipes", "main", "RECIPES"]

KINDS = (
    "cumulant-report",
    "parallel-sweep",
    "restart-run",
    "restart-gain",
    "fv-converge",
    "mm1-appendix1",
    "mm1k-appendix3",
)

ENV_SEED = "RARE_REACH_SEED"


@dataclass(frozen=True)
class ExperimentSpec:
    """Fully resolved experiment: kind, seed, format and per-section keys."""

    kind: str
    seed: int
    fmt: str
    sections: dict


# ---------------------------------------------------------------------------
# config schema and parsing
# ---------------------------------------------------------------------------

_MODEL_KEYS = {
    "twopoint": {"p"},
    "normal": {"mean_step", "var_step"},
    "levy": {
        "drift_mu",
        "sigma",
        "pos_rate",
        "pos_jump_rate",
        "neg_rate",
        "neg_jump_rate",
    },
    "brownian": {"mu", "sigma"},
}

_MEASURE_KEYS = {
    "truncexp": {"rate"},
    "brownian-qsd": {"mu"},
    "point": {"location"},
}

_SCHEMA: dict[str, dict[str, set[str]]] = {
    "cumulant-report": {"model": set(), "report": {"budget_slope"}},
    "parallel-sweep": {
        "model": set(),
        "sweep": {"budget_slope", "barriers", "particles", "reps", "tilt", "dt"},
    },
    "restart-run": {
        "model": set(),
        "measure": set(),
        "restart": {"x", "horizons", "runs", "dt"},
    },
    "restart-gain": {
        "model": set(),
        "measure": set(),
        "gain": {"barriers", "budget_mult", "runs", "q_cycles", "dt"},
    },
    "fv-converge": {
        "fv": {
            "domain",
            "p_up",
            "interior_max",
            "mu",
            "sigma",
            "upper",
            "dt",
            "n_grid",
            "run_length",
            "seeds",
        }
    },
    "mm1-appendix1": {
        "queue": {"arrival_rate", "service_rate", "capacity"},
        "study": {"k_fit", "k_test", "budget_per_k", "c", "reps"},
    },
    "mm1k-appendix3": {
        "queue": {"arrival_rate", "service_rate", "capacity", "absorb_threshold"},
        "study": {
            "k",
            "horizons",
            "seeds",
            "methods",
            "fv_particles",
            "fv_run_length",
        },
    },
}

_EXPERIMENT_KEYS = {"kind", "seed", "format"}


def _fail(msg: str) -> "ConfigError":
    return ConfigError(msg)


class _Section:
    """Typed accessors over one section with key validation and echo."""

    def __init__(self, name: str, raw: dict, allowed: set[str], extra: set[str]):
        self.name = name
        self.raw = raw
        self.resolved: dict[str, str] = {}
        allowed_all = allowed | extra
        for key in raw:
            if key not in allowed_all:
                raise _fail(f"unknown key '{key}' in section [{name}]")

    def _get(self, key: str, default):
        if key in self.raw:
            return self.raw[key]
        if default is _REQUIRED:
            raise _fail(f"missing required key '{key}' in section [{self.name}]")
        return default

    def str_(self, key: str, default=None) -> str:
        val = self._get(key, default)
        val = str(val)
        self.resolved[key] = val
        return val

    def float_(self, key: str, default=None) -> float:
        val = self._get(key, default)
        try:
            out = float(val)
        except (TypeError, ValueError):
            raise _fail(f"key '{key}' in [{self.name}] must be a number, got {val!r}")
        self.resolved[key] = repr(out)
        return out

    def int_(self, key: str, default=None) -> int:
        val = self._get(key, default)
        try:
            out = int(str(val))
        except (TypeError, ValueError):
            raise _fail(f"key '{key}' in [{self.name}] must be an integer, got {val!r}")
        self.resolved[key] = str(out)
        return out

    def bool_(self, key: str, default=None) -> bool:
        val = self._get(key, default)
        if isinstance(val, bool):
            out = val
        elif str(val).lower() in {"true", "yes", "1", "on"}:
            out = True
        elif str(val).lower() in {"false", "no", "0", "off"}:
            out = False
        else:
            raise _fail(f"key '{key}' in [{self.name}] must be a boolean, got {val!r}")
        self.resolved[key] = "true" if out else "false"
        return out

    def floats_(self, key: str, default=None) -> tuple[float, ...]:
        val = self._get(key, default)
        if isinstance(val, tuple):
            out = tuple(float(v) for v in val)
        else:
            try:
                out = tuple(float(v) for v in str(val).split(",") if v.strip())
            except ValueError:
                raise _fail(f"key '{key}' in [{self.name}] must be a comma list")
        if not out:
            raise _fail(f"key '{key}' in [{self.name}] must be a nonempty list")
        self.resolved[key] = ",".join(repr(v) for v in out)
        return out

    def ints_(self, key: str, default=None) -> tuple[int, ...]:
        vals = self.floats_(key, default)
        out = tuple(int(v) for v in vals)
        if any(abs(a - b) > 0 for a, b in zip(out, vals)):
            raise _fail(f"key '{key}' in [{self.name}] must list integers")
        self.resolved[key] = ",".join(str(v) for v in out)
        return out


_REQUIRED = object()


def _build_model(sec: _Section):
    family = sec.str_("family", _REQUIRED).lower()
    if family not in _MODEL_KEYS:
        raise _fail(f"unknown model family '{family}'")
    try:
        if family == "twopoint":
            p = sec.float_("p", _REQUIRED)
            if not 0.0 < p < 0.5:
                raise _fail(
                    f"p={p} violates the Cramer condition: a TwoPoint walk needs "
                    "0 < p < 1/2 (strictly negative mean) for barrier crossing "
                    "to be a rare event"
                )
            return TwoPointLaw(p)
        if family == "normal":
            mean = sec.float_("mean_step", _REQUIRED)
            var = sec.float_("var_step", 1.0)
            if not mean < 0.0:
                raise _fail(
                    f"mean_step={mean} violates the Cramer condition "
                    "(needs a strictly negative mean)"
                )
            return NormalLaw(mean, var)
        if family == "brownian":
            mu = sec.float_("mu", _REQUIRED)
            if not mu > 0.0:
                raise _fail(
                    f"mu={mu} violates the Cramer condition (drift -mu must point away "
                    "from the barrier)"
                )
            return brownian(mu, sec.float_("sigma", 1.0))
        model = LevyModel(
            drift_mu=sec.float_("drift_mu", _REQUIRED),
            sigma=sec.float_("sigma", 1.0),
            pos_rate=sec.float_("pos_rate", 0.0),
            pos_jump_rate=sec.float_("pos_jump_rate", 1.0),
            neg_rate=sec.float_("neg_rate", 0.0),
            neg_jump_rate=sec.float_("neg_jump_rate", 1.0),
        )
        try:
            CumulantProfile.from_model(model)
        except NoCramerRoot as exc:
            raise _fail(f"Levy model violates the Cramer condition: {exc}")
        return model
    except ToolkitError:
        raise
    except ValueError as exc:
        raise _fail(str(exc))


def _build_measure(sec: _Section, upper: float):
    family = sec.str_("family", _REQUIRED).lower()
    if family not in _MEASURE_KEYS:
        raise _fail(f"unknown measure family '{family}'")
    if family == "truncexp":
        return TruncatedExponential(rate=sec.float_("rate", _REQUIRED), upper=upper)
    if family == "brownian-qsd":
        return BrownianQsd(mu=sec.float_("mu", _REQUIRED), upper=upper)
    loc = sec.float_("location", _REQUIRED)
    if not 0.0 < loc < upper:
        raise _fail(f"point location {loc} must lie strictly inside (0, {upper})")
    return EmpiricalMeasure(samples=(loc,), upper=upper)


def parse_config(
    text: str, seed_override: int | None = None
) -> ExperimentSpec:
    """Parse and validate an INI config (or manifest) into an ExperimentSpec."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise _fail(f"malformed config: {exc}")
    if "experiment" not in parser:
        raise _fail("config must contain an [experiment] section")
    exp = dict(parser["experiment"])
    for key in exp:
        if key not in _EXPERIMENT_KEYS:
            raise _fail(f"unknown key '{key}' in section [experiment]")
    kind = exp.get("kind", "").strip()
    if kind not in KINDS:
        raise _fail(f"unknown kind '{kind}'; expected one of {', '.join(KINDS)}")
    fmt = exp.get("format", "csv").strip().lower()
    if fmt not in {"csv", "json"}:
        raise _fail(f"format must be csv or json, got '{fmt}'")
    if seed_override is not None:
        seed = seed_override
    elif "seed" in exp:
        try:
            seed = int(exp["seed"])
        except ValueError:
            raise _fail(f"seed must be an integer, got {exp['seed']!r}")
    elif ENV_SEED in os.environ:
        try:
            seed = int(os.environ[ENV_SEED])
        except ValueError:
            raise _fail(f"environment seed {ENV_SEED} must be an integer")
    else:
        seed = 0

    allowed_sections = set(_SCHEMA[kind]) | {"experiment", "meta"}
    sections: dict[str, dict[str, str]] = {}
    for name in parser.sections():
        if name == "meta":
            continue  # manifests carry provenance here; ignored on re-run
        if name not in allowed_sections:
            raise _fail(f"unknown section [{name}] for kind '{kind}'")
        if name != "experiment":
            sections[name] = dict(parser[name])
    for required in _SCHEMA[kind]:
        sections.setdefault(required, {})
    # reject unknown keys before any simulation starts
    for name, raw in sections.items():
        extra: set[str] = set()
        if name == "model":
            extra = set().union(*_MODEL_KEYS.values()) | {"family"}
        elif name == "measure":
            extra = set().union(*_MEASURE_KEYS.values()) | {"family"}
        _Section(name, raw, _SCHEMA[kind].get(name, set()), extra)
    return ExperimentSpec(kind=kind, seed=seed, fmt=fmt, sections=sections)


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------


def _section(spec: ExperimentSpec, name: str, extra: set[str] = frozenset()) -> _Section:
    allowed = _SCHEMA[spec.kind].get(name, set())
    if name == "model":
        extra = set().union(*(_MODEL_KEYS.values())) | {"family"}
    if name == "measure":
        extra = set().union(*(_MEASURE_KEYS.values())) | {"family"}
    return _Section(name, spec.sections.get(name, {}), allowed, set(extra))


def _write(table: ResultTable, out: Path, stem: str, fmt: str) -> Path:
    path = out / f"{stem}.{fmt}"
    return table.to_csv(path) if fmt == "csv" else table.to_json(path)


def _run_cumulant_report(spec, out, workers, plot):
    msec = _section(spec, "model")
    model = _build_model(msec)
    rsec = _section(spec, "report")
    slope = rsec.float_("budget_slope", 0.0)
    profile = CumulantProfile.from_model(model)
    columns = [
        "lambdaStar",
        "lambdaZero",
        "lambdaMax",
        "psiPrimeAtStar",
        "psiSecondAtStar",
    ]
    row = [
        profile.lambda_star,
        profile.lambda_zero,
        profile.lambda_max,
        profile.drift_at_star,
        profile.psi_second(profile.lambda_star),
    ]
    if slope > 0.0:
        columns += ["budgetSlope", "thresholdN", "nStar"]
        row += [slope, profile.drift_at_star * slope, optimal_particles(profile, slope)]
    table = ResultTable(columns=tuple(columns), rows=[tuple(row)])
    files = [_write(table, out, "cumulant-report", spec.fmt)]
    if plot:
        from .report import cumulant_figure

        files.append(cumulant_figure(profile, out / "cumulant-report.png"))
    return files, {"model": msec.resolved, "report": rsec.resolved}


def _run_parallel_sweep(spec, out, workers, plot):
    msec = _section(spec, "model")
    model = _build_model(msec)
    ssec = _section(spec, "sweep")
    pspec = ParallelSpec(
        model=model,
        budget_slope=ssec.float_("budget_slope", _REQUIRED),
        barriers=ssec.floats_("barriers", _REQUIRED),
        particle_grid=tuple(ssec.ints_("particles", _REQUIRED)),
        reps=ssec.int_("reps", 1000),
        tilt_at_lambda_star=ssec.bool_("tilt", True),
        master_seed=spec.seed,
        sim=SimConfig(master_seed=spec.seed, dt=ssec.float_("dt", 0.01)),
    )
    table = sweep_phase_transition(pspec, workers=workers)
    files = [_write(table, out, "parallel-sweep", spec.fmt)]
    if plot:
        from .report import parallel_sweep_figure

        files.append(parallel_sweep_figure(table, out / "parallel-sweep.png"))
    return files, {"model": msec.resolved, "sweep": ssec.resolved}


def _run_restart_run(spec, out, workers, plot):
    msec = _section(spec, "model")
    model = _build_model(msec)
    rsec = _section(spec, "restart")
    x = rsec.float_("x", _REQUIRED)
    horizons = rsec.floats_("horizons", _REQUIRED)
    runs = rsec.int_("runs", 100)
    cfg = SimConfig(master_seed=spec.seed, dt=rsec.float_("dt", 0.01))
    qsec = _section(spec, "measure")
    measure = _build_measure(qsec, upper=x)

    run_rows = []
    summary_rows = []
    for h_idx, horizon in enumerate(horizons):
        succ = 0
        for r in range(runs):
            rng = streams.stream(spec.seed, "restart-run", h_idx, r)
            res = simulate_restarted_passage(model, measure, x, horizon, cfg, rng)
            succ += res.success
            run_rows.append(
                (horizon, r, res.success, res.total_time, res.cycle_count)
            )
        p = succ / runs
        ci = 1.96 * math.sqrt(max(p * (1 - p), 0.0) / runs)
        summary_rows.append((horizon, p, ci, runs))
    runs_table = ResultTable(
        columns=("horizon", "run", "success", "totalTime", "cycleCount"),
        rows=run_rows,
    )
    summary = ResultTable(
        columns=("horizon", "successProb", "ci", "runs"), rows=summary_rows
    )
    files = [
        _write(runs_table, out, "restart-runs", spec.fmt),
        _write(summary, out, "restart-summary", spec.fmt),
    ]
    if plot:
        from .report import restart_run_figure

        files.append(restart_run_figure(summary, out / "restart-run.png"))
    return files, {
        "model": msec.resolved,
        "measure": qsec.resolved,
        "restart": rsec.resolved,
    }


def _run_restart_gain(spec, out, workers, plot):
    msec = _section(spec, "model")
    model = _build_model(msec)
    gsec = _section(spec, "gain")
    barriers = gsec.floats_("barriers", _REQUIRED)
    mult = gsec.float_("budget_mult", 10.0)
    runs = gsec.int_("runs", 400)
    q_cycles = gsec.int_("q_cycles", 3000)
    cfg = SimConfig(master_seed=spec.seed, dt=gsec.float_("dt", 0.01))
    qsec = _section(spec, "measure")

    rows = []
    for x in barriers:
        measure = _build_measure(_section(spec, "measure"), upper=x)
        rep = restart_gain_report(
            model,
            measure,
            x,
            budget=mult * x,
            reps=runs,
            cfg=cfg,
            master_seed=spec.seed,
            q_cycles=q_cycles,
        )
        rows.append(
            (
                rep.x,
                rep.budget,
                rep.gain,
                rep.ci_half_width,
                rep.q_hat,
                rep.beta_hat,
                rep.exp_moment_star,
                rep.analytic_prediction,
                rep.saturated_prediction,
                rep.p_restart,
                rep.p_passage,
            )
        )
    table = ResultTable(
        columns=(
            "x",
            "B",
            "G",
            "ci",
            "qHat",
            "betaHat",
            "expMoment",
            "analyticPrediction",
            "saturatedPrediction",
            "pRestart",
            "pPassage",
        ),
        rows=rows,
    )
    files = [_write(table, out, "restart-gain", spec.fmt)]
    if plot:
        from .report import restart_gain_figure

        files.append(restart_gain_figure(table, out / "restart-gain.png"))
    return files, {
        "model": msec.resolved,
        "measure": qsec.resolved,
        "gain": gsec.resolved,
    }


def _run_fv_converge(spec, out, workers, plot):
    fsec = _section(spec, "fv")
    domain_name = fsec.str_("domain", _REQUIRED).lower()
    if domain_name == "birth-death":
        domain = BirthDeathDomain(
            p_up=fsec.float_("p_up", _REQUIRED),
            interior_max=fsec.int_("interior_max", _REQUIRED),
        )
    elif domain_name == "brownian":
        domain = BrownianDomain(
            mu=fsec.float_("mu", _REQUIRED),
            upper=fsec.float_("upper", _REQUIRED),
            sigma=fsec.float_("sigma", 1.0),
            dt=fsec.float_("dt", 0.01),
        )
    else:
        raise _fail(f"unknown fv domain '{domain_name}'")
    n_grid = tuple(fsec.ints_("n_grid", _REQUIRED))
    run_length = fsec.float_("run_length", _REQUIRED)
    seeds = fsec.int_("seeds", 3)
    table = convergence_curve(
        domain, n_grid, run_length, master_seed=spec.seed, seeds=seeds
    )
    files = [_write(table, out, "fv-converge", spec.fmt)]

    system = fv_system(domain, n_grid[-1], spec.seed, key="fv-snapshot")
    burn_in(system)
    snap = ResultTable(
        columns=("time", "particle", "position"),
        rows=[
            (system.clock, i, float(pos)) for i, pos in enumerate(system.positions)
        ],
    )
    files.append(_write(snap, out, "fv-snapshot", spec.fmt))
    if plot:
        from .report import fv_converge_figure

        files.append(fv_converge_figure(table, out / "fv-converge.png"))
    return files, {"fv": fsec.resolved}


def _run_mm1_appendix1(spec, out, workers, plot):
    qsec = _section(spec, "queue")
    cfg = QueueConfig(
        arrival_rate=qsec.float_("arrival_rate", _REQUIRED),
        service_rate=qsec.float_("service_rate", _REQUIRED),
        capacity=qsec.int_("capacity", _REQUIRED),
    )
    ssec = _section(spec, "study")
    k_fit = ssec.int_("k_fit", 10)
    k_test = ssec.int_("k_test", 15)
    budget_per_k = ssec.float_("budget_per_k", 30.0)
    c = ssec.float_("c", stationary_pi(cfg, k_fit))
    reps = ssec.int_("reps", 200)
    rows = []
    for k in (k_fit, k_test):
        rep = variance_link_check(
            cfg, k, budget_per_k * k, c, reps, master_seed=spec.seed
        )
        rows.append(
            (
                rep.k,
                rep.c,
                rep.var_pi,
                rep.var_xi,
                rep.p_hit,
                rep.implied_const,
                rep.events_used,
            )
        )
    table = ResultTable(
        columns=("k", "c", "varPi", "varXi", "pHit", "impliedConst", "eventsUsed"),
        rows=rows,
    )
    files = [_write(table, out, "mm1-appendix1", spec.fmt)]
    if plot:
        from .report import variance_link_figure

        files.append(variance_link_figure(table, out / "mm1-appendix1.png"))
    return files, {"queue": qsec.resolved, "study": ssec.resolved}


def _run_mm1k_appendix3(spec, out, workers, plot):
    qsec = _section(spec, "queue")
    cfg = QueueConfig(
        arrival_rate=qsec.float_("arrival_rate", _REQUIRED),
        service_rate=qsec.float_("service_rate", _REQUIRED),
        capacity=qsec.int_("capacity", _REQUIRED),
        absorb_threshold=qsec.int_("absorb_threshold", _REQUIRED),
    )
    ssec = _section(spec, "study")
    k = ssec.int_("k", cfg.capacity)
    horizons = tuple(int(h) for h in ssec.floats_("horizons", _REQUIRED))
    seeds = ssec.int_("seeds", 3)
    methods = tuple(
        m.strip() for m in ssec.str_("methods", "naive,renewal").split(",") if m.strip()
    )
    fv_particles = ssec.int_("fv_particles", 500)
    fv_run_length = ssec.int_("fv_run_length", 2000)
    for m in methods:
        if m not in {"naive", "renewal", "fv", "exact"}:
            raise _fail(f"unknown estimation method '{m}'")

    rows = []
    for horizon in horizons:
        for seed_idx in range(seeds):
            mseed = streams.derive_seed(spec.seed, "mm1k", seed_idx)
            for method in methods:
                note = ""
                if method == "exact":
                    est, ci, events = stationary_pi(cfg, k), 0.0, 0
                elif method == "naive":
                    rep = naive_pi_hat(
                        cfg, k, horizon, reps=1, master_seed=mseed,
                        budget_in_events=True,
                    )
                    est, ci, events = rep.estimate, rep.ci_half_width, rep.events_used
                elif method == "renewal":
                    try:
                        rep = renewal_estimator(cfg, k, horizon, master_seed=mseed)
                        est, ci, events = (
                            rep.estimate,
                            rep.ci_half_width,
                            rep.events_used,
                        )
                    except InsufficientSignal:
                        est, ci, events, note = 0.0, math.inf, horizon, "no-signal"
                else:
                    rep = fv_pi_hat(
                        cfg, k, fv_particles, fv_run_length, master_seed=mseed
                    )
                    est, ci, events = rep.estimate, rep.ci_half_width, rep.events_used
                rows.append((method, k, est, ci, events, seed_idx, horizon, note))
    table = ResultTable(
        columns=("method", "k", "estimate", "ci", "eventsUsed", "seeds", "horizon", "note"),
        rows=rows,
    )
    files = [_write(table, out, "mm1k-appendix3", spec.fmt)]
    if plot:
        from .report import queue_compare_figure

        files.append(
            queue_compare_figure(table, stationary_pi(cfg, k), out / "mm1k-appendix3.png")
        )
    return files, {"queue": qsec.resolved, "study": ssec.resolved}


_RUNNERS = {
    "cumulant-report": _run_cumulant_report,
    "parallel-sweep": _run_parallel_sweep,
    "restart-run": _run_restart_run,
    "restart-gain": _run_restart_gain,
    "fv-converge": _run_fv_converge,
    "mm1-appendix1": _run_mm1_appendix1,
    "mm1k-appendix3": _run_mm1k_appendix3,
}


def run(
    spec: ExperimentSpec,
    out_dir: str | Path,
    workers: int = 1,
    plot: bool = True,
) -> list[Path]:
    """Execute one experiment; returns the written files (manifest last)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    files, resolved = _RUNNERS[spec.kind](spec, out, workers, plot)
    manifest = configparser.ConfigParser(interpolation=None)
    manifest["meta"] = {
        "toolkit": "rare-reach",
        "version": __version__,
        "wallclock_seconds": f"{time.time() - started:.3f}",
    }
    manifest["experiment"] = {
        "kind": spec.kind,
        "seed": str(spec.seed),
        "format": spec.fmt,
    }
    for name in sorted(resolved):
        manifest[name] = dict(sorted(resolved[name].items()))
    buf = io.StringIO()
    manifest.write(buf)
    manifest_path = out / "manifest.txt"
    manifest_path.write_text(buf.getvalue(), encoding="utf-8")
    files.append(manifest_path)
    return files


# ---------------------------------------------------------------------------
# built-in recipes
# ---------------------------------------------------------------------------

RECIPES: dict[str, str] = {
    "fig1": """\
[experiment]
kind = parallel-sweep
seed = 11

[model]
family = twopoint
p = 0.45

[sweep]
budget_slope = 300
barriers = 20,100,500
particles = 1,5,10,15,20,25,28,30,32,35,40,50,60,80
reps = 400
""",
    "fig2": """\
[experiment]
kind = parallel-sweep
seed = 12

[model]
family = levy
drift_mu = 1
sigma = 1
pos_rate = 2
pos_jump_rate = 4
neg_rate = 3
neg_jump_rate = 1

[sweep]
budget_slope = 15
barriers = 6,10,14
particles = 1,5,10,20,30,36,40,44,50,60,80
reps = 300
dt = 0.01
""",
    "fig3": """\
[experiment]
kind = restart-run
seed = 13

[model]
family = levy
drift_mu = 1
sigma = 1
pos_rate = 2
pos_jump_rate = 4
neg_rate = 3
neg_jump_rate = 1

[measure]
family = truncexp
rate = 0.1

[restart]
x = 20
horizons = 150,600,2400
runs = 100
dt = 0.01
""",
    "fig4": """\
[experiment]
kind = mm1k-appendix3
seed = 14

[queue]
arrival_rate = 0.7
service_rate = 1.0
capacity = 40
absorb_threshold = 12

[study]
k = 40
horizons = 100000,1000000,10000000
seeds = 3
methods = naive,renewal,fv
fv_particles = 500
fv_run_length = 2000
""",
    "appendix1": """\
[experiment]
kind = mm1-appendix1
seed = 15

[queue]
arrival_rate = 0.7
service_rate = 1.0
capacity = 40

[study]
k_fit = 10
k_test = 15
budget_per_k = 30
reps = 200
""",
}

# generous wall-clock budgets (seconds) on a 4-core laptop
RECIPE_BUDGETS: dict[str, float] = {
    "fig1": 240.0,
    "fig2": 300.0,
    "fig3": 120.0,
    "fig4": 300.0,
    "appendix1": 120.0,
}


def list_recipes() -> list[str]:
    """Names of the built-in experiment recipes."""
    return sorted(RECIPES)


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------


def _build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rare-reach",
        description="rare-event exploration experiments: parallel splitting and restart",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        p.add_argument("--config", type=str, default=None, help="INI config path")
        p.add_argument("--recipe", type=str, default=None, help="built-in recipe name")
        p.add_argument("--seed", type=int, default=None, help="master seed (u64)")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", type=str, default=".", help="output directory")
        p.add_argument("--format", type=str, default=None, choices=["csv", "json"])
        p.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    sub.add_parser("list-recipes", help="print built-in recipe names")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_arg_parser().parse_args(argv)
    if args.command == "list-recipes":
        for name in list_recipes():
            print(name)
        return 0
    try:
        if args.config is not None and args.recipe is not None:
            raise ConfigError("give either --config or --recipe, not both")
        if args.config is not None:
            text = Path(args.config).read_text(encoding="utf-8")
        elif args.recipe is not None:
            if args.recipe not in RECIPES:
                raise ConfigError(
                    f"unknown recipe '{args.recipe}'; available: {', '.join(list_recipes())}"
                )
            text = RECIPES[args.recipe]
        else:
            raise ConfigError("one of --config or --recipe is required")
        spec = parse_config(text, seed_override=args.seed)
        if spec.kind != args.command:
            raise ConfigError(
                f"config kind '{spec.kind}' does not match subcommand '{args.command}'"
            )
        if args.format is not None:
            spec = ExperimentSpec(
                kind=spec.kind, seed=spec.seed, fmt=args.format, sections=spec.sections
            )
        files = run(spec, args.out, workers=args.workers, plot=not args.no_plot)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in files:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
