"""Registered batch experiments, their configuration schema and result bundles.

A configuration is a TOML file::

    experiment = "modal-linear"
    seed = 1
    paths = 10000          # optional, experiment default otherwise
    batch_size = 1000      # optional
    threads = 1            # optional
    output = "results/modal-linear"   # optional

    [params]
    b = [0.0, 1.0, 0.0]

Unknown keys are rejected.  Paths are processed in fixed batches (global
path indices ``offset .. offset + batch_size``) and combined in batch order,
so results do not depend on the thread count.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .frames import PhysicalField, to_similarity
from .galerkin import cubic_projection_tensor, integrate_modal
from .hermite import BasisSpec, gaussian, project_field
from .mixing import diffusivity_fit, run_mixing, slaving_bins
from .noise import NoiseSpectrum, spectral_increments
from .origin_tracking import build_pseudotime_path, simulate_compensated_modes
from .pde_sim import (
    GridConfig,
    contraction_diagnostic,
    run_physical_burgers,
    run_similarity,
    stationary_burgers,
    weighted_norm,
)
from .slow_manifold import (
    cubic_decay,
    residual_order_check,
    residual_slope,
    simulate_slow,
    simulate_transformed,
    slow_drift_exponent,
)
from .stats import FitError, RunningMoments, fit_rate, proportion_ci

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


class RuntimeAbort(RuntimeError):
    """Experiment aborted at run time (CLI exit code 3)."""


# ---------------------------------------------------------------- schema


@dataclass(frozen=True)
class Param:
    kind: str  # float | int | bool | str | floats
    default: Any
    check: Callable[[Any], bool] | None = None
    rule: str = ""
    choices: tuple = ()


def _positive(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _coerce(name: str, spec: Param, value):
    kind = spec.kind
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"params.{name}: expected a boolean")
        out = value
    elif kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"params.{name}: expected an integer")
        out = value
    elif kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"params.{name}: expected a number")
        out = float(value)
        if not math.isfinite(out):
            raise ConfigError(f"params.{name}: must be finite")
    elif kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"params.{name}: expected a string")
        out = value
        if spec.choices and out not in spec.choices:
            raise ConfigError(f"params.{name}: must be one of {list(spec.choices)}")
    elif kind == "floats":
        if not isinstance(value, list) or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
            raise ConfigError(f"params.{name}: expected a list of numbers")
        out = [float(v) for v in value]
        if not all(math.isfinite(v) for v in out):
            raise ConfigError(f"params.{name}: entries must be finite")
    else:  # pragma: no cover - schema bug
        raise AssertionError(kind)
    if spec.check is not None and not spec.check(out):
        raise ConfigError(f"params.{name}: {spec.rule or 'constraint violated'}")
    return out


@dataclass(frozen=True)
class Experiment:
    name: str
    description: str
    params: dict[str, Param]
    runner: Callable[["RunContext", dict], tuple[dict, dict]]
    paths: int = 1
    batch_size: int = 1
    budget_s: float = 300.0
    # cross-field checks run at validation time, before any computation
    check: Callable[[dict], None] | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int
    paths: int
    batch_size: int
    threads: int
    output: str
    params: dict

    def echo(self) -> dict:
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "paths": self.paths,
            "batch_size": self.batch_size,
            "threads": self.threads,
            "output": self.output,
            "params": dict(self.params),
        }


_TOP_KEYS = {"experiment", "seed", "paths", "batch_size", "threads", "output", "params"}


def _int_field(raw, key, default, minimum):
    v = raw.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key}: expected an integer")
    if v < minimum:
        raise ConfigError(f"{key}: must be >= {minimum}")
    return v


def validate_config(raw: dict, overrides: dict | None = None) -> ExperimentConfig:
    """Check every field against the experiment schema; first violation raises."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a table")
    raw = dict(raw)
    for key, val in (overrides or {}).items():
        if val is not None:
            raw[key] = val
    unknown = sorted(set(raw) - _TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown key: {unknown[0]}")
    name = raw.get("experiment")
    if not isinstance(name, str):
        raise ConfigError("experiment: required string")
    if name not in REGISTRY:
        raise ConfigError(f"experiment: unknown experiment {name!r}")
    exp = REGISTRY[name]
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed: expected an integer in [0, 2^64)")
    paths = _int_field(raw, "paths", exp.paths, 1)
    batch = _int_field(raw, "batch_size", exp.batch_size, 1)
    threads = _int_field(raw, "threads", 1, 1)
    output = raw.get("output", f"results/{name}")
    if not isinstance(output, str) or not output:
        raise ConfigError("output: expected a non-empty string")
    given = raw.get("params", {})
    if not isinstance(given, dict):
        raise ConfigError("params: expected a table")
    unknown = sorted(set(given) - set(exp.params))
    if unknown:
        raise ConfigError(f"unknown key: params.{unknown[0]}")
    params = {}
    for key, spec in exp.params.items():
        params[key] = _coerce(key, spec, given[key]) if key in given else spec.default
    if exp.check is not None:
        try:
            exp.check(params)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"params: {exc}") from exc
    return ExperimentConfig(name, seed, paths, batch, threads, output, params)


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    return validate_config(raw, overrides)


# ---------------------------------------------------------------- running


@dataclass
class RunContext:
    config: ExperimentConfig
    budget_s: float
    started: float = field(default_factory=time.perf_counter)

    @property
    def seed(self) -> int:
        return self.config.seed

    def check_budget(self):
        elapsed = time.perf_counter() - self.started
        if elapsed > self.budget_s:
            raise RuntimeAbort(f"time budget exceeded: {elapsed:.1f} s > {self.budget_s:.0f} s")

    def batches(self):
        total, size = self.config.paths, self.config.batch_size
        return [(off, min(size, total - off)) for off in range(0, total, size)]

    def map_batches(self, fn: Callable[[int, int], Any]) -> list:
        """Apply ``fn(offset, count)`` to every batch; results in batch order."""

        def job(batch):
            out = fn(*batch)
            self.check_budget()
            return out

        jobs = self.batches()
        if self.config.threads == 1 or len(jobs) == 1:
            return [job(b) for b in jobs]
        with ThreadPoolExecutor(max_workers=self.config.threads) as pool:
            return list(pool.map(job, jobs))


@dataclass
class ResultBundle:
    config: dict
    series: dict[str, dict[str, np.ndarray]]
    summary: dict
    code_version: str = __version__
    wall_time_s: float = 0.0

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        index = {}
        for name, table in self.series.items():
            fname = f"{name}.csv"
            cols = list(table)
            data = np.column_stack([np.asarray(table[c], dtype=float).ravel() for c in cols])
            with open(out / fname, "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(cols)
                for row in data:
                    writer.writerow(["%.17g" % v for v in row])
            index[name] = {"file": fname, "columns": cols, "rows": int(data.shape[0])}
        meta = {
            "config": self.config,
            "code_version": self.code_version,
            "wall_time_s": self.wall_time_s,
            "summary": self.summary,
            "series": index,
        }
        with open(out / "metadata.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return out


def load_bundle(out_dir) -> ResultBundle:
    out = Path(out_dir)
    with open(out / "metadata.json") as fh:
        meta = json.load(fh)
    series = {}
    for name, info in meta["series"].items():
        with open(out / info["file"], newline="") as fh:
            rows = list(csv.reader(fh))
        cols = rows[0]
        data = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(cols))
        series[name] = {c: data[:, i] for i, c in enumerate(cols)}
    return ResultBundle(meta["config"], series, meta["summary"], meta["code_version"], meta["wall_time_s"])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def run(config: ExperimentConfig, write: bool = True) -> ResultBundle:
    """Run a validated configuration and (optionally) write its bundle."""
    exp = REGISTRY[config.experiment]
    ctx = RunContext(config, exp.budget_s)
    try:
        series, summary = exp.runner(ctx, config.params)
    except (RuntimeAbort, ConfigError):
        raise
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        raise RuntimeAbort(f"{type(exc).__name__}: {exc}") from exc
    bundle = ResultBundle(
        config=config.echo(),
        series={k: {c: np.asarray(v) for c, v in t.items()} for k, t in series.items()},
        summary=_jsonable(summary),
        wall_time_s=time.perf_counter() - ctx.started,
    )
    if write:
        bundle.write(config.output)
    return bundle


# ---------------------------------------------------------------- helpers


def _rate_summary(prefix, tau, series, window, seed):
    try:
        fit = fit_rate(tau, series, window, seed=seed)
    except FitError as exc:
        return {f"{prefix}_error": str(exc)}
    return {f"{prefix}": -fit.rate, f"{prefix}_ci": [-fit.ci_high, -fit.ci_low]}


def _record_every(record_dt, dt):
    return max(1, int(round(record_dt / dt)))


def _steps(horizon, dt):
    return int(round(horizon / dt))


def _moment_table(tau, moments: RunningMoments, label="u"):
    table = {"tau": tau}
    mean, var = moments.mean, moments.variance
    for k in range(mean.shape[-1]):
        table[f"mean_{label}{k}"] = mean[:, k]
    for k in range(mean.shape[-1]):
        table[f"var_{label}{k}"] = var[:, k]
    return table


def _merge(parts):
    acc = RunningMoments()
    for p in parts:
        acc.merge(p)
    return acc


# ---------------------------------------------------------------- experiments


def _modal_linear(ctx, p):
    b = np.asarray(p["b"])
    if b.size < 2:
        raise ConfigError("params.b: need at least two modes")
    spectrum = NoiseSpectrum(tuple(b))
    n = spectrum.n_modes
    u0 = np.zeros(n)
    u0[: len(p["u0"])] = p["u0"][:n]
    n_steps, every = _steps(p["tau_end"], p["dt"]), _record_every(p["record_dt"], p["dt"])

    def batch(offset, count):
        inc = spectral_increments(spectrum, count, n_steps, p["dt"], ctx.seed, offset)
        tr = integrate_modal(u0, spectrum, None, n_steps, p["dt"], increments=inc, reaction_on=False, record_every=every)
        walk = u0[0] + b[0] * np.concatenate([np.zeros((count, 1)), np.cumsum(inc[:, 0], axis=1)], axis=1)[:, ::every]
        err = float(np.max(np.abs(tr.u[:, :, 0] - walk)))
        return RunningMoments().update(tr.u), err, tr.tau

    parts = ctx.map_batches(batch)
    mom = _merge(p_[0] for p_ in parts)
    tau = parts[0][2]
    var_end = mom.variance[-1]
    summary = {"mode0_walk_max_error": max(p_[1] for p_ in parts), "tau_end": float(tau[-1])}
    for k in range(1, n):
        pred = b[k] ** 2 / k
        summary[f"stationary_var_u{k}"] = var_end[k]
        summary[f"predicted_var_u{k}"] = pred
        summary[f"rel_error_u{k}"] = (var_end[k] - pred) / pred if pred > 0 else None
    summary["var_u0_end"] = var_end[0]
    summary["predicted_var_u0_end"] = b[0] ** 2 * tau[-1]
    return {"moments": _moment_table(tau, mom)}, summary


def _modal_cubic(ctx, p):
    K = p["max_mode"]
    b = np.zeros(K + 1)
    b[: min(len(p["b"]), K + 1)] = p["b"][: K + 1]
    spectrum = NoiseSpectrum(tuple(b))
    tensor = cubic_projection_tensor(BasisSpec(K))
    u0 = np.zeros(K + 1)
    u0[0] = p["a0"]
    n_steps, every = _steps(p["tau_end"], p["dt"]), _record_every(p["record_dt"], p["dt"])

    def batch(offset, count):
        tr = integrate_modal(
            u0, spectrum, tensor, n_steps, p["dt"], ctx.seed, n_paths=count,
            reaction_on=p["reaction"], record_every=every, path_offset=offset,
        )
        return RunningMoments().update(tr.u), tr.tau

    parts = ctx.map_batches(batch)
    mom, tau = _merge(x[0] for x in parts), parts[0][1]
    summary = _rate_summary("decay_rate_mean_u0", tau, mom.mean[:, 0], p["fit_window"], ctx.seed)
    if K <= 8:
        summary["alpha_predicted"] = slow_drift_exponent(spectrum)
    return {"moments": _moment_table(tau, mom)}, summary


def _slow_model(ctx, p):
    spectrum = NoiseSpectrum(tuple(p["b"]))
    n_steps, every = _steps(p["tau_end"], p["dt"]), _record_every(p["record_dt"], p["dt"])

    def batch(offset, count):
        sp = simulate_slow(p["a0"], spectrum, n_steps, p["dt"], ctx.seed, n_paths=count, record_every=every, path_offset=offset)
        return RunningMoments().update(sp.a), sp.tau

    parts = ctx.map_batches(batch)
    mom, tau = _merge(x[0] for x in parts), parts[0][1]
    closed = cubic_decay(p["a0"], tau)
    summary = _rate_summary("decay_rate_mean_a", tau, mom.mean, p["fit_window"], ctx.seed)
    summary["alpha"] = slow_drift_exponent(spectrum)
    summary["max_abs_dev_from_zero_noise_curve"] = float(np.max(np.abs(mom.mean - closed)))
    table = {"tau": tau, "mean_a": mom.mean, "var_a": mom.variance, "zero_noise_curve": closed}
    return {"amplitude": table}, summary


def _normal_form_residual(ctx, p):
    eps = np.asarray(p["eps"])
    kw = {"noise_exponent": p["noise_exponent"]}
    full = np.array([residual_order_check(e, transform="full", **kw) for e in eps])
    lin = np.array([residual_order_check(e, transform="linear", **kw) for e in eps])
    spectrum = NoiseSpectrum(tuple(p["b"]))
    n_steps = _steps(p["tau_end"], p["dt"])

    def batch(offset, count):
        tp = simulate_transformed(
            [p["U0"], 0.0, 0.0], spectrum, n_steps, p["dt"], ctx.seed,
            n_paths=count, memory=p["memory"], path_offset=offset,
        )
        return float(np.max(np.abs(tp.U[:, :, 1:])))

    inv = max(ctx.map_batches(batch))
    summary = {
        "slope_full": residual_slope(eps, transform="full", **kw),
        "slope_linear_control": residual_slope(eps, transform="linear", **kw),
        "invariance_max_abs_U12": inv,
    }
    return {"residual": {"eps": eps, "residual_full": full, "residual_linear": lin}}, summary


def _burgers_ic(xi, mass, shift):
    u1 = mass * gaussian(xi - shift)
    u2 = mass * (0.6 * gaussian(xi + 0.5 * shift) + 0.4 * gaussian(xi - 2.0 * shift))
    return u1, u2


def _grid(p, scheme="similarity", hw="half_width", npts="n_points"):
    if p["dt"] > 0:
        return GridConfig(p[hw], p[npts], p["dt"], scheme)
    return GridConfig.stable(p[hw], p[npts], scheme)


def _check_similarity_grid(p):
    _grid(p)


def _check_physical_grids(p):
    GridConfig(p["x_half_width"], p["x_points"], p["dt"], "physical")
    GridConfig(p["xi_half_width"], p["xi_points"], p["dt"], "similarity")


def _burgers_similarity(ctx, p):
    grid = _grid(p)
    xi = grid.grid
    b = np.asarray(p["b"])
    every = _record_every(p["sample_dt"], grid.dt)
    u1, u2 = _burgers_ic(xi, p["mass"], p["shift"])
    if not np.any(b):
        n_steps = _steps(p["tau_ref"], grid.dt)
        tr = run_similarity(u1, grid, n_steps, record_every=every)
        ref = tr.values[0, -1]
        dist = weighted_norm(xi, tr.values[0] - ref, "L2K", reference=ref)
        sel = tr.times <= p["fit_window"][1]
        summary = _rate_summary("l2k_decay_rate", tr.times[sel], dist[sel], p["fit_window"], ctx.seed)
        summary["steady_vs_analytic_max"] = float(np.max(np.abs(ref - stationary_burgers(xi, p["mass"]))))
        summary["mass_drift_max"] = float(np.max(np.abs(tr.mass[0] - tr.mass[0, 0])))
        return {"convergence": {"tau": tr.times[sel], "l2k_distance": dist[sel]}}, summary

    spectrum = NoiseSpectrum(tuple(b), conservative=b[0] == 0)
    n_steps = _steps(p["tau_end"], grid.dt)

    def batch(offset, count):
        inc = spectral_increments(spectrum, count, n_steps, grid.dt, ctx.seed, offset)
        a = run_similarity(u1, grid, n_steps, spectrum=spectrum, increments=inc, record_every=every)
        c = run_similarity(u2, grid, n_steps, spectrum=spectrum, increments=inc, record_every=every)
        phi = contraction_diagnostic(xi, a.values, c.values)
        drift = np.abs(a.mass - a.mass[:, :1])
        return phi, drift, a.times

    parts = ctx.map_batches(batch)
    phi = np.concatenate([x[0] for x in parts])
    drift = np.concatenate([x[1] for x in parts])
    tau = parts[0][2]
    dphi = np.diff(phi, axis=1)
    nonincreasing = int(np.sum(dphi <= 0))
    summary = {
        "contraction_fraction": nonincreasing / dphi.size,
        "contraction_fraction_ci": proportion_ci(nonincreasing, dphi.size),
        "mass_drift_max": float(drift.max()),
        "mass_drift_per_unit_tau": float(drift.max() / max(tau[-1], 1e-300)),
        "conservative": bool(spectrum.conservative),
    }
    table = {"tau": tau, "mean_phi": phi.mean(axis=0), "max_mass_drift": drift.max(axis=0)}
    return {"contraction": table}, summary


def _burgers_physical(ctx, p):
    gp = GridConfig(p["x_half_width"], p["x_points"], p["dt"], "physical")
    gs = GridConfig(p["xi_half_width"], p["xi_points"], p["dt"], "similarity")
    t_end = p["t_end"]
    u_phys = p["mass"] * gaussian(gp.grid - p["shift"])
    u_sim = p["mass"] * gaussian(gs.grid - p["shift"])
    every = _record_every(p["sample_dt"], gp.dt)
    b = np.asarray(p["b"])
    spectrum = NoiseSpectrum(tuple(b)) if np.any(b) else None
    trp = run_physical_burgers(u_phys, gp, 1.0, _steps(t_end - 1.0, gp.dt), spectrum=spectrum, seed=ctx.seed, record_every=every)
    summary = {}
    if spectrum is not None:
        resid = np.abs(trp.mass[0] - trp.mass[0, 0] - trp.forcing_mass[0])
        summary["mass_minus_forcing_max"] = float(resid.max())
        return {"mass": {"t": trp.times, "mass": trp.mass[0], "forcing_mass": trp.forcing_mass[0]}}, summary
    n_sim = _steps(math.log(t_end), gs.dt) + 1
    trs = run_similarity(u_sim, gs, n_sim)
    errs = []
    for i, t in enumerate(trp.times):
        pos = math.log(t) / gs.dt
        j = min(int(pos), n_sim - 1)
        f = pos - j
        us = (1 - f) * trs.values[0, j] + f * trs.values[0, j + 1]
        sim = to_similarity(PhysicalField(float(t), gp.grid, trp.values[0, i]), gs.grid)
        errs.append(np.max(np.abs(sim.values - us)) / np.max(np.abs(us)))
    errs = np.array(errs)
    summary["max_rel_error"] = float(errs.max())
    return {"crossval": {"t": trp.times, "rel_error": errs}}, summary


def _rd_similarity(ctx, p):
    grid = _grid(p)
    spectrum = NoiseSpectrum(tuple(p["b"]))
    K = spectrum.n_modes - 1
    basis = BasisSpec(K)
    tensor = cubic_projection_tensor(basis)
    c0 = np.zeros(K + 1)
    c0[: min(len(p["u0"]), K + 1)] = p["u0"][: K + 1]
    u0 = basis.reconstruct(c0, grid.grid)
    n_steps, every = _steps(p["tau_end"], grid.dt), _record_every(p["record_dt"], grid.dt)

    def batch(offset, count):
        inc = spectral_increments(spectrum, count, n_steps, grid.dt, ctx.seed, offset)
        tr = run_similarity(u0, grid, n_steps, equation="rd", spectrum=spectrum, increments=inc, record_every=every)
        mt = integrate_modal(c0, spectrum, tensor, n_steps, grid.dt, increments=inc, record_every=every)
        proj = project_field(grid.grid, tr.values, basis, decay_tol=np.inf).coeffs
        return np.max(np.abs(proj - mt.u), axis=(0, 2)), tr.times

    parts = ctx.map_batches(batch)
    diff = np.max(np.stack([x[0] for x in parts]), axis=0)
    return {"crossval": {"tau": parts[0][1], "max_coeff_diff": diff}}, {"max_coeff_diff": float(diff.max())}


def _origin_compensation(ctx, p):
    spectrum = NoiseSpectrum(tuple(p["b"]))
    n_steps, every = _steps(p["tau_end"], p["dt"]), _record_every(p["record_dt"], p["dt"])

    def batch(offset, count):
        c = simulate_compensated_modes(
            p["a"], spectrum, n_steps, p["dt"], ctx.seed, compensation=p["compensation"],
            u_init=tuple(p["u_init"]), n_paths=count, record_every=every, path_offset=offset,
        )
        stack = np.concatenate([c.u[:, :, 1:], c.X[:, :, None], (c.t - np.exp(c.tau))[:, :, None]], axis=2)
        return RunningMoments().update(stack), np.max(np.abs(c.u[:, :, 1:]), axis=0), c.tau

    parts = ctx.map_batches(batch)
    mom = _merge(x[0] for x in parts)
    peak = np.max(np.stack([x[1] for x in parts]), axis=0)
    tau = parts[0][2]
    table = {
        "tau": tau,
        "max_abs_u1": peak[:, 0],
        "max_abs_u2": peak[:, 1],
        "var_u1": mom.variance[:, 0],
        "var_u2": mom.variance[:, 1],
        "var_X": mom.variance[:, 2],
        "mean_t_minus_T": mom.mean[:, 3],
    }
    b1 = spectrum.padded(3).array[1]
    summary = {
        "max_abs_u1": float(peak[:, 0].max()),
        "max_abs_u2": float(peak[:, 1].max()),
        "var_u1_end": float(mom.variance[-1, 0]),
        "ou_stationary_var_u1": b1**2,
    }
    return {"modes": table}, summary


def _pseudotime_moments(ctx, p):
    T_grid = np.linspace(0.0, p["T_end"], p["n_T"] + 1)

    def batch(offset, count):
        path = build_pseudotime_path(p["t0"], p["a"], p["b2"], T_grid, ctx.seed, n_paths=count, path_offset=offset)
        stack = np.stack([path.t, path.integral], axis=2)
        return RunningMoments().update(stack), int(np.sum(path.reversals > 0)), path

    parts = ctx.map_batches(batch)
    mom = _merge(x[0] for x in parts)
    with_rev = sum(x[1] for x in parts)
    mean_t, var_int = mom.mean[:, 0], mom.variance[:, 1]
    exp_t, exp_var = p["t0"] + T_grid, 0.5 * T_grid**2
    sel = T_grid > 0
    sd = np.sqrt(mom.variance[:, 0])
    T_lo = max(T_grid[1], p["T_end"] / 10)
    fsel = (T_grid >= T_lo) & (T_grid <= p["T_end"])
    summary = {
        "max_rel_error_mean_t": float(np.max(np.abs(mean_t - exp_t) / exp_t)),
        "max_rel_error_var_integral": float(np.max(np.abs(var_int[sel] - exp_var[sel]) / exp_var[sel])),
        "rel_error_var_integral_end": float(var_int[-1] / exp_var[-1] - 1),
        "fluctuation_exponent": float(np.polyfit(np.log(T_grid[fsel]), np.log(sd[fsel]), 1)[0]),
        "paths_with_reversal_fraction": with_rev / ctx.config.paths,
        "paths_with_reversal_ci": proportion_ci(with_rev, ctx.config.paths),
    }
    table = {
        "T": T_grid,
        "mean_t": mean_t,
        "expected_mean_t": exp_t,
        "var_integral": var_int,
        "expected_var_integral": exp_var,
        "sd_t": sd,
    }
    return {"moments": table}, summary


_MIX_KEYS = ("half_width", "n_points", "dt", "t_end", "release_variance", "T0", "eta0", "sample_every")


def _mixing_runs(ctx, p, hermite_modes):
    kw = {k: p[k] for k in _MIX_KEYS}

    def batch(offset, count):
        return run_mixing(count, ctx.seed, path_offset=offset, hermite_modes=hermite_modes, **kw)

    parts = ctx.map_batches(batch)
    cat = {f: np.concatenate([getattr(r, f) for r in parts]) for f in
           ("T", "eta", "sigma2", "mass", "slaving", "hermite_ratio", "record", "flagged", "reversal_fraction")}
    return type(parts[0])(t=parts[0].t, **cat)


def _mixing_spread(ctx, p):
    run_ = _mixing_runs(ctx, p, 0)
    ok = ~run_.flagged
    slope_t, d_eff = diffusivity_fit(run_)
    steps = int(round(p["t_end"] / p["dt"]))
    rev_steps = int(round(float(np.sum(run_.reversal_fraction[ok] * steps))))
    summary = {
        "variance_slope_vs_t": slope_t,
        "effective_diffusivity": d_eff,
        "mean_T_minus_T0_end": float(np.mean(run_.T[ok, -1] - p["T0"])),
        "expected_T_minus_T0_end": 0.5 * float(run_.t[-1]),
        "mass_rel_drift_max": float(np.max(np.abs(run_.mass / run_.mass[:, :1] - 1))),
        "reversal_step_fraction": float(np.mean(run_.reversal_fraction[ok])),
        "reversal_step_fraction_ci": proportion_ci(rev_steps, int(ok.sum()) * steps),
        "flagged_paths": int(run_.flagged.sum()),
    }
    table = {
        "t": run_.t,
        "mean_T": run_.T[ok].mean(axis=0),
        "mean_sigma2": run_.sigma2[ok].mean(axis=0),
        "var_sigma2": run_.sigma2[ok].var(axis=0, ddof=1) if ok.sum() > 1 else np.zeros_like(run_.t),
        "mean_eta": run_.eta[ok].mean(axis=0),
    }
    return {"spread": table}, summary


def _bin_decay_rate(edges, med):
    centers = 0.5 * (np.asarray(edges[:-1]) + np.asarray(edges[1:]))
    ok = np.isfinite(med) & (np.asarray(med) > 0)
    if ok.sum() < 2:
        return None
    return float(-np.polyfit(centers[ok], np.log(np.asarray(med)[ok]), 1)[0])


def _mixing_slaving(ctx, p):
    run_ = _mixing_runs(ctx, p, p["hermite_modes"])
    edges = tuple(p["tau_edges"])
    med, counts, skipped = slaving_bins(run_, edges, p["min_abs_eta"])
    late = run_.t >= p["late_fraction"] * run_.t[-1]
    ratios = np.nanmedian(run_.hermite_ratio[:, late].reshape(-1, p["hermite_modes"]), axis=0)
    summary = {
        "slaving_median_first_bin": med[0],
        "slaving_median_last_bin": med[-1],
        "slaving_drop_factor": med[0] / med[-1],
        "slaving_decay_rate": _bin_decay_rate(edges, med),
        "accepted_samples": counts,
        "skipped_samples": skipped,
        "late_hermite_median_ratio": ratios,
        "flagged_paths": int(run_.flagged.sum()),
    }
    table = {"tau_lo": np.array(edges[:-1]), "tau_hi": np.array(edges[1:]), "median_deviation": med, "accepted": counts}
    return {"slaving": table}, summary


# ---------------------------------------------------------------- registry

_F = Param
_pos = dict(check=_positive, rule="must be > 0")
_nn = dict(check=_nonneg, rule="must be >= 0")


def _window(v):
    return len(v) == 2 and v[0] < v[1]


_win = dict(check=_window, rule="must be [start, end] with start < end")

REGISTRY: dict[str, Experiment] = {}


def _register(exp: Experiment):
    REGISTRY[exp.name] = exp


_register(Experiment(
    "modal-linear", "Decoupled OU modes with reaction off: stationary variances b_k^2/k and the mode-0 random walk.",
    {
        "b": _F("floats", [0.0, 1.0, 0.0], lambda v: len(v) >= 2, "need at least two modes"),
        "u0": _F("floats", []),
        "tau_end": _F("float", 12.0, **_pos),
        "dt": _F("float", 0.01, **_pos),
        "record_dt": _F("float", 0.5, **_pos),
    },
    _modal_linear, paths=10000, batch_size=1000, budget_s=120,
))
_register(Experiment(
    "modal-cubic", "Cubic Galerkin system: decay rate of the mean slow amplitude.",
    {
        "max_mode": _F("int", 8, lambda v: 1 <= v <= 12, "must be in [1, 12]"),
        "b": _F("floats", [0.0, 0.3]),
        "a0": _F("float", 0.1),
        "reaction": _F("bool", True),
        "tau_end": _F("float", 25.0, **_pos),
        "dt": _F("float", 0.02, **_pos),
        "record_dt": _F("float", 0.5, **_pos),
        "fit_window": _F("floats", [5.0, 25.0], **_win),
    },
    _modal_cubic, paths=10000, batch_size=1000, budget_s=300,
))
_register(Experiment(
    "slow-model", "Nine-mode slow amplitude model: noise-enhanced decay and the zero-noise curve.",
    {
        "b": _F("floats", [0.0, 0.3], lambda v: 1 <= len(v) <= 9, "supports b_0..b_8"),
        "a0": _F("float", 0.1),
        "tau_end": _F("float", 25.0, **_pos),
        "dt": _F("float", 0.02, **_pos),
        "record_dt": _F("float", 0.5, **_pos),
        "fit_window": _F("floats", [5.0, 25.0], **_win),
    },
    _slow_model, paths=10000, batch_size=2000, budget_s=120,
))
_register(Experiment(
    "normal-form-residual", "Order of the normal-form residual and invariance of the slow subspace.",
    {
        "eps": _F("floats", [0.05, 0.1, 0.2], lambda v: len(v) >= 2 and all(0 < e <= 0.3 for e in v), "entries in (0, 0.3], at least two"),
        "noise_exponent": _F("int", 2, lambda v: v in (1, 2), "must be 1 or 2"),
        "b": _F("floats", [0.3, 0.3, 0.3], lambda v: len(v) <= 3, "three-mode system takes b_0..b_2"),
        "U0": _F("float", 0.3),
        "memory": _F("str", "left", choices=("left", "midpoint")),
        "tau_end": _F("float", 10.0, **_pos),
        "dt": _F("float", 0.01, **_pos),
    },
    _normal_form_residual, paths=100, batch_size=100, budget_s=60,
))
_register(Experiment(
    "burgers-similarity", "Similarity-variable Burgers: L2(K) convergence (zero noise) or mass and Cole-Hopf contraction (noise).",
    {
        "half_width": _F("float", 12.0, check=lambda v: v >= 10, rule="must be >= 10"),
        "n_points": _F("int", 481, check=lambda v: v >= 64, rule="must be >= 64"),
        "dt": _F("float", 0.0, **_nn),
        "mass": _F("float", 1.0),
        "shift": _F("float", 1.0),
        "b": _F("floats", [0.0, 0.1, 0.1, 0.1, 0.1]),
        "tau_end": _F("float", 6.0, **_pos),
        "tau_ref": _F("float", 30.0, **_pos),
        "sample_dt": _F("float", 0.5, **_pos),
        "fit_window": _F("floats", [2.0, 12.0], **_win),
    },
    _burgers_similarity, paths=100, batch_size=25, budget_s=300, check=_check_similarity_grid,
))
_register(Experiment(
    "burgers-physical", "Physical-variable Burgers cross-validated against the similarity solver.",
    {
        "x_half_width": _F("float", 50.0, **_pos),
        "x_points": _F("int", 2001),
        "xi_half_width": _F("float", 14.0, check=lambda v: v >= 10, rule="must be >= 10"),
        "xi_points": _F("int", 561),
        "dt": _F("float", 0.001, **_pos),
        "t_end": _F("float", 20.0, check=lambda v: v > 1, rule="must be > 1"),
        "sample_dt": _F("float", 1.0, **_pos),
        "mass": _F("float", 1.5),
        "shift": _F("float", 0.5),
        "b": _F("floats", [0.0]),
    },
    _burgers_physical, paths=1, batch_size=1, budget_s=180, check=_check_physical_grids,
))
_register(Experiment(
    "rd-similarity", "Cubic reaction-diffusion on the grid against the Galerkin system with shared noise.",
    {
        "half_width": _F("float", 14.0, check=lambda v: v >= 10, rule="must be >= 10"),
        "n_points": _F("int", 561, check=lambda v: v >= 64, rule="must be >= 64"),
        "dt": _F("float", 0.001, **_nn),
        "b": _F("floats", [0.05] * 9, lambda v: 2 <= len(v) <= 13, "2..13 modes"),
        "u0": _F("floats", [1.0, 0.3]),
        "tau_end": _F("float", 3.0, **_pos),
        "record_dt": _F("float", 0.1, **_pos),
    },
    _rd_similarity, paths=4, batch_size=4, budget_s=120, check=_check_similarity_grid,
))
_register(Experiment(
    "origin-compensation", "Modes u_1, u_2 under the moving origin and fluctuating time (or a frozen frame).",
    {
        "a": _F("float", 1.0, check=lambda v: v != 0, rule="must be non-zero"),
        "b": _F("floats", [0.0, 0.3, 0.3], lambda v: len(v) <= 3 and (not v or v[0] == 0), "b_0 must be 0, at most three modes"),
        "compensation": _F("bool", True),
        "u_init": _F("floats", [0.0, 0.0], lambda v: len(v) == 2, "two values (u_1, u_2)"),
        "tau_end": _F("float", 2.0, **_pos),
        "dt": _F("float", 0.002, **_pos),
        "record_dt": _F("float", 0.1, **_pos),
    },
    _origin_compensation, paths=1000, batch_size=500, budget_s=60,
))
_register(Experiment(
    "pseudotime-moments", "Moments of the real-time/pseudo-time relation and its reversals.",
    {
        "t0": _F("float", 1.0),
        "a": _F("float", 1.0, check=lambda v: v != 0, rule="must be non-zero"),
        "b2": _F("float", 0.25),
        "T_end": _F("float", 10.0, **_pos),
        "n_T": _F("int", 200, check=lambda v: v >= 2, rule="must be >= 2"),
    },
    _pseudotime_moments, paths=10000, batch_size=2000, budget_s=60,
))

_MIX_PARAMS = {
    "half_width": _F("float", 60.0, **_pos),
    "n_points": _F("int", 512, check=lambda v: v >= 64, rule="must be >= 64"),
    "dt": _F("float", 0.05, **_pos),
    "t_end": _F("float", 50.0, **_pos),
    "release_variance": _F("float", 2.0, **_pos),
    "T0": _F("float", 1.0, **_pos),
    "eta0": _F("float", 0.0),
    "sample_every": _F("int", 2, check=lambda v: v >= 1, rule="must be >= 1"),
}
_register(Experiment(
    "mixing-spread", "Two-pipe mixing: variance growth of the mean field against real and pseudo-time.",
    dict(_MIX_PARAMS), _mixing_spread, paths=1000, batch_size=100, budget_s=300,
))
_register(Experiment(
    "mixing-slaving", "Two-pipe mixing: slaving of the difference field and Gaussian emergence.",
    dict(
        _MIX_PARAMS,
        tau_edges=_F("floats", [0.0, 0.25, 1.75, 2.25], lambda v: len(v) >= 3 and all(a < b for a, b in zip(v, v[1:])), "increasing, at least 3 edges"),
        min_abs_eta=_F("float", 0.1, **_nn),
        hermite_modes=_F("int", 4, lambda v: 1 <= v <= 12, "must be in [1, 12]"),
        late_fraction=_F("float", 0.8, lambda v: 0 <= v < 1, "must be in [0, 1)"),
    ),
    _mixing_slaving, paths=1000, batch_size=100, budget_s=300,
))
