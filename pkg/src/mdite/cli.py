"""Command-line pipeline: run chains, exact oracle, parameter scans, and the
crossing/collapse/surface analyses, all driven by one TOML config.

Artifacts are deterministic given (config, seed) except manifest timestamps:
chains are keyed by (seed, point index, chain index) through a counter-based
generator, and worker count never changes results.
"""

from __future__ import annotations

import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import click
import numpy as np

from . import __version__, analysis, estimators, oracle
from .config import ConfigError, RunConfig, load_config, resolve_threads
from .models import ModelSpec, ProtocolParams
from .sse import run_chain
from .sse.state import ConsistencyError

ESTIMATE_COLUMNS = [
    "model", "L", "tau", "h_or_g", "p", "n_d", "sweeps",
    "m_abs", "m_abs_err", "m2", "m2_err", "m4", "m4_err",
    "R2", "R2_err", "tau_int", "flag_frac", "cluster_mean",
]

SAMPLE_COLUMNS = ["m_signed", "m_abs", "m2", "m4", "flag_frac", "n_ops", "cluster_frac"]


class SchemaError(ValueError):
    pass


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: str, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def _read_csv(path: str, required: list[str]) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            cols = reader.fieldnames or []
            missing = [c for c in required if c not in cols]
            if missing:
                raise SchemaError(f"{path}: missing columns {', '.join(missing)}")
            rows = list(reader)
    except FileNotFoundError as exc:
        raise SchemaError(f"input CSV not found: {path}") from exc
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def _chain_task(args):
    model, protocol, sweeps, equilibration, seed, point_index, chain_index, slice_mode = args
    from .sse.state import chain_generator

    rng = chain_generator(seed, chain_index, stream=point_index)
    from .sse.engine import SseSampler

    sampler = SseSampler(model, protocol, rng, slice_mode=slice_mode)
    return sampler.run(sweeps, equilibration)


def _run_chains(model, protocol, cfg: RunConfig, threads: int, point_index: int = 0,
                pool: ProcessPoolExecutor | None = None):
    tasks = [
        (model, protocol, cfg.sampler.sweeps, cfg.sampler.equilibration,
         cfg.sampler.seed, point_index, k, cfg.sampler.slice_mode)
        for k in range(cfg.sampler.chains)
    ]
    if pool is not None:
        return list(pool.map(_chain_task, tasks))
    if threads <= 1 or len(tasks) == 1:
        return [_chain_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as fresh:
        return list(fresh.map(_chain_task, tasks))


def _merge_estimates(series_list, bin_size: int) -> dict:
    """Pool per-chain bin means; jackknife the Binder ratio over pooled bins."""
    pooled: dict[str, list[np.ndarray]] = {}
    taus = []
    for s in series_list:
        if bin_size <= 0:
            size = estimators.default_bin_size(s.m2)
        else:
            size = min(bin_size, len(s.m2) // 2)
        for name, arr in s.channels().items():
            pooled.setdefault(name, []).append(estimators.bin_means(arr, size))
        taus.append(estimators.autocorrelation_time(s.m2))
    channels = {k: np.concatenate(v) for k, v in pooled.items()}
    bins = estimators.BinSeries(bin_size=0, n_samples=sum(len(s.m2) for s in series_list),
                                channels=channels)
    r2 = estimators.binder_ratio(bins)
    out = {}
    for name in ("m_abs", "m2", "m4"):
        est = bins.estimate(name)
        out[name] = est.mean
        out[f"{name}_err"] = est.error
    out["R2"] = r2.mean
    out["R2_err"] = r2.error
    out["tau_int"] = float(np.mean(taus))
    out["flag_frac"] = float(np.mean([s.flag_frac.mean() for s in series_list]))
    out["cluster_mean"] = float(np.mean([s.cluster_frac.mean() for s in series_list]))
    return out


def _estimate_row(cfg: RunConfig, model: ModelSpec, protocol: ProtocolParams, merged: dict) -> dict:
    return {
        "model": cfg.model_kind,
        "L": cfg.L,
        "tau": protocol.tau,
        "h_or_g": model.control_value(),
        "p": protocol.p,
        "n_d": protocol.n_layers,
        "sweeps": cfg.sampler.sweeps * cfg.sampler.chains,
        **merged,
    }


def _manifest(cfg_path: str, cfg: RunConfig, extra: dict) -> dict:
    return {
        "config_path": os.path.abspath(cfg_path),
        "seed": cfg.sampler.seed,
        "chains": cfg.sampler.chains,
        "versions": {
            "mdite": __version__,
            "numpy": np.__version__,
        },
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        **extra,
    }


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main():
    """Measurement-dressed imaginary-time evolution toolkit."""


def _common(fn):
    fn = click.option("--config", "config_path", required=True, type=click.Path())(fn)
    fn = click.option("--seed", type=int, default=None, help="override [sampler] seed")(fn)
    fn = click.option("--threads", type=int, default=None,
                      help="worker processes (or MDITE_THREADS)")(fn)
    fn = click.option("--out", "out_dir", type=click.Path(), default=None,
                      help="override [output] directory")(fn)
    return fn


def _load(config_path: str, seed: int | None, out_dir: str | None) -> RunConfig:
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        _fail(2, str(exc))
    if seed is not None:
        cfg.sampler.seed = seed
    if out_dir is not None:
        cfg.out_dir = out_dir
    os.makedirs(cfg.out_dir, exist_ok=True)
    return cfg


@main.command()
@_common
def run(config_path, seed, threads, out_dir):
    """Sample one parameter point and write samples, estimates and manifest."""
    cfg = _load(config_path, seed, out_dir)
    threads = resolve_threads(threads)
    try:
        model = cfg.build_model()
        protocol = cfg.build_protocol()
    except ValueError as exc:
        _fail(2, str(exc))
    t0 = time.time()
    try:
        series_list = _run_chains(model, protocol, cfg, threads)
    except (ConsistencyError, oracle.NumericError) as exc:
        _fail(3, f"numeric failure in chain: {exc}")
    for k, s in enumerate(series_list):
        rows = [
            {c: float(getattr(s, c)[i]) for c in SAMPLE_COLUMNS}
            for i in range(len(s))
        ]
        _write_csv(os.path.join(cfg.out_dir, f"samples-{k}.csv"), SAMPLE_COLUMNS, rows)
    merged = _merge_estimates(series_list, cfg.sampler.bin_size)
    row = _estimate_row(cfg, model, protocol, merged)
    _write_csv(os.path.join(cfg.out_dir, "estimates.csv"), ESTIMATE_COLUMNS, [row])
    manifest = _manifest(config_path, cfg, {"wall_time_s": time.time() - t0, "command": "run"})
    with open(os.path.join(cfg.out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    click.echo(f"wrote {cfg.out_dir}/estimates.csv")


@main.command(name="oracle")
@_common
@click.option("--marginals", is_flag=True, help="include the flag-marginal table")
def oracle_cmd(config_path, seed, threads, out_dir, marginals):
    """Exact dense-channel observables for small systems."""
    cfg = _load(config_path, seed, out_dir)
    try:
        model = cfg.build_model()
        protocol = cfg.build_protocol()
        if model.n_sites > oracle.DENSE_SITE_CAP:
            _fail(2, f"oracle capped at {oracle.DENSE_SITE_CAP} sites, got {model.n_sites}")
        rho = oracle.evolve(model, protocol)
        obs = oracle.exact_observables(rho, model)
        stat = oracle.iterate_to_stationary(
            model, ProtocolParams(tau=protocol.tau, p=protocol.p, n_layers=1)
        )
        stat_obs = oracle.exact_observables(stat.rho, model)
    except oracle.CapacityError as exc:
        _fail(2, str(exc))
    except oracle.NumericError as exc:
        _fail(3, str(exc))
    payload = {
        "params": {
            "model": cfg.model_kind, "L": cfg.L, "tau": protocol.tau,
            "h_or_g": model.control_value(), "p": protocol.p, "n_d": protocol.n_layers,
        },
        "observables": {
            "m_abs": obs.m_abs, "m2": obs.m2, "m4": obs.m4, "binder": obs.binder,
            "m_abs_density": obs.m_abs_density, "m2_density": obs.m2_density,
            "m4_density": obs.m4_density,
        },
        "stationary": {
            "iterations": stat.iterations,
            "residual": stat.residual,
            "converged": stat.converged,
            "m2_density": stat_obs.m2_density,
            "binder": stat_obs.binder,
        },
    }
    if marginals:
        try:
            payload["flag_marginals"] = oracle.flag_marginals(model, protocol).tolist()
        except oracle.CapacityError as exc:
            _fail(2, str(exc))
    path = os.path.join(cfg.out_dir, "oracle.json")
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    click.echo(f"wrote {path}")


def _scan_points(cfg: RunConfig):
    for L in cfg.scan.sizes:
        for value in cfg.scan.values:
            yield L, value


def _point_model_protocol(cfg: RunConfig, L: int, value: float):
    axis = cfg.scan.axis
    tau = value if axis == "tau" else None
    p = value if axis == "p" else None
    h = value if axis == "h" else None
    g = value if axis == "g" else None
    model = cfg.build_model(L=L, h=h, g=g)
    protocol = cfg.build_protocol(L=L, tau=tau, p=p)
    return model, protocol


@main.command()
@_common
def scan(config_path, seed, threads, out_dir):
    """Run every (size, axis value) grid point and merge one scan.csv."""
    cfg = _load(config_path, seed, out_dir)
    if cfg.scan is None:
        _fail(2, "config has no [scan] section")
    threads = resolve_threads(threads)
    t0 = time.time()
    rows, failures = [], []
    pool = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    scan_path = os.path.join(cfg.out_dir, "scan.csv")
    try:
        with open(scan_path, "w", newline="") as scan_fh:
            writer = csv.writer(scan_fh)
            writer.writerow(ESTIMATE_COLUMNS)
            scan_fh.flush()
            for idx, (L, value) in enumerate(_scan_points(cfg)):
                try:
                    model, protocol = _point_model_protocol(cfg, L, value)
                    series_list = _run_chains(model, protocol, cfg, threads,
                                              point_index=idx, pool=pool)
                    merged = _merge_estimates(series_list, cfg.sampler.bin_size)
                    row = _estimate_row(cfg, model, protocol, merged)
                    row["L"] = L
                    rows.append(row)
                    writer.writerow([_fmt(row[c]) for c in ESTIMATE_COLUMNS])
                    scan_fh.flush()
                    click.echo(f"point {idx}: L={L} {cfg.scan.axis}={value:g} done")
                except (ConsistencyError, oracle.NumericError, ValueError) as exc:
                    failures.append({"L": L, "value": value, "error": str(exc)})
                    click.echo(
                        f"point {idx}: L={L} {cfg.scan.axis}={value:g} FAILED: {exc}",
                        err=True,
                    )
    finally:
        if pool is not None:
            pool.shutdown()
    if failures:
        _write_csv(os.path.join(cfg.out_dir, "scan_errors.csv"),
                   ["L", "value", "error"], failures)
    manifest = _manifest(config_path, cfg, {
        "wall_time_s": time.time() - t0, "command": "scan",
        "axis": cfg.scan.axis, "points": len(rows), "failures": len(failures),
    })
    with open(os.path.join(cfg.out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    click.echo(f"wrote {cfg.out_dir}/scan.csv ({len(rows)} points, {len(failures)} failed)")


def _infer_axis(rows: list[dict], explicit: str | None) -> str:
    if explicit:
        return {"h": "h_or_g", "g": "h_or_g"}.get(explicit, explicit)
    candidates = []
    for col in ("p", "tau", "h_or_g"):
        values = {r[col] for r in rows}
        if len(values) > 1:
            candidates.append(col)
    if len(candidates) != 1:
        raise SchemaError(
            f"cannot infer scan axis (varying columns: {candidates}); set [crossing] axis"
        )
    return candidates[0]


def _curves_from_rows(rows: list[dict], axis_col: str, y: str, yerr: str) -> list[analysis.Curve]:
    by_L: dict[int, list[tuple[float, float, float]]] = {}
    for r in rows:
        by_L.setdefault(int(r["L"]), []).append(
            (float(r[axis_col]), float(r[y]), float(r[yerr]))
        )
    curves = []
    for L, pts in sorted(by_L.items()):
        pts.sort()
        x, yv, ev = (np.array(v) for v in zip(*pts))
        curves.append(analysis.Curve(L=L, x=x, y=yv, yerr=np.maximum(ev, 1e-12)))
    return curves


@main.command()
@_common
def crossing(config_path, seed, threads, out_dir):
    """Binder-ratio crossings and the 1/L extrapolation from a scan CSV."""
    cfg = _load(config_path, seed, out_dir)
    src = cfg.crossing.csv
    if not src:
        _fail(2, "config has no [crossing] csv entry")
    try:
        rows = _read_csv(src, ESTIMATE_COLUMNS)
        axis_col = _infer_axis(rows, cfg.crossing.axis)
        curves = _curves_from_rows(rows, axis_col, "R2", "R2_err")
        cs = analysis.find_binder_crossing(
            curves, degree=cfg.crossing.degree, n_boot=cfg.crossing.n_boot,
            seed=cfg.sampler.seed,
        )
    except (SchemaError, ValueError, analysis.NoCrossingError) as exc:
        _fail(2, str(exc))
    out_rows = [
        {"kind": "pair", "L1": r.pair[0], "L2": r.pair[1],
         "value": r.location, "error": r.error, "method": "poly-intersect"}
        for r in cs.results
    ]
    out_rows.append({"kind": "extrapolated", "L1": 0, "L2": 0,
                     "value": cs.extrapolated, "error": cs.extrapolated_error,
                     "method": cs.method})
    path = os.path.join(cfg.out_dir, "crossings.csv")
    _write_csv(path, ["kind", "L1", "L2", "value", "error", "method"], out_rows)
    click.echo(f"wrote {path} (extrapolated {cs.extrapolated:.5f} +- {cs.extrapolated_error:.5f})")


@main.command()
@_common
def collapse(config_path, seed, threads, out_dir):
    """Finite-size-scaling collapse of <|m|> from a scan CSV."""
    cfg = _load(config_path, seed, out_dir)
    if cfg.collapse is None or not cfg.collapse.csv:
        _fail(2, "config has no [collapse] section with a csv entry")
    cc = cfg.collapse
    try:
        rows = _read_csv(cc.csv, ESTIMATE_COLUMNS)
        axis_col = _infer_axis(rows, cfg.crossing.axis)
        curves = _curves_from_rows(rows, axis_col, "m_abs", "m_abs_err")
        if cc.window is not None:
            lo, hi = cc.window
            curves = [
                analysis.Curve(c.L, c.x[(c.x >= lo) & (c.x <= hi)],
                               c.y[(c.x >= lo) & (c.x <= hi)],
                               c.yerr[(c.x >= lo) & (c.x <= hi)])
                for c in curves
            ]
        fits = []
        if cc.L_min_list:
            fits = analysis.stability_sweep(
                curves, cc.L_min_list, cc.x_c0, cc.nu0, cc.beta_over_nu0,
                degree=cc.degree, n_boot=cc.n_boot, seed=cfg.sampler.seed,
            )
            best = fits[0]
        else:
            best = analysis.data_collapse(
                curves, cc.x_c0, cc.nu0, cc.beta_over_nu0, L_min=cc.L_min,
                degree=cc.degree, n_boot=cc.n_boot, seed=cfg.sampler.seed,
            )
    except (SchemaError, ValueError) as exc:
        _fail(2, str(exc))

    def fit_dict(f):
        return {
            "x_c": f.x_c, "x_c_err": f.x_c_err, "nu": f.nu, "nu_err": f.nu_err,
            "beta": f.beta, "beta_err": f.beta_err,
            "beta_over_nu": f.beta_over_nu, "beta_over_nu_err": f.beta_over_nu_err,
            "cost": f.cost, "L_min": f.L_min, "degree": f.degree,
            "converged": f.converged,
        }

    payload = fit_dict(best)
    payload["axis"] = axis_col
    if fits:
        payload["stability"] = [fit_dict(f) for f in fits]
    path = os.path.join(cfg.out_dir, "collapse.json")
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    click.echo(
        f"wrote {path} (x_c={best.x_c:.5f}, nu={best.nu:.4f}, "
        f"beta/nu={best.beta_over_nu:.4f}, cost={best.cost:.3g})"
    )


@main.command()
@_common
def surface(config_path, seed, threads, out_dir):
    """Assemble critical-surface rows from several scan CSVs."""
    cfg = _load(config_path, seed, out_dir)
    if not cfg.surface_entries:
        _fail(2, "config has no [surface] entries")
    entries = []
    try:
        for e in cfg.surface_entries:
            rows = _read_csv(e["csv"], ESTIMATE_COLUMNS)
            axis_col = _infer_axis(rows, e["axis"])
            curves = _curves_from_rows(rows, axis_col, "R2", "R2_err")
            entries.append(({"tau": e["tau"], "h_or_g": e["h_or_g"], "axis": e["axis"]},
                            curves))
    except (SchemaError, ValueError) as exc:
        _fail(2, str(exc))
    rows = analysis.critical_surface_scan(entries, seed=cfg.sampler.seed)
    out_rows = [
        {"tau": r.tau, "h_or_g": r.h_or_g, "axis": r.axis,
         "critical_value": r.critical_value, "error": r.error, "status": r.status}
        for r in rows
    ]
    path = os.path.join(cfg.out_dir, "surface.csv")
    _write_csv(path, ["tau", "h_or_g", "axis", "critical_value", "error", "status"], out_rows)
    ok = sum(1 for r in rows if r.status == "ok")
    click.echo(f"wrote {path} ({ok}/{len(rows)} points with crossings)")


if __name__ == "__main__":
    main()
