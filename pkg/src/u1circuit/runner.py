"""Run orchestration: seeded grids of trajectories, spectra and drift samples.

Every trajectory (or disorder realization) at grid point g with index r uses
``SeedSequence(master_seed, spawn_key=(g, r))``; the seed table in the
manifest is enough to rerun any of them on its own.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .drift import typical_drift
from .spectral import PolfedConfig, page_entropy_for_cut, run_spectral
from .transport import (
    ensemble_average,
    prethermal_times,
    run_ensemble,
    sigma_threshold,
    pmax_threshold,
    summarize,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 3
NU_TYP_SAMPLES = 200_000


def trajectory_seed(master_seed: int, grid_index: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(grid_index, index))


def _seed_entry(ss: np.random.SeedSequence) -> dict:
    return {"entropy": int(ss.entropy), "spawn_key": [int(k) for k in ss.spawn_key]}


@functools.lru_cache(maxsize=None)
def nu_typ_for(n_sites: int) -> float:
    """Typical SWAP-circuit drift at this N (exact for N <= 10, sampled with a fixed seed above)."""
    est = typical_drift(n_sites, NU_TYP_SAMPLES, np.random.default_rng(np.random.SeedSequence(n_sites)))
    return est.mean_drift


def config_hash(cfg: RunConfig) -> str:
    """Git blob hash of the canonical JSON form of the config."""
    data = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _finite_or_none(x):
    if isinstance(x, dict):
        return {k: _finite_or_none(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite_or_none(v) for v in x]
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def _write_json(path: Path, obj):
    path.write_text(json.dumps(_finite_or_none(obj), indent=2, sort_keys=True) + "\n")


def _fmt(x) -> str:
    return repr(float(x))


def write_trace_csv(path: Path, times, sigma, nu, pmax, R, extra: dict | None = None):
    """Columns t, sigma, nu, pmax, re_R, im_R (plus any `extra` columns)."""
    extra = extra or {}
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "sigma", "nu", "pmax", "re_R", "im_R", *extra])
        for k, t in enumerate(times):
            w.writerow([int(t), _fmt(sigma[k]), _fmt(nu[k]), _fmt(pmax[k]), _fmt(R[k].real), _fmt(R[k].imag),
                        *(_fmt(v[k]) for v in extra.values())])


# ---------------------------------------------------------------------------
# modes


def transport_point(cfg: RunConfig, g: int, point: dict, out: Path, workers: int):
    seeds = [trajectory_seed(cfg.master_seed, g, r) for r in range(cfg.n_trajectories)]
    traces = run_ensemble(point["N"], point["M"], point["J"], point["Jz"], seeds, cfg.t_max,
                          state_kind=cfg.state_kind, workers=workers)
    avg = ensemble_average(traces)
    write_trace_csv(out / f"trace_g{g:03d}.csv", avg.times, avg.sigma_mean, avg.nu_mean, avg.pmax_mean,
                    avg.R_mean, {"sigma_err": avg.sigma_err, "nu_err": avg.nu_err, "pmax_err": avg.pmax_err})
    if cfg.save_trajectories:
        for r, tr in enumerate(traces):
            write_trace_csv(out / f"trace_g{g:03d}_r{r:04d}.csv", tr.times, tr.sigma_t, tr.nu_t, tr.pmax_t, tr.R_t)
    rng = np.random.default_rng(trajectory_seed(cfg.master_seed, g, cfg.n_trajectories))
    nu_typ = nu_typ_for(point["N"])
    s = summarize(traces, rng, cfg.fit.sigma_window, cfg.fit.p_window, nu_typ)
    t_s, t_p = prethermal_times(avg, point["N"], cfg.thresholds.sigma, cfg.thresholds.pmax)
    result = {
        "alpha_sigma": s.alpha_sigma, "alpha_sigma_err": s.alpha_sigma_err,
        "alpha_p": s.alpha_p, "alpha_p_err": s.alpha_p_err,
        "nu_bar": s.nu_bar, "nu_typ": nu_typ, "t_sigma": t_s, "t_p": t_p,
        "sigma_max": float(np.nanmax(avg.sigma_mean)),
    }
    return result, [_seed_entry(x) for x in seeds]


def spectral_point(cfg: RunConfig, g: int, point: dict, out: Path, workers: int):
    sc = cfg.spectral
    pc = PolfedConfig(sc.phi_target, sc.filter_order, sc.n_eigs)
    seeds = [trajectory_seed(cfg.master_seed, g, r) for r in range(cfg.n_trajectories)]
    job = functools.partial(_spectral_job, point=point, config=pc, cut=sc.entropy_cut)
    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, seeds))
    else:
        results = [job(s) for s in seeds]
    n_a = sc.entropy_cut if sc.entropy_cut is not None else point["N"] // 2
    s_page = page_entropy_for_cut(point["N"], n_a)
    means_r, means_s, converged = [], [], []
    for r, res in enumerate(results):
        _write_json(out / f"spectral_g{g:03d}_r{r:04d}.json", {"point": point, **res})
        means_r.append(res["mean_gap_ratio"])
        means_s.append(res["mean_entropy"])
        converged.append(res["converged"])
    mr, er = _mean_sem(means_r)
    ms, es = _mean_sem(means_s)
    result = {
        "mean_gap_ratio": mr, "mean_gap_ratio_err": er,
        "mean_entropy": ms, "mean_entropy_err": es,
        "page_entropy": s_page, "entropy_ratio": ms / s_page,
        "all_converged": all(converged), "realizations": len(results),
    }
    return result, [_seed_entry(x) for x in seeds]


def _spectral_job(seed, point, config, cut):
    res = run_spectral(point["N"], point["M"], point["J"], point["Jz"], seed, config, entropy_cut=cut)
    return {
        "phases": res.phases.tolist(),
        "residuals": res.residuals.tolist(),
        "mean_gap_ratio": res.mean_gap_ratio,
        "mean_entropy": res.mean_entropy,
        "converged": res.converged,
        "n_requested": res.n_requested,
        "n_degenerate": res.n_degenerate,
        "matvecs": res.matvecs,
    }


def _mean_sem(values):
    x = np.asarray(values, dtype=float)
    x = x[np.isfinite(x)]
    if x.size == 0:
        return math.nan, math.nan
    err = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return float(x.mean()), err


def drift_point(cfg: RunConfig, g: int, point: dict, out: Path, workers: int):
    ss = np.random.SeedSequence(cfg.master_seed, spawn_key=(g,))
    est = typical_drift(point["N"], point["samples"], np.random.default_rng(ss))
    result = {"samples": est.samples, "mean": est.mean_drift, "stderr": est.stderr, "exact": est.exact,
              "mean_of_ratios": est.mean_of_ratios}
    return result, [_seed_entry(ss)]


# ---------------------------------------------------------------------------
# prethermal sweep


def prethermal_point(n_sites, magnetization, J_prime, Jz, seeds, t_guess, t_cap, state_kind="gaussian",
                     workers=1, sigma_level=None, p_level=None):
    """Thermalization times at J = pi - J', doubling t_max until both thresholds are crossed.

    Returns ``(t_sigma, t_p, t_max_used, averaged_trace)``; thresholds still
    unreached at `t_cap` are reported as inf.
    """
    t_max = int(min(max(t_guess, 1), t_cap))
    while True:
        traces = run_ensemble(n_sites, magnetization, math.pi - J_prime, Jz, seeds, t_max,
                              state_kind=state_kind, workers=workers)
        avg = ensemble_average(traces)
        t_s, t_p = prethermal_times(avg, n_sites, sigma_level, p_level)
        if (math.isfinite(t_s) and math.isfinite(t_p)) or t_max >= t_cap:
            return t_s, t_p, t_max, avg
        log.info("J'=%.4g: thresholds not reached by t=%d, doubling", J_prime, t_max)
        t_max = min(2 * t_max, t_cap)


def prethermal_sweep(n_sites, magnetization, Jz, J_primes, n_trajectories, master_seed, t_start=200,
                     t_cap=200_000, state_kind="gaussian", workers=1, sigma_level=None, p_level=None,
                     grid_offset=0):
    """t_sigma and t_p over detunings J', largest first.

    The starting horizon for each point extrapolates the previous t_max as
    J'^-3 with a 1.5 safety factor, so a guess rarely needs doubling.
    """
    order = sorted(range(len(J_primes)), key=lambda i: -J_primes[i])
    rows = [None] * len(J_primes)
    guess = t_start
    prev = None
    for i in order:
        jp = float(J_primes[i])
        if prev is not None:
            guess = int(math.ceil(1.5 * prev[1] * (prev[0] / jp) ** 3))
        seeds = [trajectory_seed(master_seed, grid_offset + i, r) for r in range(n_trajectories)]
        t_s, t_p, t_used, avg = prethermal_point(n_sites, magnetization, jp, Jz, seeds, guess, t_cap,
                                                 state_kind, workers, sigma_level, p_level)
        rows[i] = {"J_prime": jp, "t_sigma": t_s, "t_p": t_p, "t_max": t_used, "average": avg,
                   "seeds": seeds}
        finite = [t for t in (t_s, t_p) if math.isfinite(t)]
        prev = (jp, max(finite) if finite else t_used)
    return rows


def loglog_slope(x, y):
    """Least-squares slope and intercept of ln y against ln x over finite positive entries."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    if ok.sum() < 2:
        return math.nan, math.nan
    b, a = np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)
    return float(b), float(a)


def prethermal_mode(cfg: RunConfig, out: Path, workers: int, summary: dict, seed_table: dict) -> bool:
    ok = True
    g = 0
    pc = cfg.prethermal
    for n in cfg.N:
        for m in cfg.M:
            for jz in cfg.Jz:
                key = f"N={n},M={m:g},Jz={jz:.6g}"
                try:
                    rows = prethermal_sweep(n, m, jz, pc.J_prime, cfg.n_trajectories, cfg.master_seed,
                                            pc.t_start, pc.t_cap, cfg.state_kind, workers,
                                            cfg.thresholds.sigma, cfg.thresholds.pmax, grid_offset=g)
                except Exception as exc:  # recorded, sweep continues
                    log.exception("prethermal line %s failed", key)
                    summary["lines"].append({"line": key, "status": "error", "error": repr(exc)})
                    ok = False
                    g += len(pc.J_prime)
                    continue
                points = []
                for i, row in enumerate(rows):
                    avg = row["average"]
                    write_trace_csv(out / f"trace_g{g + i:03d}.csv", avg.times, avg.sigma_mean, avg.nu_mean,
                                    avg.pmax_mean, avg.R_mean,
                                    {"sigma_err": avg.sigma_err, "nu_err": avg.nu_err, "pmax_err": avg.pmax_err})
                    seed_table[str(g + i)] = [_seed_entry(s) for s in row["seeds"]]
                    points.append({"grid_index": g + i, "J_prime": row["J_prime"], "J": math.pi - row["J_prime"],
                                   "t_sigma": row["t_sigma"], "t_p": row["t_p"], "t_max": row["t_max"]})
                jp = [p["J_prime"] for p in points]
                slope_p, _ = loglog_slope(jp, [p["t_p"] for p in points])
                slope_s, _ = loglog_slope(jp, [p["t_sigma"] for p in points])
                summary["lines"].append({
                    "line": key, "status": "ok", "N": n, "M": m, "Jz": jz, "points": points,
                    "slope_t_p": slope_p, "slope_t_sigma": slope_s,
                    "sigma_threshold": cfg.thresholds.sigma or sigma_threshold(n),
                    "pmax_threshold": cfg.thresholds.pmax or pmax_threshold(n),
                })
                g += len(pc.J_prime)
    return ok


_POINT_RUNNERS = {
    "transport": transport_point,
    "sweep": transport_point,
    "spectral": spectral_point,
    "drift": drift_point,
}


def run(cfg: RunConfig, workers: int | None = None) -> int:
    """Execute `cfg`, writing manifest.json, summary.json and per-point files to its output dir.

    Returns 0 on success and 3 if any grid point failed (the others are still
    written).
    """
    workers = workers or os.cpu_count() or 1
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed_table: dict = {}
    ok = True
    if cfg.mode == "prethermal":
        summary = {"mode": cfg.mode, "lines": []}
        ok = prethermal_mode(cfg, out, workers, summary, seed_table)
    else:
        summary = {"mode": cfg.mode, "points": []}
        fn = _POINT_RUNNERS[cfg.mode]
        for g, point in enumerate(cfg.grid()):
            entry = {"grid_index": g, **point}
            try:
                result, seeds = fn(cfg, g, point, out, workers)
                entry.update(status="ok", **result)
                seed_table[str(g)] = seeds
            except Exception as exc:  # recorded, sweep continues
                log.exception("grid point %d failed", g)
                entry.update(status="error", error=repr(exc))
                ok = False
            summary["points"].append(entry)
            log.info("grid point %d/%d done", g + 1, len(cfg.grid()))
        if cfg.mode == "drift":
            _write_drift_csv(out / "drift.csv", summary["points"])
    manifest = {
        "version": __version__,
        "config": cfg.to_dict(),
        "config_hash": config_hash(cfg),
        "seed_rule": "SeedSequence(master_seed, spawn_key=(grid_index, trajectory_index))",
        "seeds": seed_table,
    }
    _write_json(out / "manifest.json", manifest)
    _write_json(out / "summary.json", summary)
    return EXIT_OK if ok else EXIT_PARTIAL


def _write_drift_csv(path: Path, points):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "samples", "mean", "stderr", "exact"])
        for p in points:
            if p.get("status") == "ok":
                w.writerow([p["N"], p["samples"], _fmt(p["mean"]), _fmt(p["stderr"]), int(p["exact"])])
