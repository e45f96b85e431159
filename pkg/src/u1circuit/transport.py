"""Excitation-spreading trajectories and the transport quantities derived from them."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .circuit import FloquetCircuit, Propagator, sample_circuit
from .circular import (
    background_magnetization,
    circular_mean,
    drift_mu_tilde,
    quasiprob,
    sigma_from_R,
)
from .gates import GateParams, build_gate
from .sector import (
    SectorBasis,
    SectorState,
    measure_profile,
    project_up,
    random_phase_state,
    random_sector_state,
    sector_dimension,
)

DENSE_STEPS = 100
POINTS_PER_DECADE = 25
NOT_REACHED = math.inf


def seed_streams(seed, n: int = 2) -> list[np.random.Generator]:
    """Independent generators derived from one seed (int or SeedSequence)."""
    if isinstance(seed, np.random.SeedSequence):
        ss = np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key)
    else:
        ss = np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(n)]


def excitation_site(n_sites: int) -> int:
    return n_sites // 2


def initial_state(n_sites: int, magnetization, rng, kind: str = "gaussian") -> SectorState:
    """Typical sector state with the centre spin projected up.

    `kind` selects the typical-state ensemble: "gaussian" (complex normal
    amplitudes) or "phase" (equal moduli, random phases; its profile matches
    the mixed initial state exactly).
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    basis = SectorBasis.from_magnetization(n_sites, magnetization)
    if basis.n_up == 0:
        raise ValueError("the all-down sector has no state with the centre spin up")
    if kind == "gaussian":
        psi = random_sector_state(basis, rng)
    elif kind == "phase":
        psi = random_phase_state(basis, rng)
    else:
        raise ValueError(f"unknown state kind {kind!r}")
    projected, weight = project_up(psi, excitation_site(n_sites))
    if projected is None:
        raise ValueError("projection onto the excited centre spin is empty")
    return projected


def stroboscopic_schedule(t_max: int) -> np.ndarray:
    """Every step up to 100, then 25 log-spaced integer times per decade up to t_max."""
    t_max = int(t_max)
    if t_max < 1:
        raise ValueError("t_max must be at least 1")
    dense = np.arange(1, min(DENSE_STEPS, t_max) + 1)
    if t_max <= DENSE_STEPS:
        return dense
    decades = math.log10(t_max / DENSE_STEPS)
    n = int(math.ceil(decades * POINTS_PER_DECADE))
    sparse = np.rint(DENSE_STEPS * 10 ** (np.arange(1, n + 1) / POINTS_PER_DECADE)).astype(np.int64)
    sparse = np.minimum(sparse, t_max)
    sparse = np.append(sparse, t_max)
    sparse = np.unique(sparse[sparse > DENSE_STEPS])
    return np.concatenate([dense, sparse])


@dataclass
class TransportTrace:
    """Observables of one trajectory on a stroboscopic grid.

    `nu_t` is the folded drift speed over (t, t+1) in sites per step, NaN
    outside the unit-step part of the grid.  Values at t = 0 are kept in the
    scalar fields.
    """

    times: np.ndarray
    sigma_t: np.ndarray
    nu_t: np.ndarray
    pmax_t: np.ndarray
    R_t: np.ndarray
    mu_tilde_t: np.ndarray
    R0: complex
    pmax0: float
    nu0: float
    params: dict = field(default_factory=dict)
    profiles: np.ndarray | None = field(default=None, repr=False)

    @property
    def sigma0(self) -> float:
        return float(sigma_from_R(self.R0))


def _observables(profile, background):
    p = quasiprob(profile, background)
    moment = circular_mean(p)
    return moment.R, float(p.values.max()), drift_mu_tilde(p)


def _fold_speed(mu_a, mu_b, n_sites):
    d = np.angle(np.exp(1j * (np.asarray(mu_b) - np.asarray(mu_a))))
    return n_sites / (2 * np.pi) * np.abs(d)


def evolve_trace(circuit: FloquetCircuit, state: SectorState, times, magnetization=None,
                 keep_profiles: bool = False, index_cache=None, params=None) -> TransportTrace:
    """Record circular-moment observables of `state` evolved by `circuit` at `times`."""
    basis = state.basis
    n = basis.n_sites
    if magnetization is None:
        magnetization = basis.magnetization
    background = background_magnetization(n, magnetization)
    times = np.asarray(times, dtype=np.int64)
    if times.size and (np.any(np.diff(times) <= 0) or times[0] < 1):
        raise ValueError("times must be positive and strictly increasing")
    prop = Propagator(circuit, basis, index_cache)
    psi = state.amplitudes.copy()

    profile0 = measure_profile(state)
    R0, pmax0, mu0 = _observables(profile0, background)
    R_t = np.empty(times.size, dtype=np.complex128)
    pmax_t = np.empty(times.size)
    mu_t = np.empty(times.size)
    profiles = np.empty((times.size, n)) if keep_profiles else None
    t_prev = 0
    for k, t in enumerate(times):
        prop.step(psi, int(t - t_prev))
        t_prev = t
        prof = measure_profile(SectorState(basis, psi))
        R_t[k], pmax_t[k], mu_t[k] = _observables(prof, background)
        if keep_profiles:
            profiles[k] = prof

    nu_t = np.full(times.size, np.nan)
    nu0 = float(_fold_speed(mu0, mu_t[0], n)) if times.size and times[0] == 1 else float("nan")
    consecutive = (times[1:] == times[:-1] + 1) & (times[1:] <= DENSE_STEPS)
    idx = np.flatnonzero(consecutive)
    nu_t[idx] = _fold_speed(mu_t[idx], mu_t[idx + 1], n)
    return TransportTrace(
        times=times,
        sigma_t=sigma_from_R(R_t),
        nu_t=nu_t,
        pmax_t=pmax_t,
        R_t=R_t,
        mu_tilde_t=mu_t,
        R0=complex(R0),
        pmax0=pmax0,
        nu0=nu0,
        params=dict(params or {}),
        profiles=profiles,
    )


def run_trajectory(n_sites: int, magnetization, J: float, Jz: float, seed, t_max: int,
                   state_kind: str = "gaussian", keep_profiles: bool = False,
                   index_cache=None) -> TransportTrace:
    """Sample a circuit and an initial state from `seed` and record one trajectory."""
    circuit_rng, state_rng = seed_streams(seed)
    circuit = sample_circuit(n_sites, J, Jz, circuit_rng, seed=seed)
    state = initial_state(n_sites, magnetization, state_rng, kind=state_kind)
    params = dict(n_sites=n_sites, magnetization=float(magnetization), J=float(J), Jz=float(Jz),
                  seed=_seed_record(seed), t_max=int(t_max), state_kind=state_kind)
    return evolve_trace(circuit, state, stroboscopic_schedule(t_max), magnetization,
                        keep_profiles=keep_profiles, index_cache=index_cache, params=params)


def _seed_record(seed):
    if isinstance(seed, np.random.SeedSequence):
        return {"entropy": int(seed.entropy), "spawn_key": [int(k) for k in seed.spawn_key]}
    return int(seed)


def _run_one(args):
    return run_trajectory(*args[:6], state_kind=args[6])


def run_ensemble(n_sites, magnetization, J, Jz, seeds, t_max, state_kind="gaussian",
                 workers: int = 1) -> list[TransportTrace]:
    """Independent trajectories, one per seed; results do not depend on `workers`."""
    jobs = [(n_sites, magnetization, J, Jz, s, t_max, state_kind) for s in seeds]
    if workers <= 1 or len(jobs) <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))


@dataclass
class EnsembleTrace:
    """Pointwise means and standard errors over trajectories."""

    times: np.ndarray
    sigma_mean: np.ndarray
    sigma_err: np.ndarray
    nu_mean: np.ndarray
    nu_err: np.ndarray
    pmax_mean: np.ndarray
    pmax_err: np.ndarray
    R_mean: np.ndarray
    nu0_mean: float
    sigma0_mean: float
    pmax0_mean: float
    n_traces: int

    @property
    def sigma_of_mean_R(self) -> np.ndarray:
        """Spread of the trajectory-averaged profile (as opposed to the mean spread)."""
        return sigma_from_R(self.R_mean)


def _mean_err(x, axis=0):
    x = np.asarray(x, dtype=float)
    x = np.where(np.isfinite(x), x, np.nan)
    count = np.sum(~np.isnan(x), axis=axis)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.nansum(x, axis=axis) / count
        dev = np.where(np.isnan(x), 0.0, x - mean)
        var = np.sum(dev**2, axis=axis) / (count - 1)
        err = np.sqrt(var / count)
    mean = np.where(count > 0, mean, np.nan)
    err = np.where(count > 1, err, np.where(count == 1, 0.0, np.nan))
    return mean, err


def ensemble_average(traces) -> EnsembleTrace:
    """Average traces on a common grid; non-finite spreads are left out of the mean."""
    traces = list(traces)
    if len(traces) < 2:
        raise ValueError("need at least two traces")
    times = traces[0].times
    for tr in traces[1:]:
        if not np.array_equal(tr.times, times):
            raise ValueError("traces are recorded on different schedules")
    sig_m, sig_e = _mean_err([tr.sigma_t for tr in traces])
    nu_m, nu_e = _mean_err([tr.nu_t for tr in traces])
    p_m, p_e = _mean_err([tr.pmax_t for tr in traces])
    R_m = np.mean([tr.R_t for tr in traces], axis=0)
    nu0, _ = _mean_err([[tr.nu0] for tr in traces])
    s0, _ = _mean_err([[tr.sigma0] for tr in traces])
    p0, _ = _mean_err([[tr.pmax0] for tr in traces])
    return EnsembleTrace(times, sig_m, sig_e, nu_m, nu_e, p_m, p_e, R_m,
                         float(nu0[0]), float(s0[0]), float(p0[0]), len(traces))


def fit_exponent(times, samples, window, rng, n_fits: int = 25, jitter: float = 0.2,
                 fraction: float = 1 / 3, min_points: int = 4):
    """Slope of ln <y> against ln t with window and sample jitter.

    Each of the `n_fits` repetitions scales both window ends by independent
    normal(1, `jitter`) factors, averages a random `fraction` of the rows of
    `samples` (trajectories x times) and fits a straight line on log-log
    axes.  Returns the mean and standard deviation of the slopes.
    """
    times = np.asarray(times, dtype=float)
    y = np.atleast_2d(np.asarray(samples, dtype=float))
    if y.shape[1] != times.size:
        raise ValueError("samples must have one column per time")
    y = np.where(np.isfinite(y), y, np.nan)
    n_rows = y.shape[0]
    n_pick = max(1, int(round(fraction * n_rows)))
    lo0, hi0 = window
    if lo0 < times.min() or hi0 > times.max() or lo0 >= hi0:
        raise ValueError(f"window {window} outside the data range [{times.min()}, {times.max()}]")
    slopes = []
    for _ in range(n_fits):
        lo, hi = sorted((lo0 * rng.normal(1.0, jitter), hi0 * rng.normal(1.0, jitter)))
        rows = rng.choice(n_rows, size=n_pick, replace=False)
        sel = (times >= lo) & (times <= hi)
        if sel.sum() < min_points:
            continue
        with np.errstate(invalid="ignore"):
            mean = np.nanmean(y[np.ix_(rows, sel)], axis=0)
        ok = np.isfinite(mean) & (mean > 0)
        if ok.sum() < min_points:
            continue
        b, _ = np.polyfit(np.log(times[sel][ok]), np.log(mean[ok]), 1)
        slopes.append(b)
    if not slopes:
        raise ValueError("every perturbed window held fewer than 4 usable points")
    slopes = np.asarray(slopes)
    err = float(slopes.std(ddof=1)) if slopes.size > 1 else 0.0
    return float(slopes.mean()), err


def alpha_sigma(traces, window, rng, **kw):
    times = traces[0].times
    return fit_exponent(times, [tr.sigma_t for tr in traces], window, rng, **kw)


def alpha_p(traces, window, rng, **kw):
    times = traces[0].times
    b, err = fit_exponent(times, [tr.pmax_t for tr in traces], window, rng, **kw)
    return -b, err


def time_averaged_drift(averaged: EnsembleTrace, nu_typ: float, n_sites: int) -> float:
    """(1/T) int_0^T <nu(t)> dt with T = N / nu_typ, trapezoidal on the unit grid."""
    horizon = n_sites / nu_typ
    ok = np.isfinite(averaged.nu_mean)
    t = np.concatenate([[0.0], averaged.times[ok].astype(float)])
    v = np.concatenate([[averaged.nu0_mean], averaged.nu_mean[ok]])
    if not np.isfinite(v[0]) or t[-1] < horizon:
        raise ValueError(f"drift speeds do not cover [0, {horizon:.3f}]")
    inside = t < horizon
    tt = np.append(t[inside], horizon)
    vv = np.append(v[inside], np.interp(horizon, t, v))
    return float(trapezoid(vv, tt) / horizon)


def sigma_threshold(n_sites: int) -> float:
    return n_sites / 30 + 1.25


def pmax_threshold(n_sites: int) -> float:
    return 2.6 / n_sites


def prethermal_times(averaged: EnsembleTrace, n_sites: int, sigma_level=None, p_level=None):
    """First grid times with <sigma> above and <p_max> below their thresholds.

    Unreached thresholds give ``inf``.
    """
    sigma_level = sigma_threshold(n_sites) if sigma_level is None else sigma_level
    p_level = pmax_threshold(n_sites) if p_level is None else p_level
    with np.errstate(invalid="ignore"):
        hit_s = np.flatnonzero(averaged.sigma_mean > sigma_level)
        hit_p = np.flatnonzero(averaged.pmax_mean < p_level)
    t_sigma = float(averaged.times[hit_s[0]]) if hit_s.size else NOT_REACHED
    t_p = float(averaged.times[hit_p[0]]) if hit_p.size else NOT_REACHED
    return t_sigma, t_p


@dataclass
class TransportSummary:
    alpha_sigma: float
    alpha_sigma_err: float
    alpha_p: float
    alpha_p_err: float
    nu_bar: float
    t_sigma: float
    t_p: float


def summarize(traces, rng, sigma_window=(4, 40), p_window=(4, 40), nu_typ=2.0) -> TransportSummary:
    n = traces[0].params["n_sites"]
    avg = ensemble_average(traces)
    a_s, a_s_err = _safe_fit(alpha_sigma, traces, sigma_window, rng)
    a_p, a_p_err = _safe_fit(alpha_p, traces, p_window, rng)
    try:
        nu_bar = time_averaged_drift(avg, nu_typ, n)
    except ValueError:
        nu_bar = float("nan")
    t_s, t_p = prethermal_times(avg, n)
    return TransportSummary(a_s, a_s_err, a_p, a_p_err, nu_bar, t_s, t_p)


def _safe_fit(fn, traces, window, rng):
    try:
        return fn(traces, window, rng)
    except ValueError:
        return float("nan"), float("nan")


def correlation_from_profile(profile, n_sites: int, magnetization, trace_weight: float = 1.0):
    """C^(M)_{n,N/2}(t) = w M_n(t) - M d / (2N).

    The relation holds for the trace-normalized profile Tr[S^z_n(t) P_M P^up_{N/2}];
    pass a profile of the normalized initial state together with
    ``trace_weight = C(N-1, n_up-1)`` to convert.
    """
    n_up = n_sites / 2 + float(magnetization)
    d = sector_dimension(n_sites, int(round(n_up)))
    return trace_weight * np.asarray(profile, dtype=float) - float(magnetization) * d / (2 * n_sites)


def excited_subspace_dimension(n_sites: int, magnetization) -> int:
    """Number of sector basis states with the centre spin up."""
    n_up = int(round(n_sites / 2 + float(magnetization)))
    return sector_dimension(n_sites - 1, n_up - 1)


SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128)


def swap_point_expansion_check(J_prime: float, state) -> float:
    """Distance between the exact near-SWAP gate and its first-order expansion.

    The gate is taken at J = Jz = pi - J' without disorder; its constant
    global phase exp(-i pi/4) is removed before comparing with the normalized
    ``(1 - iJ'/4) SWAP psi + (iJ'/2) psi``.
    """
    psi = np.asarray(state, dtype=np.complex128)
    psi = psi / np.linalg.norm(psi)
    u = build_gate(GateParams(np.pi - J_prime, np.pi - J_prime))
    exact = np.exp(0.25j * np.pi) * (u @ psi)
    approx = (1 - 0.25j * J_prime) * (SWAP @ psi) + 0.5j * J_prime * psi
    approx /= np.linalg.norm(approx)
    return float(np.linalg.norm(exact - approx))
