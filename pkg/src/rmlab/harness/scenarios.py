"""Monte Carlo scenarios for the spectral norm of W = BA."""
from __future__ import annotations

import functools
import math
import time
from dataclasses import replace
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..decomposition import (
    counting_certificate,
    guarded_log,
    split_columns,
    split_threshold,
    truncate_entries,
    truncation_level,
)
from ..bounds import empirical_tail, fit_tail_rate
from ..distributions import Gaussian, MomentValue, batch_means_moment, psi_norm, sample
from ..errors import ConfigError, InsufficientDataError, PreconditionError
from ..linalg import column_norms, jacobi_singular_values, spectral_norm_batch
from ..seeding import SeedStream
from .config import MAX_N_SMALL_COLUMNS, ExperimentConfig
from .report import INCONCLUSIVE, RunReport, Verdict, check
from .shapers import build_shaper

CHUNK = 256
TAIL_POINTS = 60


def trial_stream(config: ExperimentConfig, trial: int, keys=()) -> SeedStream:
    return SeedStream(config.seed, trial).child(*keys)


def _chunk_norms(config, B, dist, keys, start, stop, method):
    N, n = B.shape[1], config.n
    W = np.empty((stop - start, B.shape[0], n))
    for t in range(start, stop):
        A = sample(dist, trial_stream(config, t, keys), N * n).reshape(N, n)
        W[t - start] = B @ A
    if method == "exact":
        norms = np.array([jacobi_singular_values(w)[0] if np.any(w) else 0.0 for w in W])
        return norms, np.zeros(len(W), dtype=bool)
    return spectral_norm_batch(W)


def trial_norms(config: ExperimentConfig, B: np.ndarray, keys=(), dist=None, method=None):
    """Spectral norms of W_t = B A_t for t < trials, plus a per-trial capped flag.

    Trial t draws A_t from SeedStream(seed, t) extended by ``keys``; chunks
    may run on worker threads without changing any value.
    """
    dist = config.dist if dist is None else dist
    method = config.method if method is None else method
    bounds = [(s, min(s + CHUNK, config.trials)) for s in range(0, config.trials, CHUNK)]
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            parts = list(pool.map(lambda b: _chunk_norms(config, B, dist, keys, *b, method), bounds))
    else:
        parts = [_chunk_norms(config, B, dist, keys, *b, method) for b in bounds]
    norms = np.concatenate([p[0] for p in parts])
    capped = np.concatenate([p[1] for p in parts])
    return norms, capped


def _record_caps(report: RunReport, capped, label):
    if np.any(capped):
        report.warnings.append(f"{label}: power iteration hit the cap on {int(capped.sum())} trials; "
                               "best estimates were used")


def estimate_norm_moments(config: ExperimentConfig, B=None, keys=(), dist=None,
                          report: RunReport | None = None) -> list[MomentValue]:
    """Power-mean estimates of E|W|^p per p in the grid, with batch-means errors."""
    if B is None:
        B = build_shaper(config.shaper, SeedStream(config.seed).child("shaper"))
    norms, capped = trial_norms(config, B, keys, dist)
    if report is not None:
        _record_caps(report, capped, "/".join(str(k) for k in keys) or config.scenario)
    return [batch_means_moment(norms, p) for p in config.p_grid]


def _rel_se(mv: MomentValue) -> float:
    return mv.std_error / mv.value if mv.value > 0 else 0.0


def _moment_rows(label, config, N, moments, scale):
    rows = []
    for mv in moments:
        denom = scale(mv.order)
        rows.append({"scenario": label, "m": config.m, "n": config.n, "N": N, "p": mv.order,
                     "estimate": mv.value, "std_error": mv.std_error,
                     "ratio": mv.value / denom if denom > 0 else math.nan})
    return rows


def _monotone_verdict(name, moments):
    values = [mv.value for mv in moments]
    ok = all(b >= a for a, b in zip(values, values[1:]))
    return check(name, "power means of one sample are non-decreasing in p", ok,
                 estimates=values, tolerance=0.0)


def _envelope_verdict(name, invariant, moments, scale):
    """ratio_p <= ratio_1 (1 + 3 combined relative se) for every p."""
    first = moments[0]
    r1 = first.value / scale(first.order)
    items, ok = [], True
    for mv in moments:
        rp = mv.value / scale(mv.order)
        slack = 3.0 * math.hypot(_rel_se(mv), _rel_se(first))
        limit = r1 * (1.0 + slack)
        ok &= rp <= limit
        items.append({"p": mv.order, "ratio": rp, "limit": limit, "relative_slack": slack})
    return check(name, invariant, ok, reference_ratio=r1, rows=items, n_se=3.0)


def _timed(fn):
    @functools.wraps(fn)
    def wrapper(config, *args, **kwargs):
        t0 = time.perf_counter()
        report = fn(config, *args, **kwargs)
        report.wall_clock = time.perf_counter() - t0
        return report
    return wrapper


def _new_report(config):
    return RunReport(config.scenario, config=config.to_dict(), seed=config.seed)


# ---------------------------------------------------------------------------
# N-independence
# ---------------------------------------------------------------------------


def _flatness(name, label, moments_by_N):
    values = {N: mv for N, mv in moments_by_N.items()}
    hi_N = max(values, key=lambda N: values[N].value)
    lo_N = min(values, key=lambda N: values[N].value)
    hi, lo = values[hi_N], values[lo_N]
    if lo.value <= 0:
        return Verdict(name, "E|BA| flat in N", INCONCLUSIVE, {"reason": "zero estimates"})
    spread = (hi.value - lo.value) / lo.value
    slack = 3.0 * math.hypot(_rel_se(hi), _rel_se(lo))
    return check(name, "E|BA| flat in N: (max - min)/min <= 0.25 + 3 combined relative se",
                 spread <= 0.25 + slack, spread=spread, tolerance=0.25, statistical_slack=slack,
                 argmax_N=hi_N, argmin_N=lo_N, run=label)


@_timed
def run_scaling_in_N(config: ExperimentConfig) -> RunReport:
    """Estimate E|BA| for a partial isometry B at every N of the grid."""
    if config.m != config.n:
        raise ConfigError("scaling needs m = n")
    grid = tuple(config.N_grid) or (config.shaper.N,)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("N_grid must be increasing")
    report = _new_report(config)
    one = replace(config, p_grid=(1.0,))
    runs = [("scaling", config.dist)]
    if config.control:
        runs.append(("scaling:gaussian-control", Gaussian()))
    for label, dist in runs:
        psi = psi_norm(dist, 1)
        scale = lambda p, psi=psi: (math.sqrt(config.m) + math.sqrt(config.n)) * p * psi
        by_N = {}
        for N in grid:
            cfg = one.with_shaper(kind="partial_isometry", N=N)
            B = build_shaper(cfg.shaper, SeedStream(config.seed).child("shaper", N))
            (mv,) = estimate_norm_moments(cfg, B, keys=(label, N), dist=dist, report=report)
            by_N[N] = mv
            report.add_rows("moments", _moment_rows(label, cfg, N, [mv], scale))
        report.verdict(_flatness(f"{label}:flatness", label, by_N))
    return report


# ---------------------------------------------------------------------------
# Moment growth
# ---------------------------------------------------------------------------


@_timed
def run_moment_growth(config: ExperimentConfig) -> RunReport:
    """Moments in p against the linear-in-p envelope (sqrt m + sqrt n) p psi_1."""
    if config.trials < 1000:
        raise PreconditionError("moment growth needs at least 1000 trials")
    if any(not 1 <= p <= 16 for p in config.p_grid):
        raise PreconditionError("p_grid must lie in [1, 16]")
    p_grid = tuple(sorted(config.p_grid))
    config = replace(config, p_grid=p_grid)
    report = _new_report(config)
    B = build_shaper(config.shaper, SeedStream(config.seed).child("shaper"))
    psi = psi_norm(config.dist, 1)
    scale = lambda p: (math.sqrt(config.m) + math.sqrt(config.n)) * p * psi
    moments = estimate_norm_moments(config, B, keys=("moments",), report=report)
    report.add_rows("moments", _moment_rows("moments", config, B.shape[1], moments, scale))
    report.verdict(_monotone_verdict("moments:monotone", moments))
    if psi == 0.0:
        report.verdict(Verdict("moments:linear-envelope", "ratio_p <= ratio_1 (1 + 3 rel se)",
                               INCONCLUSIVE, {"reason": "degenerate law, psi_1 = 0"}))
    else:
        report.verdict(_envelope_verdict("moments:linear-envelope",
                                         "ratio_p <= ratio_1 (1 + 3 combined rel se), "
                                         "ratio_p = estimate / ((sqrt m + sqrt n) p psi_1)",
                                         moments, scale))
    return report


# ---------------------------------------------------------------------------
# Tail decay
# ---------------------------------------------------------------------------


def tail_verdict(name, norms, report: RunReport, fit_floor=1e-3, fit_ceiling=0.5):
    """Log-linear tail fit of the norm sample; inconclusive without a usable tail."""
    invariant = "log survival of |W| is linear: slope < 0 and r^2 >= 0.9 on [1e-3, 0.5]"
    lo, hi = float(np.median(norms)), float(np.max(norms))
    if not hi > lo:
        return report.verdict(Verdict(name, invariant, INCONCLUSIVE,
                                      {"reason": "no spread above the median"}))
    curve = empirical_tail(norms, np.linspace(lo, hi, TAIL_POINTS))
    report.tail_curves[name.replace(":", "_")] = list(curve.rows())
    try:
        fit = fit_tail_rate(curve, fit_floor, fit_ceiling)
    except InsufficientDataError as exc:
        return report.verdict(Verdict(name, invariant, INCONCLUSIVE, {"reason": str(exc)}))
    report.fits[name] = {"slope": fit.slope, "intercept": fit.intercept,
                         "r_squared": fit.r_squared, "points": fit.points}
    return report.verdict(check(name, invariant, fit.slope < 0 and fit.r_squared >= 0.9,
                                slope=fit.slope, r_squared=fit.r_squared, r_squared_min=0.9,
                                band=[fit_floor, fit_ceiling]))


@_timed
def run_tail_decay(config: ExperimentConfig) -> RunReport:
    """Survival curve of |W| with a log-linear decay fit."""
    if config.trials < 10**4:
        raise PreconditionError("tail decay needs at least 1e4 trials")
    report = _new_report(config)
    B = build_shaper(config.shaper, SeedStream(config.seed).child("shaper"))
    norms, capped = trial_norms(config, B, keys=("tails",))
    _record_caps(report, capped, "tails")
    tail_verdict("tails", norms, report)
    return report


# ---------------------------------------------------------------------------
# Regimes
# ---------------------------------------------------------------------------


def required_k(n: int, C_split: float = 1.0) -> int:
    """Smallest block length with 1/sqrt(k) <= split_threshold(n, C_split)."""
    k = math.ceil(guarded_log(n) ** 5 * n * n / (C_split * C_split))
    while 1.0 / math.sqrt(k) > split_threshold(n, C_split):
        k += 1
    return k


def _regime_runs(config, report, B, label, scale, invariant):
    runs = [(label, config.dist)]
    if config.control:
        runs.append((f"{label}:gaussian-control", Gaussian()))
    for name, dist in runs:
        moments = estimate_norm_moments(config, B, keys=(name,), dist=dist, report=report)
        report.add_rows("moments", _moment_rows(name, config, B.shape[1], moments, scale))
        report.verdict(_monotone_verdict(f"{name}:monotone", moments))
        if moments[0].value == 0.0:
            report.verdict(Verdict(f"{name}:envelope", invariant, INCONCLUSIVE,
                                   {"reason": "all-zero estimates"}))
        else:
            report.verdict(_envelope_verdict(f"{name}:envelope", invariant, moments, scale))


@_timed
def run_regime_small_columns(config: ExperimentConfig) -> RunReport:
    """Replicated-average shaper whose columns all fall under the split threshold."""
    n = config.n
    k = config.shaper.k if config.shaper.k is not None else required_k(n, config.C_split)
    if k * n > MAX_N_SMALL_COLUMNS:
        raise ConfigError(f"N = k n = {k * n} exceeds the 1e6 guard")
    if k < required_k(n, config.C_split):
        raise ConfigError(f"k = {k} is below the premise minimum {required_k(n, config.C_split)}")
    config = config.with_shaper(kind="replicated_average", m=n, N=k * n, k=k)
    config = replace(config, p_grid=tuple(sorted(config.p_grid)))
    report = _new_report(config)
    B = build_shaper(config.shaper, SeedStream(config.seed).child("shaper"))
    thr = split_threshold(n, config.C_split)
    norms = column_norms(B)
    report.verdict(check("small-columns:premise", "every column norm <= split_threshold(n, C_split)",
                         bool(np.all(norms <= thr)), max_column_norm=float(norms.max()),
                         threshold=thr, k=k, k_min=required_k(n, config.C_split)))
    A = sample(config.dist, trial_stream(config, 0, ("small-columns",)), B.shape[1] * n)
    A = A.reshape(B.shape[1], n)
    split = split_columns(B, A, thr)
    report.verdict(check("small-columns:counting", "N0 threshold^2 <= Trace(B^T B)",
                         counting_certificate(split, B), N0=split.N0))
    trunc = truncate_entries(A, truncation_level(n, config.C_trunc))
    report.fits["small-columns:truncation"] = trunc.summary()
    scale = lambda p: math.sqrt(n) * p
    _regime_runs(config, report, B, "small-columns", scale,
                 "estimate_p / (sqrt(n) p) <= its p = 1 value (1 + 3 combined rel se)")
    return report


@_timed
def run_regime_almost_square(config: ExperimentConfig) -> RunReport:
    """Partial isometry with n <= N <= n^3 against the sqrt(n p) envelope."""
    n, N = config.n, config.shaper.N
    if not n <= N <= n**3:
        raise PreconditionError("almost-square needs n <= N <= n^3")
    if any(not 1 <= p <= 8 for p in config.p_grid):
        raise PreconditionError("p_grid must lie in [1, 8]")
    config = config.with_shaper(kind="partial_isometry", m=n)
    config = replace(config, p_grid=tuple(sorted(config.p_grid)))
    report = _new_report(config)
    B = build_shaper(config.shaper, SeedStream(config.seed).child("shaper"))
    scale = lambda p: math.sqrt(n * p)
    _regime_runs(config, report, B, "almost-square", scale,
                 "estimate_p / sqrt(n p) <= its p = 1 value (1 + 3 combined rel se)")
    report.add_rows("envelopes", [{"p": p, "sqrt_np": math.sqrt(n * p), "sqrt_n_p": math.sqrt(n) * p,
                                   "tightening": math.sqrt(n) * p / math.sqrt(n * p)}
                                  for p in config.p_grid])
    return report
