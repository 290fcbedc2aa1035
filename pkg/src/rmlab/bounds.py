"""Tail-bound evaluators with explicit constants, and empirical tail tools.

The bound evaluators are closed-form arithmetic.  ``empirical_tail`` and
``fit_tail_rate`` turn Monte Carlo samples into survival curves and
log-linear decay rates so the bounds can be confronted with data.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InsufficientDataError, ParameterError, PreconditionError

WILSON_Z = 1.959963984540054


@dataclass(frozen=True)
class BoundConstants:
    c_bernstein: float = 1.0
    c0_gauss: float = 0.5
    C_moment_tail: float = math.e
    c_subexp: float = 1.0

    def __post_init__(self):
        for name in ("c_bernstein", "c0_gauss", "C_moment_tail", "c_subexp"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be positive")
        if not self.c0_gauss < 1:
            raise ParameterError("c0_gauss must lie in (0, 1)")


DEFAULT_CONSTANTS = BoundConstants()


@dataclass(frozen=True)
class BernsteinValue:
    value: float
    degenerate: bool = False

    def __float__(self):
        return self.value


def bernstein_bound(a, K: float, t: float, consts: BoundConstants = DEFAULT_CONSTANTS) -> BernsteinValue:
    """exp(-c min(t^2 / (K^2 |a|_2^2), t / (K |a|_inf))) for weighted subexponential sums.

    An all-zero weight vector makes the sum identically zero, so any t > 0
    is impossible: the value is 0 with ``degenerate`` set.
    """
    a = np.asarray(a, dtype=float)
    if t < 0 or K <= 0:
        raise ParameterError("need t >= 0 and K > 0")
    if t == 0:
        return BernsteinValue(1.0)
    l2sq = math.fsum(a * a)
    linf = float(np.max(np.abs(a))) if a.size else 0.0
    if linf == 0.0:
        return BernsteinValue(0.0, degenerate=True)
    exponent = min(t * t / (K * K * l2sq), t / (K * linf))
    return BernsteinValue(math.exp(-consts.c_bernstein * exponent))


def gaussian_lipschitz_bound(t: float, lip: float, consts: BoundConstants = DEFAULT_CONSTANTS) -> float:
    if lip <= 0:
        raise ParameterError("Lipschitz constant must be positive")
    return math.exp(-consts.c0_gauss * t * t / (lip * lip))


def talagrand_bound(t: float) -> float:
    """4 exp(-t^2/4); a bound, so it exceeds 1 for small t."""
    return 4.0 * math.exp(-t * t / 4.0)


def moment_to_tail_threshold(a1: float, a2: float, a3: float, u: float,
                             consts: BoundConstants = DEFAULT_CONSTANTS) -> float:
    """Threshold C(a1 u + a2 sqrt(u) + a3) exceeded with probability <= e^{-u}.

    With C = e this follows from Markov's inequality at p = u when
    (E|X|^p)^{1/p} <= a1 p + a2 sqrt(p) + a3.
    """
    if u < 1:
        raise PreconditionError("u must be >= 1")
    if min(a1, a2, a3) < 0:
        raise ParameterError("moment envelope coefficients must be non-negative")
    return consts.C_moment_tail * (a1 * u + a2 * math.sqrt(u) + a3)


def subexp_tail_bound(K1: float, t: float) -> float:
    if K1 <= 0:
        raise ParameterError("K1 must be positive")
    return 2.0 * math.exp(-t / K1)


def fit_exponent_constant(survival, exponents) -> float:
    """Largest c with survival_i <= exp(-c * exponent_i) at every point.

    Used to report the empirical constant of a bound whose universal
    constant is unspecified.  Points with zero survival impose nothing.
    """
    s = np.asarray(survival, dtype=float)
    e = np.asarray(exponents, dtype=float)
    mask = (s > 0) & (e > 0)
    if not np.any(mask):
        return math.inf
    return float(np.min(-np.log(s[mask]) / e[mask]))


# ---------------------------------------------------------------------------
# Empirical tails
# ---------------------------------------------------------------------------


def wilson_interval(k, n: int, z: float = WILSON_Z):
    k = np.asarray(k, dtype=float)
    p = k / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = np.where(k <= 0, 0.0, np.clip(centre - half, 0.0, 1.0))
    hi = np.where(k >= n, 1.0, np.clip(centre + half, 0.0, 1.0))
    return lo, hi


@dataclass(frozen=True)
class TailCurve:
    thresholds: np.ndarray
    survival: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    sample_count: int

    def std_errors(self) -> np.ndarray:
        s = self.survival
        return np.sqrt(s * (1 - s) / self.sample_count)

    def rows(self):
        for t, s, lo, hi in zip(self.thresholds, self.survival, self.ci_low, self.ci_high):
            yield {"threshold": float(t), "survival": float(s), "ci_low": float(lo),
                   "ci_high": float(hi), "n": self.sample_count}

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=["threshold", "survival", "ci_low", "ci_high", "n"])
            w.writeheader()
            for row in self.rows():
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def tail_counts(samples, thresholds) -> np.ndarray:
    """Number of |x| >= t per threshold; additive across sample batches."""
    x = np.sort(np.abs(np.asarray(samples, dtype=float)))
    t = np.asarray(thresholds, dtype=float)
    return x.size - np.searchsorted(x, t, side="left")


def curve_from_counts(thresholds, counts, n: int) -> TailCurve:
    counts = np.asarray(counts)
    lo, hi = wilson_interval(counts, n)
    surv = counts / n
    return TailCurve(np.asarray(thresholds, dtype=float), surv, np.minimum(lo, surv),
                     np.maximum(hi, surv), int(n))


def empirical_tail(samples, thresholds) -> TailCurve:
    """Fraction of |x_i| >= t at each threshold, with Wilson 95% intervals."""
    x = np.asarray(samples, dtype=float)
    t = np.asarray(thresholds, dtype=float)
    if x.size < 1000:
        raise PreconditionError("empirical_tail needs at least 1000 samples")
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise PreconditionError("thresholds must be increasing")
    return curve_from_counts(t, tail_counts(x, t), x.size)


@dataclass(frozen=True)
class TailFit:
    slope: float
    intercept: float
    r_squared: float
    points: int


def fit_tail_rate(curve: TailCurve, fit_floor: float = 1e-3, fit_ceiling: float = 0.5) -> TailFit:
    """Least-squares line through (t, log survival) on the band [floor, ceiling]."""
    s = np.asarray(curve.survival)
    keep = (s >= fit_floor) & (s <= fit_ceiling)
    t, y = np.asarray(curve.thresholds)[keep], np.log(s[keep])
    if t.size < 4:
        raise InsufficientDataError(f"only {t.size} curve points inside the fit band")
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return TailFit(float(slope), float(intercept), float(min(max(r2, 0.0), 1.0)), int(t.size))
