"""Scalar entry laws, Orlicz norms, absolute moments and order-statistic tools.

Every law used for matrix entries lives here.  Laws are small frozen
dataclasses; module-level functions (``sample``, ``psi_norm``, ``abs_moment``)
are the public entry points and dispatch on the law.

Descriptor strings (``laplace{scale=1.0}``) round-trip through
:func:`parse_distribution` / :func:`format_distribution`.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate, special

from .errors import DomainError, NoSolutionError, ParameterError, PreconditionError
from .seeding import SeedStream

LN2 = math.log(2.0)
PSI_BRACKET = (1e-6, 1e6)
PSI_TOL = 1e-9
SQRT_2PI = math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Laws
# ---------------------------------------------------------------------------


class ScalarDistribution:
    """Base class for entry laws.

    Subclasses implement ``_draw``, ``abs_survival``, ``_log_mgf_abs`` (the log
    of E exp(s|X|), used to solve for the psi_1 norm), ``_abs_moment`` and
    optionally closed forms ``_psi1`` / ``_psi2``.
    """

    kind = "abstract"
    symmetric = True
    mean_zero = True
    subgaussian = False

    def validate(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ParameterError(f"{self.kind}: parameter {f.name} must be a positive real, got {value!r}")
        return self

    def params(self) -> dict[str, float]:
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}

    def __str__(self):
        return format_distribution(self)

    # hooks
    def _draw(self, gen: np.random.Generator, count: int) -> np.ndarray:
        raise NotImplementedError

    def abs_survival(self, t):
        """P{|X| >= t}, vectorised in ``t``."""
        raise NotImplementedError

    def abs_quantile(self, u):
        """Generalised inverse of the distribution function of |X|."""
        return _tabulated_abs_quantile(self)(np.asarray(u, dtype=float))

    def _psi1(self):
        return None

    def _psi2(self):
        return None

    def _log_mgf_abs(self, s: float) -> float:
        raise NotImplementedError

    def _abs_moment(self, p: float) -> tuple[float, str]:
        raise NotImplementedError


@dataclass(frozen=True)
class Gaussian(ScalarDistribution):
    kind = "gaussian"
    subgaussian = True

    def _draw(self, gen, count):
        return gen.standard_normal(count)

    def abs_survival(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return special.erfc(t / math.sqrt(2.0))

    def abs_quantile(self, u):
        return special.ndtri((1.0 + np.asarray(u, dtype=float)) / 2.0)

    def _log_mgf_abs(self, s):
        # E exp(s|g|) = 2 exp(s^2/2) Phi(s)
        return LN2 + 0.5 * s * s + special.log_ndtr(s)

    def _psi2(self):
        return math.sqrt(8.0 / 3.0)

    def _abs_moment(self, p):
        return math.exp(_log_abs_gauss_moment(p) / p), "closed_form"


@dataclass(frozen=True)
class Rademacher(ScalarDistribution):
    kind = "rademacher"
    subgaussian = True

    def _draw(self, gen, count):
        return gen.integers(0, 2, size=count).astype(np.float64) * 2.0 - 1.0

    def abs_survival(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= 1.0, 1.0, 0.0)

    def abs_quantile(self, u):
        return np.ones_like(np.asarray(u, dtype=float))

    def _log_mgf_abs(self, s):
        return s

    def _psi1(self):
        return 1.0 / LN2

    def _psi2(self):
        return 1.0 / math.sqrt(LN2)

    def _abs_moment(self, p):
        return 1.0, "closed_form"


@dataclass(frozen=True)
class Laplace(ScalarDistribution):
    scale: float = 1.0
    kind = "laplace"

    def _draw(self, gen, count):
        e = -np.log1p(-gen.random(count))
        sign = gen.integers(0, 2, size=count).astype(np.float64) * 2.0 - 1.0
        return self.scale * sign * e

    def abs_survival(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return np.exp(-t / self.scale)

    def abs_quantile(self, u):
        return -self.scale * np.log1p(-np.asarray(u, dtype=float))

    def _log_mgf_abs(self, s):
        return math.inf if s * self.scale >= 1.0 else -math.log1p(-s * self.scale)

    def _psi1(self):
        return 2.0 * self.scale

    def _abs_moment(self, p):
        return self.scale * math.exp(special.gammaln(p + 1.0) / p), "closed_form"


@dataclass(frozen=True)
class Exponential(ScalarDistribution):
    """Non-centred Exp(rate); used only by the order-statistic tools."""

    rate: float = 1.0
    kind = "exponential"
    symmetric = False
    mean_zero = False

    def _draw(self, gen, count):
        return -np.log1p(-gen.random(count)) / self.rate

    def abs_survival(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return np.exp(-self.rate * t)

    def abs_quantile(self, u):
        return -np.log1p(-np.asarray(u, dtype=float)) / self.rate

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)

    def _log_mgf_abs(self, s):
        return math.inf if s >= self.rate else -math.log1p(-s / self.rate)

    def _psi1(self):
        return 2.0 / self.rate

    def _abs_moment(self, p):
        return math.exp(special.gammaln(p + 1.0) / p) / self.rate, "closed_form"


@dataclass(frozen=True)
class CenteredExponential(ScalarDistribution):
    """Exp(rate) minus its mean 1/rate.  Mean zero but not symmetric."""

    rate: float = 1.0
    kind = "centered_exponential"
    symmetric = False

    def _draw(self, gen, count):
        return (-np.log1p(-gen.random(count)) - 1.0) / self.rate

    def abs_survival(self, t):
        x = np.maximum(np.asarray(t, dtype=float), 0.0) * self.rate
        upper = np.exp(-1.0 - x)
        lower = np.where(x < 1.0, -np.expm1(-(1.0 - np.minimum(x, 1.0))), 0.0)
        return np.minimum(upper + lower, 1.0)

    def _log_mgf_abs(self, s):
        # rate-1 variable |E - 1| scaled by 1/rate: s -> s/rate
        s = s / self.rate
        if s >= 1.0:
            return math.inf
        below = (math.exp(s) - math.exp(-1.0)) / (1.0 + s)
        above = math.exp(-1.0) / (1.0 - s)
        return math.log(below + above)

    def _abs_moment(self, p):
        # E|E-1|^p = e^{-1} (Gamma(p+1) + int_0^1 e^y y^p dy)
        inner, _ = integrate.quad(lambda y: math.exp(y) * y**p, 0.0, 1.0, epsabs=0.0, epsrel=1e-13)
        value = math.exp(-1.0) * (math.exp(special.gammaln(p + 1.0)) + inner)
        return value ** (1.0 / p) / self.rate, "quadrature"


@dataclass(frozen=True)
class GaussianProduct(ScalarDistribution):
    """Law of g * g' for independent standard Gaussians."""

    kind = "gaussian_product"

    def _draw(self, gen, count):
        g = gen.standard_normal(count)
        gp = gen.standard_normal(count)
        return g * gp

    def abs_survival(self, t):
        # density of g g' is K0(|x|)/pi, and int_0^inf K0 = pi/2
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        _, int_k0 = special.iti0k0(np.minimum(t, 1.0))
        head = np.clip(1.0 - (2.0 / math.pi) * int_k0, 0.0, 1.0)
        # past t = 1 the complement cancels badly; integrate the tail directly
        return np.where(t <= 1.0, head, _vectorized_product_tail(np.maximum(t, 1.0)))

    def _log_mgf_abs(self, s):
        return _log_product_mgf(s, 0.0)

    def _abs_moment(self, p):
        return math.exp(2.0 * _log_abs_gauss_moment(p) / p), "closed_form"


@dataclass(frozen=True)
class TruncatedGaussianProduct(ScalarDistribution):
    """Law of g * g' * 1{|g'| > threshold}."""

    threshold: float = 1.0
    kind = "truncated_gaussian_product"

    def _draw(self, gen, count):
        g = gen.standard_normal(count)
        gp = gen.standard_normal(count)
        return g * gp * (np.abs(gp) > self.threshold)

    def abs_survival(self, t):
        return _vectorized_truncated_survival(np.asarray(t, dtype=float), self.threshold)

    def _log_mgf_abs(self, s):
        return _log_product_mgf(s, self.threshold)

    def _abs_moment(self, p):
        # E|g|^p * E|g'|^p 1{|g'|>s}; the second factor is an upper incomplete gamma
        log_tail = _log_abs_gauss_moment(p) + math.log(special.gammaincc((p + 1.0) / 2.0, self.threshold**2 / 2.0))
        return math.exp((_log_abs_gauss_moment(p) + log_tail) / p), "closed_form"


@dataclass(frozen=True)
class PointMass(ScalarDistribution):
    """Degenerate law at zero (the scale -> 0 limit of every family)."""

    kind = "zero"
    subgaussian = True

    def _draw(self, gen, count):
        return np.zeros(count)

    def abs_survival(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= 0.0, 1.0, 0.0)

    def abs_quantile(self, u):
        return np.zeros_like(np.asarray(u, dtype=float))

    def _log_mgf_abs(self, s):
        return 0.0

    def _psi1(self):
        return 0.0

    def _psi2(self):
        return 0.0

    def _abs_moment(self, p):
        return 0.0, "closed_form"


KINDS: dict[str, type[ScalarDistribution]] = {
    cls.kind: cls
    for cls in (Gaussian, Rademacher, Laplace, Exponential, CenteredExponential,
                GaussianProduct, TruncatedGaussianProduct, PointMass)
}


def _log_abs_gauss_moment(p: float) -> float:
    """log E|g|^p = (p/2) log 2 + log Gamma((p+1)/2) - log sqrt(pi)."""
    return 0.5 * p * LN2 + special.gammaln((p + 1.0) / 2.0) - 0.5 * math.log(math.pi)


def _log_product_mgf(s: float, cut: float) -> float:
    """log E exp(s |g g'| 1{|g'| > cut}), finite for s < 1."""
    if s >= 1.0:
        return math.inf
    if s <= 0.0:
        return 0.0
    # conditional on g' = x: E_g exp(s x |g|) = 2 exp(s^2 x^2 / 2) Phi(s x)
    a = 1.0 - s * s

    def integrand(x):
        return 4.0 / SQRT_2PI * math.exp(-0.5 * a * x * x + special.log_ndtr(s * x))

    val, _ = integrate.quad(integrand, cut, math.inf, epsabs=0.0, epsrel=1e-12, limit=400)
    inside = math.erf(cut / math.sqrt(2.0)) if cut > 0 else 0.0
    return math.log(inside + val)


_LAGUERRE_NODES, _LAGUERRE_WEIGHTS = np.polynomial.laguerre.laggauss(40)


def _vectorized_product_tail(t: np.ndarray) -> np.ndarray:
    """(2/pi) int_t^inf K0 for t >= 1, by Gauss-Laguerre on the scaled k0e."""
    t = np.asarray(t, dtype=float)
    inner = special.k0e(t[..., None] + _LAGUERRE_NODES) @ _LAGUERRE_WEIGHTS
    return (2.0 / math.pi) * np.exp(-t) * inner


def _truncated_survival(t: float, cut: float) -> float:
    if t <= 0.0:
        return 1.0
    # P{|g| |g'| >= t, |g'| > cut} = int_cut^inf 2 phi(x) erfc(t / (x sqrt 2)) dx
    val, _ = integrate.quad(
        lambda x: 2.0 * math.exp(-0.5 * x * x) / SQRT_2PI * math.erfc(t / (x * math.sqrt(2.0))),
        cut, math.inf, epsabs=1e-16, epsrel=1e-11, limit=200,
    )
    return min(val, 1.0)


_vectorized_truncated_survival = np.vectorize(_truncated_survival, otypes=[float])


@lru_cache(maxsize=32)
def _tabulated_abs_quantile(dist: ScalarDistribution) -> Callable[[np.ndarray], np.ndarray]:
    """Inverse of P{|X| < t}, interpolated against -log of the exact survival.

    Working on the log-survival scale keeps resolution in the far tail,
    where 1 - u is tiny.
    """
    hi = 1.0
    while float(dist.abs_survival(hi)) > 1e-30:
        hi *= 1.5
    grid = np.concatenate([np.linspace(0.0, 1.0, 2001)[:-1], np.geomspace(1.0, hi, 6000)])
    surv = np.asarray(dist.abs_survival(grid), dtype=float)
    # right limit at zero, so an atom at the origin maps to quantile 0
    surv[0] = float(dist.abs_survival(np.finfo(float).tiny))
    with np.errstate(divide="ignore"):
        ls = -np.log(surv)
    ls = np.maximum.accumulate(ls)
    keep = np.isfinite(ls) & np.concatenate([[True], np.diff(ls) > 0])
    xs, ls = grid[keep], ls[keep]

    def quantile(u):
        return np.interp(-np.log1p(-np.asarray(u, dtype=float)), ls, xs, left=0.0, right=hi)

    return quantile


# ---------------------------------------------------------------------------
# Descriptors
# ---------------------------------------------------------------------------

_DESCRIPTOR = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\{([^{}]*)\})?\s*$")


def parse_distribution(text: str) -> ScalarDistribution:
    """Parse ``kind`` or ``kind{key=value,...}`` into a law."""
    m = _DESCRIPTOR.match(text)
    if not m:
        raise ParameterError(f"malformed distribution descriptor: {text!r}")
    kind, body = m.group(1).lower(), m.group(2)
    if kind not in KINDS:
        raise ParameterError(f"unknown distribution kind {kind!r}; expected one of {sorted(KINDS)}")
    kwargs = {}
    if body and body.strip():
        for item in body.split(","):
            key, sep, value = item.partition("=")
            if not sep:
                raise ParameterError(f"expected key=value in {text!r}, got {item!r}")
            try:
                kwargs[key.strip()] = float(value)
            except ValueError as exc:
                raise ParameterError(f"non-numeric value in {text!r}: {value!r}") from exc
    try:
        dist = KINDS[kind](**kwargs)
    except TypeError as exc:
        raise ParameterError(f"bad parameters for {kind}: {exc}") from exc
    return dist.validate()


def format_distribution(dist: ScalarDistribution) -> str:
    params = dist.params()
    if not params:
        return dist.kind
    return dist.kind + "{" + ",".join(f"{k}={v!r}" for k, v in params.items()) + "}"


# ---------------------------------------------------------------------------
# Sampling, norms, moments
# ---------------------------------------------------------------------------


def sample(dist: ScalarDistribution, stream: SeedStream, count: int) -> np.ndarray:
    """Draw ``count`` i.i.d. values; a pure function of (dist, stream, count)."""
    if count < 1:
        raise PreconditionError("count must be >= 1")
    dist.validate()
    return dist._draw(stream.generator(), int(count))


def _bisect_decreasing(fn: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    """Root of a non-increasing function on [lo, hi] by bisection (returns the feasible end)."""
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if fn(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return hi


def psi_norm(dist: ScalarDistribution, order: int = 1) -> float:
    """Orlicz psi_1 or psi_2 norm.

    Closed forms are used where available.  Otherwise E exp(|X|/K) = 2 is
    solved by bisection on K in [1e-6, 1e6] to relative tolerance 1e-9, with
    the expectation given by an exact MGF or adaptive quadrature.
    """
    dist.validate()
    if order == 2:
        value = dist._psi2()
        if value is None:
            raise DomainError(f"{dist.kind} has infinite psi_2 norm")
        return value
    if order != 1:
        raise ParameterError("order must be 1 or 2")
    value = dist._psi1()
    if value is not None:
        return value
    lo, hi = PSI_BRACKET
    return _bisect_decreasing(lambda k: dist._log_mgf_abs(1.0 / k) - LN2, lo, hi, PSI_TOL)


@dataclass(frozen=True)
class MomentValue:
    order: float
    value: float
    method: str
    std_error: float = 0.0

    def __post_init__(self):
        if self.method not in ("closed_form", "quadrature", "monte_carlo"):
            raise ValueError(f"unknown method {self.method}")
        if not math.isfinite(self.value):
            raise ValueError("moment value must be finite")
        if (self.std_error != 0.0) and self.method != "monte_carlo":
            raise ValueError("exact methods carry zero standard error")


def abs_moment(dist: ScalarDistribution, p: float) -> MomentValue:
    """(E|X|^p)^{1/p}."""
    if p < 1:
        raise PreconditionError("p must be >= 1")
    dist.validate()
    value, method = dist._abs_moment(float(p))
    return MomentValue(float(p), value, method)


def power_mean(values: np.ndarray, p: float) -> float:
    """(mean |x|^p)^{1/p}, computed on the max-normalised sample to avoid overflow."""
    x = np.abs(np.asarray(values, dtype=float))
    top = x.max() if x.size else 0.0
    if top == 0.0:
        return 0.0
    return float(top * np.mean((x / top) ** p) ** (1.0 / p))


def batch_means_moment(values: np.ndarray, p: float, batches: int = 20) -> MomentValue:
    """Monte Carlo power mean with a batch-means standard error.

    The sample is cut into ``batches`` contiguous blocks; the standard error
    is the spread of the per-block power means divided by sqrt(batches).
    """
    x = np.asarray(values, dtype=float)
    if x.size < batches:
        raise PreconditionError(f"need at least {batches} values for batch means")
    est = power_mean(x, p)
    per_batch = np.array([power_mean(b, p) for b in np.array_split(x, batches)])
    se = float(np.std(per_batch, ddof=1) / math.sqrt(batches))
    return MomentValue(float(p), est, "monte_carlo", se)


def empirical_psi1(samples) -> float:
    """Empirical psi_1: bisection on K of mean exp(|x|/K) = 2."""
    x = np.abs(np.asarray(samples, dtype=float))
    if x.size < 1000:
        raise PreconditionError("empirical_psi1 needs at least 1000 samples")
    if not np.any(x):
        return 0.0
    log_n = math.log(x.size)

    def excess(k):
        return float(special.logsumexp(x / k)) - log_n - LN2

    lo, hi = PSI_BRACKET
    if excess(hi) > 0.0:
        raise NoSolutionError("empirical MGF exceeds 2 over the whole bracket")
    if excess(lo) <= 0.0:
        return lo
    return _bisect_decreasing(excess, lo, hi, PSI_TOL)


# ---------------------------------------------------------------------------
# Order statistics
# ---------------------------------------------------------------------------


def renyi_transform(sorted_sample) -> np.ndarray:
    """Spacings T_i = 2(n-i+1)(x_(i) - x_(i-1)), x_(0) = 0.

    Accepts one sorted sample or a 2-D array of them (one per row).
    """
    x = np.asarray(sorted_sample, dtype=float)
    if x.ndim not in (1, 2) or x.shape[-1] < 1:
        raise PreconditionError("expected a non-empty sample or a 2-D batch of samples")
    if np.any(x <= 0.0):
        raise PreconditionError("order statistics must be positive")
    if np.any(np.diff(x, axis=-1) < 0.0):
        raise PreconditionError("input must be sorted non-decreasing")
    n = x.shape[-1]
    weights = 2.0 * np.arange(n, 0, -1, dtype=float)
    gaps = np.diff(x, axis=-1, prepend=0.0)
    return weights * gaps


def harmonic_expectation(n: int) -> float:
    """H_n = sum_{i<=n} 1/i, the mean of the maximum of n Exp(1) draws."""
    if n < 1:
        raise PreconditionError("n must be >= 1")
    return math.fsum(1.0 / i for i in range(1, n + 1))


@dataclass(frozen=True)
class KSResult:
    statistic: float
    critical_value_at_01: float

    @property
    def passed(self) -> bool:
        return self.statistic < self.critical_value_at_01


def ks_statistic(samples, cdf: Callable[[np.ndarray], np.ndarray]) -> KSResult:
    """One-sample Kolmogorov-Smirnov distance with the asymptotic 1% critical value."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 100:
        raise PreconditionError("ks_statistic needs at least 100 samples")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - f)
    d_minus = np.max(f - (i - 1) / n)
    return KSResult(float(max(d_plus, d_minus, 0.0)), 1.628 / math.sqrt(n))


def exp_half_cdf(x):
    """CDF of Exp(1/2), i.e. chi-square with two degrees of freedom."""
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, -np.expm1(-0.5 * np.maximum(x, 0.0)), 0.0)
