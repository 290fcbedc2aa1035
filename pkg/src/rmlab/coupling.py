"""Tail-domination comparison: domination constants, Bernoulli-thinned
quantile coupling, and Monte Carlo comparison of symmetric convex functionals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .distributions import ScalarDistribution, sample
from .errors import ContractError, NoDominationError, ShapeError
from .linalg import spectral_norm_batch
from .seeding import SeedStream

C_MAX = 1e6
SLACK = 1e-12
BISECT_TOL = 1e-9


@dataclass(frozen=True)
class DominationFit:
    c: float
    grid: np.ndarray
    margins: np.ndarray

    def summary(self) -> dict:
        return {"c": self.c, "grid_points": int(self.grid.size),
                "min_margin": float(self.margins.min()) if self.margins.size else 0.0}


def _margins(c, surv_h, surv_hp, grid, between_points=False):
    lhs = np.asarray(surv_h(grid), dtype=float)
    rhs = c * np.asarray(surv_hp(grid / c), dtype=float)
    if between_points:
        # S_h(t) <= S_h(t_k) and S_h'(t/c) >= S_h'(t_{k+1}/c) on [t_k, t_{k+1}]
        rhs = np.append(rhs[1:], rhs[-1])
    return rhs - lhs


def fit_domination_constant(surv_h: Callable, surv_hp: Callable, t_grid,
                            between_points: bool = False) -> DominationFit:
    """Smallest c in [1, 1e6] with S_h(t) <= c S_h'(t/c) on the grid.

    Feasibility is monotone in c (both factors grow), so bisection applies.
    With ``between_points`` the condition is certified on every interval
    between grid points by monotonicity of both survivals, not just at the
    points themselves.
    """
    grid = np.asarray(t_grid, dtype=float)
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise ValueError("t_grid must be increasing")

    def feasible(c):
        return bool(np.all(_margins(c, surv_h, surv_hp, grid, between_points) >= -SLACK))

    if feasible(1.0):
        c = 1.0
    else:
        if not feasible(C_MAX):
            raise NoDominationError("no domination constant up to 1e6 on this grid")
        lo, hi = 1.0, C_MAX
        # geometric phase first: the bracket spans six decades
        while hi / lo > 2.0:
            mid = math.sqrt(lo * hi)
            lo, hi = (lo, mid) if feasible(mid) else (mid, hi)
        while hi - lo > BISECT_TOL * hi:
            mid = 0.5 * (lo + hi)
            lo, hi = (lo, mid) if feasible(mid) else (mid, hi)
        c = hi
    return DominationFit(float(c), grid, _margins(c, surv_h, surv_hp, grid, between_points))


def thinned_quantile(u, c: float, quantile_h: Callable) -> np.ndarray:
    """Quantile of delta|h| with delta ~ Bernoulli(1/c) independent of h."""
    u = np.asarray(u, dtype=float)
    atom = 1.0 - 1.0 / c
    layer = np.clip((u - atom) * c, 0.0, 1.0)
    return np.where(u < atom, 0.0, quantile_h(layer))


def quantile_couple(fit: DominationFit, quantile_h: Callable, quantile_hp: Callable,
                    stream: SeedStream, count: int) -> np.ndarray:
    """Pairs (X, Y) driven by one uniform: X ~ delta|h|, Y ~ c|h'|.

    Under the fitted domination both are monotone in U with X below Y, so
    X <= Y holds draw by draw.  Returns a (count, 2) array.
    """
    u = stream.generator().random(count)
    x = thinned_quantile(u, fit.c, quantile_h)
    y = fit.c * np.asarray(quantile_hp(u), dtype=float)
    return np.column_stack([x, y])


# ---------------------------------------------------------------------------
# Functional comparison
# ---------------------------------------------------------------------------

FUNCTIONALS = ("abs-sum", "euclidean-norm", "spectral-norm")


def _apply(f_kind, X, shape, B):
    if f_kind == "abs-sum":
        return np.abs(X).sum(axis=1)
    if f_kind == "euclidean-norm":
        return np.linalg.norm(X, axis=1)
    mats = X.reshape((X.shape[0],) + shape)
    return spectral_norm_batch(B[None] @ mats)[0]


@dataclass(frozen=True)
class ComparisonResult:
    f_kind: str
    K: float
    lhs: float
    rhs: float
    lhs_se: float
    rhs_se: float
    extra: dict = field(default_factory=dict)

    @property
    def combined_se(self) -> float:
        return math.hypot(self.lhs_se, self.rhs_se)

    def holds(self, n_se: float = 3.0) -> bool:
        return self.lhs <= self.rhs + n_se * self.combined_se

    def summary(self) -> dict:
        return {"f": self.f_kind, "K": self.K, "lhs": self.lhs, "rhs": self.rhs,
                "lhs_se": self.lhs_se, "rhs_se": self.rhs_se, **self.extra}


def _check_functional(f_kind, n_vars, shape, B):
    if f_kind not in FUNCTIONALS:
        raise ContractError(f"{f_kind!r} is not a supported symmetric convex functional {FUNCTIONALS}")
    if f_kind == "spectral-norm":
        if shape is None or B is None:
            raise ContractError("spectral-norm needs a matrix shape and a fixed B")
        B = np.asarray(B, dtype=float)
        if shape[0] * shape[1] != n_vars or B.shape[1] != shape[0]:
            raise ShapeError("shape must factor n_vars and match B's columns")
        return B
    return None


def _functional_samples(f_kind, dist, n_vars, trials, stream, shape, B):
    X = sample(dist, stream, n_vars * trials).reshape(trials, n_vars)
    return _apply(f_kind, X, shape, B)


def comparison_estimate(f_kind: str, dist_h: ScalarDistribution, dist_hp: ScalarDistribution,
                        K: float, n_vars: int, trials: int, stream: SeedStream,
                        shape: tuple[int, int] | None = None, B=None) -> ComparisonResult:
    """Monte Carlo E f(h) and E f(K h') with standard errors.

    lhs and rhs use independent child streams.  All supported functionals
    are positively homogeneous, so f(K h') = K f(h').
    """
    B = _check_functional(f_kind, n_vars, shape, B)
    lhs = _functional_samples(f_kind, dist_h, n_vars, trials, stream.child("lhs"), shape, B)
    rhs = K * _functional_samples(f_kind, dist_hp, n_vars, trials, stream.child("rhs"), shape, B)
    root = math.sqrt(trials)
    return ComparisonResult(f_kind, float(K), float(lhs.mean()), float(rhs.mean()),
                            float(lhs.std(ddof=1) / root), float(rhs.std(ddof=1) / root))


def smallest_working_K(f_kind: str, dist_h: ScalarDistribution, dist_hp: ScalarDistribution,
                       n_vars: int, trials: int, stream: SeedStream,
                       shape: tuple[int, int] | None = None, B=None,
                       K_start: float = 1.0 / 16, refine_steps: int = 30) -> ComparisonResult:
    """Smallest K with lhs <= rhs + 3 combined se.

    Doubling from ``K_start`` then bisection, with common random numbers so
    the rhs samples scale exactly with K.
    """
    B = _check_functional(f_kind, n_vars, shape, B)
    lhs = _functional_samples(f_kind, dist_h, n_vars, trials, stream.child("lhs"), shape, B)
    base = _functional_samples(f_kind, dist_hp, n_vars, trials, stream.child("rhs"), shape, B)
    root = math.sqrt(trials)
    lhs_mean, lhs_se = float(lhs.mean()), float(lhs.std(ddof=1) / root)
    base_mean, base_se = float(base.mean()), float(base.std(ddof=1) / root)

    def ok(K):
        return lhs_mean <= K * base_mean + 3.0 * math.hypot(lhs_se, K * base_se)

    K = K_start
    while not ok(K):
        K *= 2.0
        if K > 1e6:
            raise NoDominationError("no working K found up to 1e6")
    lo, hi = K / 2.0, K
    if ok(lo):
        lo, hi = 0.0, lo
    for _ in range(refine_steps):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if ok(mid) else (mid, hi)
    return ComparisonResult(f_kind, hi, lhs_mean, hi * base_mean, lhs_se, hi * base_se,
                            {"search": "doubling+bisection"})
