"""Epsilon-nets on the Euclidean unit sphere by greedy maximal packing."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CostGuardError, PreconditionError, ShapeError
from .linalg import as_matrix
from .seeding import SeedStream

MAX_NET_DIM = 6
_CHUNK = 8192


@dataclass(frozen=True)
class EpsNet:
    dimension: int
    epsilon: float
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.dimension:
            raise ShapeError(f"points must have shape (k, {self.dimension})")
        if not 0.0 < self.epsilon <= 1.0:
            raise PreconditionError("epsilon must lie in (0, 1]")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    def min_pairwise_distance(self) -> float:
        if len(self) < 2:
            return np.inf
        best = np.inf
        for start in range(0, len(self), _CHUNK):
            block = self.points[start:start + _CHUNK]
            d = _distances(block, self.points)
            rows = np.arange(block.shape[0])
            d[rows, start + rows] = np.inf
            best = min(best, float(d.min()))
        return best

    def to_csv(self, path) -> None:
        with open(Path(path), "w", encoding="utf-8") as fh:
            for p in self.points:
                fh.write(",".join(repr(float(x)) for x in p) + "\n")


def _distances(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    sq = (X * X).sum(1)[:, None] + (Y * Y).sum(1)[None, :] - 2.0 * X @ Y.T
    return np.sqrt(np.maximum(sq, 0.0))


def sample_sphere(n: int, count: int, stream: SeedStream) -> np.ndarray:
    """Uniform points on S^{n-1} (normalised Gaussians)."""
    g = stream.generator().standard_normal((count, n))
    nrm = np.linalg.norm(g, axis=1)
    g = g[nrm > 0]
    return g / np.linalg.norm(g, axis=1)[:, None]


def cardinality_bound(n: int, epsilon: float) -> float:
    """2n(1 + 2/eps)^(n-1)."""
    return 2.0 * n * (1.0 + 2.0 / epsilon) ** (n - 1)


def build_net(n: int, epsilon: float, stream: SeedStream, candidate_count: int = 10**5) -> EpsNet:
    """Greedy maximal eps-packing of a uniform candidate cloud on S^{n-1}.

    Candidates are visited in sampling order and accepted when at distance
    >= epsilon from every accepted point, so the result is an eps-packing and
    every candidate lies within epsilon of it.  Covering of the whole sphere
    is checked separately with :func:`covering_check`.
    """
    if n > MAX_NET_DIM:
        raise CostGuardError(f"net construction limited to n <= {MAX_NET_DIM}")
    if n < 1:
        raise PreconditionError("n must be >= 1")
    if candidate_count < 10**4:
        raise PreconditionError("candidate_count must be >= 1e4")
    if not 0.0 < epsilon <= 1.0:
        raise PreconditionError("epsilon must lie in (0, 1]")
    cands = sample_sphere(n, candidate_count, stream)
    accepted = np.empty((0, n))
    for start in range(0, cands.shape[0], _CHUNK):
        block = cands[start:start + _CHUNK]
        if accepted.shape[0]:
            block = block[_distances(block, accepted).min(axis=1) >= epsilon]
        # the survivors are few; resolve them in order against each other
        fresh = []
        for x in block:
            if all(np.linalg.norm(x - y) >= epsilon for y in fresh):
                fresh.append(x)
        if fresh:
            accepted = np.vstack([accepted, np.array(fresh)])
    return EpsNet(n, float(epsilon), accepted)


@dataclass(frozen=True)
class CoveringReport:
    covered: bool
    worst_distance: float


def covering_check(net: EpsNet, probe_count: int, stream: SeedStream) -> CoveringReport:
    """Worst distance from ``probe_count`` uniform sphere probes to the net."""
    if probe_count < 1000:
        raise PreconditionError("probe_count must be >= 1e3")
    probes = sample_sphere(net.dimension, probe_count, stream)
    worst = 0.0
    for start in range(0, probes.shape[0], _CHUNK):
        d = _distances(probes[start:start + _CHUNK], net.points).min(axis=1)
        worst = max(worst, float(d.max()))
    return CoveringReport(worst < net.epsilon, worst)


@dataclass(frozen=True)
class NormBracket:
    lower: float
    upper: float


def net_norm_bounds(M, net: EpsNet) -> NormBracket:
    """max_x |Mx| over the net, and that value divided by (1 - eps)."""
    M = as_matrix(M)
    if M.shape[1] != net.dimension:
        raise ShapeError(f"net dimension {net.dimension} does not match {M.shape[1]} columns")
    if net.epsilon >= 1.0:
        raise PreconditionError("bracketing needs epsilon < 1")
    lower = float(np.linalg.norm(net.points @ M.T, axis=1).max()) if len(net) else 0.0
    return NormBracket(lower, lower / (1.0 - net.epsilon))
