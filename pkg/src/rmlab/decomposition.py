"""Structural reductions of W = BA: padding, symmetrisation, column split,
entry truncation, and the weighted maximum statistic Xi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import PreconditionError, ShapeError
from .linalg import as_matrix, column_norms, gram_trace
from .seeding import SeedStream


def guarded_log(n: float) -> float:
    """max(ln n, 1); keeps log factors away from zero for n in {1, 2}."""
    return max(math.log(n), 1.0)


def split_threshold(n: int, C_split: float = 1.0) -> float:
    """Column-norm cut C n^{-1} log^{-5/2} n."""
    if n < 1:
        raise PreconditionError("n must be >= 1")
    return C_split / n * guarded_log(n) ** -2.5


def truncation_level(n: int, C_trunc: float = 1.0) -> float:
    """Entry cut C sqrt(n) log n."""
    if n < 1:
        raise PreconditionError("n must be >= 1")
    return C_trunc * math.sqrt(n) * guarded_log(n)


@dataclass(frozen=True)
class ColumnSplit:
    threshold: float
    large_indices: np.ndarray
    small_indices: np.ndarray
    B_large: np.ndarray
    B_small: np.ndarray

    @property
    def N0(self) -> int:
        return int(self.large_indices.size)

    def rows_of(self, A) -> tuple[np.ndarray, np.ndarray]:
        """Row blocks (A_I, A_{I^c}) matching the column split of B."""
        A = as_matrix(A)
        return A[self.large_indices], A[self.small_indices]

    def summary(self) -> dict:
        return {"threshold": self.threshold, "N0": self.N0,
                "large_indices": [int(i) for i in self.large_indices]}


def split_columns(B, A, threshold: float) -> ColumnSplit:
    """Separate columns of B with norm strictly above ``threshold``; ties go small."""
    B, A = as_matrix(B), as_matrix(A)
    if B.shape[1] != A.shape[0]:
        raise ShapeError(f"B has {B.shape[1]} columns but A has {A.shape[0]} rows")
    norms = column_norms(B)
    large = np.flatnonzero(norms > threshold)
    small = np.flatnonzero(~(norms > threshold))
    return ColumnSplit(float(threshold), large, small,
                       np.ascontiguousarray(B[:, large]), np.ascontiguousarray(B[:, small]))


def counting_certificate(split: ColumnSplit, B) -> bool:
    """N0 * threshold^2 <= Trace(B^T B)."""
    return split.N0 * split.threshold**2 <= gram_trace(B)


def reconstruct_check(split: ColumnSplit, A) -> float:
    """max |B_I A_I + B_{I^c} A_{I^c} - B A|."""
    A_large, A_small = split.rows_of(A)
    m = split.B_large.shape[0]
    B = np.zeros((m, split.N0 + split.small_indices.size))
    B[:, split.large_indices] = split.B_large
    B[:, split.small_indices] = split.B_small
    total = split.B_large @ A_large + split.B_small @ A_small
    return float(np.max(np.abs(total - B @ as_matrix(A)), initial=0.0))


@dataclass(frozen=True)
class TruncationSplit:
    level: float
    A_bounded: np.ndarray
    A_tail: np.ndarray

    def tail_fraction(self) -> float:
        return float(np.count_nonzero(self.A_tail)) / self.A_tail.size if self.A_tail.size else 0.0

    def summary(self) -> dict:
        return {"level": self.level, "tail_entries": int(np.count_nonzero(self.A_tail)),
                "entries": int(self.A_tail.size)}


def truncate_entries(A, level: float) -> TruncationSplit:
    """A = A 1{|A| <= level} + A 1{|A| > level}, entrywise."""
    if level <= 0:
        raise PreconditionError("level must be positive")
    A = as_matrix(A)
    inside = np.abs(A) <= level
    return TruncationSplit(float(level), np.where(inside, A, 0.0), np.where(inside, 0.0, A))


def symmetrize(A, stream: SeedStream) -> np.ndarray:
    """Multiply every entry by an independent Rademacher sign."""
    A = as_matrix(A)
    signs = stream.generator().integers(0, 2, size=A.shape).astype(np.float64) * 2.0 - 1.0
    return A * signs


def pad_to_square(B, A) -> tuple[np.ndarray, np.ndarray]:
    """Zero-pad so B_pad A_pad is square; the product's singular values are unchanged."""
    B, A = as_matrix(B), as_matrix(A)
    if B.shape[1] != A.shape[0]:
        raise ShapeError(f"B has {B.shape[1]} columns but A has {A.shape[0]} rows")
    m, n = B.shape[0], A.shape[1]
    if n < m:
        A = np.hstack([A, np.zeros((A.shape[0], m - n))])
    elif m < n:
        B = np.vstack([B, np.zeros((n - m, B.shape[1]))])
    return B, A


def xi_statistic(B, G_tail) -> float:
    """Xi = sqrt(sum_i max_j G_tail[i, j]^2 * |B_i|^2), B_i the i-th column of B."""
    B, G = as_matrix(B), as_matrix(G_tail)
    if G.shape[0] != B.shape[1]:
        raise ShapeError(f"G_tail has {G.shape[0]} rows, B has {B.shape[1]} columns")
    if G.shape[1] == 0 or G.shape[0] == 0:
        return 0.0
    row_max = np.max(G * G, axis=1)
    col_sq = np.sum(B * B, axis=0)
    return math.sqrt(math.fsum(row_max * col_sq))


def xi_squared_envelope(n: int, cutoff: float) -> float:
    """2 n^2 int_cutoff^inf x^2 exp(-x^2/2) dx, by quadrature.

    ``cutoff`` is the level applied to |g'| in the truncated factor, so the
    envelope dominates E Xi^2 whenever Trace(B^T B) <= n.
    """
    val, _ = integrate.quad(lambda x: x * x * math.exp(-0.5 * x * x), cutoff, math.inf,
                            epsabs=0.0, epsrel=1e-12, limit=200)
    return 2.0 * n * n * val


def truncated_second_factor(gp: np.ndarray, cutoff: float) -> np.ndarray:
    """g' 1{|g'| > cutoff}."""
    return np.where(np.abs(gp) > cutoff, gp, 0.0)
