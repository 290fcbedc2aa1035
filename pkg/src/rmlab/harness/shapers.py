"""Deterministic shaper matrices B with certified spectral norm at most one."""
from __future__ import annotations

import math

import numpy as np

from ..errors import ConstructionError, ShapeError
from ..linalg import EXACT_MAX_DIM, spectral_norm
from ..seeding import SeedStream
from .config import ShaperSpec

NORM_SLACK = 1e-9


def modified_gram_schmidt(X: np.ndarray) -> np.ndarray:
    """Orthonormalise the rows of X in order."""
    Q = np.array(X, dtype=float, copy=True)
    for i in range(Q.shape[0]):
        for j in range(i):
            Q[i] -= (Q[j] @ Q[i]) * Q[j]
        nrm = np.linalg.norm(Q[i])
        if nrm == 0.0:
            raise ConstructionError("rank-deficient draw during Gram-Schmidt")
        Q[i] /= nrm
    return Q


def identity_embed(n: int, N: int) -> np.ndarray:
    if N < n:
        raise ShapeError("identity_embed needs N >= n")
    B = np.zeros((n, N))
    B[:, :n] = np.eye(n)
    return B


def replicated_average(n: int, k: int) -> np.ndarray:
    """Row i averages its own block of k columns: B[i, i*k:(i+1)*k] = 1/sqrt(k)."""
    B = np.zeros((n, n * k))
    for i in range(n):
        B[i, i * k:(i + 1) * k] = 1.0 / math.sqrt(k)
    return B


def partial_isometry(m: int, N: int, stream: SeedStream) -> np.ndarray:
    if N < m:
        raise ShapeError("partial_isometry needs N >= m")
    G = stream.generator().standard_normal((m, N))
    return modified_gram_schmidt(G)


def certify_norm(B: np.ndarray) -> float:
    """Spectral norm of B, raising ConstructionError above 1 + 1e-9."""
    method = "exact" if min(B.shape) <= EXACT_MAX_DIM else "power"
    value = spectral_norm(B, method=method)
    if value > 1.0 + NORM_SLACK:
        raise ConstructionError(f"shaper norm {value!r} exceeds 1 + {NORM_SLACK}")
    return value


def build_shaper(spec: ShaperSpec, stream: SeedStream) -> np.ndarray:
    kind = spec.kind
    if kind == "identity_embed":
        if spec.m != spec.n:
            raise ShapeError("identity_embed is n x N (m must equal n)")
        B = identity_embed(spec.n, spec.N)
    elif kind == "replicated_average":
        k = spec.k if spec.k is not None else spec.N // spec.n
        if spec.m != spec.n or spec.N != k * spec.n:
            raise ShapeError(f"replicated_average needs m = n and N = k n exactly (k={k})")
        B = replicated_average(spec.n, k)
    elif kind == "partial_isometry":
        B = partial_isometry(spec.m, spec.N, stream)
    else:
        if spec.matrix is None:
            raise ShapeError("explicit shaper needs a matrix")
        B = np.array(spec.matrix, dtype=float)
        if B.shape != (spec.m, spec.N):
            raise ShapeError(f"explicit matrix has shape {B.shape}, expected {(spec.m, spec.N)}")
    certify_norm(B)
    return B
