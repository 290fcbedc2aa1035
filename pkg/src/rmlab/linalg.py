"""Dense matrix helpers: products, spectral norms, column norms, traces.

Matrices are plain 2-D C-ordered float64 numpy arrays.  ``as_matrix``
validates and normalises inputs; zero-width operands are legal.
"""
from __future__ import annotations

import math
import warnings
from pathlib import Path

import numpy as np

from .errors import ConvergenceWarning, PreconditionError, ShapeError

POWER_TOL = 1e-12
POWER_MAX_ITER = 100_000
RESTART_SEED = 0x5EED
EXACT_MAX_DIM = 64


def as_matrix(M) -> np.ndarray:
    """Validate a dense real matrix and return it as C-ordered float64."""
    a = np.ascontiguousarray(M, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def matmul(B, A) -> np.ndarray:
    """Product B @ A with exactly rounded inner products (``math.fsum``).

    Slow but accurate; the harness uses BLAS for its hot loop.
    """
    B, A = as_matrix(B), as_matrix(A)
    if B.shape[1] != A.shape[0]:
        raise ShapeError(f"cannot multiply {B.shape} by {A.shape}")
    out = np.zeros((B.shape[0], A.shape[1]))
    At = A.T.copy()
    for i in range(B.shape[0]):
        row = B[i]
        for j in range(A.shape[1]):
            out[i, j] = math.fsum(row * At[j])
    return out


def column_norms(M) -> np.ndarray:
    M = as_matrix(M)
    return np.array([math.sqrt(math.fsum(c * c)) for c in M.T])


def gram_trace(M) -> float:
    """Trace(M^T M), i.e. the sum of squared entries."""
    M = as_matrix(M)
    return math.fsum((M * M).ravel())


# ---------------------------------------------------------------------------
# Spectral norm
# ---------------------------------------------------------------------------


def _gram_stack(Ms: np.ndarray) -> np.ndarray:
    """Gram matrices on the smaller side of each matrix in a (T, r, c) stack."""
    if Ms.shape[1] <= Ms.shape[2]:
        return Ms @ np.swapaxes(Ms, 1, 2)
    return np.swapaxes(Ms, 1, 2) @ Ms


def _power_rayleigh(G: np.ndarray, v0: np.ndarray, tol: float, max_iter: int):
    """Rayleigh limits of v <- Gv/|Gv| for a stack of PSD matrices.

    Each matrix iterates independently until its Rayleigh quotient changes by
    at most ``tol`` relative; finished matrices are frozen.  Returns the
    quotients and a boolean mask of matrices that hit the cap.
    """
    T, k = G.shape[0], G.shape[1]
    v = np.broadcast_to(v0 / np.linalg.norm(v0), (T, k)).copy()
    ray = np.einsum("ti,tij,tj->t", v, G, v)
    active = np.arange(T)
    for _ in range(max_iter):
        if active.size == 0:
            break
        Gv = (G[active] @ v[active][..., None])[..., 0]
        nrm = np.linalg.norm(Gv, axis=1)
        dead = nrm == 0.0
        nrm[dead] = 1.0
        w = Gv / nrm[:, None]
        new = np.einsum("ti,tij,tj->t", w, G[active], w)
        new[dead] = 0.0
        v[active] = w
        done = np.abs(new - ray[active]) <= tol * np.abs(new)
        done |= dead
        ray[active] = new
        active = active[~done]
    return ray, np.isin(np.arange(T), active)


def spectral_norm_batch(Ms, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER,
                        restart_seed: int = RESTART_SEED):
    """Power-iteration spectral norms of a (T, r, c) stack of matrices.

    Two starts per matrix (normalised all-ones and a fixed seeded Gaussian
    vector); the larger Rayleigh limit wins.  Returns ``(norms, capped)``
    where ``capped`` flags matrices that reached ``max_iter``.
    """
    Ms = np.asarray(Ms, dtype=np.float64)
    if Ms.ndim != 3:
        raise ShapeError("expected a (T, rows, cols) stack")
    T, r, c = Ms.shape
    if T == 0:
        return np.zeros(0), np.zeros(0, dtype=bool)
    if min(r, c) == 0:
        return np.zeros(T), np.zeros(T, dtype=bool)
    # per-matrix rescaling keeps the Gram products clear of overflow
    scale = np.abs(Ms).max(axis=(1, 2))
    scale[scale == 0.0] = 1.0
    G = _gram_stack(Ms / scale[:, None, None])
    k = G.shape[1]
    ones = np.ones(k)
    rnd = np.random.default_rng(restart_seed).standard_normal(k)
    r1, cap1 = _power_rayleigh(G, ones, tol, max_iter)
    r2, cap2 = _power_rayleigh(G, rnd, tol, max_iter)
    ray = np.maximum(np.maximum(r1, r2), 0.0)
    return scale * np.sqrt(ray), cap1 | cap2


def jacobi_singular_values(M) -> np.ndarray:
    """Singular values by one-sided cyclic Jacobi (Hestenes) rotations.

    Columns of the working matrix are rotated pairwise until mutually
    orthogonal to working precision; the singular values are then the column
    norms.  The transpose is used when it has fewer columns.
    """
    U = as_matrix(M)
    if U.shape[1] > U.shape[0]:
        U = U.T.copy()
    else:
        U = U.copy()
    scale = float(np.max(np.abs(U), initial=0.0))
    if scale == 0.0:
        return np.zeros(min(U.shape))
    U /= scale
    k = U.shape[1]
    eps = np.finfo(float).eps
    for _sweep in range(100):
        rotated = False
        for i in range(k - 1):
            for j in range(i + 1, k):
                ui, uj = U[:, i], U[:, j]
                alpha = float(ui @ ui)
                beta = float(uj @ uj)
                gamma = float(ui @ uj)
                # sqrt taken separately so tiny columns do not underflow the test
                if gamma == 0.0 or abs(gamma) <= eps * math.sqrt(alpha) * math.sqrt(beta):
                    continue
                zeta = (beta - alpha) / (2.0 * gamma)
                if abs(zeta) > 1e150:
                    t = 0.5 / zeta
                else:
                    t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                if t == 0.0:
                    continue
                rotated = True
                cs = 1.0 / math.sqrt(1.0 + t * t)
                sn = cs * t
                new_i = cs * ui - sn * uj
                new_j = sn * ui + cs * uj
                U[:, i] = new_i
                U[:, j] = new_j
        if not rotated:
            break
    return scale * np.sort(np.linalg.norm(U, axis=0))[::-1]


def spectral_norm(M, method: str = "power", tol: float = POWER_TOL,
                  max_iter: int = POWER_MAX_ITER) -> float:
    """Largest singular value of ``M``.

    ``power`` runs power iteration on the smaller Gram matrix; ``exact``
    uses the Jacobi SVD and requires min(rows, cols) <= 64.  A capped power
    iteration emits :class:`ConvergenceWarning` with the best estimate.
    """
    M = as_matrix(M)
    if min(M.shape) == 0 or not np.any(M):
        return 0.0
    if method == "exact":
        if min(M.shape) > EXACT_MAX_DIM:
            raise PreconditionError(f"exact method needs min dimension <= {EXACT_MAX_DIM}")
        return float(jacobi_singular_values(M)[0])
    if method != "power":
        raise ValueError(f"unknown method {method!r}")
    norms, capped = spectral_norm_batch(M[None], tol=tol, max_iter=max_iter)
    value = float(norms[0])
    if capped[0]:
        warnings.warn(ConvergenceWarning(
            f"power iteration reached {max_iter} iterations; best estimate {value!r}", value))
    return value


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def write_matrix_csv(M, path) -> None:
    M = as_matrix(M)
    with open(Path(path), "w", encoding="utf-8") as fh:
        for row in M:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    rows = []
    with open(Path(path), encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(x) for x in line.split(",")])
    return as_matrix(rows)
