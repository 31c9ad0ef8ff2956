"""Dense linear algebra, matrix norms, and matrix file I/O.

Matrices are plain float64 numpy arrays in row-major layout; every public
operation validates shape and finiteness on entry.  The text file format is
one header line ``# rows=<n> cols=<d>`` followed by n comma-separated rows;
streams are the same row lines without a header.
"""

from __future__ import annotations

import os
from typing import Iterable, Iterator

import numpy as np

from .losses import LossSpec


class InputError(ValueError):
    """Invalid input: non-finite entries, bad shapes, out-of-range args."""


class DegenerateInputError(ValueError):
    """Input is degenerate for the requested operation (e.g. zero denominator)."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to converge within its iteration budget."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class BudgetExceededError(RuntimeError):
    """An enumeration or rejection-sampling budget was exceeded."""


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array and reject non-finite entries."""
    m = np.asarray(a, dtype=float)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise InputError(f"{name} must be 2-D, got ndim={m.ndim}")
    if m.size == 0:
        raise InputError(f"{name} is empty")
    if not np.all(np.isfinite(m)):
        raise InputError(f"{name} contains non-finite entries")
    return np.ascontiguousarray(m)


def as_vector(v, name: str = "vector") -> np.ndarray:
    x = np.asarray(v, dtype=float).ravel()
    if x.size == 0:
        raise InputError(f"{name} is empty")
    if not np.all(np.isfinite(x)):
        raise InputError(f"{name} contains non-finite entries")
    return x


# ---------------------------------------------------------------------------
# file format

def save_matrix(path: str | os.PathLike, a) -> None:
    m = as_matrix(a)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# rows={m.shape[0]} cols={m.shape[1]}\n")
        for row in m:
            f.write(",".join(repr(float(x)) for x in row) + "\n")


def load_matrix(path: str | os.PathLike) -> np.ndarray:
    rows = list(iter_rows(path))
    if not rows:
        raise InputError(f"{path}: no rows")
    return as_matrix(np.vstack(rows), name=str(path))


def iter_rows(path: str | os.PathLike) -> Iterator[np.ndarray]:
    """Stream rows of a matrix/stream file one at a time."""
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            yield np.array([float(tok) for tok in line.split(",")], dtype=float)


# ---------------------------------------------------------------------------
# norms

def entrywise_norm(m, p: float) -> float:
    """(sum_ij |M_ij|^p)^(1/p); p=inf gives max |M_ij|."""
    a = as_matrix(m)
    if np.isinf(p):
        return float(np.max(np.abs(a)))
    if p < 1:
        raise InputError(f"entrywise norm requires p >= 1, got {p}")
    return float(np.sum(np.abs(a) ** p) ** (1.0 / p))


def p2_norm(m, p: float) -> float:
    """(sum_i ||row_i||_2^p)^(1/p); p=inf gives the max row norm."""
    a = as_matrix(m)
    rn = np.linalg.norm(a, axis=1)
    if np.isinf(p):
        return float(np.max(rn))
    if p < 1:
        raise InputError(f"(p,2) norm requires p >= 1, got {p}")
    return float(np.sum(rn**p) ** (1.0 / p))


def gnorm(m, loss: LossSpec) -> float:
    """Entrywise sum of g over the matrix.  Reported un-rooted."""
    a = as_matrix(m)
    return loss.cost(a)


def norm(m, mode: str, p: float | None = None, loss: LossSpec | None = None) -> float:
    """Dispatch on mode: entrywise_p, p2, g, entrywise_inf, inf2."""
    if mode == "entrywise_p":
        return entrywise_norm(m, p)
    if mode == "p2":
        return p2_norm(m, p)
    if mode == "g":
        if loss is None:
            raise InputError("mode 'g' requires a loss")
        return gnorm(m, loss)
    if mode == "entrywise_inf":
        return entrywise_norm(m, np.inf)
    if mode == "inf2":
        return p2_norm(m, np.inf)
    raise InputError(f"unknown norm mode {mode!r}")


# ---------------------------------------------------------------------------
# solvers

def least_squares(a, b) -> np.ndarray:
    """Minimum-norm argmin_X ||A X - B||_F.

    Handles rank deficiency via the SVD-based solver; the residual of the
    returned solution is orthogonal to col(A).
    """
    am = as_matrix(a, "A")
    bv = np.asarray(b, dtype=float)
    squeeze = bv.ndim == 1
    bm = bv.reshape(-1, 1) if squeeze else as_matrix(bv, "B")
    if am.shape[0] != bm.shape[0]:
        raise InputError(f"A has {am.shape[0]} rows but B has {bm.shape[0]}")
    x, _, _, _ = np.linalg.lstsq(am, bm, rcond=None)
    return x.ravel() if squeeze else x


def numerical_rank(a, tol_scale: float = 1e-10) -> int:
    """Rank via singular values with tolerance tol_scale * ||A||_F."""
    m = as_matrix(a)
    s = np.linalg.svd(m, compute_uv=False)
    tol = tol_scale * np.linalg.norm(m)
    return int(np.sum(s > tol))


def best_rank_k(a, k: int) -> np.ndarray:
    """Frobenius-optimal rank-k approximation via truncated SVD."""
    m = as_matrix(a)
    if not 1 <= k <= min(m.shape):
        raise InputError(f"k={k} out of range for shape {m.shape}")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    return (u[:, :k] * s[:k]) @ vt[:k]


def rank_k_factors(a, k: int) -> tuple[np.ndarray, np.ndarray]:
    """(U, Vt) with U @ Vt the Frobenius-optimal rank-k approximation."""
    m = as_matrix(a)
    if not 1 <= k <= min(m.shape):
        raise InputError(f"k={k} out of range for shape {m.shape}")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    return u[:, :k] * s[:k], vt[:k]


def orth_basis(a, tol_scale: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (columns) of the column space of A."""
    m = as_matrix(a)
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    tol = tol_scale * max(np.linalg.norm(m), 1e-300)
    r = int(np.sum(s > tol))
    return u[:, :r]


def leverage_scores(a) -> np.ndarray:
    """Row leverage scores of A (diagonal of the hat matrix)."""
    u = orth_basis(as_matrix(a))
    return np.sum(u * u, axis=1)


def max_threads() -> int:
    """Thread cap for internally parallelizable loops (CORESET_KIT_THREADS)."""
    try:
        return max(1, int(os.environ.get("CORESET_KIT_THREADS", "1")))
    except ValueError:
        return 1
