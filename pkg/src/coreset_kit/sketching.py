"""Oblivious sketches: dense p-stable embeddings and the SRHT.

p-stable draws use the Chambers-Mallows-Stuck transform; under this
parameterization p=2 gives a Gaussian with variance 2 and p=1 the standard
Cauchy.  The Walsh-Hadamard transform is normalized so H^T H = I, making
sqrt(n/r) R H D an expected isometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import InputError, as_matrix
from .rng import SeededRng


def pstable(rng: SeededRng, p: float, size) -> np.ndarray:
    """Standard p-stable draws (Chambers-Mallows-Stuck), p in (0, 2]."""
    if not 0 < p <= 2:
        raise InputError(f"p-stable draws require p in (0,2], got {p}")
    theta = rng.uniform(-math.pi / 2, math.pi / 2, size)
    w = rng.exponential(1.0, size)
    if p == 1.0:
        return np.tan(theta)
    num = np.sin(p * theta) / np.cos(theta) ** (1.0 / p)
    tail = (np.cos((1.0 - p) * theta) / w) ** ((1.0 - p) / p)
    return num * tail


def pstable_matrix(rng: SeededRng, p: float, r: int, n: int, scale_c: float = 4.0) -> np.ndarray:
    """r x n matrix of i.i.d. p-stable entries scaled by scale_c / r^{1/p}."""
    return pstable(rng, p, (r, n)) * (scale_c / r ** (1.0 / p))


def pstable_embed(a, p: float, r: int, rng: SeededRng, scale_c: float = 4.0) -> np.ndarray:
    """Sketch S A with S an r x n scaled p-stable matrix."""
    a = as_matrix(a)
    s = pstable_matrix(rng, p, r, a.shape[0], scale_c)
    return s @ a


def fwht(x: np.ndarray) -> np.ndarray:
    """Orthonormal fast Walsh-Hadamard transform along axis 0.

    Input length along axis 0 must be a power of two; output satisfies
    H^T H = I (each butterfly is scaled by 1/sqrt(2)).
    """
    y = np.array(x, dtype=float, copy=True)
    n = y.shape[0]
    if n & (n - 1):
        raise InputError(f"FWHT length must be a power of two, got {n}")
    tail = y.shape[1:]
    h = 1
    inv_s2 = 1.0 / math.sqrt(2.0)
    while h < n:
        y = y.reshape(n // (2 * h), 2, h, *tail)
        a = y[:, 0]
        b = y[:, 1]
        y = np.stack([(a + b) * inv_s2, (a - b) * inv_s2], axis=1).reshape(n, *tail)
        h *= 2
    return y


def _next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length()


@dataclass
class SrhtSketch:
    """Plan for S = sqrt(n_pad/r) R H D acting on n_input-dimensional input."""

    n_input: int
    n_pad: int
    r: int
    signs: np.ndarray
    rows: np.ndarray

    def apply(self, a) -> np.ndarray:
        """Apply the sketch to the rows-are-coordinates matrix A (n x d)."""
        a = as_matrix(a)
        if a.shape[0] != self.n_input:
            raise InputError(
                f"matrix has {a.shape[0]} rows, sketch built for {self.n_input}"
            )
        padded = np.zeros((self.n_pad, a.shape[1]))
        padded[: self.n_input] = a * self.signs[: self.n_input, np.newaxis]
        transformed = fwht(padded)
        return math.sqrt(self.n_pad / self.r) * transformed[self.rows]

    def matrix(self) -> np.ndarray:
        """Materialize S as a dense r x n_input matrix."""
        return self.apply(np.eye(self.n_input))


def srht_plan(n_input: int, r: int, rng: SeededRng) -> SrhtSketch:
    n_pad = _next_pow2(max(n_input, 1))
    if r > n_pad:
        raise InputError(f"r={r} exceeds padded dimension {n_pad}")
    signs = rng.choice([-1.0, 1.0], size=n_pad)
    rows = rng.choice(n_pad, size=r, replace=False)
    return SrhtSketch(n_input=n_input, n_pad=n_pad, r=r, signs=signs, rows=np.sort(rows))


def srht_apply(a, r: int, rng: SeededRng) -> np.ndarray:
    """Sketch the rows of A down to r rows with a fresh SRHT."""
    a = as_matrix(a)
    return srht_plan(a.shape[0], r, rng).apply(a)


def srht_rows(k: int, log2n: float, eps: float = 0.5, delta: float = 0.1, c: float = 1.0) -> int:
    """Row count r = c eps^-2 (k + log(.../delta)) log(k/delta) from the SRHT bound."""
    t1 = k + log2n + math.log(1.0 / delta)
    t2 = math.log(max(k, 2) / delta)
    return max(1, math.ceil(c * eps**-2 * t1 * t2))
