"""One-sided lp Lewis weights, Lewis-weight row sampling, and reweighting.

Offline weights come from the damped fixed-point iteration
w_i <- (a_i (A^T W^{1-2/p} A)^{-1} a_i^T)^{p/2}; the online variant freezes
each row's weight at arrival against the running quadratic form and never
revisits a decision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import InputError, as_matrix, leverage_scores, numerical_rank
from .rng import SeededRng


@dataclass
class LewisWeights:
    """Weights w with w_i >= alpha * tau_i(W^{1/2-1/p} A), plus a Lewis basis.

    ``basis`` R is d x d with W^{1/2-1/p} A R having orthonormal columns.
    ``alpha`` is measured a posteriori (clamped to <= 1); downstream sample
    sizes use the measured value.
    """

    w: np.ndarray
    p: float
    alpha: float
    basis: np.ndarray
    converged: bool
    iterations: int

    @property
    def total(self) -> float:
        return float(self.w.sum())


@dataclass
class SamplingMatrix:
    """Sparse diagonal sketch: kept row ids with positive rescaling factors."""

    indices: np.ndarray
    scales: np.ndarray
    n_original: int

    def apply(self, a) -> np.ndarray:
        a = as_matrix(a)
        if a.shape[0] != self.n_original:
            raise InputError(
                f"matrix has {a.shape[0]} rows, sampler built for {self.n_original}"
            )
        return a[self.indices] * self.scales[:, np.newaxis]

    def apply_vector(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float).ravel()
        return v[self.indices] * self.scales

    def __len__(self) -> int:
        return len(self.indices)


def _weighted_quadratic(a: np.ndarray, w: np.ndarray, p: float) -> np.ndarray:
    """q_i = a_i (A^T W^{1-2/p} A)^{-1} a_i^T, guarding zero weights."""
    expo = 1.0 - 2.0 / p
    nz = w > 0
    wexp = np.zeros_like(w)
    wexp[nz] = w[nz] ** expo
    m = (a.T * wexp) @ a
    try:
        minv_at = np.linalg.solve(m, a.T)
    except np.linalg.LinAlgError:
        minv_at = np.linalg.pinv(m) @ a.T
    return np.maximum(np.einsum("ij,ji->i", a, minv_at), 0.0)


def compute_lewis(a, p: float, tol: float = 1e-8, max_iters: int = 200) -> LewisWeights:
    """One-sided lp Lewis weights by damped fixed-point iteration.

    Starts from leverage scores; the update is damped by theta = min(1, 2/p)
    (undamped below p=2, damped above, which keeps the iteration stable for
    p >= 4 where contraction is not guaranteed).  Non-convergence returns
    the best iterate flagged ``converged=False``.
    """
    a = as_matrix(a)
    n, d = a.shape
    if p <= 0:
        raise InputError(f"p must be positive, got {p}")
    if numerical_rank(a) < d:
        raise InputError("compute_lewis requires rank(A) = d")

    w = np.maximum(leverage_scores(a), 0.0)
    zero_rows = np.linalg.norm(a, axis=1) == 0
    w[zero_rows] = 0.0
    theta = min(1.0, 2.0 / p)
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        q = _weighted_quadratic(a, w, p)
        w_new = q ** (p / 2.0)
        w_new[zero_rows] = 0.0
        nz = w > 0
        w_next = np.zeros_like(w)
        w_next[nz] = w[nz] ** (1.0 - theta) * np.maximum(w_new[nz], 1e-300) ** theta
        rel = np.max(np.abs(w_next[nz] - w[nz]) / np.maximum(w[nz], 1e-300)) if nz.any() else 0.0
        w = w_next
        if rel <= tol:
            converged = True
            break

    # measured one-sidedness: w_i >= alpha * tau_i(W^{1/2-1/p} A)
    tau = lewis_tau(a, w, p)
    nz = w > 0
    alpha = float(min(1.0, np.min(w[nz] / np.maximum(tau[nz], 1e-300)))) if nz.any() else 1.0

    half = np.zeros_like(w)
    half[nz] = w[nz] ** (0.5 - 1.0 / p)
    scaled = a * half[:, np.newaxis]
    _, r = np.linalg.qr(scaled)
    basis = np.linalg.inv(r)
    return LewisWeights(w=w, p=p, alpha=alpha, basis=basis, converged=converged, iterations=it)


def lewis_tau(a, w, p: float) -> np.ndarray:
    """Leverage scores tau_i(W^{1/2-1/p} A) for given weights w."""
    a = as_matrix(a)
    w = np.asarray(w, dtype=float)
    half = np.zeros_like(w)
    nz = w > 0
    half[nz] = w[nz] ** (0.5 - 1.0 / p)
    return leverage_scores(a * half[:, np.newaxis])


def sampling_rate(
    lw: LewisWeights, eps: float, delta: float, n: int, c: float = 10.0
) -> float:
    """Oversampling multiplier beta so that p_i = min(beta * w_i, 1).

    p > 2 uses the d^{p/2-1}/eps^2 * ((log d)^2 log n + log 1/delta) rate;
    p <= 2 uses the plumbing rate c * eps^-2 d log d log(1/delta).
    """
    d = lw.basis.shape[0]
    p = lw.p
    if p > 2:
        logs = (math.log(max(d, 2))) ** 2 * math.log(max(n, 2)) + math.log(1.0 / delta)
        return c * d ** (p / 2.0 - 1.0) / eps**2 * logs
    return c * eps**-2 * d * math.log(max(d, 2)) * math.log(1.0 / delta)


def lewis_sample(
    lw: LewisWeights,
    eps: float,
    delta: float,
    rng: SeededRng,
    c: float = 10.0,
    beta: float | None = None,
) -> SamplingMatrix:
    """Bernoulli row sample with p_i = min(beta w_i, 1) and scales p_i^{-1/p}."""
    n = len(lw.w)
    if beta is None:
        beta = sampling_rate(lw, eps, delta, n, c)
    probs = np.minimum(1.0, beta * lw.w)
    keep = rng.random(n) < probs
    idx = np.flatnonzero(keep)
    scales = probs[idx] ** (-1.0 / lw.p)
    return SamplingMatrix(indices=idx, scales=scales, n_original=n)


def reweight_p_to_q(lw: LewisWeights, q: float) -> np.ndarray:
    """Diagonal W^{1/q - 1/p} converting lp to lq norms over col(A).

    For p > q >= 2 the no-expansion side holds for every vector:
    ||W^{1/q-1/p} y||_q <= ||w||_1^{1/q-1/p} ||y||_p.
    """
    if q < 1:
        raise InputError(f"q must be >= 1, got {q}")
    expo = 1.0 / q - 1.0 / lw.p
    out = np.zeros_like(lw.w)
    nz = lw.w > 0
    out[nz] = lw.w[nz] ** expo
    out[~nz] = 0.0 if expo > 0 else 1.0
    return out


class OnlineLewisSampler:
    """Online one-sided lp Lewis weights with irrevocable keep decisions.

    Each arriving row gets weight w = min{1, c (a (M + ridge)^- a^T)^{p/2}}
    against the running M = A_i^T W^{1-2/p} A_i (solved self-consistently
    through the rank-one update for p >= 2), is kept with probability
    min{1, beta w}, and the decision is frozen.
    """

    def __init__(
        self,
        d: int,
        p: float,
        beta: float = 1e9,
        rng: SeededRng | None = None,
        weight_c: float = 1.0,
        ridge_scale: float = 1e-12,
    ):
        if p <= 0:
            raise InputError(f"p must be positive, got {p}")
        self.d = d
        self.p = p
        self.beta = beta
        self.rng = rng
        self.weight_c = weight_c
        self.ridge_scale = ridge_scale
        self.m = np.zeros((d, d))
        self.count = 0
        self.kept_indices: list[int] = []
        self.kept_scales: list[float] = []
        self.weights: list[float] = []
        self.total_weight = 0.0

    def _quad(self, row: np.ndarray) -> float:
        tr = float(np.trace(self.m))
        ridge = self.ridge_scale * tr if tr > 0 else self.ridge_scale * float(row @ row) + 1e-300
        m = self.m + ridge * np.eye(self.d)
        try:
            sol = np.linalg.solve(m, row)
        except np.linalg.LinAlgError:
            sol = np.linalg.pinv(m) @ row
        return max(float(row @ sol), 0.0)

    def _solve_weight(self, q: float) -> float:
        p, c = self.p, self.weight_c
        if q <= 0:
            return 0.0
        expo = 1.0 - 2.0 / p

        def phi(w: float) -> float:
            denom = 1.0 + (w**expo) * q if w > 0 else (1.0 + q if expo == 0 else np.inf)
            if not np.isfinite(denom):
                return 0.0
            return min(1.0, c * (q / denom) ** (p / 2.0))

        if p < 2:
            # phi is increasing; damped iteration from w=1 finds the top fixed point
            w = 1.0
            for _ in range(60):
                w_new = phi(w)
                if abs(w_new - w) < 1e-12:
                    break
                w = 0.5 * w + 0.5 * w_new
            return max(w, 0.0)
        # p >= 2: phi is nonincreasing in w; bisect w - phi(w)
        raw = min(1.0, c * q ** (p / 2.0))
        lo, hi = 0.0, 1.0
        if phi(1.0) >= 1.0:
            return 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if mid - phi(mid) < 0:
                lo = mid
            else:
                hi = mid
        return min(0.5 * (lo + hi), raw) if p > 2 else 0.5 * (lo + hi)

    def update(self, row) -> tuple[bool, float, float]:
        """Process one row; returns (kept, weight, scale). Irrevocable."""
        row = np.asarray(row, dtype=float).ravel()
        if row.size != self.d:
            raise InputError(f"row has dim {row.size}, sampler built for d={self.d}")
        q = self._quad(row)
        w = self._solve_weight(q)
        expo = 1.0 - 2.0 / self.p
        if w > 0:
            self.m += (w**expo) * np.outer(row, row)
        prob = min(1.0, self.beta * w)
        kept = False
        scale = 0.0
        coin = self.rng.random() if self.rng is not None else 0.0
        if prob >= 1.0 or (prob > 0 and coin < prob):
            kept = True
            scale = prob ** (-1.0 / self.p)
            self.kept_indices.append(self.count)
            self.kept_scales.append(scale)
        self.weights.append(w)
        self.total_weight += w
        self.count += 1
        return kept, w, scale

    def sampling_matrix(self) -> SamplingMatrix:
        return SamplingMatrix(
            indices=np.array(self.kept_indices, dtype=int),
            scales=np.array(self.kept_scales, dtype=float),
            n_original=self.count,
        )


def online_lewis(
    rows,
    p: float,
    beta: float = 1e9,
    rng: SeededRng | None = None,
    weight_c: float = 1.0,
) -> OnlineLewisSampler:
    """Run an OnlineLewisSampler over an iterable of rows and return it."""
    it = iter(rows)
    first = np.asarray(next(it), dtype=float).ravel()
    s = OnlineLewisSampler(first.size, p, beta=beta, rng=rng, weight_c=weight_c)
    s.update(first)
    for row in it:
        s.update(row)
    return s
