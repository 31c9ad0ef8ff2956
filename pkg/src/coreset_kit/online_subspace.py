"""Online strong coresets for lp subspace approximation, plus the entrywise
reduction for p in [1,2).

Rows arrive once; keep/discard decisions are irrevocable.  Sensitivities are
estimated online by tracking a bicriteria subspace that is refit only when
an online Lewis sampler on the sketched stream keeps a new row; between
keep events the subspace is frozen and a residual accumulator v grows.
Several independent estimator copies are summed to boost the constant
success probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import InputError, as_matrix, entrywise_norm, least_squares, orth_basis
from .lewis import OnlineLewisSampler
from .rng import SeededRng
from .sketching import pstable_matrix, srht_plan


@dataclass
class OnlineConstants:
    """Exposed Theta(1) prefactors for the online sensitivity machinery."""

    sigma_c0: float = 4.0        # outer O(1) in the sensitivity estimate
    sigma_c1: float = 4.0        # O(1) inside the (t log nDelta)^{p/2-1} factor
    sketch_c: float = 1.0        # t = ceil(sketch_c * (k log k + log^2 n)), capped at d
    repetition_c: float = 8.0    # R = ceil(repetition_c * log(n/delta))
    beta_scale: float = 1.0      # multiplies the sampling rate beta
    lewis_beta: float = 4.0      # keep-probability multiplier inside online Lewis
    refit_tol: float = 0.2       # row-block IRLS stops at this relative improvement
    budget_c: float = 4.0        # prefactor in the total-sensitivity budget formula


DEFAULT_ONLINE = OnlineConstants()


@dataclass
class IntegerRounding:
    matrix: np.ndarray
    granularity: float
    delta: float          # max |entry| / granularity, the integer bound
    perturbation_bound: float  # guaranteed ||A - A'||_{p,2}^p upper bound


def integer_round(a, eps: float, p: float, lambda_lower_hint: float) -> IntegerRounding:
    """Round entries to the grid eps n^{-1/p} d^{-1/2} (lambda_hint)^{1/p}.

    Guarantees ||A - A'||_{p,2}^p <= eps^p * lambda_hint, so any subspace
    cost above the hint moves by at most a (1 +- eps)^p factor.
    """
    a = as_matrix(a)
    n, d = a.shape
    if lambda_lower_hint <= 0:
        raise InputError("lambda_lower_hint must be positive")
    g = eps * n ** (-1.0 / p) * d**-0.5 * lambda_lower_hint ** (1.0 / p)
    rounded = np.round(a / g) * g
    delta = float(np.max(np.abs(rounded))) / g if np.any(rounded) else 0.0
    return IntegerRounding(
        matrix=rounded,
        granularity=g,
        delta=delta,
        perturbation_bound=eps**p * lambda_lower_hint,
    )


@dataclass
class StrongCoreset:
    """Irrevocably appended row indices with positive weights."""

    indices: np.ndarray
    weights: np.ndarray
    k: int
    p: float
    eps: float
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.indices)


def sketch_dim(k: int, n_hint: int, c: float) -> int:
    return max(1, math.ceil(c * (k * math.log2(max(k, 2)) + math.log2(max(n_hint, 2)) ** 2)))


class OnlineSensitivityState:
    """One estimator copy for online rank-k lp subspace sensitivities.

    Feeding rows in stream order yields per-row overestimates; the bicriteria
    subspace only changes when the sketched-stream Lewis sampler keeps a new
    row, and the stored state is limited to the kept sample plus O(t^2)
    side information.
    """

    def __init__(
        self,
        k: int,
        p: float,
        d: int,
        n_hint: int,
        delta_hint: float,
        rng: SeededRng,
        consts: OnlineConstants = DEFAULT_ONLINE,
    ):
        self.k = k
        self.p = p
        self.d = d
        self.n_hint = max(int(n_hint), 2)
        self.delta_hint = max(float(delta_hint), 2.0)
        self.consts = consts
        self.t = min(d, sketch_dim(k, n_hint, consts.sketch_c))
        # if the sketch target is no smaller than d, identity is exact
        self.g = srht_plan(d, self.t, rng.child(0)).matrix() if self.t < d else np.eye(d)
        self.t = self.g.shape[0]
        self.lewis_main = OnlineLewisSampler(
            self.t, p, beta=consts.lewis_beta, rng=rng.child(1)
        )
        self.lewis_inner = OnlineLewisSampler(
            d, p, beta=consts.lewis_beta, rng=rng.child(2)
        )
        self.kept_sketched: list[np.ndarray] = []  # scaled kept rows of A G^T
        self.kept_rows: list[np.ndarray] = []      # matching scaled original rows
        self.y_tilde = np.zeros((self.t, d))
        self.proj_basis: np.ndarray | None = None  # d x r orthonormal
        self.v = 0.0
        self.count = 0
        self.segments = 0
        self.log_nd = math.log(self.n_hint * self.delta_hint)
        self.grid = 1.0 / (self.n_hint * self.delta_hint) ** 3

    def _refit(self) -> None:
        """Row-block IRLS for min_Y ||L A G^T Y - L A||_{p,2} on the kept sample."""
        s_g = np.vstack(self.kept_sketched)
        s_a = np.vstack(self.kept_rows)
        y = least_squares(s_g, s_a)
        if self.p != 2.0:
            prev = _p2_cost(s_g @ y - s_a, self.p)
            for _ in range(25):
                r = np.linalg.norm(s_g @ y - s_a, axis=1)
                w = np.maximum(r, 1e-12) ** (self.p - 2.0)
                sw = np.sqrt(w)[:, np.newaxis]
                y = least_squares(s_g * sw, s_a * sw)
                cost = _p2_cost(s_g @ y - s_a, self.p)
                if prev - cost <= self.consts.refit_tol * max(prev, 1e-300):
                    break
                prev = cost
        y = np.round(y / self.grid) * self.grid
        self.y_tilde = y
        span = s_g @ y  # m x d rows spanning the bicriteria subspace
        basis = orth_basis(span.T) if np.any(span) else None
        self.proj_basis = basis
        self.segments += 1

    def _residual(self, row: np.ndarray) -> float:
        if self.proj_basis is None:
            return float(np.linalg.norm(row) ** self.p)
        proj = self.proj_basis @ (self.proj_basis.T @ row)
        return float(np.linalg.norm(row - proj) ** self.p)

    def update(self, row) -> float:
        """Feed one row; returns this copy's sensitivity overestimate."""
        row = np.asarray(row, dtype=float).ravel()
        if row.size != self.d:
            raise InputError(f"row has dim {row.size}, state built for d={self.d}")
        sk = self.g @ row
        kept, _, scale = self.lewis_main.update(sk)
        if kept:
            self.kept_sketched.append(scale * sk)
            self.kept_rows.append(scale * row)
            self._refit()
            self.v = self._residual(row)
        else:
            self.v += self._residual(row)
        resid = self._residual(row)
        inner_row = row @ (self.y_tilde.T @ self.g)  # row of A (Y^T G)
        _, w_inner, _ = self.lewis_inner.update(inner_row)

        if resid <= 0:
            resid_term = 0.0
        elif self.v <= 0:
            resid_term = 1.0
        else:
            resid_term = resid / self.v
        factor = (self.consts.sigma_c1 * self.t * self.log_nd) ** max(0.0, self.p / 2.0 - 1.0)
        sigma = self.consts.sigma_c0 * (resid_term + factor * w_inner)
        self.count += 1
        return min(1.0, sigma)


def _p2_cost(m: np.ndarray, p: float) -> float:
    return float(np.sum(np.linalg.norm(m, axis=1) ** p))


def repetitions(n_hint: int, delta: float, c: float = 8.0) -> int:
    return max(1, math.ceil(c * math.log(max(n_hint, 2) / delta)))


def sensitivity_budget(
    t: int, n_hint: int, delta_hint: float, p: float, reps: int, c: float = 4.0
) -> float:
    """Instantiated total-sensitivity bound (t^2 log^2(n Delta))^{1 v p/2} log^2 t log n."""
    log_nd = math.log(max(n_hint, 2) * max(delta_hint, 2.0))
    base = (c * t**2 * log_nd**2) ** max(1.0, p / 2.0)
    return base * max(1.0, math.log(max(t, 2)) ** 2) * math.log(max(n_hint, 2)) * reps


def sampling_beta(
    total_budget: float, k: int, p: float, eps: float, delta: float, scale: float = 1.0
) -> float:
    """Keep-probability multiplier from the weak-coreset sample-size bound."""
    eps_p = eps ** ((p + 3.0) * max(1.0, 2.0 / p))
    log_s = math.log(max(total_budget, 2.0))
    vc = k * min(k**2 * math.log(max(k, 2)) + 1.0, float(k) ** max(1.0, p / 2.0))
    s_over_total = (
        vc * log_s + eps_p**-2 * math.log(1.0 / delta) + eps**-2 / eps_p * k**2 * log_s
    )
    return scale * s_over_total


def online_subspace_coreset(
    stream,
    k: int,
    p: float,
    eps: float,
    delta: float,
    rng: SeededRng,
    n_hint: int | None = None,
    delta_hint: float | None = None,
    consts: OnlineConstants = DEFAULT_ONLINE,
) -> StrongCoreset:
    """Strong online coreset for rank-k lp subspace approximation.

    Row i is kept independently with probability min{1, beta sigma_i} and
    weight 1/prob; sigma_i sums R independent estimator copies.  n and
    condition-number hints follow the stream when it is materialized.
    """
    rows = _materialize(stream)
    n, d = rows.shape
    if n_hint is None:
        n_hint = n
    if delta_hint is None:
        delta_hint = _default_delta_hint(rows)

    reps = repetitions(n_hint, delta, consts.repetition_c)
    copies = [
        OnlineSensitivityState(k, p, d, n_hint, delta_hint, rng.child(100 + c), consts)
        for c in range(reps)
    ]
    t = copies[0].t
    budget = sensitivity_budget(t, n_hint, delta_hint, p, reps, consts.budget_c)
    beta = sampling_beta(budget, k, p, eps, delta, consts.beta_scale)

    keep_rng = rng.child(7)
    indices: list[int] = []
    weights: list[float] = []
    sigma_sum = 0.0
    sigmas = np.empty(n)
    for i, row in enumerate(rows):
        sigma = sum(c.update(row) for c in copies)
        sigmas[i] = sigma
        sigma_sum += sigma
        prob = min(1.0, beta * sigma)
        if prob >= 1.0 or keep_rng.random() < prob:
            indices.append(i)
            weights.append(1.0 / prob)
    return StrongCoreset(
        indices=np.array(indices, dtype=int),
        weights=np.array(weights, dtype=float),
        k=k,
        p=p,
        eps=eps,
        meta={
            "sigma_sum": sigma_sum,
            "sigma": sigmas,
            "budget": budget,
            "beta": beta,
            "repetitions": reps,
            "sketch_dim": t,
            "segments": [c.segments for c in copies],
        },
    )


def _materialize(stream) -> np.ndarray:
    if isinstance(stream, np.ndarray):
        return as_matrix(stream)
    return as_matrix(np.vstack([np.asarray(r, dtype=float) for r in stream]))


def _default_delta_hint(rows: np.ndarray) -> float:
    """Crude condition hint: max |entry| over a sigma_min estimate of the head."""
    d = rows.shape[1]
    head = rows[: max(d, 2)]
    s = np.linalg.svd(head, compute_uv=False)
    smin = s[s > 1e-12]
    lo = smin[-1] if smin.size else 1.0
    return max(2.0, float(np.max(np.abs(rows)) / lo) * rows.shape[0])


# ---------------------------------------------------------------------------
# entrywise reduction, p in [1, 2)

def entrywise_online_coreset(
    stream,
    k: int,
    p: float,
    rng: SeededRng,
    eps: float = 0.5,
    delta: float = 0.1,
    sketch_exp: float = 2.0,
    consts: OnlineConstants = DEFAULT_ONLINE,
) -> tuple[StrongCoreset, np.ndarray, float]:
    """Weak online coreset for entrywise lp low rank approximation.

    Sketches rows with a t-column p-stable map (t = k (log2 n)^sketch_exp),
    runs the subspace coreset on the sketched stream, then evaluates the
    best rank-k fit spanned by the kept original rows: returns
    (coreset, V row factor k x d, residual ||A - C V||_{p,p}).
    """
    if not 1 <= p < 2:
        raise InputError(f"entrywise reduction requires p in [1,2), got {p}")
    rows = _materialize(stream)
    n, d = rows.shape
    t = max(k + 1, math.ceil(k * math.log2(max(n, 2)) ** sketch_exp))
    g = pstable_matrix(rng.child(3), p, t, d, scale_c=1.0)  # t x d, Theta(1/t^{1/p})
    sketched = rows @ g.T

    coreset = online_subspace_coreset(
        sketched, k, p, eps, delta, rng.child(4),
        n_hint=n, consts=consts,
    )
    kept = rows[coreset.indices]
    v = _rank_k_row_factor(kept, coreset.weights, k, p)
    residual = _entrywise_fit_residual(rows, v, p)
    return coreset, v, residual


def _rank_k_row_factor(kept: np.ndarray, weights: np.ndarray, k: int, p: float) -> np.ndarray:
    """Rank-k row factor inside the row span of the kept (weighted) rows."""
    scaled = kept * (weights ** (1.0 / p))[:, np.newaxis]
    _, s, vt = np.linalg.svd(scaled, full_matrices=False)
    kk = min(k, vt.shape[0])
    return vt[:kk]


def _entrywise_fit_residual(a: np.ndarray, v: np.ndarray, p: float) -> float:
    """min_C ||C V - A||_{p,p} by per-row IRLS coefficient fits."""
    total = 0.0
    vt = v.T  # d x k design
    for i in range(a.shape[0]):
        x = least_squares(vt, a[i])
        if p != 2.0:
            prev = float(np.sum(np.abs(vt @ x - a[i]) ** p))
            for _ in range(30):
                r = vt @ x - a[i]
                w = np.maximum(np.abs(r), 1e-12) ** (p - 2.0)
                sw = np.sqrt(w)[:, np.newaxis]
                x = least_squares(vt * sw, a[i] * sw.ravel())
                cost = float(np.sum(np.abs(vt @ x - a[i]) ** p))
                if prev - cost <= 1e-8 * max(prev, 1e-300):
                    break
                prev = cost
        total += float(np.sum(np.abs(vt @ x - a[i]) ** p))
    return total ** (1.0 / p)
