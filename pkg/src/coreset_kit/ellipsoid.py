"""Lowner-John ellipsoid coresets and well-conditioned spanning sets.

The central object: for row vectors {a_i} spanning R^d, a small subset S
such that every a_i is a combination of rows in S with coefficient
Euclidean norm at most 1+eps.  The construction is a coreset for the
minimum-volume ellipsoid of the symmetrized points {+-a_i}, computed either
by coordinate ascent (Wolfe-Atwood with away steps) or by a fixed-point
weight refinement followed by leverage-style sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ConvergenceError,
    DegenerateInputError,
    InputError,
    as_matrix,
    least_squares,
    numerical_rank,
    orth_basis,
)
from .lewis import compute_lewis
from .rng import SeededRng

PRUNE_TOL = 1e-9
SIZE_BUDGET_C = 8.0  # soft budget |S| <= C * d * max(1, log2 log2 d)


def size_budget(d: int, c: float = SIZE_BUDGET_C) -> float:
    return c * d * max(1.0, math.log2(max(math.log2(max(d, 2)), 2.0)))


@dataclass
class EllipsoidCoreset:
    """Weights u on rows with A^T diag(u) A defining a John-type ellipsoid.

    Invariants (coordinate_ascent): ||u||_inf <= 1, ||u||_1 = d, and every
    row satisfies the witness inequality a_i (A^T U A)^{-1} a_i^T <= 1+eps.
    """

    support: np.ndarray
    weights: np.ndarray
    shape: np.ndarray
    eps: float
    method: str
    witnesses: np.ndarray
    iterations: int

    def validate(self, tol: float = 1e-6) -> None:
        d = self.shape.shape[0]
        if np.max(self.weights) > 1.0 + tol:
            raise AssertionError(f"||u||_inf = {np.max(self.weights)} > 1")
        if self.method == "coordinate_ascent" and abs(self.weights.sum() - d) > tol:
            raise AssertionError(f"||u||_1 = {self.weights.sum()} != {d}")
        off = np.setdiff1d(np.arange(len(self.weights)), self.support)
        if off.size and np.max(np.abs(self.weights[off])) > 0:
            raise AssertionError("nonzero weight off support")
        # the sampled variant's witnesses are against its reweighted sample
        # shape, which the embedding only controls up to (1+eps)^2/(1-eps)
        if self.method == "coordinate_ascent":
            bound = 1.0 + self.eps
        else:
            bound = (1.0 + self.eps) ** 3 / (1.0 - self.eps)
        if np.max(self.witnesses) > bound + tol:
            raise AssertionError(f"witness {np.max(self.witnesses)} > {bound}")


@dataclass
class SpanningSet:
    """Row subset S with certified coefficient norms max_i ||(A|_S^T)^+ a_i||_2."""

    support: np.ndarray
    eps: float
    max_coefficient_norm: float
    size_budget: float
    parts: list = field(default_factory=list)  # nonempty for partitioned variants

    def __len__(self) -> int:
        return len(self.support)


def _check_full_rank(a: np.ndarray) -> None:
    d = a.shape[1]
    if numerical_rank(a) < d:
        raise InputError(f"matrix is rank-deficient: rank < d={d}")


def _wolfe_atwood(a, eps, max_iters, away_tol=1e-7):
    """D-optimal design weights for {+-a_i} by Frank-Wolfe with away steps.

    Returns simplex weights (summing to 1) such that all witness values
    g_i = a_i M^{-1} a_i^T with M = sum_i u_i a_i a_i^T satisfy
    g_i <= (1+eps/2) d, and support points also satisfy g_i >= (1-away_tol) d.
    The two-sided stop makes d*u_i <= (1+O(away_tol)) on the support.
    """
    n, d = a.shape
    u = np.full(n, 1.0 / n)
    m = (a.T * u) @ a
    plus_tol = eps / 2.0

    for it in range(max_iters):
        try:
            minv_at = np.linalg.solve(m, a.T)
        except np.linalg.LinAlgError:
            minv_at = np.linalg.pinv(m) @ a.T
        g = np.einsum("ij,ji->i", a, minv_at)
        j_plus = int(np.argmax(g))
        eps_plus = g[j_plus] / d - 1.0

        support = u > PRUNE_TOL
        g_support = np.where(support, g, np.inf)
        j_minus = int(np.argmin(g_support))
        eps_minus = 1.0 - g[j_minus] / d

        if eps_plus <= plus_tol and eps_minus <= away_tol:
            return u, g / d, it

        if eps_plus >= eps_minus:
            gj = g[j_plus]
            lam = (gj - d) / (d * (gj - 1.0))
            u *= 1.0 - lam
            u[j_plus] += lam
            m = (1.0 - lam) * m + lam * np.outer(a[j_plus], a[j_plus])
        else:
            gj = g[j_minus]
            lam = (d - gj) / (d * (gj - 1.0)) if gj > 1.0 else u[j_minus] / (1.0 - u[j_minus])
            lam = min(lam, u[j_minus] / (1.0 - u[j_minus]))
            u *= 1.0 + lam
            u[j_minus] -= lam
            u[j_minus] = max(u[j_minus], 0.0)
            m = (1.0 + lam) * m - lam * np.outer(a[j_minus], a[j_minus])

    raise ConvergenceError(
        f"MVEE coordinate ascent did not converge in {max_iters} iterations "
        f"(eps_plus={eps_plus:.3g}, eps_minus={eps_minus:.3g})",
        best=u,
    )


def _ccly_fixed_point(a, eps, max_iters):
    """Fixed-point refinement u <- tau(diag(u)^{1/2} A).

    Every iterate has ||u||_1 = d and ||u||_inf <= 1 by construction;
    stops once all witnesses a_i (A^T U A)^{-1} a_i^T are <= 1+eps.
    """
    n, d = a.shape
    u = np.full(n, d / n)
    for it in range(max_iters):
        m = (a.T * u) @ a
        try:
            minv_at = np.linalg.solve(m, a.T)
        except np.linalg.LinAlgError:
            minv_at = np.linalg.pinv(m) @ a.T
        g = np.einsum("ij,ji->i", a, minv_at)
        if np.max(g) <= 1.0 + eps:
            return u, g, it
        u = u * g  # tau_i(U^{1/2} A) = u_i * g_i
        # guard drift from accumulated roundoff
        u *= d / u.sum()
    raise ConvergenceError(
        f"fixed-point weight refinement did not converge in {max_iters} iterations "
        f"(max witness {np.max(g):.6g})",
        best=u,
    )


def mvee_coreset(
    a,
    eps: float,
    method: str = "coordinate_ascent",
    rng: SeededRng | None = None,
    max_iters: int | None = None,
    delta: float = 0.05,
    sample_c: float = 0.5,
) -> EllipsoidCoreset:
    """Coreset for the Lowner-John ellipsoid of {+-a_i}.

    coordinate_ascent: Wolfe-Atwood with away steps from the uniform
    Khachiyan start, pruned to support; weights sum to d exactly.

    leverage_sampled: fixed-point weight refinement, then each row kept
    independently with probability min{1, (1+eps) * beta * u_i} for
    beta = sample_c * eps^-2 * log(d) * log(1/delta); kept weights are
    rescaled by their inverse keep probability.
    """
    a = as_matrix(a)
    n, d = a.shape
    if not 0 < eps < 1:
        raise InputError(f"eps must be in (0,1), got {eps}")
    _check_full_rank(a)
    if max_iters is None:
        max_iters = 10_000 * d

    if method == "coordinate_ascent":
        u_simplex, witnesses, iters = _wolfe_atwood(a, eps, max_iters)
        u = d * u_simplex
        u[u < PRUNE_TOL] = 0.0
        u = np.minimum(u, 1.0)
        u *= d / u.sum()
        support = np.flatnonzero(u)
        shape = (a.T * u) @ a
        return EllipsoidCoreset(support, u, shape, eps, method, witnesses, iters)

    if method == "leverage_sampled":
        if rng is None:
            raise InputError("leverage_sampled requires an explicit rng")
        u, witnesses, iters = _ccly_fixed_point(a, eps, max_iters)
        beta = sample_c * eps**-2 * math.log(max(d, 2)) * math.log(1.0 / delta)
        probs = np.minimum(1.0, (1.0 + eps) * beta * u)
        keep = rng.random(n) < probs
        # guard: the sample must keep full rank for downstream pseudoinverses
        if not keep.any() or numerical_rank(a[keep]) < d:
            for j in np.argsort(-u):
                keep[j] = True
                if numerical_rank(a[keep]) >= d:
                    break
        u_scaled = np.where(keep, u / np.maximum(probs, 1e-300), 0.0)
        support = np.flatnonzero(keep)
        shape = (a.T * u_scaled) @ a
        try:
            minv_at = np.linalg.solve(shape, a.T)
        except np.linalg.LinAlgError:
            minv_at = np.linalg.pinv(shape) @ a.T
        wit = np.einsum("ij,ji->i", a, minv_at)
        return EllipsoidCoreset(support, u_scaled, shape, eps, method, wit, iters)

    raise InputError(f"unknown method {method!r}")


def coefficient_norms(a, support) -> np.ndarray:
    """||(A|_S^T)^+ a_i||_2 for every row i (the spanning-set certificate)."""
    a = as_matrix(a)
    sub = a[np.asarray(support, dtype=int)]
    coef = least_squares(sub.T, a.T)  # coef[:, i] solves A|_S^T x = a_i
    return np.linalg.norm(coef, axis=0)


def l2_spanning_set(
    a,
    eps: float,
    rng: SeededRng | None = None,
    method: str = "coordinate_ascent",
    **kwargs,
) -> SpanningSet:
    """Subset S with every row expressible over A|_S with ||coef||_2 <= 1+eps."""
    a = as_matrix(a)
    core = mvee_coreset(a, eps, method=method, rng=rng, **kwargs)
    norms = coefficient_norms(a, core.support)
    return SpanningSet(
        support=core.support,
        eps=eps,
        max_coefficient_norm=float(np.max(norms)),
        size_budget=size_budget(a.shape[1]),
    )


def linf_embedding_subset(
    a,
    eps: float,
    method: str = "coordinate_ascent",
    rng: SeededRng | None = None,
    **kwargs,
) -> tuple[SpanningSet, float]:
    """Subset S with ||A|_S x||_inf <= ||A x||_inf <= kappa ||A|_S x||_inf.

    The lower side holds identically (S is a subset of rows).  kappa is
    (1+eps)^2 sqrt(d) for coordinate ascent and (1+eps)/(1-eps) sqrt(|S|)
    for the sampled variant.
    """
    a = as_matrix(a)
    d = a.shape[1]
    ss = l2_spanning_set(a, eps, rng=rng, method=method, **kwargs)
    if method == "coordinate_ascent":
        kappa = (1.0 + eps) * math.sqrt(d) * (1.0 + eps)
    else:
        kappa = (1.0 + eps) / (1.0 - eps) * math.sqrt(len(ss.support))
    return ss, kappa


def avg_top_k_embedding(
    a,
    k: int,
    eps: float,
    rng: SeededRng | None = None,
    t_min: int = 16,
) -> SpanningSet:
    """Spanning subset whose average-top-k loss embeds that of A.

    Small k (k <= t): one l2-well-conditioned spanning set, distortion
    O(sqrt(k |S|)).  Large k: rows are partitioned uniformly at random into
    ceil(k/t) parts with t = max(d, t_min) and per-part spanning sets are
    unioned.
    """
    a = as_matrix(a)
    n, d = a.shape
    if not 1 <= k <= n:
        raise InputError(f"k={k} out of range for n={n}")
    t = max(d, t_min)
    if k <= t:
        return l2_spanning_set(a, eps, rng=rng)
    if rng is None:
        raise InputError("large-k average-top-k requires an rng for the partition")
    parts = math.ceil(k / t)
    perm = rng.permutation(n)
    chunks = np.array_split(perm, parts)
    supports = []
    part_list = []
    for ci, chunk in enumerate(chunks):
        sub = a[chunk]
        if numerical_rank(sub) < d:
            # rank-deficient part: keep a greedy row basis directly
            sel = chunk[_greedy_row_basis(sub)]
        else:
            ss = l2_spanning_set(sub, eps, rng=rng.child(ci) if rng else None)
            sel = chunk[ss.support]
        supports.append(sel)
        part_list.append(np.asarray(sel))
    support = np.unique(np.concatenate(supports))
    norms = coefficient_norms(a, support) if numerical_rank(a[support]) >= d else None
    return SpanningSet(
        support=support,
        eps=eps,
        max_coefficient_norm=float(np.max(norms)) if norms is not None else float("nan"),
        size_budget=parts * size_budget(d),
        parts=part_list,
    )


def _greedy_row_basis(a: np.ndarray) -> list[int]:
    """Indices of a greedy maximal independent row subset."""
    keep: list[int] = []
    r = 0
    for j in range(a.shape[0]):
        cand = keep + [j]
        rr = numerical_rank(a[cand])
        if rr > r:
            keep = cand
            r = rr
    return keep


def well_cond_decomposition(l, k: int, p: float) -> tuple[np.ndarray, np.ndarray]:
    """Factor a rank<=k matrix L = U V with unit-l_p columns in U.

    U is n x s with ||U e_i||_p <= 1 and V is s x d with
    ||V e_j||_2 <= (1+eps) ||L e_j||_p, for s = O(k log log k).
    """
    l = as_matrix(l)
    n, d = l.shape
    if numerical_rank(l) > k:
        raise InputError(f"rank(L) > k={k}")
    if p < 1:
        raise InputError(f"p must be >= 1, got {p}")
    col_norms = np.array([_lp_col_norm(l[:, j], p) for j in range(d)])
    nonzero = col_norms > 0
    lp = np.zeros_like(l)
    lp[:, nonzero] = l[:, nonzero] / col_norms[nonzero]

    # coordinates of the unit columns in a rank-k orthonormal basis
    q = orth_basis(l)
    r = q.T @ lp  # rank x d, columns are the unit-l_p columns in coordinates
    cols = r.T[nonzero]  # vectors to span
    eps = 0.25
    if numerical_rank(cols) == cols.shape[1] and cols.shape[0] > cols.shape[1]:
        core = mvee_coreset(cols, eps)
        sel_local = _minimize_support(cols, core.support)
    else:
        sel_local = np.array(_greedy_row_basis(cols), dtype=int)
    sel = np.flatnonzero(nonzero)[sel_local]

    u = lp[:, sel]
    z = least_squares(r[:, sel], r)  # s x d coefficients
    v = z * col_norms[np.newaxis, :]
    return u, v


def _minimize_support(vectors: np.ndarray, support: np.ndarray) -> np.ndarray:
    """Greedily drop support rows whose removal keeps the certificate.

    Exact MVEE ties (duplicate or sign-flipped vectors) can leave redundant
    support; removal is accepted whenever the max coefficient norm over all
    vectors does not degrade.
    """
    keep = list(int(i) for i in support)
    current = float(np.max(coefficient_norms(vectors, keep)))
    target = max(current, 1.0) * (1.0 + 1e-12)
    changed = True
    while changed and len(keep) > 1:
        changed = False
        for i in list(keep):
            if len(keep) == 1:
                break
            cand = [j for j in keep if j != i]
            if numerical_rank(vectors[cand]) < vectors.shape[1]:
                continue
            score = float(np.max(coefficient_norms(vectors, cand)))
            if score <= target:
                keep = cand
                changed = True
    return np.array(keep, dtype=int)


def _lp_col_norm(x: np.ndarray, p: float) -> float:
    if np.isinf(p):
        return float(np.max(np.abs(x)))
    return float(np.sum(np.abs(x) ** p) ** (1.0 / p))


def lp_subspace_spanning(
    a,
    p: float,
    rng: SeededRng,
    net_size: int | None = None,
    eps: float = 0.25,
) -> np.ndarray:
    """Change of basis R (d x s) with unit l_p columns of A R spanning col(A).

    Surrogate for the existential eps-net: net_size random unit-l_p vectors
    in the column space are reduced to an l2-well-conditioned spanning
    subset; the residual route goes through the Lewis basis of A.  The
    coefficient-norm constant is validated empirically by callers.
    """
    a = as_matrix(a)
    n, d = a.shape
    _check_full_rank(a)
    if net_size is None:
        net_size = 200 * d

    xs = rng.normal(size=(net_size, d))
    img = xs @ a.T  # rows are A x in R^n
    scales = np.array([_lp_col_norm(img[i], p) for i in range(net_size)])
    good = scales > 1e-12
    xs = xs[good] / scales[good, np.newaxis]

    q = orth_basis(a)  # n x d
    coords = (xs @ a.T) @ q  # net vectors in d coordinates
    core = mvee_coreset(coords, eps)
    r_net = xs[core.support].T  # d x s1

    lw = compute_lewis(a, p)
    r_lewis = lw.basis  # d x d, W^{1/2-1/p} A R orthonormal

    r = np.hstack([r_net, r_lewis])
    # normalize columns of A R to unit l_p norm
    for j in range(r.shape[1]):
        s = _lp_col_norm(a @ r[:, j], p)
        if s > 1e-300:
            r[:, j] /= s
    return r


def cascaded_inf_embedding_check(a, s: SpanningSet | np.ndarray, x) -> float:
    """max_i ||a_i^T X|| / max_{i in S} ||a_i^T X|| for the Euclidean row norm."""
    a = as_matrix(a)
    xm = np.asarray(x, dtype=float)
    support = s.support if isinstance(s, SpanningSet) else np.asarray(s, dtype=int)
    prod = a @ xm
    row_norms = np.linalg.norm(np.atleast_2d(prod.T).T, axis=1)
    denom = np.max(row_norms[support])
    if denom <= 0:
        raise DegenerateInputError("all spanning rows map to zero under X")
    return float(np.max(row_norms) / denom)


def at_k_norm(y, k: int) -> float:
    """Average of the k largest absolute entries."""
    v = np.abs(np.asarray(y, dtype=float).ravel())
    if not 1 <= k <= v.size:
        raise InputError(f"k={k} out of range for length {v.size}")
    top = np.partition(v, v.size - k)[v.size - k:]
    return float(np.mean(top))
