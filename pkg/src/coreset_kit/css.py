"""Column subset selection for entrywise losses, plus hard-instance generators.

Two round-based selectors share the same skeleton: repeatedly draw a column
sample H, fit every surviving column on A|^H by approximate g-regression,
and retire the cheapest fraction, keeping the best of a few inner draws.
The selectors differ in the sample-size/drop-fraction constants; both take
them from a configurable constants block with the listing values as
defaults.  Below the size guard all remaining columns are selected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    BudgetExceededError,
    InputError,
    as_matrix,
    entrywise_norm,
    gnorm,
    least_squares,
    leverage_scores,
    numerical_rank,
    rank_k_factors,
)
from .lewis import compute_lewis, reweight_p_to_q
from .losses import LossSpec, abs_p
from .rng import SeededRng


@dataclass
class CssConstants:
    """Round-structure constants; listing values are the defaults."""

    guard: float = 1000.0       # loop runs while surviving columns >= guard * s
    h_factor: float = 160.0     # |H| = h_factor * s * log2(d_l)   (g-norm variant)
    drop_denom: float = 960.0   # retire d_l / drop_denom columns per round
    boost_h_factor: float = 30.0   # |H| = boost_h_factor * s      (boosted variant)
    boost_drop_denom: float = 20.0
    s_factor: float = 1.0       # s = ceil(s_factor * k * max(1, log2 log2 k))
    inner_extra: int = 2        # inner repetitions = ceil(log2 max(2, log2 d)) + extra


DEFAULT_CONSTANTS = CssConstants()


def spanning_size(k: int, s_factor: float = 1.0) -> int:
    return max(1, math.ceil(s_factor * k * max(1.0, math.log2(max(math.log2(max(k, 2)), 2.0)))))


def _inner_reps(d: int, extra: int) -> int:
    return math.ceil(math.log2(max(2.0, math.log2(max(d, 2))))) + extra


@dataclass
class CssResult:
    """Selected columns with coefficients and a per-round residual trace."""

    selected: np.ndarray
    coefficients: np.ndarray  # |S| x d, approximating A ~= A|^S X
    residual: float
    rounds: int
    trace: list[dict] = field(default_factory=list)

    def recompute_residual(self, a, loss: LossSpec | None = None, p: float | None = None) -> float:
        a = as_matrix(a)
        approx = a[:, self.selected] @ self.coefficients
        if loss is not None:
            return gnorm(a - approx, loss)
        return entrywise_norm(a - approx, p)

    def validate(self, a, loss: LossSpec | None = None, p: float | None = None, rtol: float = 1e-8):
        fresh = self.recompute_residual(a, loss=loss, p=p)
        scale = max(abs(self.residual), abs(fresh), 1e-30)
        if abs(fresh - self.residual) > rtol * scale + 1e-12:
            raise AssertionError(f"stored residual {self.residual} != recomputed {fresh}")


def g_regression(
    b,
    y,
    loss: LossSpec,
    max_iters: int = 60,
    tol: float = 1e-10,
) -> np.ndarray:
    """Approximately minimize sum_i g((Bx - y)_i) by IRLS.

    Majorize-minimize with weights g'(r)/r (residuals floored at 1e-12),
    started from least squares; the best iterate by g-cost is returned, so a
    diverging iteration falls back to the least-squares solution.
    """
    b = as_matrix(b, "B")
    y = np.asarray(y, dtype=float).ravel()
    if b.shape[0] != y.size:
        raise InputError(f"B has {b.shape[0]} rows but y has {y.size}")
    x = least_squares(b, y)
    best_x = x
    best_cost = loss.cost(b @ x - y)
    if best_cost <= tol:
        return best_x
    prev = best_cost
    for _ in range(max_iters):
        r = b @ x - y
        w = loss.irls_weight(r)
        sw = np.sqrt(np.maximum(w, 1e-300))
        x = least_squares(b * sw[:, np.newaxis], y * sw)
        cost = loss.cost(b @ x - y)
        if cost < best_cost:
            best_cost, best_x = cost, x
        if abs(prev - cost) <= tol * max(prev, 1e-30):
            break
        prev = cost
    return best_x


def _fit_columns(a, h, cols, loss, max_iters=60):
    """Cost and coefficients of fitting each column in `cols` on A|^H."""
    sub = a[:, h]
    costs = np.empty(len(cols))
    coefs = np.empty((len(h), len(cols)))
    for idx, j in enumerate(cols):
        x = g_regression(sub, a[:, j], loss, max_iters=max_iters)
        coefs[:, idx] = x
        costs[idx] = loss.cost(sub @ x - a[:, j])
    return costs, coefs


def _round_selector(a, loss, s, h_size_fn, drop_denom, consts, rng):
    """Shared round structure for css_gnorm / css_boost."""
    a = as_matrix(a)
    n, d = a.shape
    surviving = list(range(d))
    selected: list[int] = []
    col_coef: dict[int, tuple[np.ndarray, np.ndarray]] = {}  # j -> (H, coef)
    trace: list[dict] = []
    rounds = 0
    reps = _inner_reps(d, consts.inner_extra)

    while len(surviving) >= consts.guard * s:
        d_l = len(surviving)
        t_l = min(int(h_size_fn(d_l)), d_l)
        m_l = max(1, int(d_l // drop_denom))
        best = None
        for t in range(reps):
            draw_rng = rng.child(rounds, t)
            h = np.sort(draw_rng.choice(d_l, size=t_l, replace=False))
            h_cols = np.array([surviving[i] for i in h])
            costs, coefs = _fit_columns(a, h_cols, surviving, loss)
            order = np.argsort(costs, kind="stable")
            chosen = order[:m_l]
            c_lt = float(np.sum(costs[chosen]))
            if best is None or c_lt < best[0]:
                best = (c_lt, h_cols, costs, coefs, chosen)
        c_star, h_cols, costs, coefs, chosen = best
        removed = [surviving[i] for i in chosen]
        for local, j in zip(chosen, removed):
            col_coef[j] = (h_cols, coefs[:, local])
        trace.append(
            {
                "round": rounds,
                "d_l": d_l,
                "t_l": t_l,
                "removed": removed,
                "removed_cost": c_star,
                "costs": costs,
                "order_threshold": float(np.sort(costs)[len(chosen) - 1]),
            }
        )
        selected.extend(h_cols.tolist())
        keep_mask = np.ones(d_l, dtype=bool)
        keep_mask[chosen] = False
        surviving = [surviving[i] for i in range(d_l) if keep_mask[i]]
        rounds += 1

    # below the guard every remaining column is selected (fits itself exactly)
    selected.extend(surviving)
    sel = np.unique(np.array(selected, dtype=int))
    pos = {j: i for i, j in enumerate(sel)}
    x = np.zeros((len(sel), d))
    for j in range(d):
        if j in col_coef:
            h_cols, coef = col_coef[j]
            for hj, c in zip(h_cols, coef):
                x[pos[hj], j] += c
        else:
            x[pos[j], j] = 1.0
    residual = gnorm(a - a[:, sel] @ x, loss)
    return CssResult(selected=sel, coefficients=x, residual=residual, rounds=rounds, trace=trace)


def css_gnorm(
    a,
    k: int,
    loss: LossSpec,
    rng: SeededRng,
    consts: CssConstants = DEFAULT_CONSTANTS,
) -> CssResult:
    """Round-based column subset selection for an entrywise loss g.

    Each round draws |H| = 160 s log2(d_l) columns, fits all survivors, and
    retires the d_l/960 cheapest, repeating the draw a few times and keeping
    the cheapest draw.  With the default constants the loop only engages for
    d >= 1000 s; smaller inputs select every column (residual 0).
    """
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    s = spanning_size(k, consts.s_factor)
    return _round_selector(
        a,
        loss,
        s,
        lambda d_l: consts.h_factor * s * math.log2(max(d_l, 2)),
        consts.drop_denom,
        consts,
        rng,
    )


def css_boost(
    a,
    k: int,
    loss_or_p,
    existential_size: int,
    rng: SeededRng,
    consts: CssConstants = DEFAULT_CONSTANTS,
) -> CssResult:
    """Existential-to-algorithmic boosting: |H| = 30 s, drop d_l/20 per round.

    The caller supplies the existential subset size s(k) (O(k) for lp via
    lp_rank_factor, O(k log log k) for Huber).  loss_or_p is a LossSpec or a
    float p meaning the entrywise |x|^p loss.
    """
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    loss = loss_or_p if isinstance(loss_or_p, LossSpec) else abs_p(float(loss_or_p))
    s = max(1, int(existential_size))
    return _round_selector(
        a,
        loss,
        s,
        lambda d_l: consts.boost_h_factor * s,
        consts.boost_drop_denom,
        consts,
        rng,
    )


def lp_rank_factor(
    a,
    k: int,
    p: float,
    rng: SeededRng,
    lev_c: float = 4.0,
) -> CssResult:
    """O(k log k)-column selection for entrywise lp, p >= 2.

    A Frobenius rank-k factorization stands in for the unknown optimum: the
    lp Lewis weights of its right factor reweight columns so the lp problem
    collapses to an l2 one, leverage scores of the reweighted factor drive
    the column sample, and the coefficients are refit per column by IRLS.
    """
    a = as_matrix(a)
    n, d = a.shape
    if p < 2:
        raise InputError(f"lp_rank_factor requires p >= 2, got {p}")
    _, vt = rank_k_factors(a, k)  # k x d
    v = vt.T  # d x k: rows indexed by columns of A
    rank_v = numerical_rank(v)
    if rank_v < v.shape[1]:
        v = v[:, :rank_v] if rank_v > 0 else v[:, :1]
    lw = compute_lewis(v, p) if numerical_rank(v) == v.shape[1] else None
    if lw is not None:
        scale = reweight_p_to_q(lw, 2.0)  # w^{1/2 - 1/p} per column of A
    else:
        scale = np.ones(d)
    scored = v * scale[:, np.newaxis]
    tau = leverage_scores(scored)
    beta = lev_c * max(1.0, math.log(max(k, 2)))
    probs = np.minimum(1.0, beta * tau)
    keep = rng.random(d) < probs
    # ensure the sample spans the factor's row space
    if not keep.any() or numerical_rank(scored[keep]) < numerical_rank(scored):
        for j in np.argsort(-tau):
            keep[j] = True
            if numerical_rank(scored[keep]) >= numerical_rank(scored):
                break
    sel = np.flatnonzero(keep)

    loss = abs_p(p)
    sub = a[:, sel]
    x = np.zeros((len(sel), d))
    for j in range(d):
        x[:, j] = g_regression(sub, a[:, j], loss)
    residual = entrywise_norm(a - sub @ x, p)
    return CssResult(selected=sel, coefficients=x, residual=residual, rounds=0, trace=[])


# ---------------------------------------------------------------------------
# hard instances

def spanning_lb_instance(d: int) -> np.ndarray:
    """Identity stacked with the all-ones row: any d-row subset forces sqrt(d)."""
    return np.vstack([np.eye(d), np.ones((1, d))])


def linf_css_instance(k: int, c: float, rng: SeededRng) -> tuple[np.ndarray, dict]:
    """k Gaussian rows scaled by k on top of all 2^r sign vectors, r = k^c."""
    r = int(round(k**c))
    if r > 20:
        raise BudgetExceededError(f"2^{r} rows is too large to materialize")
    top = k * rng.normal(size=(k, r))
    signs = np.array(
        [[1.0 if (i >> b) & 1 else -1.0 for b in range(r)] for i in range(2**r)]
    )
    return np.vstack([top, signs]), {"k": k, "r": r, "opt_linf_upper": 1.0}


def ptb_code(
    d: int,
    q: float,
    rng: SeededRng,
    target_c: float | None = None,
    max_retries: int = 20_000,
) -> tuple[np.ndarray, dict]:
    """d^q sign vectors with pairwise |<x,y>| <= C sqrt(d), by rejection.

    Rows violating the target correlation are resampled; exceeding the retry
    cap raises with the best correlation achieved.
    """
    m = int(round(d**q))
    if target_c is None:
        target_c = 2.0 * math.sqrt(max(q, 1.0) * math.log(max(d, 2))) + 1.0
    bound = target_c * math.sqrt(d)
    rows = np.empty((m, d))
    retries = 0
    i = 0
    while i < m:
        cand = rng.choice([-1.0, 1.0], size=d)
        if i == 0 or np.max(np.abs(rows[:i] @ cand)) <= bound:
            rows[i] = cand
            i += 1
        else:
            retries += 1
            if retries > max_retries:
                achieved = float(np.max(np.abs(rows[:i] @ rows[:i].T - d * np.eye(i))))
                raise BudgetExceededError(
                    f"rejection cap exceeded; best max correlation {achieved:.3g} "
                    f"(target {bound:.3g})"
                )
    gram = rows @ rows.T
    off = np.abs(gram - d * np.eye(m))
    achieved = float(np.max(off)) if m > 1 else 0.0
    return rows, {
        "m": m,
        "target_c": target_c,
        "achieved_c": achieved / math.sqrt(d) if m > 1 else 0.0,
        "retries": retries,
    }


def active_lb_instance(
    p: float,
    d: int,
    eps: float,
    rng: SeededRng,
    copies_scale: float = 1.0,
) -> tuple[np.ndarray, dict]:
    """Stacked near-orthogonal codewords on which small query budgets fail.

    s = max(1, round(copies_scale / eps^{p-1})) copies of each of d^{p/2}
    codewords; the planted target is b = d e_I for a uniformly random row I
    (or zero), sampled via `sample_target`.
    """
    code, meta = ptb_code(d, p / 2.0, rng)
    s = max(1, int(round(copies_scale / eps ** (p - 1.0))))
    a = np.repeat(code, s, axis=0)
    info = {
        "codewords": meta["m"],
        "copies": s,
        "n": a.shape[0],
        "achieved_c": meta["achieved_c"],
        "eps": eps,
        "p": p,
    }
    return a, info


def sample_target(n: int, d: int, rng: SeededRng) -> np.ndarray:
    """b = 0 with probability 1/2, else d * e_I for uniform I."""
    b = np.zeros(n)
    if rng.random() < 0.5:
        b[int(rng.integers(0, n))] = float(d)
    return b


def hard_instances(kind: str, rng: SeededRng, **params) -> tuple[np.ndarray, dict]:
    """Dispatcher over the hard-instance generators."""
    if kind == "spanning_lb":
        return spanning_lb_instance(int(params["d"])), {"d": int(params["d"])}
    if kind == "linf_css":
        return linf_css_instance(int(params["k"]), float(params.get("c", 1.0)), rng)
    if kind == "ptb_code":
        return ptb_code(int(params["d"]), float(params["q"]), rng,
                        target_c=params.get("target_c"))
    if kind == "active_lb":
        return active_lb_instance(
            float(params["p"]), int(params["d"]), float(params["eps"]), rng,
            copies_scale=float(params.get("copies_scale", 1.0)),
        )
    raise InputError(f"unknown hard instance kind {kind!r}")
