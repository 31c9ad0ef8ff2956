"""Brute-force reference computations backing the derived test values.

Everything here is deterministic, side-effect free, and intentionally
independent of the fast paths it checks: exhaustive subset enumeration,
dense angular nets over subspaces, grids over center tuples, and a
certified LP for Chebyshev regression.  Values can be cached as JSON
reports keyed by an instance hash.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import os
import time
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linprog

from .core import (
    BudgetExceededError,
    InputError,
    as_matrix,
    least_squares,
)
from .css import g_regression
from .losses import LossSpec, abs_p


@dataclass
class OracleReport:
    instance_hash: str
    method: str
    value: float
    runtime: float
    extra: dict


def _hash_instance(*parts) -> str:
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, np.ndarray):
            h.update(np.ascontiguousarray(part, dtype=float).tobytes())
        else:
            h.update(repr(part).encode())
    return h.hexdigest()[:24]


def _cache_path(cache_dir, key):
    return os.path.join(cache_dir, f"{key}.json") if cache_dir else None


def _cached(cache_dir, key):
    path = _cache_path(cache_dir, key)
    if path and os.path.exists(path):
        with open(path) as f:
            return json.load(f)
    return None


def _store(cache_dir, key, report: OracleReport):
    path = _cache_path(cache_dir, key)
    if path:
        os.makedirs(cache_dir, exist_ok=True)
        with open(path, "w") as f:
            json.dump(asdict(report), f, sort_keys=True)


def _column_fit_residual(a, cols, mode, loss, p):
    sub = a[:, cols]
    if mode == "frobenius":
        x = least_squares(sub, a)
        return float(np.linalg.norm(a - sub @ x))
    if mode == "g":
        total = 0.0
        for j in range(a.shape[1]):
            xj = g_regression(sub, a[:, j], loss)
            total += loss.cost(sub @ xj - a[:, j])
        return total
    if mode == "entrywise_p":
        lp = abs_p(p)
        powered = 0.0
        for j in range(a.shape[1]):
            xj = g_regression(sub, a[:, j], lp)
            powered += float(np.sum(np.abs(sub @ xj - a[:, j]) ** p))
        return powered ** (1.0 / p)
    raise InputError(f"unknown mode {mode!r}")


def brute_css(
    a,
    k: int,
    subset_size: int,
    mode: str = "frobenius",
    loss: LossSpec | None = None,
    p: float | None = None,
    budget: int = 1_000_000,
    cache_dir: str | None = None,
) -> tuple[np.ndarray, float]:
    """Exhaustive best column subset of the given size under the given norm."""
    a = as_matrix(a)
    d = a.shape[1]
    if math.comb(d, subset_size) > budget:
        raise BudgetExceededError(
            f"C({d},{subset_size}) = {math.comb(d, subset_size)} exceeds budget {budget}"
        )
    key = _hash_instance("brute_css", a, k, subset_size, mode, repr(loss), p)
    hit = _cached(cache_dir, key)
    if hit is not None:
        return np.array(hit["extra"]["subset"], dtype=int), hit["value"]
    t0 = time.perf_counter()
    best_val = math.inf
    best_subset = None
    for combo in itertools.combinations(range(d), subset_size):
        val = _column_fit_residual(a, list(combo), mode, loss, p)
        if val < best_val:
            best_val = val
            best_subset = combo
    report = OracleReport(
        instance_hash=key,
        method=f"brute_css/{mode}",
        value=best_val,
        runtime=time.perf_counter() - t0,
        extra={"subset": list(best_subset)},
    )
    _store(cache_dir, key, report)
    return np.array(best_subset, dtype=int), best_val


def exact_lp_regression(
    a,
    b,
    p: float,
    cache_dir: str | None = None,
    kkt_tol: float = 1e-10,
) -> tuple[np.ndarray, float, bool]:
    """Reference solver for min ||Ax - b||_p: returns (x, OPT, certified).

    Finite p: high-iteration IRLS with homotopy and multi-start, certified
    by the KKT residual; OPT is the powered cost sum |r_i|^p.  p = inf: the
    Chebyshev LP (exact, solver-certified); OPT is max |r_i|.
    """
    a = as_matrix(a)
    b = np.asarray(b, dtype=float).ravel()
    n, d = a.shape
    key = _hash_instance("exact_lp", a, b, p)
    hit = _cached(cache_dir, key)
    if hit is not None:
        return np.array(hit["extra"]["x"]), hit["value"], hit["extra"]["certified"]
    t0 = time.perf_counter()

    if np.isinf(p):
        # minimize t subject to -t <= Ax - b <= t
        c = np.zeros(d + 1)
        c[-1] = 1.0
        a_ub = np.vstack([np.hstack([a, -np.ones((n, 1))]), np.hstack([-a, -np.ones((n, 1))])])
        b_ub = np.concatenate([b, -b])
        res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=[(None, None)] * (d + 1), method="highs")
        x = res.x[:d]
        opt = float(np.max(np.abs(a @ x - b)))
        report = OracleReport(key, "exact_lp/linprog", opt, time.perf_counter() - t0,
                              {"x": x.tolist(), "certified": bool(res.status == 0)})
        _store(cache_dir, key, report)
        return x, opt, bool(res.status == 0)

    if p == 1.0:
        # minimize sum t subject to -t <= Ax - b <= t  (exact l1 LP)
        c = np.concatenate([np.zeros(d), np.ones(n)])
        a_ub = np.vstack(
            [np.hstack([a, -np.eye(n)]), np.hstack([-a, -np.eye(n)])]
        )
        b_ub = np.concatenate([b, -b])
        res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=[(None, None)] * (d + n), method="highs")
        x = res.x[:d]
        opt = float(np.sum(np.abs(a @ x - b)))
        report = OracleReport(key, "exact_lp/l1-linprog", opt, time.perf_counter() - t0,
                              {"x": x.tolist(), "certified": bool(res.status == 0)})
        _store(cache_dir, key, report)
        return x, opt, bool(res.status == 0)

    if p == 2.0:
        x = least_squares(a, b)
        opt = float(np.sum((a @ x - b) ** 2))
        report = OracleReport(key, "exact_lp/normal", opt, time.perf_counter() - t0,
                              {"x": x.tolist(), "certified": True})
        _store(cache_dir, key, report)
        return x, opt, True

    best_x, best_cost = None, math.inf
    starts = [least_squares(a, b)]
    gen = np.random.default_rng(_stable_seed(key))
    starts += [starts[0] + 0.5 * gen.normal(size=d) * max(np.linalg.norm(starts[0]), 1.0)
               for _ in range(2)]
    for x0 in starts:
        x = _irls_homotopy(a, b, p, x0, max_iters=500)
        if p >= 2:
            x = _newton_polish(a, b, p, x)
        cost = float(np.sum(np.abs(a @ x - b) ** p))
        if cost < best_cost:
            best_cost, best_x = cost, x
    r = a @ best_x - b
    if p >= 2:
        grad = a.T @ (np.sign(r) * np.abs(r) ** (p - 1.0))
        scale = max(np.linalg.norm(a.T @ np.abs(r) ** (p - 1.0)), 1e-300)
    else:
        rr = np.where(np.abs(r) < 1e-13, 0.0, r)
        grad = a.T @ (np.sign(rr) * np.abs(rr) ** (p - 1.0))
        scale = max(np.linalg.norm(np.abs(a).T @ np.abs(rr) ** (p - 1.0)), 1e-300)
    certified = float(np.linalg.norm(grad)) <= kkt_tol * scale + 1e-12
    report = OracleReport(key, "exact_lp/irls", best_cost, time.perf_counter() - t0,
                          {"x": best_x.tolist(), "certified": bool(certified)})
    _store(cache_dir, key, report)
    return best_x, best_cost, certified


def _stable_seed(key: str) -> int:
    return int(key[:12], 16)


def _newton_polish(a, b, p, x0, iters=40):
    """Damped Newton on the smooth objective sum |r|^p, p >= 2."""
    x = np.array(x0, dtype=float)
    cost = float(np.sum(np.abs(a @ x - b) ** p))
    for _ in range(iters):
        r = a @ x - b
        w = np.maximum(np.abs(r), 1e-14) ** (p - 2.0)
        grad = p * (a.T @ (np.sign(r) * np.abs(r) ** (p - 1.0)))
        hess = p * (p - 1.0) * (a.T * w) @ a
        try:
            step = np.linalg.solve(hess + 1e-14 * np.trace(hess) * np.eye(len(x)), grad)
        except np.linalg.LinAlgError:
            break
        t = 1.0
        improved = False
        for _ in range(30):
            cand = x - t * step
            c_cost = float(np.sum(np.abs(a @ cand - b) ** p))
            if c_cost < cost:
                x, cost = cand, c_cost
                improved = True
                break
            t *= 0.5
        if not improved:
            break
    return x


def _irls_homotopy(a, b, p, x0, max_iters=500):
    x = np.array(x0, dtype=float)
    stages = [p]
    if p > 4:
        stages, q = [], 4.0
        while q < p:
            stages.append(q)
            q *= 2
        stages.append(p)
    for sp in stages:
        prev = float(np.sum(np.abs(a @ x - b) ** sp))
        for _ in range(max_iters):
            r = a @ x - b
            w = np.maximum(np.abs(r), 1e-13) ** (sp - 2.0)
            sw = np.sqrt(w)
            x_new = least_squares(a * sw[:, np.newaxis], b * sw)
            cost = float(np.sum(np.abs(a @ x_new - b) ** sp))
            if cost > prev:
                x_new = 0.5 * (x + x_new)
                cost = float(np.sum(np.abs(a @ x_new - b) ** sp))
            x = x_new
            if abs(prev - cost) <= 1e-14 * max(prev, 1e-300):
                break
            prev = cost
    return x


def projection_net(d: int, k: int, resolution_deg: float) -> list[np.ndarray]:
    """Orthonormal bases (d x k) from an angular grid; dense for k=1, d<=4."""
    if k == 1:
        return [v.reshape(-1, 1) for v in sphere_net(d, resolution_deg)]
    if k == 2:
        dirs = sphere_net(d, max(resolution_deg, 15.0))
        bases = []
        for u, v in itertools.combinations(dirs, 2):
            w = v - (u @ v) * u
            nw = np.linalg.norm(w)
            if nw < 1e-8:
                continue
            bases.append(np.column_stack([u, w / nw]))
        return bases
    raise InputError(f"projection nets support k <= 2, got k={k}")


def sphere_net(d: int, resolution_deg: float) -> list[np.ndarray]:
    """Unit directions in R^d from a product angular grid (antipodes deduped)."""
    step = math.radians(resolution_deg)
    if d == 1:
        return [np.array([1.0])]
    if d == 2:
        angles = np.arange(0.0, math.pi, step)
        return [np.array([math.cos(t), math.sin(t)]) for t in angles]
    if d == 3:
        out = []
        for phi in np.arange(0.0, math.pi, step):
            for theta in np.arange(0.0, math.pi, step):
                out.append(
                    np.array(
                        [
                            math.sin(theta) * math.cos(phi),
                            math.sin(theta) * math.sin(phi),
                            math.cos(theta),
                        ]
                    )
                )
        return out
    if d == 4:
        out = []
        for a1 in np.arange(0.0, math.pi, step):
            for a2 in np.arange(0.0, math.pi, step):
                for a3 in np.arange(0.0, math.pi, step):
                    out.append(
                        np.array(
                            [
                                math.cos(a1),
                                math.sin(a1) * math.cos(a2),
                                math.sin(a1) * math.sin(a2) * math.cos(a3),
                                math.sin(a1) * math.sin(a2) * math.sin(a3),
                            ]
                        )
                    )
        return out
    raise InputError(f"sphere nets support d <= 4, got d={d}")


def strong_coreset_check(
    a,
    indices,
    weights,
    k: int,
    p: float,
    resolution_deg: float = 2.0,
) -> float:
    """Max relative cost deviation of the weighted subset over a subspace net.

    Enumerates rank-k subspaces F from an angular grid and returns
    max_F |sum_i w_i cost_i(F) - sum_i cost_i(F)| / sum_i cost_i(F) with
    cost_i = ||a_i (I - P_F)||_2^p.
    """
    a = as_matrix(a)
    n, d = a.shape
    if d > 4 or k > 2:
        raise InputError("strong_coreset_check supports d <= 4, k <= 2")
    idx = np.asarray(indices, dtype=int)
    w = np.asarray(weights, dtype=float)
    if k == 1:
        # vectorized over the whole direction net: cost_i(b) = (|a_i|^2 - (a_i.b)^2)^{p/2}
        dirs = np.vstack(sphere_net(d, resolution_deg))
        proj = a @ dirs.T  # n x m
        sq = np.maximum(np.sum(a * a, axis=1)[:, np.newaxis] - proj**2, 0.0)
        costs = sq ** (p / 2.0)
        totals = costs.sum(axis=0)
        approx = w @ costs[idx]
        good = totals > 1e-300
        if not good.any():
            return 0.0
        return float(np.max(np.abs(approx[good] - totals[good]) / totals[good]))
    worst = 0.0
    for basis in projection_net(d, k, resolution_deg):
        resid = a - (a @ basis) @ basis.T
        costs = np.linalg.norm(resid, axis=1) ** p
        total = float(costs.sum())
        if total <= 1e-300:
            continue
        approx = float(np.sum(w * costs[idx]))
        worst = max(worst, abs(approx - total) / total)
    return worst


def exact_cluster_sensitivity(
    points,
    k: int,
    p: float,
    grid: int = 20,
    pad: float = 0.25,
) -> np.ndarray:
    """Grid-restricted sensitivities sup_C cost_i(C) / total_cost(C), d = 2.

    Center tuples range over a grid in the padded bounding box; tuples with
    zero total cost are excluded from the supremum.
    """
    pts = as_matrix(points)
    n, d = pts.shape
    if d != 2 or k > 2:
        raise InputError("exact_cluster_sensitivity supports d = 2, k <= 2")
    if grid ** (2 * k) > 50**4:
        raise BudgetExceededError(f"grid^(2k) = {grid ** (2 * k)} too large")
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    lo = lo - pad * span
    hi = hi + pad * span
    xs = np.linspace(lo[0], hi[0], grid)
    ys = np.linspace(lo[1], hi[1], grid)
    centers = np.array([[x, y] for x in xs for y in ys])

    best = np.zeros(n)
    if k == 1:
        for c in centers:
            costs = np.linalg.norm(pts - c, axis=1) ** p
            tot = costs.sum()
            if tot <= 0:
                continue
            best = np.maximum(best, costs / tot)
        return best
    m = len(centers)
    dists = np.linalg.norm(pts[:, None, :] - centers[None], axis=2) ** p
    for i1 in range(m):
        d1 = dists[:, i1]
        for i2 in range(i1, m):
            costs = np.minimum(d1, dists[:, i2])
            tot = costs.sum()
            if tot <= 0:
                continue
            best = np.maximum(best, costs / tot)
    return best


def offline_subspace_cost(a, k: int, p: float, resolution_deg: float = 2.0) -> float:
    """Net-minimized rank-k lp subspace cost (oracle companion to the check)."""
    a = as_matrix(a)
    best = math.inf
    for basis in projection_net(a.shape[1], k, resolution_deg):
        resid = a - (a @ basis) @ basis.T
        best = min(best, float(np.sum(np.linalg.norm(resid, axis=1) ** p)))
    return best
