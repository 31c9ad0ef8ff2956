"""Online Euclidean (k,p)-clustering, online sensitivities, and the
independent-sampling clustering coreset.

The bicriteria subroutine opens each arriving point as a center with
probability min(1, d(a_i, C)^p / f_r); the admission threshold f doubles
once a round has opened 3k(1+log2 n) centers.  Assignments are made at
arrival and never revised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import InputError, as_matrix
from .online_subspace import StrongCoreset
from .rng import SeededRng


@dataclass
class ClusterConstants:
    round_capacity_c: float = 3.0  # q_r threshold = c * k * (1 + log2 n)
    sensitivity_c0: float = 4.0    # outer O(1) in per-point estimates
    repetition_c: float = 8.0      # R = ceil(c * log(n/delta)) estimator copies
    beta_c: float = 2.0            # oversampling prefactor in beta_1, beta_2
    beta_scale: float = 1.0        # extra multiplier on sampling probabilities


DEFAULT_CLUSTER = ClusterConstants()


@dataclass
class OnlineClusterState:
    """Append-only centers with immutable per-point assignments."""

    k: int
    p: float
    w_star: float
    n_hint: int
    rng: SeededRng
    round_capacity: int
    centers: list = field(default_factory=list)
    assignments: list = field(default_factory=list)   # center id per point
    open_log: list = field(default_factory=list)      # point index of each center
    dists_p: list = field(default_factory=list)       # d(a_i, assigned)^p at arrival
    round_index: int = 1
    round_opens: int = 0
    threshold: float = 0.0
    count: int = 0
    trace: list = field(default_factory=list)         # (round, threshold) per point

    def update(self, point) -> tuple[int, float, bool]:
        """Process one point; returns (assigned center id, d^p, opened?)."""
        x = np.asarray(point, dtype=float).ravel()
        if self.centers:
            c_arr = np.vstack(self.centers)
            d2 = np.linalg.norm(c_arr - x, axis=1)
            nearest = int(np.argmin(d2))
            dist_p = float(d2[nearest] ** self.p)
            prob = min(1.0, dist_p / self.threshold)
        else:
            nearest = -1
            dist_p = math.inf
            prob = 1.0  # empty-center distance is +inf: first point opens
        opened = prob >= 1.0 or self.rng.random() < prob
        if opened:
            self.centers.append(x)
            self.open_log.append(self.count)
            self.round_opens += 1
            nearest = len(self.centers) - 1
            dist_p = 0.0
            if self.round_opens >= self.round_capacity:
                self.round_index += 1
                self.round_opens = 0
                self.threshold *= 2.0
        self.assignments.append(nearest)
        self.dists_p.append(dist_p)
        self.trace.append((self.round_index, self.threshold))
        self.count += 1
        return nearest, dist_p, opened

    @property
    def cost(self) -> float:
        return float(sum(self.dists_p))


def _make_state(k, p, w_star, n_hint, rng, consts) -> OnlineClusterState:
    if w_star <= 0:
        raise InputError("w_star must be positive")
    log_n = math.log2(max(n_hint, 2))
    st = OnlineClusterState(
        k=k,
        p=p,
        w_star=w_star,
        n_hint=n_hint,
        rng=rng,
        round_capacity=math.ceil(consts.round_capacity_c * k * (1 + log_n)),
    )
    st.threshold = w_star / (k * log_n)
    return st


def online_cluster(
    stream,
    k: int,
    p: float,
    w_star: float,
    rng: SeededRng,
    n_hint: int | None = None,
    consts: ClusterConstants = DEFAULT_CLUSTER,
) -> OnlineClusterState:
    """Run online (k,p)-clustering over the stream and return the state."""
    rows = as_matrix(stream) if isinstance(stream, np.ndarray) else as_matrix(np.vstack(list(stream)))
    if n_hint is None:
        n_hint = rows.shape[0]
    st = _make_state(k, p, w_star, n_hint, rng, consts)
    for x in rows:
        st.update(x)
    return st


def default_w_star(rows: np.ndarray, k: int, p: float) -> float:
    """Default cost lower bound: min pairwise distance of the first 2k points, to the p."""
    head = rows[: max(2 * k, 2)]
    m = head.shape[0]
    dmin = math.inf
    for i in range(m):
        for j in range(i + 1, m):
            dist = float(np.linalg.norm(head[i] - head[j]))
            if 0 < dist < dmin:
                dmin = dist
    if not math.isfinite(dmin):
        dmin = 1.0  # all-duplicate head
    return dmin**p


class ClusterSensitivityEstimator:
    """One estimator copy: per-point d(a_i,C)^p / v + 1/|cluster of i|."""

    def __init__(self, k, p, w_star, n_hint, rng, consts=DEFAULT_CLUSTER):
        self.state = _make_state(k, p, w_star, n_hint, rng, consts)
        self.v = 0.0
        self.cluster_sizes: list[int] = []

    def update(self, point) -> float:
        cid, dist_p, _ = self.state.update(point)
        self.v += dist_p
        while len(self.cluster_sizes) <= cid:
            self.cluster_sizes.append(0)
        self.cluster_sizes[cid] += 1
        if dist_p <= 0:
            resid = 0.0
        elif self.v <= 0:
            resid = 1.0
        else:
            resid = dist_p / self.v
        return resid + 1.0 / self.cluster_sizes[cid]


def cluster_sensitivity(
    stream,
    k: int,
    p: float,
    w_star: float,
    r_reps: int,
    rng: SeededRng,
    n_hint: int | None = None,
    consts: ClusterConstants = DEFAULT_CLUSTER,
) -> np.ndarray:
    """Boosted per-point sensitivity estimates: c0 * sum over R copies."""
    rows = as_matrix(stream) if isinstance(stream, np.ndarray) else as_matrix(np.vstack(list(stream)))
    n = rows.shape[0]
    if n_hint is None:
        n_hint = n
    copies = [
        ClusterSensitivityEstimator(k, p, w_star, n_hint, rng.child(200 + c), consts)
        for c in range(r_reps)
    ]
    out = np.empty(n)
    for i, x in enumerate(rows):
        out[i] = consts.sensitivity_c0 * sum(c.update(x) for c in copies)
    return out


@dataclass
class ClusterCoreset:
    coreset: StrongCoreset
    center_ids: np.ndarray        # assigned bicriteria center per kept point
    bicriteria: OnlineClusterState


def cluster_coreset(
    stream,
    k: int,
    p: float,
    eps: float,
    delta: float,
    rng: SeededRng,
    w_star: float | None = None,
    n_hint: int | None = None,
    consts: ClusterConstants = DEFAULT_CLUSTER,
) -> ClusterCoreset:
    """Independent-sampling strong coreset for Euclidean (k,p)-clustering.

    Keeps point i with probability
    min{1, max{beta1 eps^-(p+1) d(a_i,B)^p / v_i, beta2 eps^-2 / |P_i|}}
    against the online bicriteria solution B; prefix residual sums and
    prefix cluster sizes only increase the probabilities, so the offline
    sampling bound still applies.  Weight is the exact inverse probability.
    """
    rows = as_matrix(stream) if isinstance(stream, np.ndarray) else as_matrix(np.vstack(list(stream)))
    n, d = rows.shape
    if n_hint is None:
        n_hint = n
    if w_star is None:
        w_star = default_w_star(rows, k, p)

    log_n = math.log2(max(n_hint, 2))
    b_bound = max(2.0, consts.round_capacity_c * k * (1 + log_n) * math.log2(max(n_hint, 2)))
    beta1 = consts.beta_c * (d * k * math.log(max(n_hint, 2)) + math.log(1.0 / delta))
    beta2 = consts.beta_c * (math.log(b_bound) + math.log(1.0 / delta))

    st = _make_state(k, p, w_star, n_hint, rng.child(0), consts)
    keep_rng = rng.child(1)
    v = 0.0
    sizes: list[int] = []
    indices: list[int] = []
    weights: list[float] = []
    kept_centers: list[int] = []
    probs = np.empty(n)
    for i, x in enumerate(rows):
        cid, dist_p, _ = st.update(x)
        v += dist_p
        while len(sizes) <= cid:
            sizes.append(0)
        sizes[cid] += 1
        if dist_p <= 0:
            resid_term = 0.0
        elif v <= 0:
            resid_term = 1.0
        else:
            resid_term = dist_p / v
        p_i = max(
            beta1 * eps ** -(p + 1.0) * resid_term,
            beta2 * eps**-2.0 / sizes[cid],
        )
        p_i = min(1.0, consts.beta_scale * p_i)
        probs[i] = p_i
        if p_i >= 1.0 or keep_rng.random() < p_i:
            indices.append(i)
            weights.append(1.0 / p_i)
            kept_centers.append(cid)
    coreset = StrongCoreset(
        indices=np.array(indices, dtype=int),
        weights=np.array(weights, dtype=float),
        k=k,
        p=p,
        eps=eps,
        meta={"probs": probs, "beta1": beta1, "beta2": beta2, "w_star": w_star},
    )
    return ClusterCoreset(
        coreset=coreset,
        center_ids=np.array(kept_centers, dtype=int),
        bicriteria=st,
    )


def clustering_cost(points, centers, p: float) -> float:
    """sum_i min_c ||a_i - c||_2^p for explicit centers."""
    pts = as_matrix(points)
    cs = as_matrix(centers)
    dists = np.linalg.norm(pts[:, np.newaxis, :] - cs[np.newaxis, :, :], axis=2)
    return float(np.sum(np.min(dists, axis=1) ** p))


def weighted_clustering_cost(points, weights, centers, p: float) -> float:
    pts = as_matrix(points)
    cs = as_matrix(centers)
    w = np.asarray(weights, dtype=float)
    dists = np.linalg.norm(pts[:, np.newaxis, :] - cs[np.newaxis, :, :], axis=2)
    return float(np.sum(w * np.min(dists, axis=1) ** p))


def kmeans_pp_cost(points, k: int, p: float, rng: SeededRng, iters: int = 20) -> float:
    """Offline k-means++-seeded Lloyd baseline cost (p=2 exact means)."""
    pts = as_matrix(points)
    n = pts.shape[0]
    centers = [pts[int(rng.integers(0, n))]]
    for _ in range(1, min(k, n)):
        c_arr = np.vstack(centers)
        d2 = np.min(np.linalg.norm(pts[:, None, :] - c_arr[None], axis=2) ** 2, axis=1)
        tot = d2.sum()
        if tot <= 0:
            break
        centers.append(pts[int(rng.choice(n, p=d2 / tot))])
    c_arr = np.vstack(centers)
    for _ in range(iters):
        d = np.linalg.norm(pts[:, None, :] - c_arr[None], axis=2)
        lab = np.argmin(d, axis=1)
        new = []
        for j in range(c_arr.shape[0]):
            members = pts[lab == j]
            new.append(members.mean(axis=0) if len(members) else c_arr[j])
        new_arr = np.vstack(new)
        if np.allclose(new_arr, c_arr):
            break
        c_arr = new_arr
    return clustering_cost(pts, c_arr, p)
