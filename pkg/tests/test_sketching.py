import math

import numpy as np
import pytest

from coreset_kit.core import InputError
from coreset_kit.ellipsoid import lp_subspace_spanning
from coreset_kit.rng import SeededRng
from coreset_kit.sketching import (
    fwht,
    pstable,
    pstable_embed,
    pstable_matrix,
    srht_apply,
    srht_plan,
)
from conftest import gaussian


def test_pstable_gaussian_marginal():
    x = pstable(SeededRng(0), 2.0, 100_000)
    assert x.var() == pytest.approx(2.0, rel=0.05)
    assert x.mean() == pytest.approx(0.0, abs=0.05)


def test_pstable_cauchy_quartiles():
    x = np.abs(pstable(SeededRng(1), 1.0, 100_000))
    qs = np.quantile(x, [0.25, 0.5, 0.75])
    expect = [math.tan(math.pi / 8 * k) for k in (1, 2, 3)]
    for got, want in zip(qs, expect):
        assert got == pytest.approx(want, rel=0.05)


def test_pstable_rejects_bad_p():
    with pytest.raises(InputError):
        pstable(SeededRng(2), 2.5, 10)


def test_stability_single_coordinate():
    # for y = e1 the sketch column is exactly scaled p-stable draws
    r = 64
    s = pstable_matrix(SeededRng(3), 1.0, r, 5, scale_c=4.0)
    col = s @ np.eye(5)[:, 0]
    assert col == pytest.approx(s[:, 0])
    assert np.median(np.abs(col)) == pytest.approx(4.0 / r, rel=1.0)


def test_cauchy_median_tracks_l1():
    a = gaussian(4, 200, 3)
    rng = SeededRng(5)
    s = pstable_matrix(rng, 1.0, 400, 200, scale_c=1.0)
    g = np.random.default_rng(6)
    for _ in range(20):
        x = g.normal(size=3)
        true = np.sum(np.abs(a @ x))
        med = np.median(np.abs(s @ (a @ x))) * 400  # undo the 1/r scale
        assert true / 3 <= med <= 3 * true


def test_pstable_no_contraction():
    # min ratio over 100 directions >= 0.9 with the default scale
    a = gaussian(7, 150, 3)
    p = 1.0
    r = int(40 * 3 * math.log(3))
    sa = pstable_embed(a, p, r, SeededRng(8), scale_c=4.0)
    g = np.random.default_rng(9)
    ratios = []
    for _ in range(100):
        x = g.normal(size=3)
        ratios.append(np.sum(np.abs(sa @ x)) / np.sum(np.abs(a @ x)))
    assert min(ratios) >= 0.9


def test_pstable_expansion_via_spanning_holder_chain():
    # ||SAx||_p <= ||SU||_{p,p} ||z||_2 with U = A R the unit-column spanning set
    a = gaussian(10, 60, 3)
    p = 1.0
    rng = SeededRng(11)
    r_mat = lp_subspace_spanning(a, p, rng)
    u = a @ r_mat
    s = pstable_matrix(rng.child(1), p, 120, 60, scale_c=4.0)
    su_norm = np.sum(np.abs(s @ u))
    g = np.random.default_rng(12)
    from coreset_kit.core import least_squares

    for _ in range(20):
        x = g.normal(size=3)
        img = a @ x
        scale = np.sum(np.abs(img))
        z = least_squares(u, img / scale)
        lhs = np.sum(np.abs(s @ (img / scale)))
        assert lhs <= su_norm * np.linalg.norm(z) + 1e-9


def test_fwht_orthonormal():
    h = fwht(np.eye(8))
    assert h.T @ h == pytest.approx(np.eye(8), abs=1e-12)
    with pytest.raises(InputError):
        fwht(np.ones((6, 2)))


def test_srht_full_rate_is_isometry():
    plan = srht_plan(2, 2, SeededRng(13))
    x = np.array([[1.0], [0.0]])
    assert np.linalg.norm(plan.apply(x)) == pytest.approx(1.0, abs=1e-12)
    sa = plan.apply(np.eye(2))
    assert sa.T @ sa == pytest.approx(np.eye(2), abs=1e-9)


def test_srht_linearity():
    plan = srht_plan(10, 4, SeededRng(14))
    g = np.random.default_rng(15)
    x, y = g.normal(size=(10, 3)), g.normal(size=(10, 3))
    assert plan.apply(2 * x - 3 * y) == pytest.approx(2 * plan.apply(x) - 3 * plan.apply(y))


def test_srht_subspace_embedding_statistics():
    trials, good = 20, 0
    for t in range(trials):
        a = gaussian(200 + t, 128, 4)
        q, _ = np.linalg.qr(a)
        sq = srht_apply(q, 64, SeededRng(300 + t))
        s = np.linalg.svd(sq, compute_uv=False)
        if 0.5 <= s[-1] and s[0] <= 1.5:
            good += 1
    assert good >= 0.95 * trials - 1


def test_srht_rejects_oversized_r():
    with pytest.raises(InputError):
        srht_plan(4, 9, SeededRng(16))
