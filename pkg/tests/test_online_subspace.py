import math

import numpy as np
import pytest

from coreset_kit.core import InputError, p2_norm
from coreset_kit.online_subspace import (
    OnlineConstants,
    OnlineSensitivityState,
    entrywise_online_coreset,
    integer_round,
    online_subspace_coreset,
)
from coreset_kit.oracles import strong_coreset_check
from coreset_kit.rng import SeededRng
from conftest import gaussian, planted_low_rank

FAST = OnlineConstants(repetition_c=1.0)


def test_integer_round_grid_and_bound():
    a = gaussian(0, 10, 3)
    eps, p, lam = 0.5, 2.0, 0.7
    ir = integer_round(a, eps, p, lam)
    # entries are exact multiples of the granularity
    mult = ir.matrix / ir.granularity
    assert np.allclose(mult, np.round(mult), atol=1e-9)
    # direct check of the perturbation bound
    moved = p2_norm(a - ir.matrix, p) ** p
    assert moved <= ir.perturbation_bound + 1e-12
    assert ir.perturbation_bound == pytest.approx(eps**p * lam)


def test_integer_round_identity_when_already_on_grid():
    a = np.array([[1.0, 2.0], [3.0, -4.0]])
    # pick the hint so the granularity is exactly 1
    n, d, p, eps = 2, 2, 2.0, 1.0 - 1e-12
    lam = (1.0 / (eps * n ** (-1 / p) * d**-0.5)) ** p
    ir = integer_round(a, eps, p, lam)
    assert ir.granularity == pytest.approx(1.0)
    assert ir.matrix == pytest.approx(a)


def test_integer_round_zero_matrix():
    ir = integer_round(np.zeros((3, 2)), 0.5, 2.0, 1.0)
    assert np.all(ir.matrix == 0)
    assert ir.delta == 0.0


def test_integer_round_requires_positive_hint():
    with pytest.raises(InputError):
        integer_round(np.eye(2), 0.5, 2.0, 0.0)


def test_sensitivity_first_row_clamped():
    st = OnlineSensitivityState(1, 1.0, 3, n_hint=50, delta_hint=10.0, rng=SeededRng(1))
    sigma = st.update(np.array([1.0, 2.0, 3.0]))
    assert 0 < sigma <= 1.0


def test_sensitivity_rank_k_stream_residuals_vanish():
    g = np.random.default_rng(2)
    basis = g.normal(size=(1, 3))
    rows = g.normal(size=(40, 1)) @ basis  # rank-1 stream
    st = OnlineSensitivityState(1, 1.0, 3, n_hint=40, delta_hint=10.0, rng=SeededRng(2))
    for row in rows:
        st.update(row)
    # after the subspace is captured, the projection residual is ~0
    tail = [st._residual(r) for r in rows[-10:]]
    assert max(tail) < 1e-8


def test_sensitivity_sum_within_budget():
    rows = gaussian(3, 60, 3)
    cs = online_subspace_coreset(rows, 1, 1.0, 0.5, 0.1, SeededRng(3), consts=FAST)
    assert cs.meta["sigma_sum"] <= cs.meta["budget"]


def test_segments_match_keep_events():
    rows = gaussian(4, 50, 3)
    st = OnlineSensitivityState(1, 1.0, 3, n_hint=50, delta_hint=10.0, rng=SeededRng(4))
    for row in rows:
        st.update(row)
    assert st.segments == len(st.lewis_main.kept_indices)


def test_coreset_saturated_keeps_all_exact_identity():
    rows = gaussian(5, 30, 3)
    cs = online_subspace_coreset(rows, 1, 1.0, 0.5, 0.1, SeededRng(5), consts=FAST)
    # default constants saturate the keep probability at this scale
    assert np.array_equal(cs.indices, np.arange(30))
    assert cs.weights == pytest.approx(np.ones(30))
    assert strong_coreset_check(rows, cs.indices, cs.weights, 1, 1.0, 6.0) < 1e-12


def test_coreset_subsampled_net_deviation():
    consts = OnlineConstants(repetition_c=0.2, beta_scale=2e-6)
    ok = 0
    trials = 10
    for t in range(trials):
        rows = gaussian(50 + t, 60, 3)
        cs = online_subspace_coreset(rows, 1, 1.0, 0.5, 0.1, SeededRng(60 + t), consts=consts)
        assert 0 < len(cs) < 60  # actually subsampled
        dev = strong_coreset_check(rows, cs.indices, cs.weights, 1, 1.0, 4.0)
        if dev <= 0.5:
            ok += 1
    assert ok >= 0.8 * trials


def test_coreset_replay_determinism():
    rows = gaussian(6, 40, 3)
    consts = OnlineConstants(repetition_c=1.0, beta_scale=1e-3)
    a = online_subspace_coreset(rows, 1, 3.0, 0.5, 0.1, SeededRng(7), consts=consts)
    b = online_subspace_coreset(rows, 1, 3.0, 0.5, 0.1, SeededRng(7), consts=consts)
    assert np.array_equal(a.indices, b.indices)
    assert a.weights == pytest.approx(b.weights)


def test_coreset_irrevocable_prefix():
    # identical hints: decisions on a prefix equal the prefix of the full run
    rows = gaussian(8, 40, 3)
    consts = OnlineConstants(repetition_c=1.0, beta_scale=1e-3)
    hint = _delta_hint(rows)
    half = online_subspace_coreset(
        rows[:20], 1, 1.0, 0.5, 0.1, SeededRng(9),
        n_hint=40, delta_hint=hint, consts=consts,
    )
    full = online_subspace_coreset(
        rows, 1, 1.0, 0.5, 0.1, SeededRng(9),
        n_hint=40, delta_hint=hint, consts=consts,
    )
    prefix = [int(i) for i in full.indices if i < 20]
    assert prefix == [int(i) for i in half.indices]


def _delta_hint(rows):
    from coreset_kit.online_subspace import _default_delta_hint

    return _default_delta_hint(rows)


@pytest.mark.parametrize("p", [1.0, 3.0])
def test_coreset_runs_both_p(p):
    rows = gaussian(10, 40, 3)
    cs = online_subspace_coreset(rows, 1, p, 0.5, 0.1, SeededRng(11), consts=FAST)
    assert cs.meta["sigma_sum"] <= cs.meta["budget"]
    assert len(cs) > 0


def test_entrywise_exact_rank_k():
    g = np.random.default_rng(12)
    rows = g.normal(size=(25, 1)) @ g.normal(size=(1, 6))
    cs, v, resid = entrywise_online_coreset(rows, 1, 1.0, SeededRng(13), consts=FAST)
    assert resid < 1e-8


def test_entrywise_planted_recovery_and_budget():
    g = np.random.default_rng(14)
    u = g.normal(size=(40, 1))
    vrow = g.normal(size=(1, 8))
    noise = np.zeros((40, 8))
    mask = g.random((40, 8)) < 0.05
    noise[mask] = 0.5 * g.normal(size=int(mask.sum()))
    rows = u @ vrow + noise
    cs, v, resid = entrywise_online_coreset(rows, 1, 1.0, SeededRng(15), consts=FAST)
    noise_l1 = np.sum(np.abs(noise))
    n = rows.shape[0]
    t = cs.meta.get("sketch_dim", 8)
    budget = math.sqrt(max(t, 1)) * math.log2(n) ** 2
    assert resid <= budget * noise_l1
    cos = abs(float(v[0] @ vrow[0])) / (np.linalg.norm(v[0]) * np.linalg.norm(vrow[0]))
    assert cos >= 0.99


def test_entrywise_rejects_bad_p():
    with pytest.raises(InputError):
        entrywise_online_coreset(np.eye(3), 1, 2.5, SeededRng(16))
