import numpy as np
import pytest

from coreset_kit import core
from coreset_kit.losses import abs_p, get_loss, huber


def test_p2_norm_single_row():
    assert core.p2_norm([[3.0, 4.0]], 1.0) == pytest.approx(5.0)


def test_huber_gnorm_value():
    # H(0.5) = 0.125, H(2) = 1.5
    assert core.gnorm([[0.5], [2.0]], huber()) == pytest.approx(1.625)


def test_entrywise_norm_identity():
    assert core.entrywise_norm(np.eye(3), 3.0) == pytest.approx(3.0 ** (1 / 3))


def test_norm_dispatch_modes():
    m = np.array([[1.0, -2.0], [0.5, 3.0]])
    assert core.norm(m, "entrywise_inf") == pytest.approx(3.0)
    assert core.norm(m, "inf2") == pytest.approx(np.linalg.norm([0.5, 3.0]))
    assert core.norm(m, "entrywise_p", p=2) == pytest.approx(np.linalg.norm(m))
    assert core.norm(m, "g", loss=abs_p(2)) == pytest.approx(np.linalg.norm(m) ** 2)


def test_norm_scaling_homogeneity():
    g = np.random.default_rng(0)
    m = g.normal(size=(5, 4))
    for p in [1.0, 2.0, 3.5]:
        assert core.entrywise_norm(3 * m, p) == pytest.approx(3 * core.entrywise_norm(m, p))
        assert core.p2_norm(-2 * m, p) == pytest.approx(2 * core.p2_norm(m, p))
    # g-mode reports the raw sum: even and zero at zero, but not homogeneous
    h = huber()
    assert core.gnorm(np.zeros((2, 2)), h) == 0.0
    assert core.gnorm(m, h) == pytest.approx(core.gnorm(-m, h))


def test_norm_rejects_non_finite():
    with pytest.raises(core.InputError):
        core.entrywise_norm([[np.nan, 1.0]], 2.0)
    with pytest.raises(core.InputError):
        core.p2_norm([[np.inf, 1.0]], 2.0)


def test_least_squares_identity():
    x = core.least_squares(np.eye(2), np.array([[1.0], [2.0]]))
    assert np.allclose(x, [[1.0], [2.0]])


def test_least_squares_mean():
    x = core.least_squares(np.array([[1.0], [1.0]]), np.array([0.0, 2.0]))
    assert x == pytest.approx([1.0])


def test_least_squares_recovers_planted():
    g = np.random.default_rng(1)
    a = g.normal(size=(8, 3))
    x0 = g.normal(size=(3, 2))
    x = core.least_squares(a, a @ x0)
    assert np.max(np.abs(x - x0)) < 1e-9


def test_least_squares_residual_orthogonality():
    g = np.random.default_rng(2)
    for trial in range(5):
        a = g.normal(size=(10, 4))
        b = g.normal(size=(10, 2))
        x = core.least_squares(a, b)
        resid = a @ x - b
        bound = 1e-8 * np.linalg.norm(a) * np.linalg.norm(b)
        assert np.linalg.norm(a.T @ resid) <= bound


def test_least_squares_min_norm_when_rank_deficient():
    a = np.array([[1.0, 1.0], [2.0, 2.0]])
    x = core.least_squares(a, np.array([1.0, 2.0]))
    # x1 + x2 = 1; the minimum-norm solution splits evenly
    assert x == pytest.approx([0.5, 0.5])


def test_least_squares_dimension_mismatch():
    with pytest.raises(core.InputError):
        core.least_squares(np.eye(3), np.ones(2))


def test_best_rank_k_exact_when_low_rank():
    g = np.random.default_rng(3)
    a = g.normal(size=(6, 2)) @ g.normal(size=(2, 5))
    assert np.linalg.norm(core.best_rank_k(a, 2) - a) < 1e-9


def test_best_rank_k_diagonal():
    a = np.diag([3.0, 2.0, 1.0])
    assert np.allclose(core.best_rank_k(a, 2), np.diag([3.0, 2.0, 0.0]))


def test_best_rank_k_residual_matches_tail_singular_values():
    g = np.random.default_rng(4)
    a = g.normal(size=(6, 4))
    s = np.linalg.svd(a, compute_uv=False)
    resid = np.linalg.norm(a - core.best_rank_k(a, 2))
    assert resid == pytest.approx(np.sqrt(s[2] ** 2 + s[3] ** 2), abs=1e-9)


def test_best_rank_k_residual_monotone_in_k():
    g = np.random.default_rng(5)
    a = g.normal(size=(7, 5))
    resids = [np.linalg.norm(a - core.best_rank_k(a, k)) for k in range(1, 6)]
    assert all(r1 >= r2 - 1e-12 for r1, r2 in zip(resids, resids[1:]))
    assert resids[-1] < 1e-9  # zero at full rank


def test_best_rank_k_out_of_range():
    with pytest.raises(core.InputError):
        core.best_rank_k(np.eye(3), 0)
    with pytest.raises(core.InputError):
        core.best_rank_k(np.eye(3), 4)


def test_matrix_file_roundtrip(tmp_path):
    g = np.random.default_rng(6)
    a = g.normal(size=(4, 3))
    path = tmp_path / "m.csv"
    core.save_matrix(path, a)
    assert core.load_matrix(path) == pytest.approx(a)
    header = path.read_text().splitlines()[0]
    assert header == "# rows=4 cols=3"


def test_stream_rows_no_header(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("1.0,2.0\n3.0,4.0\n")
    rows = list(core.iter_rows(path))
    assert len(rows) == 2
    assert rows[1] == pytest.approx([3.0, 4.0])


def test_loss_registry_lookup():
    loss = get_loss("abs_p", p=3)
    assert loss.cost(np.array([2.0])) == pytest.approx(8.0)
    with pytest.raises(KeyError):
        get_loss("nope")


def test_loss_metadata_invariants():
    for loss in [huber(), abs_p(1), abs_p(4), get_loss("l1_l2"), get_loss("fair"), get_loss("cauchy")]:
        assert loss.mon >= 1.0
        assert 0 < loss.lin <= 1.0
        prev = 0.0
        for t in [1, 2, 5, 10]:
            val = loss.ati(t)
            assert val >= max(prev, 1.0)
            prev = val
        # g(0) = 0 and evenness
        assert loss.cost(np.zeros(3)) == 0.0
        x = np.array([0.3, 1.7])
        assert loss.cost(x) == pytest.approx(loss.cost(-x))


def test_numerical_rank():
    g = np.random.default_rng(7)
    a = g.normal(size=(6, 2)) @ g.normal(size=(2, 4))
    assert core.numerical_rank(a) == 2
    assert core.numerical_rank(np.eye(3)) == 3
