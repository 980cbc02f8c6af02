import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import unit_columns
from oracles import dense_accumulate, half_objective
from sshad.dictionary_learning import (DictLearnConfig, LearnerState, accumulate_stats,
                                       bcd_update, init_dictionary, learn_dictionary,
                                       load_dictionary, objective, project_atom,
                                       save_dictionary, transform_labeled)
from sshad.ingestion import Instance
from sshad.sparse_coding import Dictionary, SparseCode, encode_matrix


def sparse_problem(seed, n=10, m=20, k=3, q=500):
    rng = np.random.default_rng(seed)
    D = unit_columns(rng, n, m)
    C = np.zeros((q, m))
    for row in C:
        row[rng.choice(m, k, replace=False)] = rng.standard_normal(k)
    return C @ D.T, D, C


def test_defaults():
    cfg = DictLearnConfig()
    assert (cfg.m, cfg.k, cfg.tol, cfg.max_iter) == (130, 10, 0.01, 200)
    assert cfg.omp.k == 10 and cfg.omp.tol == 0.01


def test_bad_config():
    with pytest.raises(ValueError):
        DictLearnConfig(m=0)
    with pytest.raises(ValueError):
        DictLearnConfig(tol=-1.0)


def test_init_picks_distinct_unit_signals(rng):
    X = rng.standard_normal((40, 6))
    X[3] = 0.0
    X[7] = 2 * X[8]
    D = init_dictionary(X, DictLearnConfig(m=30, k=2, seed=4))
    np.testing.assert_allclose(D.norms(), 1.0, atol=1e-12)
    assert len({c.tobytes() for c in D.atoms.T}) == 30
    directions = X[np.linalg.norm(X, axis=1) > 0]
    directions = directions / np.linalg.norm(directions, axis=1)[:, None]
    for atom in D.atoms.T:
        assert np.min(np.linalg.norm(directions - atom, axis=1)) < 1e-12


def test_init_needs_enough_signals(rng):
    with pytest.raises(ValueError, match="at least"):
        init_dictionary(rng.standard_normal((5, 3)), DictLearnConfig(m=6, k=1))
    X = np.vstack([np.ones((10, 3)), np.zeros((3, 3))])
    with pytest.raises(ValueError, match="distinct"):
        init_dictionary(X, DictLearnConfig(m=2, k=1))


def test_accumulate_matches_dense_sum(rng):
    C = rng.standard_normal((50, 8)) * (rng.random((50, 8)) < 0.3)
    X = rng.standard_normal((50, 5))
    A, B = accumulate_stats(C, X)
    A_ref, B_ref = dense_accumulate(C, X)
    np.testing.assert_allclose(A, A_ref, atol=1e-12)
    np.testing.assert_allclose(B, B_ref, atol=1e-12)
    assert np.allclose(A, A.T)
    assert np.all(np.linalg.eigvalsh(A) > -1e-10)
    sparse = [SparseCode.from_dense(c) for c in C]
    A2, B2 = accumulate_stats(sparse, X)
    np.testing.assert_array_equal(A, A2)
    np.testing.assert_array_equal(B, B2)


def test_accumulate_errors(rng):
    with pytest.raises(ValueError):
        accumulate_stats(np.zeros((3, 4)), rng.standard_normal((2, 5)))
    with pytest.raises(ValueError):
        accumulate_stats([], np.zeros((0, 5)))


def test_projection_cases():
    inside = np.array([0.3, 0.4])
    np.testing.assert_array_equal(project_atom(inside), inside)
    on = np.array([0.6, 0.8])
    np.testing.assert_array_equal(project_atom(on), on)
    np.testing.assert_allclose(project_atom(np.array([3.0, 4.0])), [0.6, 0.8])
    np.testing.assert_array_equal(project_atom(np.zeros(3)), np.zeros(3))


def test_bcd_fixed_point(rng):
    D = unit_columns(rng, 6, 9)
    C = rng.standard_normal((200, 9))
    A = C.T @ C
    new = bcd_update(LearnerState(Dictionary(D), A, D @ A))
    np.testing.assert_allclose(new.atoms, D, atol=1e-10)


def test_bcd_skips_unused_atoms(rng):
    X, _, C = sparse_problem(1, q=60)
    C[:, 4] = 0.0
    D0 = unit_columns(rng, 10, 20)
    A, B = accumulate_stats(C, X)
    new = bcd_update(LearnerState(Dictionary(D0), A, B))
    np.testing.assert_array_equal(new.atoms[:, 4], D0[:, 4])
    assert np.all(new.norms() <= 1 + 1e-12)


def test_state_shape_check(rng):
    with pytest.raises(ValueError):
        LearnerState(Dictionary(unit_columns(rng, 4, 5)), np.eye(4), np.zeros((4, 5)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_bcd_never_increases_objective(seed):
    X, _, _ = sparse_problem(seed, q=120)
    rng = np.random.default_rng(seed + 1)
    D = Dictionary(unit_columns(rng, 10, 20))
    codes = encode_matrix(X, D, DictLearnConfig(m=20, k=3, tol=0.0).omp)
    A, B = accumulate_stats(codes, X)
    state = LearnerState(D, A, B)
    prev = half_objective(X, D.atoms, codes)
    for _ in range(5):
        state.D = bcd_update(state)
        cur = half_objective(X, state.D.atoms, codes)
        assert cur <= prev + 1e-8
        assert np.all(state.D.norms() <= 1 + 1e-12)
        prev = cur


def test_objective_matches_oracle(rng):
    X = rng.standard_normal((30, 4))
    D = unit_columns(rng, 4, 6)
    C = rng.standard_normal((30, 6))
    assert objective(X, Dictionary(D), C) == pytest.approx(half_objective(X, D, C), rel=1e-12)


def test_orthonormal_data_represents_itself():
    Q, _ = np.linalg.qr(np.random.default_rng(3).standard_normal((5, 5)))
    X = np.vstack([Q.T] * 4)
    D = learn_dictionary(X, DictLearnConfig(m=5, k=1, tol=0.0, max_iter=20))
    codes = encode_matrix(X, D, DictLearnConfig(m=5, k=1, tol=0.0).omp)
    assert np.max(np.sum((X - codes @ D.atoms.T) ** 2, axis=1)) < 1e-20


def test_learning_fits_sparse_data():
    X, _, _ = sparse_problem(7)
    cfg = DictLearnConfig(m=20, k=3, tol=1e-6, max_iter=100, seed=0)
    D, hist = learn_dictionary(X, cfg, return_history=True)
    codes = encode_matrix(X, D, cfg.omp)
    rel = np.mean(np.sum((X - codes @ D.atoms.T) ** 2, axis=1)) / np.mean(np.sum(X ** 2, axis=1))
    assert rel <= 0.05
    assert hist.objectives[-1] < 0.5 * hist.objectives[0]
    assert np.all(D.norms() <= 1 + 1e-12)


def test_learning_is_deterministic():
    X, _, _ = sparse_problem(2, q=150)
    cfg = DictLearnConfig(m=20, k=3, tol=1e-3, max_iter=15, seed=11)
    a = learn_dictionary(X, cfg)
    b = learn_dictionary(X.copy(), cfg)
    np.testing.assert_array_equal(a.atoms, b.atoms)


def test_convergence_flag_and_iteration_cap():
    X, _, _ = sparse_problem(5, q=100)
    _, hist = learn_dictionary(X, DictLearnConfig(m=20, k=3, max_iter=3), return_history=True)
    assert hist.iterations == 3 and not hist.converged
    _, hist = learn_dictionary(X, DictLearnConfig(m=20, k=3, max_iter=500,
                                                  convergence_eps=1e-2), return_history=True)
    assert hist.converged and hist.changes[-1] < 1e-2
    assert len(hist.objectives) == hist.iterations + 1


def test_k_larger_than_signal_dim_rejected(rng):
    with pytest.raises(ValueError):
        learn_dictionary(rng.standard_normal((30, 3)), DictLearnConfig(m=10, k=4))


def test_transform_labeled(rng):
    D = Dictionary(unit_columns(rng, 4, 6))
    L = [Instance(rng.standard_normal(4), label=1 + i % 3) for i in range(10)]
    out = transform_labeled(L, D, DictLearnConfig(m=6, k=2).omp)
    assert [y for _, y in out] == [inst.label for inst in L]
    assert all(c.nnz <= 2 and c.m == 6 for c, _ in out)
    assert transform_labeled([], D, DictLearnConfig(m=6, k=2).omp) == []
    with pytest.raises(ValueError, match="unlabeled"):
        transform_labeled([Instance(np.zeros(4))], D, DictLearnConfig(m=6, k=2).omp)


@pytest.mark.parametrize("name", ["dict.bin", "dict.txt"])
def test_save_load_round_trip(tmp_path, rng, name):
    D = Dictionary(unit_columns(rng, 7, 13) * rng.random(13))
    save_dictionary(D, tmp_path / name)
    back = load_dictionary(tmp_path / name)
    np.testing.assert_array_equal(back.atoms, D.atoms)


def test_load_rejects_foreign_file(tmp_path):
    p = tmp_path / "junk.bin"
    p.write_bytes(b"NOTADICT" + bytes(16))
    with pytest.raises(ValueError):
        load_dictionary(p)
    t = tmp_path / "short.txt"
    t.write_text("2 2\n1\n2\n3\n")
    with pytest.raises(ValueError, match="expected 4"):
        load_dictionary(t)
