import warnings

import numpy as np
import pytest

from qkbench.prep import (MinMaxScaler, NMFReducer, PCAReducer, PipelineSpec,
                          StandardScaler, TreeSelector, ZeroAsMissingImputer,
                          fit_pipeline)


def rand_X(m, d, seed=0):
    return np.random.default_rng(seed).normal(size=(m, d))


def test_standard_scaler_moments():
    X = rand_X(50, 4, 1) * 3.0 + 2.0
    s = StandardScaler().fit(X)
    Z = s.transform(X)
    assert np.max(np.abs(Z.mean(axis=0))) < 1e-10
    assert np.max(np.abs(Z.var(axis=0) - 1.0)) < 1e-10


def test_standard_scaler_constant_feature():
    X = rand_X(20, 3, 2)
    X[:, 1] = 7.0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        s = StandardScaler().fit(X)
    assert any("constant" in str(w.message) for w in caught)
    assert s.scale_[1] == 1.0
    assert np.allclose(s.transform(X)[:, 1], 0.0)


def test_minmax_scaler_range():
    X = rand_X(30, 3, 3)
    s = MinMaxScaler().fit(X)
    Z = s.transform(X)
    assert Z.min() >= 0.0 and Z.max() <= 1.0
    assert np.allclose(Z.min(axis=0), 0.0)
    assert np.allclose(Z.max(axis=0), 1.0)


def test_pca_axis_aligned():
    rng = np.random.default_rng(4)
    X = np.zeros((100, 2))
    X[:, 0] = rng.normal(scale=5.0, size=100)
    X[:, 1] = rng.normal(scale=0.01, size=100)
    p = PCAReducer(1).fit(X)
    comp = p.components_[0]
    assert abs(abs(comp[0]) - 1.0) < 1e-3
    assert comp[0] > 0  # sign fixed: largest-magnitude loading positive


def test_pca_orthonormal_and_ordered():
    X = rand_X(40, 6, 5)
    p = PCAReducer(6).fit(X)
    gram = p.components_ @ p.components_.T
    assert np.max(np.abs(gram - np.eye(6))) < 1e-8
    assert np.all(np.diff(p.explained_variance_) <= 1e-12)


def test_pca_full_rank_preserves_distances():
    X = rand_X(25, 4, 6)
    p = PCAReducer(4).fit(X)
    Z = p.transform(X)
    d_orig = np.linalg.norm(X[:, None] - X[None, :], axis=-1)
    d_new = np.linalg.norm(Z[:, None] - Z[None, :], axis=-1)
    assert np.max(np.abs(d_orig - d_new)) < 1e-8


def test_pca_matches_svd_oracle():
    X = rand_X(30, 5, 7)
    p = PCAReducer(3).fit(X)
    Xc = X - X.mean(axis=0)
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    for i in range(3):
        dot = abs(float(p.components_[i] @ vt[i]))
        assert dot == pytest.approx(1.0, abs=1e-8)
        assert p.explained_variance_[i] == pytest.approx(s[i] ** 2 / 30)


def test_nmf_rank_one_reconstruction():
    rng = np.random.default_rng(8)
    u = rng.random(20) + 0.1
    v = rng.random(6) + 0.1
    X = np.outer(u, v)
    r = NMFReducer(1, seed=3).fit(X)
    W = r.transform(X)
    err = np.linalg.norm(X - W @ r.components_)
    assert err < 1e-3 * np.linalg.norm(X)


def test_nmf_nonnegative_and_monotone():
    X = np.abs(rand_X(25, 8, 9))
    r = NMFReducer(3, seed=1).fit(X)
    assert np.all(r.components_ >= 0)
    assert np.all(r.transform(X) >= 0)
    trace = np.array(r.loss_trace_)
    assert np.all(np.diff(trace) <= 1e-10 * max(1.0, trace[0]))


def test_nmf_transform_deterministic():
    X = np.abs(rand_X(15, 5, 10))
    r = NMFReducer(2, seed=4).fit(X)
    T = np.abs(rand_X(3, 5, 11))
    assert np.array_equal(r.transform(T), r.transform(T))


def test_nmf_rejects_negative():
    with pytest.raises(ValueError):
        NMFReducer(2).fit(rand_X(10, 4, 12))


def test_tree_selects_all_when_k_equals_d():
    X = rand_X(30, 4, 13)
    y = np.where(X[:, 0] > 0, 1, -1)
    t = TreeSelector(4).fit(X, y)
    assert list(t.selected_) == [0, 1, 2, 3]


def test_tree_finds_informative_feature():
    rng = np.random.default_rng(14)
    X = rng.normal(size=(60, 5))
    y = np.where(X[:, 3] > 0.1, 1, -1)
    t = TreeSelector(1).fit(X, y)
    assert list(t.selected_) == [3]
    assert t.importances_[3] == max(t.importances_)
    assert t.importances_.sum() == pytest.approx(1.0)


def test_tree_deterministic_and_tie_break():
    rng = np.random.default_rng(15)
    X = rng.normal(size=(40, 6))
    y = np.where(X[:, 2] + 0.5 * X[:, 4] > 0, 1, -1)
    t1 = TreeSelector(2).fit(X, y)
    t2 = TreeSelector(2).fit(X, y)
    assert np.array_equal(t1.selected_, t2.selected_)
    assert np.array_equal(t1.importances_, t2.importances_)
    # pure-noise constant features tie at importance 0: lowest indices win
    Xc = np.zeros((10, 3))
    Xc[:, 0] = np.arange(10)
    yc = np.where(np.arange(10) >= 5, 1, -1)
    t3 = TreeSelector(2).fit(Xc, yc)
    assert list(t3.selected_) == [0, 1]


# --- pipelines ---------------------------------------------------------------


def test_pipeline_scaler_pairing():
    X = rand_X(30, 5, 16)
    y = np.where(X[:, 0] > 0, 1, -1)
    nmf_chain = fit_pipeline(PipelineSpec("nmf", 2), X, y)
    assert isinstance(nmf_chain.scaler_, MinMaxScaler)
    pca_chain = fit_pipeline(PipelineSpec("pca", 2), X, y)
    assert isinstance(pca_chain.scaler_, StandardScaler)
    tree_chain = fit_pipeline(PipelineSpec("tree", 2), X, y)
    assert isinstance(tree_chain.scaler_, StandardScaler)
    for chain in (nmf_chain, pca_chain, tree_chain):
        assert chain.transform(X).shape == (30, 2)


def test_pipeline_k_exceeds_d():
    X = rand_X(10, 3, 17)
    y = np.where(X[:, 0] > 0, 1, -1)
    with pytest.raises(ValueError):
        fit_pipeline(PipelineSpec("pca", 4), X, y)


def test_pipeline_transform_pure():
    X = rand_X(20, 4, 18)
    y = np.where(X[:, 1] > 0, 1, -1)
    chain = fit_pipeline(PipelineSpec("pca", 2), X, y)
    row = rand_X(1, 4, 19)
    assert np.array_equal(chain.transform(row), chain.transform(row))


def test_imputer_median_of_nonzero_train():
    X = np.array([[0.0, 1.0], [2.0, 1.0], [4.0, 1.0], [6.0, 1.0]])
    imp = ZeroAsMissingImputer(columns=(0,)).fit(X)
    assert imp.medians_[0] == 4.0  # median of {2, 4, 6}
    out = imp.transform(np.array([[0.0, 5.0], [3.0, 5.0]]))
    assert out[0, 0] == 4.0 and out[1, 0] == 3.0


def test_leakage_bitwise_invariance():
    X = rand_X(30, 5, 20)
    y = np.where(X[:, 0] + X[:, 2] > 0, 1, -1)
    train_rows = np.arange(20)
    for reducer in ("pca", "nmf", "tree"):
        spec = PipelineSpec(reducer, 2)
        chain_a = fit_pipeline(spec, X[train_rows], y[train_rows])
        X_mutated = X.copy()
        X_mutated[20:] *= 100.0  # arbitrary changes to held-out rows only
        chain_b = fit_pipeline(spec, X_mutated[train_rows], y[train_rows])
        probe = rand_X(4, 5, 21)
        if reducer == "nmf":
            probe = np.abs(probe)
        assert np.array_equal(chain_a.transform(probe), chain_b.transform(probe))
