import math
import warnings

import numpy as np
import pytest

from qkbench.circuit import FeatureMapSpec
from qkbench.kernels import (KernelMatrix, Provenance, classical_kernel,
                             compare_kernels, quantum_kernel_ideal,
                             quantum_kernel_noisy, rbf_gamma_scale)
from qkbench.kernel_io import (KernelCache, KernelFormatError, import_kernel,
                               read_kernel, read_kernel_csv, write_kernel,
                               write_kernel_csv)
from qkbench.sim import NoiseModel


def rand_X(m, k, seed=0):
    return np.random.default_rng(seed).normal(size=(m, k))


@pytest.mark.parametrize("kind", ["rot2dof", "belis", "sakhnenko10", "zzfm"])
def test_ideal_gram_properties(kind):
    X = rand_X(12, 4, seed=3)
    K = quantum_kernel_ideal(X, X, FeatureMapSpec(kind, 4, 2)).values
    assert np.max(np.abs(K - K.T)) < 1e-10
    assert np.max(np.abs(np.diag(K) - 1.0)) < 1e-10
    assert np.linalg.eigvalsh(K).min() >= -1e-9
    assert K.min() >= -1e-12 and K.max() <= 1.0 + 1e-12


def test_ideal_cross_matches_gram_blocks():
    X, Z = rand_X(5, 4, 1), rand_X(3, 4, 2)
    spec = FeatureMapSpec("belis", 4, 2)
    K_cross = quantum_kernel_ideal(X, Z, spec).values
    assert K_cross.shape == (5, 3)
    both = np.vstack([X, Z])
    K_full = quantum_kernel_ideal(both, both, spec).values
    assert np.max(np.abs(K_cross - K_full[:5, 5:])) < 1e-12


def test_rot2dof_closed_form():
    spec = FeatureMapSpec("rot2dof", 2, 1)
    rng = np.random.default_rng(9)
    for _ in range(20):
        x0, z0, shared = rng.normal(size=3)
        K = quantum_kernel_ideal(np.array([[x0, shared]]),
                                 np.array([[z0, shared]]), spec).values
        assert abs(K[0, 0] - math.cos((x0 - z0) / 2) ** 2) < 1e-10


def test_rot2dof_orthogonal_pair():
    spec = FeatureMapSpec("rot2dof", 2, 1)
    K = quantum_kernel_ideal(np.array([[math.pi, 0.0]]),
                             np.array([[0.0, 0.0]]), spec).values
    assert abs(K[0, 0]) < 1e-12


def test_noisy_zero_noise_equals_ideal():
    X = rand_X(6, 4, 5)
    spec = FeatureMapSpec("sakhnenko10", 4, 2)
    Ki = quantum_kernel_ideal(X, X, spec).values
    Kn = quantum_kernel_noisy(X, X, spec, NoiseModel(0.0, 0.0)).values
    assert np.max(np.abs(Ki - Kn)) < 1e-10


def test_noisy_gram_properties():
    X = rand_X(8, 4, 6)
    spec = FeatureMapSpec("belis", 4, 2)
    K = quantum_kernel_noisy(X, X, spec, NoiseModel(1e-3, 1e-2)).values
    assert np.max(np.abs(K - K.T)) < 1e-10
    assert np.all(np.diag(K) < 1.0)  # purity loss
    assert np.linalg.eigvalsh(K).min() >= -1e-9


def test_noise_contraction_monotone():
    # for fixed (x, z) the entry moves monotonically from the ideal value
    # toward the fully mixed limit 1/2^n as the rates sweep 0 -> 1
    spec = FeatureMapSpec("rot2dof", 2, 1)
    x = np.array([[0.9, 0.4]])
    z = np.array([[0.1, -0.7]])
    ideal = quantum_kernel_ideal(x, z, spec).values[0, 0]
    limit = 0.5  # n = 1 qubit
    values = []
    for p in np.linspace(0.0, 1.0, 11):
        values.append(quantum_kernel_noisy(x, z, spec, NoiseModel(p, p)).values[0, 0])
    assert abs(values[0] - ideal) < 1e-10
    assert abs(values[-1] - limit) < 1e-10
    diffs = np.diff([abs(v - limit) for v in values])
    assert np.all(diffs <= 1e-12)  # distance to the mixed limit shrinks


def test_classical_linear():
    K = classical_kernel(np.array([[1.0, 2.0]]), np.array([[3.0, 4.0]]),
                         "linear").values
    assert K[0, 0] == pytest.approx(11.0)


def test_classical_rbf_diag_and_gamma():
    X = rand_X(6, 3, 7)
    K = classical_kernel(X, X, "rbf_scale").values
    assert np.allclose(np.diag(K), 1.0)
    gamma = rbf_gamma_scale(X)
    assert gamma == pytest.approx(1.0 / (3 * np.var(X)))
    want = math.exp(-gamma * np.sum((X[0] - X[1]) ** 2))
    assert K[0, 1] == pytest.approx(want)


def test_classical_poly3_homogeneous():
    x = np.array([[1.0, 0.0]])
    z = np.array([[0.0, 1.0]])
    assert classical_kernel(x, z, "poly3").values[0, 0] == pytest.approx(0.0)


def test_cross_kernel_uses_train_gamma():
    X_train = rand_X(8, 3, 1)
    X_test = rand_X(4, 3, 2)
    gamma = rbf_gamma_scale(X_train)
    K = classical_kernel(X_train, X_test, "rbf_scale").values
    want = math.exp(-gamma * np.sum((X_train[0] - X_test[0]) ** 2))
    assert K[0, 0] == pytest.approx(want)


def test_zero_variance_names_dataset():
    X = np.ones((4, 2))
    with pytest.raises(ValueError, match="wine"):
        classical_kernel(X, X, "rbf_scale", dataset_label="wine")


def test_compare_identical():
    K = quantum_kernel_ideal(rand_X(6, 4, 8), rand_X(6, 4, 8),
                             FeatureMapSpec("rot2dof", 4, 2)).values
    agree = compare_kernels(K, K)
    assert agree.pearson_r == pytest.approx(1.0)
    assert agree.mae == 0.0 and agree.rmse == 0.0
    assert agree.rel_frobenius == 0.0
    assert agree.mae <= agree.rmse


def test_compare_offset():
    rng = np.random.default_rng(12)
    A = rng.random((5, 5))
    K1 = (A + A.T) / 2
    K2 = K1 + 0.01 * (1 - np.eye(5))
    agree = compare_kernels(K1, K2)
    assert agree.mae == pytest.approx(0.01)
    assert agree.pearson_r == pytest.approx(1.0)


def test_compare_anticorrelated():
    rng = np.random.default_rng(13)
    A = rng.random((6, 6))
    K1 = (A + A.T) / 2
    iu = np.triu_indices(6, 1)
    up = K1[iu] - K1[iu].mean()
    K2 = np.zeros_like(K1)
    K2[iu] = -up
    K2 = K2 + K2.T
    agree = compare_kernels(K1, K2)
    assert agree.pearson_r == pytest.approx(-1.0)


def test_compare_errors():
    with pytest.raises(ValueError):
        compare_kernels(np.eye(3), np.eye(4))
    with pytest.raises(ValueError):
        compare_kernels(np.eye(2), np.eye(2))  # only one off-diagonal entry


# --- container format and cache ---------------------------------------------


def _km(values, pathway="ideal"):
    return KernelMatrix(np.asarray(values, float), Provenance(pathway=pathway))


def test_container_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    values = rng.random((7, 5))
    path = tmp_path / "k.qkk"
    write_kernel(path, _km(values, "noisy"))
    back = read_kernel(path)
    assert back.values.dtype == np.float64
    assert np.array_equal(back.values, values)
    assert back.provenance.pathway == "noisy"


def test_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(4)
    values = rng.random((4, 4))
    path = tmp_path / "k.csv"
    write_kernel_csv(path, _km(values))
    back = read_kernel_csv(path)
    assert np.array_equal(back.values, values)


def test_nan_entry_rejected(tmp_path):
    values = np.eye(3)
    values[0, 1] = np.nan
    path = tmp_path / "bad.qkk"
    import struct

    from qkbench.kernel_io import MAGIC
    payload = MAGIC + struct.pack("<IIB16s", 3, 3, 0, b"\x00" * 16) \
        + np.ascontiguousarray(values, "<f8").tobytes()
    path.write_bytes(payload)
    with pytest.raises(KernelFormatError, match="non-finite"):
        read_kernel(path)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.qkk"
    path.write_bytes(b"NOTAKERN" + b"\x00" * 64)
    with pytest.raises(KernelFormatError):
        read_kernel(path)


def test_indefinite_import_flagged(tmp_path):
    # symmetric 60x60 with one small negative eigenvalue
    rng = np.random.default_rng(60)
    Q, _ = np.linalg.qr(rng.normal(size=(60, 60)))
    evals = np.linspace(0.2, 1.0, 60)
    evals[0] = -0.003
    K = (Q * evals) @ Q.T
    K = 0.5 * (K + K.T)
    path = tmp_path / "hw.qkk"
    write_kernel(path, _km(K, "imported"))
    back = import_kernel(path)
    assert back.provenance.pathway == "imported"
    assert back.provenance.indefinite is True
    assert np.array_equal(back.values, K)


def test_cache_roundtrip_and_miss(tmp_path):
    cache = KernelCache(tmp_path)
    key = "ab" * 16
    assert cache.get(key) is None
    values = np.random.default_rng(1).random((5, 5))
    cache.put(key, _km(values))
    got = cache.get(key)
    assert np.array_equal(got.values, values)


def test_cache_corrupt_is_miss(tmp_path):
    cache = KernelCache(tmp_path)
    key = "cd" * 16
    cache.put(key, _km(np.eye(3)))
    (tmp_path / f"{key}.qkk").write_bytes(b"garbage")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        assert cache.get(key) is None
    assert any("corrupt" in str(w.message) for w in caught)


def test_distinct_configs_distinct_keys():
    from qkbench.config import content_hash

    base = {"dataset": "d", "fold": 0, "kernel": {"family": "belis", "reps": 2}}
    other = {"dataset": "d", "fold": 0, "kernel": {"family": "belis", "reps": 3}}
    assert content_hash(base) != content_hash(other)
