"""Kernel matrix assembly: quantum fidelity kernels, the Hilbert-Schmidt
noisy pathway, classical baselines, and kernel-agreement statistics."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .circuit import FeatureMapSpec, build_feature_map
from .sim import (DENSITY_QUBIT_CAP, STATEVECTOR_QUBIT_CAP, NoiseModel,
                  run_density, run_statevector)
from .validation import check_matrix, check_square

PATHWAYS = ("ideal", "noisy", "classical", "imported")
CLASSICAL_KINDS = ("linear", "rbf_scale", "poly3")


@dataclass
class Provenance:
    pathway: str
    spec_hash: str = ""
    noise: Optional[dict] = None
    timestamp: float = 0.0
    wall_time_s: float = 0.0
    indefinite: bool = False

    def __post_init__(self):
        if self.pathway not in PATHWAYS:
            raise ValueError(f"unknown pathway {self.pathway!r}")


@dataclass
class KernelMatrix:
    values: np.ndarray
    provenance: Provenance

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def is_square(self) -> bool:
        return self.values.shape[0] == self.values.shape[1]


@dataclass(frozen=True)
class KernelAgreement:
    """Statistics over the strict upper triangle of two same-shape kernels."""

    pearson_r: float
    spearman_rho: float
    mae: float
    rmse: float
    rel_frobenius: float


def _encode_states(X: np.ndarray, spec: FeatureMapSpec, cap: int) -> np.ndarray:
    vecs = np.empty((X.shape[0], 2**spec.n_qubits), dtype=complex)
    for i, row in enumerate(X):
        c = build_feature_map(spec, row)
        vecs[i] = run_statevector(c, qubit_cap=cap).amplitudes
    return vecs


def quantum_kernel_ideal(X, Z, spec: FeatureMapSpec, *,
                         qubit_cap: int = STATEVECTOR_QUBIT_CAP) -> KernelMatrix:
    """Fidelity kernel K[i,j] = |<psi(x_i)|psi(z_j)>|^2 via one statevector
    per sample and classical inner products."""
    X = check_matrix(X, "X")
    Z = X if Z is X else check_matrix(Z, "Z")
    if X.shape[1] != spec.k or Z.shape[1] != spec.k:
        raise ValueError(f"feature count must equal spec.k={spec.k}")
    t0 = time.perf_counter()
    vx = _encode_states(X, spec, qubit_cap)
    vz = vx if Z is X else _encode_states(Z, spec, qubit_cap)
    overlap = vx @ vz.conj().T
    K = np.abs(overlap) ** 2
    prov = Provenance(pathway="ideal", timestamp=time.time(),
                      wall_time_s=time.perf_counter() - t0)
    return KernelMatrix(K, prov)


def quantum_kernel_noisy(X, Z, spec: FeatureMapSpec, noise: NoiseModel, *,
                         qubit_cap: int = DENSITY_QUBIT_CAP) -> KernelMatrix:
    """Hilbert-Schmidt kernel K[i,j] = Tr(rho(x_i) rho(z_j)); one density
    simulation per sample."""
    X = check_matrix(X, "X")
    Z = X if Z is X else check_matrix(Z, "Z")
    if X.shape[1] != spec.k or Z.shape[1] != spec.k:
        raise ValueError(f"feature count must equal spec.k={spec.k}")
    t0 = time.perf_counter()

    def densities(M):
        out = np.empty((M.shape[0], 4**spec.n_qubits), dtype=complex)
        for i, row in enumerate(M):
            c = build_feature_map(spec, row)
            out[i] = run_density(c, noise, qubit_cap=qubit_cap).entries.reshape(-1)
        return out

    rx = densities(X)
    rz = rx if Z is X else densities(Z)
    # Tr(AB) = sum_ij A_ij conj(B_ij) for Hermitian A, B
    K = (rx @ rz.conj().T).real
    prov = Provenance(pathway="noisy", noise=noise.canonical_dict(),
                      timestamp=time.time(), wall_time_s=time.perf_counter() - t0)
    return KernelMatrix(K, prov)


def rbf_gamma_scale(X_train: np.ndarray) -> float:
    """gamma = 1 / (d * Var(X)) with the population variance over all entries
    of the training matrix."""
    var = float(np.var(X_train))
    d = X_train.shape[1]
    if var <= 0.0:
        raise ValueError("zero feature variance: cannot form scale gamma")
    return 1.0 / (d * var)


def classical_kernel(X, Z, kind: str, *, dataset_label: str = "X") -> KernelMatrix:
    """linear: x.z ; rbf_scale: exp(-gamma ||x-z||^2) ; poly3: (gamma x.z)^3.

    Rows index X, columns index Z; gamma always comes from the left
    (training-side) matrix X, so cross kernels are built train-first and
    transposed by the caller.
    """
    if kind not in CLASSICAL_KINDS:
        raise ValueError(f"unknown classical kernel {kind!r}")
    X = check_matrix(X, "X")
    Z = X if Z is X else check_matrix(Z, "Z")
    if X.shape[1] != Z.shape[1]:
        raise ValueError("X and Z must have matching column counts")
    t0 = time.perf_counter()
    if kind == "linear":
        K = X @ Z.T
    else:
        try:
            gamma = rbf_gamma_scale(X)
        except ValueError as exc:
            raise ValueError(f"dataset {dataset_label!r}: {exc}") from exc
        if kind == "rbf_scale":
            sq = (np.sum(X**2, axis=1)[:, None] + np.sum(Z**2, axis=1)[None, :]
                  - 2.0 * (X @ Z.T))
            K = np.exp(-gamma * np.maximum(sq, 0.0))
        else:  # poly3, homogeneous (zero additive constant)
            K = (gamma * (X @ Z.T)) ** 3
    prov = Provenance(pathway="classical", timestamp=time.time(),
                      wall_time_s=time.perf_counter() - t0)
    return KernelMatrix(K, prov)


def _upper_triangle(K: np.ndarray) -> np.ndarray:
    iu = np.triu_indices(K.shape[0], k=1)
    return K[iu]


def compare_kernels(K1, K2) -> KernelAgreement:
    """Agreement statistics over the strict upper-triangular entries."""
    from .stats import pearson, _average_ranks

    a = K1.values if isinstance(K1, KernelMatrix) else np.asarray(K1, float)
    b = K2.values if isinstance(K2, KernelMatrix) else np.asarray(K2, float)
    a = check_square(a, "K1")
    b = check_square(b, "K2")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    ua, ub = _upper_triangle(a), _upper_triangle(b)
    if ua.size < 2:
        raise ValueError("need at least 2 off-diagonal entries")
    diff = ua - ub
    denom = np.linalg.norm(ua)
    return KernelAgreement(
        pearson_r=pearson(ua, ub),
        spearman_rho=pearson(_average_ranks(ua), _average_ranks(ub)),
        mae=float(np.mean(np.abs(diff))),
        rmse=float(np.sqrt(np.mean(diff**2))),
        rel_frobenius=float(np.linalg.norm(diff) / denom) if denom > 0 else float("inf"),
    )
