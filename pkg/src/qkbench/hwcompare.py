"""Validation of externally produced (hardware) kernel matrices against the
engine's ideal and noisy simulated references."""
from __future__ import annotations

from dataclasses import asdict
from typing import Sequence

import numpy as np

from ._rng import stream
from .folds import _make_level
from .kernels import KernelMatrix, compare_kernels, quantum_kernel_ideal, quantum_kernel_noisy
from .circuit import FeatureMapSpec
from .sim import NoiseModel
from .svm import compute_metrics, predict, train
from .validation import check_labels, check_matrix


def _cv_best_c(K: np.ndarray, y: np.ndarray, c_grid: Sequence[float],
               n_folds: int, seed: int) -> dict:
    """Single-level stratified CV: for each C the mean fold BA; the best C is
    the grid argmax (ties to the smaller C)."""
    idx = np.arange(len(y))
    pairs = _make_level(y, idx, None, n_folds, stream(seed, "hw-cv"))
    results = []
    for C in sorted(c_grid):
        bas = []
        for tr, te in pairs:
            if len(np.unique(y[tr])) < 2 or len(np.unique(y[te])) < 2:
                continue
            model = train(K[np.ix_(tr, tr)], y[tr], C)
            labels, scores = predict(model, K[np.ix_(te, tr)])
            bas.append(compute_metrics(y[te], labels, scores).balanced_accuracy)
        if bas:
            results.append((float(np.mean(bas)), float(np.std(bas)), C))
    if not results:
        raise ValueError("no valid CV folds")
    best = max(results, key=lambda r: (r[0], -r[2]))
    return {"ba_mean": best[0], "ba_std": best[1], "best_c": best[2]}


def validate_backend(imported: KernelMatrix, features, y, spec: FeatureMapSpec,
                     noise: NoiseModel, *,
                     c_grid: Sequence[float] = (0.01, 0.1, 1.0, 10.0, 100.0),
                     n_folds: int = 5, seed: int = 42) -> dict:
    """Compare an imported kernel against freshly simulated references and
    score all three downstream with the same stratified CV.

    Agreement statistics run over the strict upper triangle with the
    simulated reference as the left (denominator) matrix; delta is the
    imported-minus-ideal downstream BA in percentage points.
    """
    F = check_matrix(features, "features")
    y = check_labels(y)
    n = len(y)
    if imported.values.shape != (n, n):
        raise ValueError(f"imported kernel is {imported.values.shape}, "
                         f"expected ({n}, {n})")
    ideal = quantum_kernel_ideal(F, F, spec)
    noisy = quantum_kernel_noisy(F, F, spec, noise)

    agree_ideal = compare_kernels(ideal, imported)
    agree_noisy = compare_kernels(noisy, imported)

    downstream = {
        "imported": _cv_best_c(imported.values, y, c_grid, n_folds, seed),
        "ideal": _cv_best_c(ideal.values, y, c_grid, n_folds, seed),
        "noisy": _cv_best_c(noisy.values, y, c_grid, n_folds, seed),
    }
    delta_pp = 100.0 * (downstream["imported"]["ba_mean"]
                        - downstream["ideal"]["ba_mean"])
    min_eig = float(np.linalg.eigvalsh(0.5 * (imported.values + imported.values.T)).min())
    return {
        "n": n,
        "feature_map": spec.canonical_dict(),
        "noise": noise.canonical_dict(),
        "agreement_vs_ideal": asdict(agree_ideal),
        "agreement_vs_noisy": asdict(agree_noisy),
        "downstream": downstream,
        "delta_pp": delta_pp,
        "imported_min_eigenvalue": min_eig,
        "imported_indefinite": bool(min_eig < -1e-10),
    }
