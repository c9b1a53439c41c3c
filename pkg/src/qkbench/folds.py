"""Deterministic stratified (optionally group-aware) nested fold plans.

Stratified assignment shuffles each class with a seed-derived splitmix stream
and deals round-robin, so per-fold class counts stay within +-1 of
proportional. Group-aware plans keep every group on one side of every split.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._rng import SplitMix64, stream
from .validation import check_labels


@dataclass
class FoldPlan:
    outer: list[tuple[np.ndarray, np.ndarray]]          # (train, test) indices
    inner: list[list[tuple[np.ndarray, np.ndarray]]]    # per outer fold: (train, val)
    seed: int
    n_outer: int
    n_inner: int
    grouped: bool = False


def _stratified_fold_sets(y: np.ndarray, indices: np.ndarray, n_folds: int,
                          rng: SplitMix64) -> list[np.ndarray]:
    """Split `indices` into n_folds stratified test sets: shuffle inside each
    class, deal round-robin."""
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    for cls in (-1, 1):
        members = sorted(int(i) for i in indices[y[indices] == cls])
        rng.shuffle(members)
        for t, idx in enumerate(members):
            folds[t % n_folds].append(idx)
    return [np.array(sorted(f), dtype=int) for f in folds]


def _grouped_fold_sets(y: np.ndarray, indices: np.ndarray, group_ids: np.ndarray,
                       n_folds: int, rng: SplitMix64) -> list[np.ndarray]:
    """Greedy group assignment: groups (largest first, seeded shuffle among
    equals) go to the fold that minimises squared deviation from proportional
    per-class targets."""
    idx = np.asarray(indices, dtype=int)
    uniq: dict[int, list[int]] = {}
    for i in idx:
        uniq.setdefault(int(group_ids[i]), []).append(int(i))
    keys = sorted(uniq)
    rng.shuffle(keys)
    keys.sort(key=lambda g: -len(uniq[g]))  # stable: shuffle breaks size ties

    n = len(idx)
    if any(len(v) > n / n_folds for v in uniq.values()):
        warnings.warn("a single group exceeds 1/n_folds of the data; "
                      "stratification is best-effort")
    target = np.array([np.sum(y[idx] == -1), np.sum(y[idx] == 1)], float) / n_folds
    counts = np.zeros((n_folds, 2))
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    for g in keys:
        members = uniq[g]
        add = np.array([sum(1 for i in members if y[i] == -1),
                        sum(1 for i in members if y[i] == 1)], float)
        costs = [float(np.sum((counts[f] + add - target) ** 2)) for f in range(n_folds)]
        f = int(np.argmin(costs))  # lowest fold index wins ties
        counts[f] += add
        folds[f].extend(members)
    return [np.array(sorted(f), dtype=int) for f in folds]


def _make_level(y, indices, groups, n_folds, rng) -> list[tuple[np.ndarray, np.ndarray]]:
    if groups is None:
        test_sets = _stratified_fold_sets(y, indices, n_folds, rng)
    else:
        test_sets = _grouped_fold_sets(y, indices, groups, n_folds, rng)
    index_set = set(int(i) for i in indices)
    out = []
    for test in test_sets:
        train = np.array(sorted(index_set - set(int(i) for i in test)), dtype=int)
        out.append((train, test))
    return out


def make_fold_plan(y, groups=None, n_outer: int = 5, n_inner: int = 3,
                   seed: int = 42) -> FoldPlan:
    """Build the nested plan: outer test sets partition the data, inner folds
    partition each outer training set. Deterministic given (y, groups, seed).
    """
    y = check_labels(y)
    if n_outer < 2 or n_inner < 2:
        raise ValueError("n_outer and n_inner must both be >= 2")
    for cls in (-1, 1):
        count = int(np.sum(y == cls))
        if count < n_outer:
            raise ValueError(f"class {cls} has only {count} members; "
                             f"need at least n_outer={n_outer}")
    if groups is not None:
        groups = np.asarray(groups)
        if len(groups) != len(y):
            raise ValueError("groups length must match y")
        if len(np.unique(groups)) == len(groups):
            groups = None  # unique ids: the group constraint never binds

    all_idx = np.arange(len(y), dtype=int)
    outer = _make_level(y, all_idx, groups, n_outer, stream(seed, "outer"))
    inner = []
    for i, (train, _) in enumerate(outer):
        inner.append(_make_level(y, train, groups, n_inner, stream(seed, "inner", i)))
    return FoldPlan(outer=outer, inner=inner, seed=seed, n_outer=n_outer,
                    n_inner=n_inner, grouped=groups is not None)
