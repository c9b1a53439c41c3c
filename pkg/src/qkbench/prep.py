"""Per-fold preprocessing: imputation, scaling, dimensionality reduction and
tree-based feature selection, composed into leak-free pipelines.

Every transform is fit exclusively on training rows; ``transform`` uses only
the fitted statistics, so held-out rows can never influence the features.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._rng import stream
from .validation import check_matrix

REDUCER_KINDS = ("pca", "nmf", "tree")


@dataclass(frozen=True)
class PipelineSpec:
    reducer: str
    k: int

    def __post_init__(self):
        if self.reducer not in REDUCER_KINDS:
            raise ValueError(f"unknown reducer {self.reducer!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")

    def canonical_dict(self) -> dict:
        return {"reducer": self.reducer, "k": self.k}


class ZeroAsMissingImputer(BaseEstimator, TransformerMixin):
    """Replace zeros in designated columns with the training-column median of
    the non-zero values."""

    def __init__(self, columns: Sequence[int] = ()):
        self.columns = tuple(columns)

    def fit(self, X, y=None):
        X = check_matrix(X)
        self.medians_ = {}
        for c in self.columns:
            nonzero = X[X[:, c] != 0.0, c]
            if nonzero.size == 0:
                warnings.warn(f"column {c} is all-zero; imputing with 0.0")
                self.medians_[c] = 0.0
            else:
                self.medians_[c] = float(np.median(nonzero))
        return self

    def transform(self, X):
        X = check_matrix(X).copy()
        for c, med in self.medians_.items():
            X[X[:, c] == 0.0, c] = med
        return X


class StandardScaler(BaseEstimator, TransformerMixin):
    """Zero mean, unit population variance; constant features keep scale 1."""

    def fit(self, X, y=None):
        X = check_matrix(X)
        self.mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        if np.any(scale == 0.0):
            warnings.warn("constant feature under standard scaling; scale clamped to 1")
            scale = np.where(scale == 0.0, 1.0, scale)
        self.scale_ = scale
        return self

    def transform(self, X):
        X = check_matrix(X)
        return (X - self.mean_) / self.scale_


class MinMaxScaler(BaseEstimator, TransformerMixin):
    """Map training column ranges to [0, 1]; constant features map to 0."""

    def fit(self, X, y=None):
        X = check_matrix(X)
        self.min_ = X.min(axis=0)
        rng = X.max(axis=0) - self.min_
        if np.any(rng == 0.0):
            warnings.warn("constant feature under min-max scaling; range clamped to 1")
            rng = np.where(rng == 0.0, 1.0, rng)
        self.range_ = rng
        return self

    def transform(self, X):
        X = check_matrix(X)
        return (X - self.min_) / self.range_


class PCAReducer(BaseEstimator, TransformerMixin):
    """Top-k principal components via eigendecomposition of the training
    covariance. Component signs are fixed by making the largest-magnitude
    loading positive."""

    def __init__(self, k: int):
        self.k = k

    def fit(self, X, y=None):
        X = check_matrix(X)
        n, d = X.shape
        if self.k > d:
            raise ValueError(f"k={self.k} exceeds feature count {d}")
        if n < 2:
            raise ValueError("PCA needs at least 2 training rows")
        self.mean_ = X.mean(axis=0)
        Xc = X - self.mean_
        cov = (Xc.T @ Xc) / n
        evals, evecs = np.linalg.eigh(cov)
        order = np.argsort(evals)[::-1][: self.k]
        comps = evecs[:, order].T
        for i in range(comps.shape[0]):
            j = int(np.argmax(np.abs(comps[i])))
            if comps[i, j] < 0:
                comps[i] = -comps[i]
        self.components_ = comps
        self.explained_variance_ = np.maximum(evals[order], 0.0)
        return self

    def transform(self, X):
        X = check_matrix(X)
        return (X - self.mean_) @ self.components_.T


class NMFReducer(BaseEstimator, TransformerMixin):
    """Frobenius-loss non-negative factorisation X ~ W H by multiplicative
    updates: at most 200 sweeps, stop at 1e-6 relative loss change, factors
    initialised uniform(0.1, 1.1) from a seeded stream."""

    def __init__(self, k: int, max_iter: int = 200, tol: float = 1e-6, seed: int = 0):
        self.k = k
        self.max_iter = max_iter
        self.tol = tol
        self.seed = seed

    @staticmethod
    def _init(rng, rows: int, cols: int) -> np.ndarray:
        return np.array([[rng.uniform(0.1, 1.1) for _ in range(cols)]
                         for _ in range(rows)])

    @staticmethod
    def _update_w(X, W, H, eps=1e-12):
        return W * (X @ H.T) / np.maximum(W @ (H @ H.T), eps)

    def fit(self, X, y=None):
        X = check_matrix(X)
        if np.any(X < 0):
            raise ValueError("NMF requires non-negative input (min-max scale first)")
        n, d = X.shape
        if self.k > d:
            raise ValueError(f"k={self.k} exceeds feature count {d}")
        rng = stream(self.seed, "nmf-fit")
        W = self._init(rng, n, self.k)
        H = self._init(rng, self.k, d)
        eps = 1e-12
        loss_prev = np.linalg.norm(X - W @ H)
        self.loss_trace_ = [float(loss_prev)]
        for _ in range(self.max_iter):
            H = H * (W.T @ X) / np.maximum((W.T @ W) @ H, eps)
            W = self._update_w(X, W, H, eps)
            loss = np.linalg.norm(X - W @ H)
            self.loss_trace_.append(float(loss))
            if loss_prev > 0 and abs(loss_prev - loss) / loss_prev < self.tol:
                loss_prev = loss
                break
            loss_prev = loss
        self.components_ = H
        return self

    def transform(self, X):
        """Solve for non-negative weights against the fitted components by
        iterating the W update with H frozen (seeded init, hence pure)."""
        X = check_matrix(X)
        if np.any(X < 0):
            raise ValueError("NMF transform requires non-negative input")
        H = self.components_
        rng = stream(self.seed, "nmf-transform")
        W = self._init(rng, X.shape[0], self.k)
        eps = 1e-12
        prev = np.linalg.norm(X - W @ H)
        for _ in range(self.max_iter):
            W = self._update_w(X, W, H, eps)
            loss = np.linalg.norm(X - W @ H)
            if prev > 0 and abs(prev - loss) / prev < self.tol:
                break
            prev = loss
        return W


# ---------------------------------------------------------------------------
# CART with Gini impurity for supervised feature selection


def _gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - np.sum(p * p))


class TreeSelector(BaseEstimator, TransformerMixin):
    """Select the k features with the largest Gini importances from a greedy
    CART fit (unlimited depth, min 2 samples to split, midpoint thresholds,
    lowest-index tie-breaks everywhere -> fully deterministic)."""

    def __init__(self, k: int):
        self.k = k

    def _best_split(self, X, y):
        n, d = X.shape
        counts = np.array([np.sum(y == -1), np.sum(y == 1)])
        parent = _gini(counts)
        best = None  # (decrease, feature, threshold)
        for f in range(d):
            order = np.argsort(X[:, f], kind="stable")
            xs, ys = X[order, f], y[order]
            left = np.zeros(2)
            right = counts.astype(float).copy()
            for i in range(n - 1):
                cls = 0 if ys[i] == -1 else 1
                left[cls] += 1
                right[cls] -= 1
                if xs[i + 1] == xs[i]:
                    continue
                g = ((i + 1) * _gini(left) + (n - i - 1) * _gini(right)) / n
                dec = parent - g
                thr = 0.5 * (xs[i] + xs[i + 1])
                if best is None or dec > best[0] + 1e-15:
                    best = (dec, f, thr)
        if best is None or best[0] <= 1e-15:
            return None
        return best

    def _grow(self, X, y, importances):
        # explicit stack (depth-first, left child first) to dodge the
        # recursion limit on deep trees
        stack = [(X, y, 1.0)]
        while stack:
            Xn, yn, weight = stack.pop()
            if len(yn) < 2 or len(np.unique(yn)) == 1:
                continue
            split = self._best_split(Xn, yn)
            if split is None:
                continue
            dec, f, thr = split
            importances[f] += weight * dec
            mask = Xn[:, f] <= thr
            stack.append((Xn[~mask], yn[~mask], weight * float((~mask).mean())))
            stack.append((Xn[mask], yn[mask], weight * float(mask.mean())))

    def fit(self, X, y):
        X = check_matrix(X)
        y = np.asarray(y, dtype=int)
        n, d = X.shape
        if self.k > d:
            raise ValueError(f"k={self.k} exceeds feature count {d}")
        importances = np.zeros(d)
        self._grow(X, y, importances)
        total = importances.sum()
        self.importances_ = importances / total if total > 0 else importances
        # stable sort on -importance keeps the lowest index first among ties
        order = np.argsort(-self.importances_, kind="stable")
        self.selected_ = np.sort(order[: self.k])
        return self

    def transform(self, X):
        X = check_matrix(X)
        return X[:, self.selected_]


class PreprocessingPipeline(BaseEstimator, TransformerMixin):
    """Imputer (optional) -> scaler -> reducer, each fit on training rows only.

    NMF is preceded by min-max scaling to [0, 1]; PCA and the tree selector
    by standard scaling.
    """

    def __init__(self, spec: PipelineSpec, missing_zero_columns: Sequence[int] = (),
                 seed: int = 0):
        self.spec = spec
        self.missing_zero_columns = tuple(missing_zero_columns)
        self.seed = seed

    def fit(self, X, y):
        X = check_matrix(X)
        if X.shape[0] < 2:
            raise ValueError("need at least 2 training rows")
        if self.spec.k > X.shape[1]:
            raise ValueError(f"k={self.spec.k} exceeds feature count {X.shape[1]}")
        self.imputer_ = None
        if self.missing_zero_columns:
            self.imputer_ = ZeroAsMissingImputer(self.missing_zero_columns).fit(X)
            X = self.imputer_.transform(X)
        if self.spec.reducer == "nmf":
            self.scaler_ = MinMaxScaler().fit(X)
            Xs = self.scaler_.transform(X)
            self.reducer_ = NMFReducer(self.spec.k, seed=self.seed).fit(Xs)
        elif self.spec.reducer == "pca":
            self.scaler_ = StandardScaler().fit(X)
            Xs = self.scaler_.transform(X)
            self.reducer_ = PCAReducer(self.spec.k).fit(Xs)
        else:
            self.scaler_ = StandardScaler().fit(X)
            Xs = self.scaler_.transform(X)
            self.reducer_ = TreeSelector(self.spec.k).fit(Xs, y)
        return self

    def transform(self, X):
        X = check_matrix(X)
        if self.imputer_ is not None:
            X = self.imputer_.transform(X)
        return self.reducer_.transform(self.scaler_.transform(X))


def fit_pipeline(spec: PipelineSpec, X_train, y_train, *,
                 missing_zero_columns: Sequence[int] = (), seed: int = 0
                 ) -> PreprocessingPipeline:
    return PreprocessingPipeline(spec, missing_zero_columns, seed).fit(X_train, y_train)
