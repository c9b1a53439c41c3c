"""Soft-margin SVM on precomputed kernels via sequential minimal optimisation,
plus the classification metric bundle.

The solver follows the maximal-violating-pair working-set rule with
lowest-index tie-breaks, so identical inputs always produce identical models.
Indefinite kernels (imported hardware matrices) are handled by clamping the
pair step to the box edge whenever the pairwise curvature is non-positive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .validation import check_labels, check_matrix, check_square

# stopping tolerance on the maximal KKT violation; 1e-5 keeps the dual
# objective well inside 1e-6 of optimum at C up to 100 (1e-3 leaves gaps
# around 1e-4 on ill-conditioned kernels)
DEFAULT_TOL = 1e-5
DEFAULT_MAX_PASSES = 10_000


@dataclass(frozen=True)
class SvmModel:
    alphas: np.ndarray
    y: np.ndarray
    bias: float
    C: float
    support_indices: np.ndarray


@dataclass(frozen=True)
class MetricBundle:
    """Per-evaluation classification metrics. roc_auc / pr_auc are None when a
    single-class truth vector makes them undefined (excluded from averages)."""

    balanced_accuracy: float
    f1: float
    mcc: float
    roc_auc: Optional[float]
    pr_auc: Optional[float]

    def to_dict(self) -> dict:
        return {
            "balanced_accuracy": self.balanced_accuracy,
            "f1": self.f1,
            "mcc": self.mcc,
            "roc_auc": self.roc_auc,
            "pr_auc": self.pr_auc,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricBundle":
        return cls(d["balanced_accuracy"], d["f1"], d["mcc"], d["roc_auc"], d["pr_auc"])


def _pair_update(K, yf, alpha, u, C, i, j):
    """Exact two-variable solve for the pair (i, j); None when the pair
    cannot move. Box hits land exactly on 0 / C because the update is
    expressed through the pair's conserved sum / difference."""
    yi, yj = yf[i], yf[j]
    ai, aj = alpha[i], alpha[j]
    if yi != yj:
        diff = aj - ai
        L, H = max(0.0, diff), min(C, C + diff)
    else:
        total = ai + aj
        L, H = max(0.0, total - C), min(C, total)
    if H <= L:
        return None
    Ei = u[i] - yi
    Ej = u[j] - yj
    eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
    d1 = yj * (Ei - Ej)  # dW/d(alpha_j) at the current point
    if eta > 1e-15:
        aj_new = min(H, max(L, aj + d1 / eta))
    else:
        # non-positive curvature: the dual is linear or convex along the
        # pair direction, so the maximum sits at a box edge
        dW_L = d1 * (L - aj) - 0.5 * eta * (L - aj) ** 2
        dW_H = d1 * (H - aj) - 0.5 * eta * (H - aj) ** 2
        aj_new = H if dW_H > dW_L else L
    if abs(aj_new - aj) < 1e-12:
        return None
    ai_new = (aj_new - diff) if yi != yj else (total - aj_new)
    return ai_new, aj_new


def _smo(K: np.ndarray, y: np.ndarray, C: float, tol: float,
         max_passes: int) -> tuple[np.ndarray, float, int]:
    """Maximal-violating-pair SMO on the dual.

    Minimises f(a) = 1/2 a^T Q a - sum(a) with Q_ij = y_i y_j K_ij subject to
    0 <= a <= C and y.a = 0. Returns (alpha, bias, iterations).
    """
    n = len(y)
    alpha = np.zeros(n)
    u = np.zeros(n)  # u_i = sum_j alpha_j y_j K_ij
    yf = y.astype(float)
    it = 0
    while it < max_passes:
        score = -yf * (yf * u - 1.0)  # -y_i * grad_i
        up = ((yf > 0) & (alpha < C)) | ((yf < 0) & (alpha > 0))
        low = ((yf < 0) & (alpha < C)) | ((yf > 0) & (alpha > 0))
        if not up.any() or not low.any():
            break
        s_up = np.where(up, score, -np.inf)
        s_low = np.where(low, score, np.inf)
        i = int(np.argmax(s_up))   # first occurrence wins ties
        j = int(np.argmin(s_low))
        if s_up[i] - s_low[j] <= tol:
            break
        upd = _pair_update(K, yf, alpha, u, C, i, j)
        if upd is None:
            # the most violating pair is blocked at the box; fall back to
            # the best pair (violation order, lowest-index ties) that moves
            order_i = sorted(np.nonzero(up)[0], key=lambda t: (-score[t], t))
            order_j = sorted(np.nonzero(low)[0], key=lambda t: (score[t], t))
            found = False
            for ii in order_i:
                for jj in order_j:
                    if ii == jj or score[ii] - score[jj] <= tol:
                        break
                    upd = _pair_update(K, yf, alpha, u, C, ii, jj)
                    if upd is not None:
                        i, j, found = ii, jj, True
                        break
                if found or score[ii] - score[order_j[0]] <= tol:
                    break
            if not found:
                break  # no violating pair can move: numerically converged
        ai_new, aj_new = upd
        u += (ai_new - alpha[i]) * yf[i] * K[i] + (aj_new - alpha[j]) * yf[j] * K[j]
        alpha[i], alpha[j] = ai_new, aj_new
        it += 1

    # bias: mean over unbounded support vectors, else midpoint of the
    # feasibility interval [-m, -M]
    eps = 1e-8 * max(C, 1.0)
    free = (alpha > eps) & (alpha < C - eps)
    if free.any():
        b = float(np.mean(yf[free] - u[free]))
    else:
        score = -yf * (yf * u - 1.0)
        up = ((yf > 0) & (alpha < C)) | ((yf < 0) & (alpha > 0))
        low = ((yf < 0) & (alpha < C)) | ((yf > 0) & (alpha > 0))
        m = np.max(np.where(up, score, -np.inf)) if up.any() else 0.0
        M = np.min(np.where(low, score, np.inf)) if low.any() else 0.0
        b = -0.5 * (m + M)
    return alpha, b, it


def dual_objective(K: np.ndarray, y: np.ndarray, alpha: np.ndarray) -> float:
    v = alpha * y
    return float(np.sum(alpha) - 0.5 * (v @ K @ v))


def train(K_train, y, C: float, *, tol: float = DEFAULT_TOL,
          max_passes: int = DEFAULT_MAX_PASSES) -> SvmModel:
    """Solve the kernel SVM dual on a precomputed (possibly slightly
    indefinite) symmetric kernel."""
    from .validation import check_symmetric

    K = check_symmetric(K_train, "K_train", tol=1e-6)
    y = check_labels(y)
    if len(y) != K.shape[0]:
        raise ValueError("label count must match kernel size")
    if C <= 0:
        raise ValueError("C must be positive")
    alpha, b, _ = _smo(K, y, float(C), tol, max_passes)
    support = np.nonzero(alpha > 1e-12)[0]
    return SvmModel(alphas=alpha, y=y.copy(), bias=b, C=float(C),
                    support_indices=support)


def predict(model: SvmModel, K_cross) -> tuple[np.ndarray, np.ndarray]:
    """labels, decision_values for a test x train kernel block. A decision
    value of exactly zero maps to +1."""
    K = check_matrix(K_cross, "K_cross")
    if K.shape[1] != len(model.y):
        raise ValueError("K_cross column count must equal training size")
    scores = K @ (model.alphas * model.y) + model.bias
    labels = np.where(scores >= 0.0, 1, -1)
    return labels, scores


class KernelSVC(BaseEstimator, ClassifierMixin):
    """sklearn-style classifier over precomputed kernels.

    fit(K, y) takes the square training kernel; predict / decision_function
    take test x train blocks, mirroring SVC(kernel="precomputed").
    """

    def __init__(self, C: float = 1.0, tol: float = DEFAULT_TOL,
                 max_passes: int = DEFAULT_MAX_PASSES):
        self.C = C
        self.tol = tol
        self.max_passes = max_passes

    def fit(self, K, y):
        self.model_ = train(K, y, self.C, tol=self.tol, max_passes=self.max_passes)
        self.classes_ = np.array([-1, 1])
        self.intercept_ = self.model_.bias
        self.support_ = self.model_.support_indices
        return self

    def decision_function(self, K):
        return predict(self.model_, K)[1]

    def predict(self, K):
        return predict(self.model_, K)[0]


def _confusion(y_true: np.ndarray, y_pred: np.ndarray) -> tuple[int, int, int, int]:
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fn = int(np.sum((y_true == 1) & (y_pred == -1)))
    tn = int(np.sum((y_true == -1) & (y_pred == -1)))
    fp = int(np.sum((y_true == -1) & (y_pred == 1)))
    return tp, fn, tn, fp


def roc_auc_score(y_true: np.ndarray, scores: np.ndarray) -> Optional[float]:
    """Rank-statistic (Mann-Whitney) AUC with midrank tie handling."""
    from .stats import _average_ranks

    pos = y_true == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = _average_ranks(np.asarray(scores, float))
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def pr_auc_score(y_true: np.ndarray, scores: np.ndarray) -> Optional[float]:
    """Step integration of the precision-recall staircase (no trapezoids):
    sum over descending score thresholds of (R_k - R_{k-1}) * P_k."""
    pos_total = int(np.sum(y_true == 1))
    if pos_total == 0 or pos_total == len(y_true):
        return None
    order = np.argsort(-np.asarray(scores, float), kind="stable")
    yt = np.asarray(y_true)[order]
    sc = np.asarray(scores, float)[order]
    tp = fp = 0
    prev_recall = 0.0
    auc = 0.0
    i = 0
    n = len(yt)
    while i < n:
        j = i
        while j + 1 < n and sc[j + 1] == sc[i]:
            j += 1
        tp += int(np.sum(yt[i:j + 1] == 1))
        fp += (j - i + 1) - int(np.sum(yt[i:j + 1] == 1))
        recall = tp / pos_total
        precision = tp / (tp + fp)
        auc += (recall - prev_recall) * precision
        prev_recall = recall
        i = j + 1
    return float(auc)


def compute_metrics(y_true, y_pred, scores) -> MetricBundle:
    """Balanced accuracy, F1, MCC, ROC-AUC and PR-AUC for -1/+1 labels.

    Degenerate cases: MCC with a zero denominator is 0; a class missing from
    y_true drops its recall term from BA and leaves the AUCs undefined.
    """
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    scores = np.asarray(scores, dtype=float)
    if not (len(y_true) == len(y_pred) == len(scores)):
        raise ValueError("y_true, y_pred and scores must have equal lengths")
    if len(y_true) == 0:
        raise ValueError("empty input")

    tp, fn, tn, fp = _confusion(y_true, y_pred)
    recalls = []
    if tp + fn > 0:
        recalls.append(tp / (tp + fn))
    if tn + fp > 0:
        recalls.append(tn / (tn + fp))
    ba = float(np.mean(recalls))

    f1 = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) > 0 else 0.0

    denom = math.sqrt(float(tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    mcc = ((tp * tn - fp * fn) / denom) if denom > 0 else 0.0

    return MetricBundle(
        balanced_accuracy=ba,
        f1=float(f1),
        mcc=float(mcc),
        roc_auc=roc_auc_score(y_true, scores),
        pr_auc=pr_auc_score(y_true, scores),
    )
