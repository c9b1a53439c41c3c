"""Nested cross-validation, learning curves and seed-sensitivity sweeps.

Per outer fold: preprocessing is fit on the training split only, kernels are
computed from the transformed features (optionally after per-fold theta
optimisation), the inner folds pick C on kernel sub-matrices, and the refit
model is scored on the untouched test split.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import __version__
from ._rng import stream
from .config import ExperimentConfig, KernelConfig, content_hash
from .datasets import Dataset, stratified_subsample
from .folds import FoldPlan, _make_level, make_fold_plan
from .kernel_io import KernelCache
from .kernels import KernelMatrix, classical_kernel, quantum_kernel_ideal, quantum_kernel_noisy
from .prep import PipelineSpec, fit_pipeline
from .qkt import optimize_theta
from .stats import TestReport, cov, ols_slope, wilcoxon_signed_rank
from .svm import MetricBundle, compute_metrics, predict, train


@dataclass
class FoldResult:
    fold: int
    chosen_c: float
    metrics: MetricBundle
    kernel_wall_s: float
    fit_wall_s: float
    cache_keys: dict = field(default_factory=dict)
    qkt: Optional[dict] = None

    def to_dict(self) -> dict:
        return {"fold": self.fold, "chosen_c": self.chosen_c,
                "metrics": self.metrics.to_dict(),
                "kernel_wall_s": self.kernel_wall_s,
                "fit_wall_s": self.fit_wall_s,
                "cache_keys": self.cache_keys, "qkt": self.qkt}


@dataclass
class ResultRecord:
    config_hash: str
    dataset: str
    kernel_label: str
    mode: str
    folds: list[FoldResult]
    factors: dict
    provenance: dict

    @property
    def ba(self) -> list[float]:
        return [f.metrics.balanced_accuracy for f in self.folds]

    @property
    def mean_ba(self) -> float:
        return float(np.mean(self.ba))

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "dataset": self.dataset,
            "kernel_label": self.kernel_label,
            "mode": self.mode,
            "ba": self.ba,
            "mean_ba": self.mean_ba,
            "folds": [f.to_dict() for f in self.folds],
            "factors": self.factors,
            "provenance": self.provenance,
        }


def dataset_content_id(ds: Dataset) -> dict:
    parts = [np.ascontiguousarray(ds.X).tobytes(), np.ascontiguousarray(ds.y).tobytes()]
    if ds.groups is not None:
        parts.append(np.ascontiguousarray(ds.groups).tobytes())
    import hashlib

    h = hashlib.blake2b(digest_size=16)
    for p in parts:
        h.update(p)
    return {"name": ds.name, "content": h.hexdigest()}


def _fold_cache_key(ds_id: dict, plan: FoldPlan, fold: int, pipeline: PipelineSpec,
                    kernel: KernelConfig, k: int, theta, part: str) -> str:
    payload = {
        "dataset": ds_id,
        "fold": {"index": fold, "n_outer": plan.n_outer, "n_inner": plan.n_inner,
                 "seed": plan.seed, "grouped": plan.grouped},
        "pipeline": pipeline.canonical_dict(),
        "kernel": kernel.canonical_dict(),
        "theta": None if theta is None else [float(t) for t in theta],
        "k": k,
        "part": part,
    }
    return content_hash(payload)


def full_kernel(F: np.ndarray, kernel: KernelConfig, k: int,
                dataset_label: str = "X") -> np.ndarray:
    """Square kernel over one feature matrix (seed-sweep / hw-compare input)."""
    if not kernel.is_quantum:
        return classical_kernel(F, F, kernel.family, dataset_label=dataset_label).values
    spec = kernel.feature_map_spec(k)
    if kernel.pathway == "ideal":
        return quantum_kernel_ideal(F, F, spec).values
    return quantum_kernel_noisy(F, F, spec, kernel.noise).values


def _compute_kernels(F_tr, F_te, kernel: KernelConfig, k: int, theta,
                     dataset_label: str) -> tuple[np.ndarray, np.ndarray]:
    """Train x train and test x train kernel values for one fold."""
    if not kernel.is_quantum:
        K_tr = classical_kernel(F_tr, F_tr, kernel.family, dataset_label=dataset_label)
        # gamma comes from the train side; transpose to test x train
        K_te = classical_kernel(F_tr, F_te, kernel.family,
                                dataset_label=dataset_label).values.T
        return K_tr.values, K_te
    spec = kernel.feature_map_spec(k).with_theta(theta)
    if kernel.pathway == "ideal":
        K_tr = quantum_kernel_ideal(F_tr, F_tr, spec)
        K_te = quantum_kernel_ideal(F_te, F_tr, spec)
    else:
        K_tr = quantum_kernel_noisy(F_tr, F_tr, spec, kernel.noise)
        K_te = quantum_kernel_noisy(F_te, F_tr, spec, kernel.noise)
    return K_tr.values, K_te.values


def _cached_kernels(ds_id, plan, fold, pipeline, kernel, k, theta, F_tr, F_te,
                    cache: Optional[KernelCache], dataset_label: str,
                    pathway: str):
    keys = {
        "train": _fold_cache_key(ds_id, plan, fold, pipeline, kernel, k, theta, "train"),
        "cross": _fold_cache_key(ds_id, plan, fold, pipeline, kernel, k, theta, "cross"),
    }
    if cache is not None:
        got_tr = cache.get(keys["train"])
        got_te = cache.get(keys["cross"])
        if got_tr is not None and got_te is not None:
            return got_tr.values, got_te.values, keys, True
    K_tr, K_te = _compute_kernels(F_tr, F_te, kernel, k, theta, dataset_label)
    if cache is not None:
        from .kernels import Provenance

        cache.put(keys["train"], KernelMatrix(K_tr, Provenance(pathway=pathway,
                                                               timestamp=time.time())))
        cache.put(keys["cross"], KernelMatrix(K_te, Provenance(pathway=pathway,
                                                               timestamp=time.time())))
    return K_tr, K_te, keys, False


def _positions(base: np.ndarray, subset: np.ndarray) -> np.ndarray:
    """Positions of `subset` ids inside the sorted index array `base`."""
    pos = np.searchsorted(base, subset)
    return pos


def _single_class(y: np.ndarray) -> bool:
    return len(np.unique(y)) < 2


def _select_c(K_tr: np.ndarray, y_tr: np.ndarray, inner_pairs, c_grid,
              tr_index: np.ndarray) -> float:
    """Mean inner-fold BA per C on kernel sub-matrices; a C with more valid
    folds wins, then higher mean BA, then the smaller C."""
    scored = []
    for C in c_grid:
        bas = []
        for sub_train, sub_val in inner_pairs:
            tp = _positions(tr_index, sub_train)
            vp = _positions(tr_index, sub_val)
            y_in, y_va = y_tr[tp], y_tr[vp]
            if _single_class(y_in) or _single_class(y_va):
                continue  # scored as missing
            model = train(K_tr[np.ix_(tp, tp)], y_in, C)
            labels, scores = predict(model, K_tr[np.ix_(vp, tp)])
            bas.append(compute_metrics(y_va, labels, scores).balanced_accuracy)
        mean_ba = float(np.mean(bas)) if bas else float("-inf")
        scored.append((-len(bas), -mean_ba, C))
    scored.sort()
    return scored[0][2]


def _fit_and_score(K_tr, y_tr, K_te, y_te, C) -> MetricBundle:
    model = train(K_tr, y_tr, C)
    labels, scores = predict(model, K_te)
    return compute_metrics(y_te, labels, scores)


def nested_cv(ds: Dataset, pipeline: PipelineSpec, kernel: KernelConfig,
              c_grid: Sequence[float], plan: FoldPlan, *,
              cache: Optional[KernelCache] = None,
              config_hash: str = "", qkt_max_iter: int = 170) -> ResultRecord:
    """Run the full nested CV protocol for one experiment configuration."""
    ds_id = dataset_content_id(ds)
    folds: list[FoldResult] = []
    for i, (tr, te) in enumerate(plan.outer):
        chain = fit_pipeline(pipeline, ds.X[tr], ds.y[tr],
                             missing_zero_columns=ds.missing_zero_columns,
                             seed=plan.seed)
        F_tr = chain.transform(ds.X[tr])
        F_te = chain.transform(ds.X[te])
        y_tr, y_te = ds.y[tr], ds.y[te]

        theta = None
        qkt_info = None
        t0 = time.perf_counter()
        if kernel.qkt:
            spec = kernel.feature_map_spec(pipeline.k)
            qres = optimize_theta(F_tr, y_tr, spec, max_iter=qkt_max_iter)
            theta = tuple(float(t) for t in qres.theta_star)
            qkt_info = {"theta": list(theta), "kta_initial": qres.kta_initial,
                        "kta_final": qres.kta_final, "iterations": qres.iterations,
                        "converged": qres.converged,
                        "wall_s": time.perf_counter() - t0}

        t0 = time.perf_counter()
        K_tr, K_te, keys, _ = _cached_kernels(
            ds_id, plan, i, pipeline, kernel, pipeline.k, theta, F_tr, F_te,
            cache, ds.name, kernel.pathway)
        kernel_wall = time.perf_counter() - t0

        t0 = time.perf_counter()
        chosen_c = _select_c(K_tr, y_tr, plan.inner[i], c_grid, tr)
        metrics = _fit_and_score(K_tr, y_tr, K_te, y_te, chosen_c)
        fit_wall = time.perf_counter() - t0

        folds.append(FoldResult(fold=i, chosen_c=chosen_c, metrics=metrics,
                                kernel_wall_s=kernel_wall, fit_wall_s=fit_wall,
                                cache_keys=keys, qkt=qkt_info))
    return ResultRecord(
        config_hash=config_hash,
        dataset=ds.name,
        kernel_label=kernel.label(),
        mode="cv",
        folds=folds,
        factors={"dataset": ds.name, "reducer": pipeline.reducer,
                 "k": pipeline.k, "family": kernel.family,
                 "pathway": kernel.pathway, "qkt": kernel.qkt,
                 "grouped": plan.grouped},
        provenance={"seed": plan.seed, "version": f"qkbench-{__version__}",
                    "timestamp": time.time()},
    )


# ---------------------------------------------------------------------------
# learning curves


@dataclass
class FractionPoint:
    fraction: float
    mean_ba: Optional[float]
    n_train_mean: Optional[float]
    per_fold: list

    def to_dict(self) -> dict:
        return {"fraction": self.fraction, "mean_ba": self.mean_ba,
                "n_train_mean": self.n_train_mean, "per_fold": self.per_fold}


@dataclass
class LearningCurveResult:
    config_hash: str
    dataset: str
    kernel_label: str
    points: list[FractionPoint]
    slope: dict
    provenance: dict

    def to_dict(self) -> dict:
        return {"config_hash": self.config_hash, "dataset": self.dataset,
                "kernel_label": self.kernel_label, "mode": "learning",
                "points": [p.to_dict() for p in self.points],
                "slope": self.slope, "provenance": self.provenance}


def _fraction_subsample(y: np.ndarray, tr: np.ndarray, fraction: float,
                        seed: int, fold: int) -> Optional[np.ndarray]:
    """Stratified prefix subsample of the outer-train indices: subsamples at
    smaller fractions are subsets of larger ones for the same seed."""
    rng = stream(seed, "frac", fold)
    picked: list[int] = []
    for cls in (-1, 1):
        members = sorted(int(i) for i in tr[y[tr] == cls])
        rng.shuffle(members)
        m = int(np.ceil(fraction * len(members)))
        if m < 2:
            return None
        picked.extend(members[:m])
    return np.array(sorted(picked), dtype=int)


def learning_curve(ds: Dataset, pipeline: PipelineSpec, kernel: KernelConfig,
                   c_grid: Sequence[float], plan: FoldPlan,
                   fractions: Sequence[float] = (0.1, 0.2, 0.3, 0.5, 0.7, 1.0), *,
                   cache: Optional[KernelCache] = None,
                   config_hash: str = "") -> LearningCurveResult:
    """Subsample each outer-train at the given fractions, retrain on sliced
    kernel sub-matrices, and score on the untouched outer-test. At fraction
    1.0 this reproduces nested_cv exactly.

    The slope report regresses mean BA on ln(n_train) across fractions.
    """
    fractions = sorted(set(float(f) for f in fractions))
    if any(not (0.0 < f <= 1.0) for f in fractions):
        raise ValueError("fractions must lie in (0, 1]")
    ds_id = dataset_content_id(ds)
    # mirror the plan's group handling so fraction 1.0 rebuilds its inner folds
    groups = ds.groups if plan.grouped else None

    # per-fold full kernels, computed once and sliced per fraction
    fold_state = []
    for i, (tr, te) in enumerate(plan.outer):
        chain = fit_pipeline(pipeline, ds.X[tr], ds.y[tr],
                             missing_zero_columns=ds.missing_zero_columns,
                             seed=plan.seed)
        F_tr = chain.transform(ds.X[tr])
        F_te = chain.transform(ds.X[te])
        theta = None
        if kernel.qkt:
            spec = kernel.feature_map_spec(pipeline.k)
            theta = tuple(float(t) for t in
                          optimize_theta(F_tr, ds.y[tr], spec).theta_star)
        K_tr, K_te, _, _ = _cached_kernels(ds_id, plan, i, pipeline, kernel,
                                           pipeline.k, theta, F_tr, F_te, cache,
                                           ds.name, kernel.pathway)
        fold_state.append((tr, te, K_tr, K_te))

    points: list[FractionPoint] = []
    for frac in fractions:
        per_fold = []
        for i, (tr, te, K_tr, K_te) in enumerate(fold_state):
            sub = _fraction_subsample(ds.y, tr, frac, plan.seed, i)
            if sub is None:
                per_fold.append({"fold": i, "ba": None, "n_train": None})
                continue
            pos = _positions(tr, sub)
            K_sub = K_tr[np.ix_(pos, pos)]
            K_cross = K_te[:, pos]
            y_sub = ds.y[sub]
            inner_pairs = _make_level(ds.y, sub, groups, plan.n_inner,
                                      stream(plan.seed, "inner", i))
            chosen_c = _select_c(K_sub, y_sub, inner_pairs, c_grid, sub)
            metrics = _fit_and_score(K_sub, y_sub, K_cross, ds.y[te], chosen_c)
            per_fold.append({"fold": i, "ba": metrics.balanced_accuracy,
                             "n_train": int(len(sub)), "chosen_c": chosen_c})
        valid = [p for p in per_fold if p["ba"] is not None]
        points.append(FractionPoint(
            fraction=frac,
            mean_ba=float(np.mean([p["ba"] for p in valid])) if valid else None,
            n_train_mean=float(np.mean([p["n_train"] for p in valid])) if valid else None,
            per_fold=per_fold,
        ))

    usable = [(p.n_train_mean, p.mean_ba) for p in points if p.mean_ba is not None]
    if len(usable) >= 3:
        slope = ols_slope(np.log([u[0] for u in usable]), [u[1] for u in usable])
    else:
        slope = {"slope": None, "intercept": None, "p_two_sided": None}
    return LearningCurveResult(
        config_hash=config_hash, dataset=ds.name, kernel_label=kernel.label(),
        points=points, slope=slope,
        provenance={"seed": plan.seed, "version": f"qkbench-{__version__}",
                    "timestamp": time.time()},
    )


# ---------------------------------------------------------------------------
# seed sweeps


@dataclass
class SeedSweepResult:
    config_hash: str
    dataset: str
    kernel_label: str
    seeds: list[int]
    per_seed_ba: list[float]
    cov: float
    provenance: dict

    def to_dict(self) -> dict:
        return {"config_hash": self.config_hash, "dataset": self.dataset,
                "kernel_label": self.kernel_label, "mode": "seeds",
                "seeds": self.seeds, "per_seed_ba": self.per_seed_ba,
                "cov": self.cov, "provenance": self.provenance}


def seed_sweep(y, K_full: np.ndarray, c_grid: Sequence[float],
               seeds: Sequence[int], n_outer: int = 5, n_inner: int = 3,
               groups=None, *, config_hash: str = "", dataset: str = "",
               kernel_label: str = "") -> SeedSweepResult:
    """Re-run nested CV over a fixed precomputed kernel for each seed; only
    the fold randomisation varies. CoV = sample std / mean of per-seed BA."""
    seeds = [int(s) for s in seeds]
    if len(seeds) < 2:
        raise ValueError("need at least 2 seeds for a sweep")
    y = np.asarray(y, dtype=int)
    per_seed = []
    for s in seeds:
        plan = make_fold_plan(y, groups, n_outer, n_inner, s)
        bas = []
        for i, (tr, te) in enumerate(plan.outer):
            K_tr = K_full[np.ix_(tr, tr)]
            K_te = K_full[np.ix_(te, tr)]
            chosen_c = _select_c(K_tr, y[tr], plan.inner[i], c_grid, tr)
            metrics = _fit_and_score(K_tr, y[tr], K_te, y[te], chosen_c)
            bas.append(metrics.balanced_accuracy)
        per_seed.append(float(np.mean(bas)))
    spread = cov(per_seed)
    return SeedSweepResult(config_hash=config_hash, dataset=dataset,
                           kernel_label=kernel_label, seeds=seeds,
                           per_seed_ba=per_seed, cov=spread,
                           provenance={"version": f"qkbench-{__version__}",
                                       "timestamp": time.time()})


def compare_sweeps(a: SeedSweepResult, b: SeedSweepResult) -> dict:
    """Win counts (strict inequality) and a paired Wilcoxon over per-seed BA."""
    if a.seeds != b.seeds:
        raise ValueError("sweeps must cover identical seeds")
    xs, ys = np.array(a.per_seed_ba), np.array(b.per_seed_ba)
    report = wilcoxon_signed_rank(xs, ys)
    return {"wins_a": int(np.sum(xs > ys)), "wins_b": int(np.sum(ys > xs)),
            "n_seeds": len(a.seeds), "wilcoxon": report.to_dict()}


def run_experiment(cfg: ExperimentConfig, ds: Dataset, *,
                   cache: Optional[KernelCache] = None):
    """Dispatch one experiment config to the right harness entry point."""
    subsample = cfg.dataset.get("subsample")
    if subsample:
        size = 1000 if subsample is True else int(subsample)
        ds = stratified_subsample(ds, size, cfg.seed)
    chash = cfg.config_hash()
    if cfg.mode == "seeds":
        # fixed-kernel sensitivity protocol: one globally preprocessed kernel,
        # only the fold randomisation varies
        chain = fit_pipeline(cfg.pipeline, ds.X, ds.y,
                             missing_zero_columns=ds.missing_zero_columns,
                             seed=cfg.seed)
        F = chain.transform(ds.X)
        K_full = full_kernel(F, cfg.kernel, cfg.pipeline.k, ds.name)
        return seed_sweep(ds.y, K_full, cfg.c_grid, cfg.sweep_seeds,
                          cfg.n_outer, cfg.n_inner, ds.groups,
                          config_hash=chash, dataset=ds.name,
                          kernel_label=cfg.kernel.label())
    plan = make_fold_plan(ds.y, ds.groups, cfg.n_outer, cfg.n_inner, cfg.seed)
    if cfg.mode == "learning":
        return learning_curve(ds, cfg.pipeline, cfg.kernel, cfg.c_grid, plan,
                              cfg.fractions, cache=cache, config_hash=chash)
    return nested_cv(ds, cfg.pipeline, cfg.kernel, cfg.c_grid, plan,
                     cache=cache, config_hash=chash)
