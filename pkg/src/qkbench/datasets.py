"""Dataset ingestion (local CSV with a header row) and synthetic generators
for tests and demos."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ._rng import stream


@dataclass
class Dataset:
    name: str
    X: np.ndarray
    y: np.ndarray
    groups: Optional[np.ndarray] = None
    missing_zero_columns: tuple[int, ...] = ()
    provenance: str = ""
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.X) != len(self.y):
            raise ValueError("X and y length mismatch")
        if self.groups is not None and len(self.groups) != len(self.y):
            raise ValueError("groups length mismatch")

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


def load_dataset(path, *, label_column: str, positive_label,
                 group_column: Optional[str] = None,
                 missing_zero_columns: Sequence[str] = (),
                 name: Optional[str] = None) -> Dataset:
    """Load a rectangular CSV with a header row.

    Labels are mapped to +1 where the cell equals ``positive_label`` (string
    comparison) and -1 otherwise. Zeros-as-missing columns are recorded but
    imputed later, at fold-fit time, so raw values are retained here.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise ValueError(f"{path}: missing label column {label_column!r}")
        label_idx = header.index(label_column)
        group_idx = None
        if group_column is not None:
            if group_column not in header:
                raise ValueError(f"{path}: missing group column {group_column!r}")
            group_idx = header.index(group_column)
        feature_idx = [i for i in range(len(header))
                       if i not in (label_idx, group_idx)]
        feature_names = tuple(header[i] for i in feature_idx)
        for col in missing_zero_columns:
            if col not in feature_names:
                raise ValueError(f"{path}: missing-as-zero column {col!r} not found")

        rows, labels, groups = [], [], []
        for r, row in enumerate(reader, start=2):  # 1-based incl. header
            if len(row) != len(header):
                raise ValueError(f"{path}: row {r} has {len(row)} cells, "
                                 f"expected {len(header)}")
            vals = []
            for i in feature_idx:
                cell = row[i].strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise ValueError(f"{path}: row {r}, column {header[i]!r}: "
                                     f"non-numeric value {cell!r}") from None
                if not math.isfinite(v):
                    raise ValueError(f"{path}: row {r}, column {header[i]!r}: "
                                     f"non-finite value {cell!r}")
                vals.append(v)
            rows.append(vals)
            labels.append(row[label_idx].strip())
            if group_idx is not None:
                groups.append(row[group_idx].strip())

    if not rows:
        raise ValueError(f"{path}: no data rows")
    pos = str(positive_label)
    y = np.array([1 if lab == pos else -1 for lab in labels], dtype=int)
    if len(np.unique(y)) < 2:
        raise ValueError(f"{path}: single-class data "
                         f"(positive label {positive_label!r})")
    garr = None
    if group_idx is not None:
        ids: dict[str, int] = {}
        garr = np.array([ids.setdefault(g, len(ids)) for g in groups], dtype=int)
    mz = tuple(feature_names.index(c) for c in missing_zero_columns)
    return Dataset(name=name or path.stem, X=np.array(rows, dtype=float), y=y,
                   groups=garr, missing_zero_columns=mz,
                   provenance=str(path), feature_names=feature_names)


def stratified_subsample(ds: Dataset, size: int, seed: int) -> Dataset:
    """Class-proportional subsample (deterministic); keeps groups aligned."""
    if size >= ds.n_samples:
        return ds
    rng = stream(seed, "subsample", ds.name)
    picked: list[int] = []
    classes = [(-1, int(np.sum(ds.y == -1))), (1, int(np.sum(ds.y == 1)))]
    quota = {cls: max(1, round(size * cnt / ds.n_samples)) for cls, cnt in classes}
    # fix rounding drift on the majority class
    drift = size - sum(quota.values())
    major = max(classes, key=lambda c: c[1])[0]
    quota[major] += drift
    for cls, _ in classes:
        members = sorted(int(i) for i in np.nonzero(ds.y == cls)[0])
        rng.shuffle(members)
        picked.extend(members[: quota[cls]])
    picked = sorted(picked)
    return Dataset(name=ds.name, X=ds.X[picked], y=ds.y[picked],
                   groups=None if ds.groups is None else ds.groups[picked],
                   missing_zero_columns=ds.missing_zero_columns,
                   provenance=f"{ds.provenance} [subsample n={size} seed={seed}]",
                   feature_names=ds.feature_names)


def make_blobs(n: int = 60, separation: float = 4.0, n_features: int = 2,
               seed: int = 0) -> Dataset:
    """Two unit-variance Gaussian blobs along the first axis, balanced
    labels; separation is the distance between the centres in sigmas."""
    rng = stream(seed, "blobs")
    half = n // 2
    X = np.empty((2 * half, n_features))
    y = np.empty(2 * half, dtype=int)
    for i in range(2 * half):
        cls = 1 if i < half else -1
        centre = 0.5 * separation * cls
        row = [_gauss(rng) for _ in range(n_features)]
        row[0] += centre
        X[i] = row
        y[i] = cls
    return Dataset(name="blobs", X=X, y=y, provenance="synthetic:blobs")


def make_xor(n: int = 40, noise: float = 0.2, seed: int = 0) -> Dataset:
    """Four noisy clusters at (+-1, +-1) labelled by the coordinate product."""
    rng = stream(seed, "xor")
    X = np.empty((n, 2))
    y = np.empty(n, dtype=int)
    corners = [(1, 1), (-1, 1), (1, -1), (-1, -1)]
    for i in range(n):
        cx, cy = corners[i % 4]
        X[i] = (cx + noise * _gauss(rng), cy + noise * _gauss(rng))
        y[i] = 1 if cx * cy > 0 else -1
    return Dataset(name="xor", X=X, y=y, provenance="synthetic:xor")


def _gauss(rng) -> float:
    # Box-Muller from two splitmix uniforms
    u1 = max(rng.uniform(0.0, 1.0), 1e-12)
    u2 = rng.uniform(0.0, 1.0)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
