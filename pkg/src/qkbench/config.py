"""Experiment configuration: YAML parsing, canonical serialisation and
content hashing.

A config file is either a single experiment (top-level sections) or a
campaign with ``defaults`` plus an ``experiments`` list of overrides; see
docs/config.md for the grammar.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import yaml

from .circuit import FEATURE_MAP_KINDS, FeatureMapSpec
from .kernels import CLASSICAL_KINDS
from .prep import PipelineSpec
from .sim import NoiseModel

DEFAULT_C_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)
DEFAULT_FRACTIONS = (0.1, 0.2, 0.3, 0.5, 0.7, 1.0)
DEFAULT_SWEEP_SEEDS = tuple(range(16))
MODES = ("cv", "learning", "seeds")


def canonical_json(obj) -> str:
    """Key-order-independent serialisation used for all content hashes."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def content_hash(obj) -> str:
    """Stable 128-bit hash of the canonical serialisation (32 hex chars)."""
    digest = hashlib.blake2b(canonical_json(obj).encode(), digest_size=16)
    return digest.hexdigest()


@dataclass(frozen=True)
class KernelConfig:
    """One kernel family plus its quantum/noise/QKT settings."""

    family: str
    reps: int = 2
    pathway: str = "ideal"
    noise: NoiseModel = field(default_factory=NoiseModel)
    qkt: bool = False
    theta: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.family in CLASSICAL_KINDS:
            object.__setattr__(self, "pathway", "classical")
            if self.qkt:
                raise ValueError("QKT applies only to quantum kernels")
        elif self.family in FEATURE_MAP_KINDS:
            if self.pathway not in ("ideal", "noisy"):
                raise ValueError(f"quantum pathway must be ideal or noisy, "
                                 f"got {self.pathway!r}")
            if self.qkt and self.pathway != "ideal":
                raise ValueError("QKT runs on the ideal statevector pathway only")
        else:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.theta is not None:
            object.__setattr__(self, "theta", tuple(float(t) for t in self.theta))

    @property
    def is_quantum(self) -> bool:
        return self.family in FEATURE_MAP_KINDS

    def feature_map_spec(self, k: int) -> FeatureMapSpec:
        if not self.is_quantum:
            raise ValueError(f"{self.family} is not a quantum feature map")
        return FeatureMapSpec(self.family, k, self.reps, self.theta)

    def label(self) -> str:
        suffix = ""
        if self.is_quantum:
            suffix = "+qkt" if self.qkt else ("+noisy" if self.pathway == "noisy" else "")
        return f"{self.family}{suffix}"

    def canonical_dict(self) -> dict:
        return {
            "family": self.family,
            "reps": self.reps,
            "pathway": self.pathway,
            "noise": self.noise.canonical_dict(),
            "qkt": self.qkt,
            "theta": None if self.theta is None else list(self.theta),
        }


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    dataset: dict
    pipeline: PipelineSpec
    kernel: KernelConfig
    n_outer: int = 5
    n_inner: int = 3
    c_grid: tuple[float, ...] = DEFAULT_C_GRID
    seed: int = 42
    mode: str = "cv"
    fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    sweep_seeds: tuple[int, ...] = DEFAULT_SWEEP_SEEDS

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if not self.c_grid:
            raise ValueError("empty C grid")
        if any(c <= 0 for c in self.c_grid):
            raise ValueError("C values must be positive")

    def canonical_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "pipeline": self.pipeline.canonical_dict(),
            "kernel": self.kernel.canonical_dict(),
            "cv": {"n_outer": self.n_outer, "n_inner": self.n_inner,
                   "c_grid": list(self.c_grid), "seed": self.seed},
            "mode": self.mode,
            "fractions": list(self.fractions) if self.mode == "learning" else None,
            "sweep_seeds": list(self.sweep_seeds) if self.mode == "seeds" else None,
        }

    def config_hash(self) -> str:
        return content_hash(self.canonical_dict())


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = val
    return out


def experiment_from_dict(raw: dict, default_name: str = "experiment") -> ExperimentConfig:
    if "dataset" not in raw:
        raise ValueError("config is missing the 'dataset' section")
    if "kernel" not in raw:
        raise ValueError("config is missing the 'kernel' section")
    pipeline_raw = raw.get("pipeline", {"reducer": "pca", "k": 2})
    kernel_raw = dict(raw["kernel"])
    noise_raw = kernel_raw.pop("noise", {}) or {}
    kernel = KernelConfig(
        family=kernel_raw["family"],
        reps=int(kernel_raw.get("reps", 2)),
        pathway=kernel_raw.get("pathway", "ideal"),
        noise=NoiseModel(float(noise_raw.get("p1q", 0.0)),
                         float(noise_raw.get("p2q", 0.0))),
        qkt=bool(kernel_raw.get("qkt", False)),
        theta=kernel_raw.get("theta"),
    )
    cv = raw.get("cv", {}) or {}
    return ExperimentConfig(
        name=str(raw.get("name", default_name)),
        dataset=dict(raw["dataset"]),
        pipeline=PipelineSpec(pipeline_raw["reducer"], int(pipeline_raw["k"])),
        kernel=kernel,
        n_outer=int(cv.get("n_outer", 5)),
        n_inner=int(cv.get("n_inner", 3)),
        c_grid=tuple(float(c) for c in cv.get("c_grid", DEFAULT_C_GRID)),
        seed=int(cv.get("seed", 42)),
        mode=str(raw.get("mode", "cv")),
        fractions=tuple(float(f) for f in raw.get("fractions", DEFAULT_FRACTIONS)),
        sweep_seeds=tuple(int(s) for s in raw.get("sweep_seeds", DEFAULT_SWEEP_SEEDS)),
    )


def load_config(path) -> list[ExperimentConfig]:
    """Parse a YAML config file into a list of experiments."""
    path = Path(path)
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: top level must be a mapping")
    if "experiments" in raw:
        defaults = raw.get("defaults", {}) or {}
        experiments = raw["experiments"]
        if not isinstance(experiments, list) or not experiments:
            raise ValueError(f"{path}: 'experiments' must be a non-empty list")
        return [experiment_from_dict(_deep_merge(defaults, e), f"experiment-{i}")
                for i, e in enumerate(experiments)]
    return [experiment_from_dict(raw, path.stem)]
