"""Gate-level circuits and the four data-encoding feature maps.

Circuits are plain gate lists over the abstract set {RX, RY, RZ, SX, X, H, CX}.
``decompose_native`` rewrites them onto the restricted set {RZ, SX, X, CX}
using the ZSXZSX Euler form; no rotation merging is performed afterwards, so
depth counts are a pure function of the gate stream (see ``circuit_metrics``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

ONE_QUBIT_KINDS = frozenset({"RX", "RY", "RZ", "SX", "X", "H"})
TWO_QUBIT_KINDS = frozenset({"CX"})
ROTATION_KINDS = frozenset({"RX", "RY", "RZ"})
NATIVE_KINDS = frozenset({"RZ", "SX", "X", "CX"})

FEATURE_MAP_KINDS = ("rot2dof", "belis", "sakhnenko10", "zzfm")
THETA_BOUNDS = (0.01, 5.0)


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angle: Optional[float] = None

    def __post_init__(self):
        if self.kind in ONE_QUBIT_KINDS:
            if len(self.qubits) != 1:
                raise ValueError(f"{self.kind} acts on exactly one qubit")
        elif self.kind in TWO_QUBIT_KINDS:
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise ValueError(f"{self.kind} needs two distinct qubits")
        else:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind in ROTATION_KINDS:
            if self.angle is None or not math.isfinite(self.angle):
                raise ValueError(f"{self.kind} requires a finite angle")
        elif self.angle is not None:
            raise ValueError(f"{self.kind} takes no angle")


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be >= 1")
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if max(g.qubits) >= self.n_qubits:
                raise ValueError(f"gate {g} exceeds circuit width {self.n_qubits}")

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise ValueError("cannot concatenate circuits of different widths")
        return Circuit(self.n_qubits, self.gates + other.gates)


@dataclass(frozen=True)
class FeatureMapSpec:
    """Which encoding circuit to build: kind, feature count, repetitions and
    optional per-feature scaling vector (box-constrained to [0.01, 5.0])."""

    kind: str
    k: int
    reps: int = 2
    theta: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.kind not in FEATURE_MAP_KINDS:
            raise ValueError(f"unknown feature map kind {self.kind!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.theta is not None:
            theta = tuple(float(t) for t in self.theta)
            object.__setattr__(self, "theta", theta)
            if len(theta) != self.k:
                raise ValueError("theta length must equal k")
            lo, hi = THETA_BOUNDS
            if any(not (lo <= t <= hi) for t in theta):
                raise ValueError(f"theta components must lie in [{lo}, {hi}]")

    @property
    def n_qubits(self) -> int:
        # double-feature encoding packs two features per qubit; zzfm is 1:1
        return self.k if self.kind == "zzfm" else (self.k + 1) // 2

    def with_theta(self, theta) -> "FeatureMapSpec":
        return replace(self, theta=None if theta is None else tuple(theta))

    def canonical_dict(self) -> dict:
        return {
            "kind": self.kind,
            "k": self.k,
            "reps": self.reps,
            "theta": None if self.theta is None else [float(t) for t in self.theta],
        }


@dataclass(frozen=True)
class CircuitMetrics:
    depth: int
    two_qubit_count: int
    gate_slot_count: int
    n_qubits: int


def _rx(q, a):
    return Gate("RX", (q,), float(a))


def _ry(q, a):
    return Gate("RY", (q,), float(a))


def _rz(q, a):
    return Gate("RZ", (q,), float(a))


def build_feature_map(spec: FeatureMapSpec, x: Sequence[float]) -> Circuit:
    """Build the encoding circuit U(x) for one sample.

    Double-feature maps (rot2dof, belis, sakhnenko10) use ceil(k/2) qubits and
    pad odd k with one zero feature; zzfm uses k qubits with the ZZ term on
    each pair (i<j) realised as CX . RZ(2*x_i*x_j) . CX.
    """
    x = [float(v) for v in x]
    if len(x) != spec.k:
        raise ValueError(f"expected {spec.k} features, got {len(x)}")
    if any(not math.isfinite(v) for v in x):
        raise ValueError("features must be finite")
    if spec.theta is not None:
        x = [t * v for t, v in zip(spec.theta, x)]

    gates: list[Gate] = []
    if spec.kind == "zzfm":
        n = spec.k
        for _ in range(spec.reps):
            for q in range(n):
                gates.append(Gate("H", (q,)))
            for i in range(n):
                for j in range(i + 1, n):
                    gates.append(Gate("CX", (i, j)))
                    gates.append(_rz(j, 2.0 * x[i] * x[j]))
                    gates.append(Gate("CX", (i, j)))
        return Circuit(n, gates)

    n = (spec.k + 1) // 2
    xx = x + [0.0] * (2 * n - spec.k)
    if spec.kind == "rot2dof":
        for _ in range(spec.reps):
            for q in range(n):
                gates.append(_rx(q, xx[2 * q]))
                gates.append(_rz(q, xx[2 * q + 1]))
    elif spec.kind == "belis":
        for _ in range(spec.reps):
            for q in range(n):
                gates.append(_rx(q, xx[2 * q]))
                gates.append(_rz(q, xx[2 * q + 1]))
            for q in range(n - 1):
                gates.append(Gate("CX", (q, q + 1)))
            for q in range(n):
                gates.append(_rz(q, xx[2 * q]))
                gates.append(_rx(q, xx[2 * q + 1]))
    elif spec.kind == "sakhnenko10":
        half_pi = math.pi / 2
        for _ in range(spec.reps):
            for q in range(n):
                gates.append(_rx(q, xx[2 * q]))
                gates.append(_ry(q, half_pi))
                gates.append(_rx(q, half_pi))
                gates.append(_rx(q, xx[2 * q + 1]))
            if n >= 2:
                for q in range(n):
                    gates.append(Gate("CX", (q, (q + 1) % n)))
    else:  # pragma: no cover - guarded by FeatureMapSpec
        raise ValueError(f"unknown feature map kind {spec.kind!r}")
    return Circuit(n, gates)


def decompose_native(c: Circuit) -> Circuit:
    """Rewrite onto {RZ, SX, X, CX}, equal to the input up to global phase.

    RX(a) -> RZ(pi/2) SX RZ(a+pi) SX RZ(pi/2)
    RY(a) -> RZ(0)    SX RZ(a+pi) SX RZ(pi)
    H     -> RZ(pi/2) SX RZ(pi/2)

    The RZ(0) of RY is kept: every rotation expands to exactly five native
    gates, which is the accounting the reference depth/slot figures assume.
    No RZ merging is performed anywhere.
    """
    half_pi = math.pi / 2
    out: list[Gate] = []
    for g in c.gates:
        if g.kind in NATIVE_KINDS:
            out.append(g)
            continue
        q = g.qubits[0]
        if g.kind == "RX":
            out += [_rz(q, half_pi), Gate("SX", (q,)), _rz(q, g.angle + math.pi),
                    Gate("SX", (q,)), _rz(q, half_pi)]
        elif g.kind == "RY":
            out += [_rz(q, 0.0), Gate("SX", (q,)), _rz(q, g.angle + math.pi),
                    Gate("SX", (q,)), _rz(q, math.pi)]
        elif g.kind == "H":
            out += [_rz(q, half_pi), Gate("SX", (q,)), _rz(q, half_pi)]
        else:  # pragma: no cover - Gate rejects unknown kinds
            raise ValueError(f"cannot decompose gate kind {g.kind!r}")
    return Circuit(c.n_qubits, out)


def circuit_metrics(c: Circuit) -> CircuitMetrics:
    """ASAP depth over program order (every gate one layer) plus exact counts.

    ``gate_slot_count`` counts angle-carrying rotation gates (RX/RY/RZ).
    """
    last = [0] * c.n_qubits
    for g in c.gates:
        layer = 1 + max(last[q] for q in g.qubits)
        for q in g.qubits:
            last[q] = layer
    return CircuitMetrics(
        depth=max(last) if c.gates else 0,
        two_qubit_count=sum(1 for g in c.gates if len(g.qubits) == 2),
        gate_slot_count=sum(1 for g in c.gates if g.kind in ROTATION_KINDS),
        n_qubits=c.n_qubits,
    )


def adjoint(c: Circuit) -> Circuit:
    """Reverse the gate order and invert each gate (up to global phase).

    SX has no angle to negate; its adjoint is expressed as RZ(pi) SX RZ(pi).
    """
    out: list[Gate] = []
    for g in reversed(c.gates):
        if g.kind in ROTATION_KINDS:
            out.append(Gate(g.kind, g.qubits, -g.angle))
        elif g.kind == "SX":
            q = g.qubits[0]
            out += [_rz(q, math.pi), Gate("SX", (q,)), _rz(q, math.pi)]
        else:
            out.append(g)  # H, X, CX are self-inverse
    return Circuit(c.n_qubits, out)
