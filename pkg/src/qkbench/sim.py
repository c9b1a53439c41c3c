"""Exact statevector and density-matrix simulation with depolarising noise.

Qubit ordering is little-endian: qubit 0 toggles the least significant bit of
the basis-state index. Gates are applied in place over index strides; no
2^n x 2^n circuit matrix is ever materialised.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, Gate

STATEVECTOR_QUBIT_CAP = 16
DENSITY_QUBIT_CAP = 10

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class Statevector:
    n_qubits: int
    amplitudes: np.ndarray

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class DensityMatrix:
    n_qubits: int
    entries: np.ndarray

    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def purity(self) -> float:
        return float(np.sum(self.entries * self.entries.T).real)


@dataclass(frozen=True)
class NoiseModel:
    """Depolarising rates; p is the probability of full replacement of the
    touched qubits by the maximally mixed state (one of several equivalent
    parameterisations)."""

    p1q: float = 0.0
    p2q: float = 0.0

    def __post_init__(self):
        for name, p in (("p1q", self.p1q), ("p2q", self.p2q)):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")

    @property
    def is_noiseless(self) -> bool:
        return self.p1q == 0.0 and self.p2q == 0.0

    def canonical_dict(self) -> dict:
        return {"p1q": float(self.p1q), "p2q": float(self.p2q)}


def gate_matrix(g: Gate) -> np.ndarray:
    """2x2 (or 4x4 for CX) unitary of a gate, little-endian convention."""
    a = g.angle
    if g.kind == "RX":
        c, s = math.cos(a / 2), math.sin(a / 2)
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if g.kind == "RY":
        c, s = math.cos(a / 2), math.sin(a / 2)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if g.kind == "RZ":
        return np.array([[np.exp(-0.5j * a), 0], [0, np.exp(0.5j * a)]], dtype=complex)
    if g.kind == "SX":
        return 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex)
    if g.kind == "X":
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if g.kind == "H":
        return _INV_SQRT2 * np.array([[1, 1], [1, -1]], dtype=complex)
    if g.kind == "CX":
        # basis order |target, control>? -- not used; CX is applied by index flips
        m = np.eye(4, dtype=complex)
        m[[2, 3]] = m[[3, 2]]
        return m
    raise ValueError(f"no matrix for gate kind {g.kind!r}")


def _apply_1q(psi: np.ndarray, u: np.ndarray, q: int, n: int) -> np.ndarray:
    view = psi.reshape(2 ** (n - 1 - q), 2, 2**q)
    a, b = view[:, 0, :].copy(), view[:, 1, :]
    view[:, 0, :] = u[0, 0] * a + u[0, 1] * b
    view[:, 1, :] = u[1, 0] * a + u[1, 1] * b
    return psi


def _apply_cx(psi: np.ndarray, control: int, target: int, n: int) -> np.ndarray:
    view = psi.reshape([2] * n)
    idx = [slice(None)] * n
    idx[n - 1 - control] = 1
    sub = view[tuple(idx)]
    t_axis = n - 1 - target
    if n - 1 - control < t_axis:
        t_axis -= 1
    sub[...] = np.flip(sub, axis=t_axis).copy()
    return psi


def _apply_gate_state(psi: np.ndarray, g: Gate, n: int) -> np.ndarray:
    if g.kind == "CX":
        return _apply_cx(psi, g.qubits[0], g.qubits[1], n)
    return _apply_1q(psi, gate_matrix(g), g.qubits[0], n)


def run_statevector(c: Circuit, initial: Statevector | None = None,
                    qubit_cap: int = STATEVECTOR_QUBIT_CAP) -> Statevector:
    """Apply the circuit to |0...0> (or to ``initial``) and return the state."""
    if c.n_qubits > qubit_cap:
        raise ValueError(f"circuit width {c.n_qubits} exceeds statevector cap {qubit_cap}")
    if initial is None:
        psi = np.zeros(2**c.n_qubits, dtype=complex)
        psi[0] = 1.0
    else:
        if initial.n_qubits != c.n_qubits:
            raise ValueError("initial state width mismatch")
        psi = initial.amplitudes.astype(complex).copy()
    for g in c.gates:
        psi = _apply_gate_state(psi, g, c.n_qubits)
    return Statevector(c.n_qubits, psi)


def _apply_gate_density(rho: np.ndarray, g: Gate, n: int) -> np.ndarray:
    # rho viewed as a 2n-qubit vector: row qubits act like a ket, column
    # qubits evolve with the conjugate gate.
    flat = rho.reshape(-1)
    if g.kind == "CX":
        ctl, tgt = g.qubits
        _apply_cx(flat, ctl + n, tgt + n, 2 * n)
        _apply_cx(flat, ctl, tgt, 2 * n)
    else:
        u = gate_matrix(g)
        q = g.qubits[0]
        _apply_1q(flat, u, q + n, 2 * n)
        _apply_1q(flat, u.conj(), q, 2 * n)
    return flat.reshape(rho.shape)


def _depolarize(rho: np.ndarray, qubits: tuple[int, ...], p: float, n: int) -> np.ndarray:
    """rho <- (1-p) rho + p (I/2^m on `qubits`) (x) Tr_qubits(rho)."""
    if p == 0.0:
        return rho
    m = len(qubits)
    tensor = rho.reshape([2] * (2 * n))
    # axis layout: row axes 0..n-1 hold qubits n-1..0, column axes likewise
    row_ax = [n - 1 - q for q in qubits]
    col_ax = [2 * n - 1 - q for q in qubits]
    reduced = tensor
    remaining = list(zip(row_ax, col_ax))
    while remaining:
        ra, ca = remaining.pop()
        reduced = np.trace(reduced, axis1=ra, axis2=ca)
        # each trace removes two axes; reindex the pairs still pending
        remaining = [(r - (r > ra) - (r > ca), c - (c > ra) - (c > ca))
                     for r, c in remaining]
    mixed = np.zeros_like(tensor)
    scale = 1.0 / 2**m
    for bits in range(2**m):
        idx = [slice(None)] * (2 * n)
        for t, (ra, ca) in enumerate(zip(row_ax, col_ax)):
            b = (bits >> t) & 1
            idx[ra] = b
            idx[ca] = b
        mixed[tuple(idx)] = scale * reduced
    out = (1.0 - p) * tensor + p * mixed
    return out.reshape(rho.shape)


def run_density(c: Circuit, noise: NoiseModel,
                qubit_cap: int = DENSITY_QUBIT_CAP) -> DensityMatrix:
    """Evolve |0><0| through the circuit, depolarising after every gate
    (including RZ) on the qubits that gate touches."""
    if c.n_qubits > qubit_cap:
        raise ValueError(f"circuit width {c.n_qubits} exceeds density cap {qubit_cap}")
    dim = 2**c.n_qubits
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    for g in c.gates:
        rho = _apply_gate_density(rho, g, c.n_qubits)
        p = noise.p2q if len(g.qubits) == 2 else noise.p1q
        if p > 0.0:
            rho = _depolarize(rho, g.qubits, p, c.n_qubits)
    return DensityMatrix(c.n_qubits, rho)
