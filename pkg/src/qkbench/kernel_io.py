"""Kernel container files and the content-addressed on-disk cache.

Binary container layout (all integers little-endian):

    bytes  0..15   magic: b"QKBKERN1" padded with NUL to 16 bytes
    bytes 16..19   u32 rows
    bytes 20..23   u32 cols
    byte  24       u8 pathway code (0=ideal 1=noisy 2=classical 3=imported)
    bytes 25..40   16-byte config hash (raw digest; zero if unknown)
    bytes 41..     rows*cols float64 values, row-major, IEEE-754 LE

A plain-CSV fallback (no header row, '%.17g' decimals) round-trips float64
exactly and is used by the CLI import/export commands.
"""
from __future__ import annotations

import os
import struct
import time
import warnings
from pathlib import Path
from typing import Optional

import numpy as np

from .kernels import KernelMatrix, Provenance

MAGIC = b"QKBKERN1" + b"\x00" * 8
PATHWAY_CODES = {"ideal": 0, "noisy": 1, "classical": 2, "imported": 3}
CODE_PATHWAYS = {v: k for k, v in PATHWAY_CODES.items()}
_HEADER = struct.Struct("<II B 16s")


class KernelFormatError(ValueError):
    pass


def write_kernel(path, km: KernelMatrix) -> None:
    path = Path(path)
    values = np.ascontiguousarray(km.values, dtype="<f8")
    code = PATHWAY_CODES[km.provenance.pathway]
    spec_hash = bytes.fromhex(km.provenance.spec_hash) if km.provenance.spec_hash else b"\x00" * 16
    if len(spec_hash) != 16:
        raise KernelFormatError("config hash must be 16 bytes (32 hex chars)")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(values.shape[0], values.shape[1], code, spec_hash))
        fh.write(values.tobytes())


def read_kernel(path) -> KernelMatrix:
    """Load a container file; NaN/Inf entries or a bad header are errors.

    Square imported matrices are eigenvalue-checked and flagged (not
    repaired) when indefinite.
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < len(MAGIC) + _HEADER.size:
        raise KernelFormatError(f"{path}: truncated kernel file")
    if raw[: len(MAGIC)] != MAGIC:
        raise KernelFormatError(f"{path}: bad magic")
    rows, cols, code, spec_hash = _HEADER.unpack_from(raw, len(MAGIC))
    if code not in CODE_PATHWAYS:
        raise KernelFormatError(f"{path}: unknown pathway code {code}")
    offset = len(MAGIC) + _HEADER.size
    expected = rows * cols * 8
    if len(raw) - offset != expected:
        raise KernelFormatError(f"{path}: payload size mismatch")
    values = np.frombuffer(raw, dtype="<f8", offset=offset).reshape(rows, cols).copy()
    if not np.all(np.isfinite(values)):
        raise KernelFormatError(f"{path}: non-finite kernel entries")
    prov = Provenance(pathway=CODE_PATHWAYS[code],
                      spec_hash=spec_hash.hex() if spec_hash != b"\x00" * 16 else "",
                      timestamp=time.time())
    km = KernelMatrix(values, prov)
    if rows == cols and rows > 0:
        sym = 0.5 * (values + values.T)
        if np.max(np.abs(values - values.T)) < 1e-6:
            min_eig = float(np.linalg.eigvalsh(sym).min())
            if min_eig < -1e-10:
                prov.indefinite = True
    return km


def import_kernel(path) -> KernelMatrix:
    """Read an externally produced kernel; pathway forced to 'imported'."""
    km = read_kernel(path)
    km.provenance.pathway = "imported"
    return km


def write_kernel_csv(path, km: KernelMatrix) -> None:
    np.savetxt(path, km.values, fmt="%.17g", delimiter=",")


def read_kernel_csv(path, pathway: str = "imported") -> KernelMatrix:
    values = np.loadtxt(path, delimiter=",", ndmin=2)
    if not np.all(np.isfinite(values)):
        raise KernelFormatError(f"{path}: non-finite kernel entries")
    return KernelMatrix(values, Provenance(pathway=pathway, timestamp=time.time()))


class KernelCache:
    """Content-addressed kernel store: one container file per config hash.

    Writers stage to a temp file and atomically rename; corrupt entries are
    treated as misses (with a warning), never as errors.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        if not (len(key) == 32 and all(c in "0123456789abcdef" for c in key)):
            raise ValueError("cache key must be a 32-char lowercase hex hash")
        return self.directory / f"{key}.qkk"

    def get(self, key: str) -> Optional[KernelMatrix]:
        path = self._path(key)
        if not path.exists():
            return None
        try:
            return read_kernel(path)
        except (KernelFormatError, OSError) as exc:
            warnings.warn(f"corrupt kernel cache entry {path.name}: {exc}")
            return None

    def put(self, key: str, km: KernelMatrix) -> None:
        path = self._path(key)
        tmp = path.with_suffix(f".tmp.{os.getpid()}")
        km.provenance.spec_hash = key
        write_kernel(tmp, km)
        os.replace(tmp, path)


def default_cache_dir() -> Path:
    return Path(os.environ.get("QKBENCH_CACHE_DIR", ".qkbench-cache"))
