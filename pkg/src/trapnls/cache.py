"""Little-endian binary records: interaction tensors (RCT1), profiles (PRF1), mixed fields (MXF1).

Every record starts with a 4-byte magic, a u32 format version, u32 d and
u32 n_max.  Writes go to a temporary file in the target directory and are
renamed into place so a failed run never leaves a truncated file behind.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import CacheFormatError, ValidationError
from .hermite import BasisSpec, HermiteBasis

VERSION = 1
_HEAD = struct.Struct("<4sIII")


def atomic_write(path, data: bytes) -> None:
    """Write ``data`` to ``path`` via a sibling temp file and ``os.replace``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_header(buf: bytes, magic: bytes):
    if len(buf) < _HEAD.size:
        raise CacheFormatError(f"file too short for a {magic.decode()} header")
    got, version, d, n_max = _HEAD.unpack_from(buf)
    if got != magic:
        raise CacheFormatError(f"bad magic {got!r}, expected {magic!r}")
    if version != VERSION:
        raise CacheFormatError(f"unsupported {magic.decode()} version {version} (reader is {VERSION})")
    return d, n_max, _HEAD.size


def _entry_dtype(d: int) -> np.dtype:
    return np.dtype([("idx", "<u2", (4 * d,)), ("val", "<f8")])


# -- RCT1 -------------------------------------------------------------------

def encode_tensor(tensor) -> bytes:
    basis = tensor.basis
    d = basis.d
    rec = np.empty(tensor.count, dtype=_entry_dtype(d))
    rec["idx"] = tensor.multi_indices().reshape(tensor.count, 4 * d)
    rec["val"] = tensor.values
    head = _HEAD.pack(b"RCT1", VERSION, d, basis.n_max) + struct.pack("<Q", tensor.count)
    return head + rec.tobytes()


def save_tensor(tensor, path) -> None:
    atomic_write(path, encode_tensor(tensor))


def read_tensor_header(path) -> dict:
    with open(path, "rb") as fh:
        buf = fh.read(_HEAD.size + 8)
    d, n_max, off = _read_header(buf, b"RCT1")
    if len(buf) < off + 8:
        raise CacheFormatError("truncated RCT1 header")
    (count,) = struct.unpack_from("<Q", buf, off)
    return {"magic": "RCT1", "version": VERSION, "d": d, "n_max": n_max, "count": count,
            "size": os.path.getsize(path)}


def load_tensor(path, basis: HermiteBasis | None = None):
    """Read an RCT1 file.  If ``basis`` is given its d and n_max must match."""
    from .resonant import InteractionTensor

    buf = Path(path).read_bytes()
    d, n_max, off = _read_header(buf, b"RCT1")
    if len(buf) < off + 8:
        raise CacheFormatError("truncated RCT1 header")
    (count,) = struct.unpack_from("<Q", buf, off)
    off += 8
    dt = _entry_dtype(d)
    if len(buf) != off + count * dt.itemsize:
        raise CacheFormatError(
            f"RCT1 payload is {len(buf) - off} bytes, header promises {count} entries"
        )
    if basis is None:
        basis = HermiteBasis(BasisSpec(d, n_max, 2 * n_max + 1))
    elif (basis.d, basis.n_max) != (d, n_max):
        raise ValidationError(
            f"cache holds d={d}, n_max={n_max}; requested d={basis.d}, n_max={basis.n_max}"
        )
    rec = np.frombuffer(buf, dtype=dt, count=count, offset=off)
    idx = rec["idx"].reshape(count, 4, d).astype(np.int64)
    flat = np.ravel_multi_index(tuple(np.moveaxis(idx, -1, 0)), (n_max + 1,) * d)
    lookup = np.full((n_max + 1) ** d, -1, dtype=np.int64)
    lookup[basis._flat] = np.arange(basis.n_modes)
    index = lookup[flat]
    if np.any(index < 0):
        raise CacheFormatError("RCT1 entry references a mode outside the basis")
    return InteractionTensor(basis, index, rec["val"].astype(float))


# -- PRF1 / MXF1 ------------------------------------------------------------

def save_profile(path, d: int, n_max: int, dxi: float, tau: float, coeffs: np.ndarray) -> None:
    """PRF1: header, u64 M_xi, u64 n_modes, f64 dxi, f64 tau, complex128[M_xi, n_modes]."""
    coeffs = np.ascontiguousarray(coeffs, dtype="<c16")
    m, k = coeffs.shape
    head = _HEAD.pack(b"PRF1", VERSION, d, n_max) + struct.pack("<QQdd", m, k, dxi, tau)
    atomic_write(path, head + coeffs.tobytes())


def load_profile(path) -> dict:
    buf = Path(path).read_bytes()
    d, n_max, off = _read_header(buf, b"PRF1")
    if len(buf) < off + 32:
        raise CacheFormatError("truncated PRF1 header")
    m, k, dxi, tau = struct.unpack_from("<QQdd", buf, off)
    off += 32
    if len(buf) != off + 16 * m * k:
        raise CacheFormatError("PRF1 payload size does not match its header")
    data = np.frombuffer(buf, dtype="<c16", offset=off).reshape(m, k).astype(complex)
    return {"d": d, "n_max": n_max, "dxi": dxi, "tau": tau, "coeffs": data}


def save_mixed(path, d: int, n_max: int, L_x: float, t: float, coeffs: np.ndarray) -> None:
    """MXF1: header, u64 N_x, u64 n_modes, f64 L_x, f64 t, complex128[N_x, n_modes] (physical x)."""
    coeffs = np.ascontiguousarray(coeffs, dtype="<c16")
    nx, k = coeffs.shape
    head = _HEAD.pack(b"MXF1", VERSION, d, n_max) + struct.pack("<QQdd", nx, k, L_x, t)
    atomic_write(path, head + coeffs.tobytes())


def load_mixed(path) -> dict:
    buf = Path(path).read_bytes()
    d, n_max, off = _read_header(buf, b"MXF1")
    if len(buf) < off + 32:
        raise CacheFormatError("truncated MXF1 header")
    nx, k, L_x, t = struct.unpack_from("<QQdd", buf, off)
    off += 32
    if len(buf) != off + 16 * nx * k:
        raise CacheFormatError("MXF1 payload size does not match its header")
    data = np.frombuffer(buf, dtype="<c16", offset=off).reshape(nx, k).astype(complex)
    return {"d": d, "n_max": n_max, "L_x": L_x, "t": t, "coeffs": data}
