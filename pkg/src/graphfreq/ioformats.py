"""Bit-exact binary serialization for plans and compressed signals.

Everything is little-endian. Plan files::

    "GFTP" | version u8 | canonical plan body | FNV-1a64(body) u64

The canonical body is defined in transform.encode_plan_body: counts and the
seed as u64, then per level its size triple, aggregate sizes (u8), member
permutation (u32), eigenvalues (f64), and row-major basis matrices (f64).

Compressed payloads have a fixed 38-byte header, so the file size is exactly
``38 + 16 k`` bytes plus ``ceil(selection_bits / 8)`` in adaptive mode::

    "GFTZ" | version u8 | mode u8 | n u64 | k u64 | plan_checksum u64 |
    selection_bit_count u64 | indices u64 * k | values f64 * k |
    packed selection bits
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Optional, Union

import numpy as np

from .bestbasis import (
    adaptive_filter_k,
    reconstruct_from_selection,
    selection_decode,
    selection_encode,
)
from .errors import (
    ChecksumMismatchError,
    FormatError,
    TruncatedPayloadError,
    VersionMismatchError,
)
from .filtering import FilterResult, filter_k
from .hashutil import fnv1a64
from .transform import (
    TransformPlan,
    _apply_inverse,
    decode_plan_body,
    encode_plan_body,
    forward,
)

__all__ = [
    "PLAN_MAGIC",
    "COMPRESSED_MAGIC",
    "FORMAT_VERSION",
    "CompressedSignal",
    "save_plan",
    "load_plan",
    "plan_to_bytes",
    "plan_from_bytes",
    "save_compressed",
    "load_compressed",
    "compressed_to_bytes",
    "compressed_from_bytes",
    "compress_signal",
    "decompress_signal",
    "compressed_size",
]

PLAN_MAGIC = b"GFTP"
COMPRESSED_MAGIC = b"GFTZ"
FORMAT_VERSION = 1
_COMPRESSED_HEADER = 38

Sink = Union[str, Path, BinaryIO]


def _write(sink: Sink, data: bytes) -> None:
    if isinstance(sink, (str, Path)):
        Path(sink).write_bytes(data)
    else:
        sink.write(data)


def _read(source: Sink) -> bytes:
    if isinstance(source, (str, Path)):
        return Path(source).read_bytes()
    return source.read()


def plan_to_bytes(plan: TransformPlan) -> bytes:
    body = encode_plan_body(plan)
    return PLAN_MAGIC + struct.pack("<B", FORMAT_VERSION) + body + struct.pack("<Q", fnv1a64(body))


def plan_from_bytes(data: bytes) -> TransformPlan:
    if len(data) < 5:
        raise TruncatedPayloadError("plan stream shorter than its header")
    if data[:4] != PLAN_MAGIC:
        raise FormatError(f"bad plan magic {data[:4]!r}, expected {PLAN_MAGIC!r}")
    version = data[4]
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"plan format version {version}, this build reads version {FORMAT_VERSION}"
        )
    if len(data) < 13:
        raise TruncatedPayloadError("plan stream ends inside the checksum trailer")
    body = data[5:-8]
    (stored,) = struct.unpack("<Q", data[-8:])
    actual = fnv1a64(body)
    if stored != actual:
        raise ChecksumMismatchError(
            f"plan checksum mismatch: stored {stored:016x}, computed {actual:016x}"
        )
    return decode_plan_body(body)


def save_plan(plan: TransformPlan, sink: Sink) -> None:
    _write(sink, plan_to_bytes(plan))


def load_plan(source: Sink) -> TransformPlan:
    return plan_from_bytes(_read(source))


@dataclass(frozen=True)
class CompressedSignal:
    """k kept frequency coefficients of one signal, bound to a plan."""

    n: int
    k: int
    adaptive: bool
    plan_checksum: int
    indices: np.ndarray          # u64, strictly ascending, < n
    values: np.ndarray           # f64, same order as indices
    selection_bits: Optional[bytes] = None   # encoded selection, adaptive only


def compressed_size(k: int, selection_bits: Optional[bytes] = None) -> int:
    """Exact byte size of a serialized payload."""
    return _COMPRESSED_HEADER + 16 * k + (len(selection_bits) if selection_bits else 0)


def compressed_to_bytes(cs: CompressedSignal) -> bytes:
    sel = cs.selection_bits if cs.adaptive else None
    nbits = 8 * len(sel) if sel else 0
    out = bytearray()
    out += COMPRESSED_MAGIC
    out += struct.pack("<BB", FORMAT_VERSION, 1 if cs.adaptive else 0)
    out += struct.pack("<QQQQ", cs.n, cs.k, cs.plan_checksum, nbits)
    out += np.asarray(cs.indices, dtype="<u8").tobytes()
    out += np.asarray(cs.values, dtype="<f8").tobytes()
    if sel:
        out += sel
    return bytes(out)


def compressed_from_bytes(data: bytes) -> CompressedSignal:
    if len(data) < _COMPRESSED_HEADER:
        raise TruncatedPayloadError("compressed stream shorter than its header")
    if data[:4] != COMPRESSED_MAGIC:
        raise FormatError(f"bad payload magic {data[:4]!r}, expected {COMPRESSED_MAGIC!r}")
    version, mode = struct.unpack("<BB", data[4:6])
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"payload format version {version}, this build reads version {FORMAT_VERSION}"
        )
    if mode not in (0, 1):
        raise FormatError(f"unknown payload mode byte {mode}")
    n, k, plan_checksum, nbits = struct.unpack("<QQQQ", data[6:38])
    need = _COMPRESSED_HEADER + 16 * k + (nbits + 7) // 8
    if len(data) < need:
        raise TruncatedPayloadError(f"payload needs {need} bytes, stream has {len(data)}")
    if len(data) > need:
        raise FormatError(f"{len(data) - need} trailing bytes after payload")
    pos = _COMPRESSED_HEADER
    indices = np.frombuffer(data[pos:pos + 8 * k], dtype="<u8").copy()
    pos += 8 * k
    values = np.frombuffer(data[pos:pos + 8 * k], dtype="<f8").copy()
    pos += 8 * k
    sel = data[pos:] if mode == 1 else None
    if mode == 1 and nbits == 0:
        raise FormatError("adaptive payload carries no selection bits")
    if k and (np.any(indices >= n) or np.any(np.diff(indices.astype(np.int64)) <= 0)):
        raise FormatError("payload indices must be strictly ascending and < n")
    return CompressedSignal(
        n=int(n), k=int(k), adaptive=mode == 1, plan_checksum=int(plan_checksum),
        indices=indices, values=values, selection_bits=sel,
    )


def save_compressed(cs: CompressedSignal, sink: Sink) -> None:
    _write(sink, compressed_to_bytes(cs))


def load_compressed(source: Sink) -> CompressedSignal:
    return compressed_from_bytes(_read(source))


def compress_signal(plan: TransformPlan, u, k: int,
                    adaptive: bool = False) -> tuple[CompressedSignal, FilterResult]:
    """Filter a signal to k coefficients and package the kept support."""
    if adaptive:
        res = adaptive_filter_k(plan, u, k)
        base = FilterResult(
            filtered_signal=res.filtered_signal, support=res.support,
            kept_energy=res.kept_energy, residual_energy=res.residual_energy,
            relative_error=res.relative_error,
        )
        cs = CompressedSignal(
            n=plan.n, k=len(res.support), adaptive=True, plan_checksum=plan.checksum,
            indices=res.support.astype(np.uint64),
            values=res.coefficients[res.support],
            selection_bits=selection_encode(res.selection),
        )
        return cs, base
    res = filter_k(plan, u, k)
    coeffs = forward(plan, u).coefficients
    cs = CompressedSignal(
        n=plan.n, k=len(res.support), adaptive=False, plan_checksum=plan.checksum,
        indices=res.support.astype(np.uint64), values=coeffs[res.support],
        selection_bits=None,
    )
    return cs, res


def decompress_signal(plan: TransformPlan, cs: CompressedSignal) -> np.ndarray:
    """Reconstruct the filtered signal; refuses payloads bound to another plan."""
    if cs.plan_checksum != plan.checksum:
        raise ChecksumMismatchError(
            f"payload bound to plan {cs.plan_checksum:016x}, this plan is {plan.checksum:016x}"
        )
    if cs.n != plan.n:
        raise FormatError(f"payload length {cs.n} does not match plan n={plan.n}")
    kept = np.zeros(plan.n)
    kept[cs.indices.astype(np.int64)] = cs.values
    if cs.adaptive:
        sel = selection_decode(cs.selection_bits, plan)
        return reconstruct_from_selection(plan, sel, kept)
    return _apply_inverse(plan, kept[None, :])[0]
