"""64-bit FNV-1a content hashing with an optional compiled fast path."""

import numpy as np

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
_MASK64 = (1 << 64) - 1


def _fnv1a64_py(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & _MASK64
    return h


try:  # pragma: no cover - exercised when numba is installed
    from numba import njit

    @njit(cache=True)
    def _fnv1a64_kernel(buf):
        h = np.uint64(FNV_OFFSET)
        p = np.uint64(FNV_PRIME)
        for i in range(buf.shape[0]):
            h = (h ^ np.uint64(buf[i])) * p
        return h

    def fnv1a64(data) -> int:
        """Hash a bytes-like object with 64-bit FNV-1a."""
        buf = np.frombuffer(data, dtype=np.uint8)
        return int(_fnv1a64_kernel(buf))

except ImportError:  # pragma: no cover

    def fnv1a64(data) -> int:
        """Hash a bytes-like object with 64-bit FNV-1a."""
        return _fnv1a64_py(bytes(data))
