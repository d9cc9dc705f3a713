from __future__ import annotations

import math
from typing import Iterable

import numpy as np

# Terms summed naively inside one block of a prefix scan.
BLOCK = 256


def compensated_sum(values: Iterable[complex]) -> complex:
    """Correctly rounded sum of the real and imaginary parts."""
    if not isinstance(values, np.ndarray):
        values = list(values)
    arr = np.asarray(values, dtype=np.complex128).ravel()
    if arr.size == 0:
        return 0j
    return complex(math.fsum(arr.real.tolist()), math.fsum(arr.imag.tolist()))


def _neumaier_exclusive_scan(totals: np.ndarray) -> np.ndarray:
    lead = totals.shape[:-1]
    running = np.zeros(lead, dtype=np.float64)
    carry = np.zeros(lead, dtype=np.float64)
    out = np.empty_like(totals, dtype=np.float64)
    for idx in range(totals.shape[-1]):
        out[..., idx] = running + carry
        value = totals[..., idx]
        updated = running + value
        big = np.abs(running) >= np.abs(value)
        carry += np.where(big, (running - updated) + value, (value - updated) + running)
        running = updated
    return out


def compensated_cumsum(values: np.ndarray, block: int = BLOCK) -> np.ndarray:
    """Prefix sums along the last axis.

    Each block of ``block`` terms is summed directly; the carries between
    blocks are compensated. Output element ``i`` is the sum of elements
    ``0..i`` in order.
    """
    arr = np.asarray(values)
    if np.iscomplexobj(arr):
        return compensated_cumsum(arr.real, block) + 1j * compensated_cumsum(arr.imag, block)
    arr = arr.astype(np.float64, copy=False)
    n = arr.shape[-1]
    if n == 0:
        return arr.copy()
    nblocks = -(-n // block)
    pad = nblocks * block - n
    if pad:
        padding = np.zeros(arr.shape[:-1] + (pad,), dtype=np.float64)
        arr = np.concatenate([arr, padding], axis=-1)
    shaped = arr.reshape(arr.shape[:-1] + (nblocks, block))
    local = np.cumsum(shaped, axis=-1)
    offsets = _neumaier_exclusive_scan(local[..., -1])
    out = local + offsets[..., None]
    return out.reshape(arr.shape[:-1] + (nblocks * block,))[..., :n]
