"""Bit-level helpers: Walsh-Hadamard transform and subset XOR tables."""

import numpy as np


def fwht(values):
    """Unnormalized fast Walsh-Hadamard transform along the last axis.

    ``out[..., I] = sum_a (-1)^{popcount(a & I)} values[..., a]``. The last
    axis length must be a power of two.
    """
    out = np.array(values, dtype=float, copy=True)
    size = out.shape[-1]
    if size & (size - 1):
        raise ValueError(f"length {size} is not a power of two")
    lead = out.shape[:-1]
    h = 1
    while h < size:
        view = out.reshape(*lead, size // (2 * h), 2, h)
        a = view[..., 0, :].copy()
        b = view[..., 1, :]
        view[..., 0, :] = a + b
        view[..., 1, :] = a - b
        h *= 2
    return out


def subset_xor_table(rows):
    """XOR of every subcollection of ``rows``.

    ``rows`` has shape (k, n), boolean. Row ``I`` of the result (shape
    (2**k, n)) is the XOR of ``rows[i]`` over the sets ``i`` whose bit is set
    in ``I``, where row ``i`` owns bit ``k - 1 - i`` (row 0 is the most
    significant bit, matching big-endian address order).
    """
    rows = np.asarray(rows, dtype=bool)
    k, n = rows.shape
    table = np.zeros((1, n), dtype=bool)
    for i in range(k - 1, -1, -1):
        table = np.concatenate([table, table ^ rows[i]], axis=0)
    return table


def address_bits(k):
    """Matrix of shape (2**k, k); row ``a`` lists the bits of ``a``, MSB first."""
    a = np.arange(2**k)[:, None]
    shifts = np.arange(k - 1, -1, -1)[None, :]
    return ((a >> shifts) & 1).astype(np.int8)
