"""
Float and bit kernels shared by the truth-table builder, the reference forward pass and the
netlist simulator. Every path that evaluates a layer goes through these functions, so the
summation order (and therefore every rounding step) is the same everywhere.

Window bit order
----------------
Binary windows: bit b = t * s_in + i, tap t = 0 is the oldest time step, i the channel inside the group.
Input windows:  bit b = t * b_in + j, bit j of the tap's two's-complement sample, LSB first.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def accumulate(values: np.ndarray, weights, bias: float) -> np.ndarray:
    """
    Weighted sum over the columns of `values` in ascending column order, then `+ bias`.

    Parameters
    ----------
    values : np.ndarray
        (N, n) window values (±1 for binary windows, signed integers for input windows).
    weights : sequence of float
        n weights in window order.
    bias : float
    """
    values = np.asarray(values, dtype=np.float64)
    acc = np.zeros(values.shape[0], dtype=np.float64)
    for j, w in enumerate(weights):
        acc = acc + values[:, j] * float(w)
    return acc + float(bias)


def batchnorm(x: np.ndarray, mu: float, sigma_sq: float, gamma: float, beta: float) -> np.ndarray:
    """bnorm(x) = (x - mu) / sigma_sq * gamma - beta, evaluated in exactly this order."""
    return (np.asarray(x, dtype=np.float64) - float(mu)) / float(sigma_sq) * float(gamma) - float(beta)


def binarize(x: np.ndarray) -> np.ndarray:
    """bin(x) as bits: 1 for x >= 0 (i.e. +1), 0 otherwise (i.e. -1)."""
    return (np.asarray(x) >= 0).astype(np.uint8)


def to_signs(bits: np.ndarray) -> np.ndarray:
    """Bits 0/1 back to -1.0/+1.0."""
    return np.asarray(bits, dtype=np.float64) * 2.0 - 1.0


def sample_range(bits: int) -> tuple[int, int]:
    return -(1 << (bits - 1)), (1 << (bits - 1)) - 1


def twos_complement_bits(samples: np.ndarray, bits: int) -> np.ndarray:
    """(N,) signed integers -> (N, bits) uint8, LSB first."""
    samples = np.asarray(samples, dtype=np.int64) & ((1 << bits) - 1)
    return ((samples[:, None] >> np.arange(bits, dtype=np.int64)) & 1).astype(np.uint8)


def from_twos_complement(bit_matrix: np.ndarray) -> np.ndarray:
    """(N, bits) LSB-first bits -> (N,) signed integers."""
    bit_matrix = np.asarray(bit_matrix, dtype=np.int64)
    bits = bit_matrix.shape[1]
    raw = (bit_matrix << np.arange(bits, dtype=np.int64)).sum(axis=1)
    return np.where(raw >= (1 << (bits - 1)), raw - (1 << bits), raw)


def row_bits(start: int, stop: int, phi: int) -> np.ndarray:
    """Bits of the table indices [start, stop) as a (stop - start, phi) uint8 matrix, bit 0 first."""
    rows = np.arange(start, stop, dtype=np.int64)
    return ((rows[:, None] >> np.arange(phi, dtype=np.int64)) & 1).astype(np.uint8)


def bits_to_index(bit_matrix: np.ndarray) -> np.ndarray:
    """(N, phi) bits -> (N,) table index with bit 0 as the least significant bit."""
    bit_matrix = np.asarray(bit_matrix, dtype=np.int64)
    return (bit_matrix << np.arange(bit_matrix.shape[1], dtype=np.int64)).sum(axis=1)


def binary_windows(stream: np.ndarray, kernel: int) -> np.ndarray:
    """
    Sliding windows over a binary stream.

    Parameters
    ----------
    stream : np.ndarray
        (N, C) bits, one row per time step.
    kernel : int

    Returns
    -------
    np.ndarray
        (N - kernel + 1, kernel * C) bits in window bit order.
    """
    stream = np.asarray(stream, dtype=np.uint8)
    n, channels = stream.shape
    if n < kernel:
        return np.zeros((0, kernel * channels), dtype=np.uint8)
    # sliding_window_view puts the window axis last: (N', C, k) -> (N', k, C)
    view = sliding_window_view(stream, kernel, axis=0).transpose(0, 2, 1)
    return np.ascontiguousarray(view).reshape(n - kernel + 1, kernel * channels)


def sample_windows(samples: np.ndarray, kernel: int) -> np.ndarray:
    """(N,) samples -> (N - kernel + 1, kernel) windows, tap 0 oldest."""
    samples = np.asarray(samples, dtype=np.int64)
    if samples.shape[0] < kernel:
        return np.zeros((0, kernel), dtype=np.int64)
    return np.ascontiguousarray(sliding_window_view(samples, kernel))


def sample_window_bits(samples: np.ndarray, kernel: int, bits: int) -> np.ndarray:
    """(N,) samples -> (N', kernel * bits) window bits, bit t * bits + j."""
    windows = sample_windows(samples, kernel)
    n = windows.shape[0]
    return twos_complement_bits(windows.reshape(-1), bits).reshape(n, kernel * bits)


def decode_sample_window(bit_matrix: np.ndarray, kernel: int, bits: int) -> np.ndarray:
    """Inverse of `sample_window_bits`: (N, kernel * bits) -> (N, kernel) signed integers."""
    n = bit_matrix.shape[0]
    taps = np.asarray(bit_matrix).reshape(n * kernel, bits)
    return from_twos_complement(taps).reshape(n, kernel)


def pool_windows(values: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    """
    (N, C) -> (N_out, kernel, C) pooling windows, N_out = floor((N - kernel) / stride) + 1.
    """
    values = np.asarray(values)
    n = values.shape[0]
    if n < kernel:
        return np.zeros((0, kernel) + values.shape[1:], dtype=values.dtype)
    view = sliding_window_view(values, kernel, axis=0)[::stride]
    return np.moveaxis(view, -1, 1)


def pool_output_length(length: int, kernel: int, stride: int) -> int:
    if length < kernel:
        return 0
    return (length - kernel) // stride + 1
