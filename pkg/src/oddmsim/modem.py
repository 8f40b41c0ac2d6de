"""Discrete modulation path between the delay-Doppler grid and the staggered
time-domain blocks, plus the unitary DFT helpers used by the detector.

The transform is a normalized N-point IDFT applied along the Doppler axis of
each delay row; block n of the time-domain signal is column n of the result.
Both directions are unitary, so symbol energies are preserved across domains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ZP_TOL = 0.0  # zero-padding rows must be exactly zero


@dataclass
class DdGrid:
    """M x N delay-Doppler grid whose last `zp_len` delay rows are null."""

    values: np.ndarray
    zp_len: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim != 2:
            raise ValueError("grid must be 2-D (delay x Doppler)")
        if not (0 <= self.zp_len < self.values.shape[0]):
            raise ValueError("zp_len out of range")
        if self.zp_len and np.any(self.values[-self.zp_len :, :] != 0):
            raise ValueError("zero-padding rows must be exactly zero")

    @classmethod
    def from_data(cls, data_rows: np.ndarray, zp_len: int) -> "DdGrid":
        data_rows = np.asarray(data_rows, dtype=complex)
        m_data, n = data_rows.shape
        full = np.zeros((m_data + zp_len, n), dtype=complex)
        full[:m_data, :] = data_rows
        return cls(full, zp_len)

    @property
    def data(self) -> np.ndarray:
        m = self.values.shape[0] - self.zp_len
        return self.values[:m, :]


def dft_row(v: np.ndarray, n: int | None = None) -> np.ndarray:
    """Normalized N-point DFT along the last axis."""
    v = np.asarray(v, dtype=complex)
    size = v.shape[-1] if n is None else n
    if v.shape[-1] != size:
        raise ValueError(f"length {v.shape[-1]} != {size}")
    return np.fft.fft(v, axis=-1) / np.sqrt(size)


def idft_row(v: np.ndarray, n: int | None = None) -> np.ndarray:
    """Normalized N-point inverse DFT along the last axis."""
    v = np.asarray(v, dtype=complex)
    size = v.shape[-1] if n is None else n
    if v.shape[-1] != size:
        raise ValueError(f"length {v.shape[-1]} != {size}")
    return np.fft.ifft(v, axis=-1) * np.sqrt(size)


def modulate(grid: DdGrid) -> np.ndarray:
    """DD grid -> N time-domain blocks, returned as an (N, M) array.

    Row n of the output is the n-th length-M staggered block; its last
    zp_len samples stay exactly zero because the IDFT acts per delay row.
    """
    s = idft_row(grid.values)  # (M, N): per-row IDFT over Doppler
    return np.ascontiguousarray(s.T)


def demodulate(blocks: np.ndarray, zp_len: int = 0) -> DdGrid:
    """Inverse of :func:`modulate`: (N, M) blocks -> DD grid."""
    blocks = np.asarray(blocks, dtype=complex)
    x = dft_row(blocks.T)
    if zp_len:
        x = x.copy()
        x[-zp_len:, :] = 0.0
    return DdGrid(x, zp_len)
