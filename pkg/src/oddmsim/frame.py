"""Frame geometry, Gray-labeled QAM constellations, interleaving, and the
bit/LLR/soft-symbol conversions shared by every other module.

Conventions used throughout the package:
  * LLR sign: L > 0 means the bit is more likely 0.
  * Constellations are normalized to unit average symbol energy (E_s = 1).
  * The all-zeros label maps to the most positive amplitude on each axis,
    so an all-zeros codeword maps BPSK to +1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Saturation applied to LLRs before any tanh-based conversion.
LLR_CLAMP = 30.0
# Floor for posterior variances (keeps downstream divisions finite).
VAR_FLOOR = 1e-12

SUPPORTED_ORDERS = (2, 4, 16, 64)


@dataclass(frozen=True)
class FrameConfig:
    """Zero-padded delay-Doppler frame geometry.

    M delay bins by N Doppler bins; the last `L` delay rows carry null
    symbols so consecutive time-domain blocks do not interfere.
    """

    M: int
    N: int
    L: int
    delta_f: float = 15e3
    carrier_hz: float = 4e9
    mod_order: int = 4

    def __post_init__(self):
        if not (self.M > self.L >= 0):
            raise ValueError(f"need M > L >= 0, got M={self.M}, L={self.L}")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.mod_order not in SUPPORTED_ORDERS:
            raise ValueError(f"mod_order must be one of {SUPPORTED_ORDERS}")
        if self.delta_f <= 0:
            raise ValueError("delta_f must be positive")

    @property
    def T(self) -> float:
        """Multicarrier symbol interval in seconds (T * delta_f = 1)."""
        return 1.0 / self.delta_f

    @property
    def n_data_rows(self) -> int:
        return self.M - self.L

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.mod_order))

    @property
    def bits_per_row(self) -> int:
        return self.N * self.bits_per_symbol

    @property
    def bits_per_frame(self) -> int:
        return self.n_data_rows * self.bits_per_row


def _gray_pam(bits_per_axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Gray-labeled PAM amplitudes.

    Returns (amplitudes, labels): position i from the most positive level
    carries the Gray label i ^ (i >> 1), so adjacent levels differ in one bit
    and label 0...0 sits at the most positive amplitude.
    """
    n = 1 << bits_per_axis
    amps = np.arange(n - 1, -n, -2, dtype=float)
    amp_of_label = np.empty(n)
    for i in range(n):
        amp_of_label[i ^ (i >> 1)] = amps[i]
    labels = np.arange(n)
    return amp_of_label[labels], labels


class QamConstellation:
    """Unit-energy square QAM (or BPSK) with axis-separable Gray labeling.

    points[s] is the symbol whose bit label is the binary expansion of s,
    MSB first, I-axis bits before Q-axis bits.
    """

    def __init__(self, order: int):
        if order not in SUPPORTED_ORDERS:
            raise ValueError(f"order must be one of {SUPPORTED_ORDERS}")
        self.order = order
        self.bits_per_symbol = int(np.log2(order))

        if order == 2:
            raw = np.array([1.0 + 0j, -1.0 + 0j])
        else:
            half = self.bits_per_symbol // 2
            amp, _ = _gray_pam(half)
            n_ax = 1 << half
            # label = (i_label << half) | q_label
            i_idx, q_idx = np.divmod(np.arange(order), n_ax)
            raw = amp[i_idx] + 1j * amp[q_idx]
        scale = np.sqrt(np.mean(np.abs(raw) ** 2))
        self.points = raw / scale
        self.energy = float(np.mean(np.abs(self.points) ** 2))

        b = self.bits_per_symbol
        self.labels = (
            (np.arange(order)[:, None] >> np.arange(b - 1, -1, -1)) & 1
        ).astype(np.int8)
        # labels_pm[s, p] = +1 if bit p of symbol s is 0, else -1
        self.labels_pm = 1.0 - 2.0 * self.labels
        # bit0_mask[p, s]: symbol s has bit p equal to 0
        self.bit0_mask = (self.labels.T == 0)

    def bit_sets(self, p: int) -> tuple[np.ndarray, np.ndarray]:
        """Constellation subsets (Q_0^p, Q_1^p) for bit position p."""
        mask = self.bit0_mask[p]
        return self.points[mask], self.points[~mask]

    def __repr__(self):
        return f"QamConstellation(order={self.order})"


def map_bits_to_symbols(bits: np.ndarray, const: QamConstellation) -> np.ndarray:
    """Gray-map a bit sequence onto constellation symbols."""
    bits = np.asarray(bits)
    b = const.bits_per_symbol
    if bits.size % b:
        raise ValueError(f"bit count {bits.size} not divisible by {b}")
    groups = bits.reshape(-1, b).astype(np.int64)
    idx = groups @ (1 << np.arange(b - 1, -1, -1))
    return const.points[idx]


def hard_demap(symbols: np.ndarray, const: QamConstellation) -> np.ndarray:
    """Nearest-point hard decisions; returns the bit sequence."""
    symbols = np.asarray(symbols).ravel()
    d2 = np.abs(symbols[:, None] - const.points[None, :]) ** 2
    idx = d2.argmin(axis=1)
    return const.labels[idx].ravel().astype(np.int8)


def soft_symbol_from_llrs(
    llrs: np.ndarray, const: QamConstellation
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior symbol mean and variance from per-bit LLRs.

    For each symbol, Pr(q) = prod_p (1 + d_p tanh(L_p / 2)) / 2 with
    d_p = +1 when the p-th bit of q's label is 0.  Input shape (..., b);
    outputs have shape (...).  Variances are clamped to [VAR_FLOOR, E_s].
    """
    llrs = np.clip(np.asarray(llrs, dtype=float), -LLR_CLAMP, LLR_CLAMP)
    t = np.tanh(llrs / 2.0)
    # (..., 1, b) against (Q, b) -> probabilities (..., Q)
    probs = np.prod(0.5 * (1.0 + const.labels_pm * t[..., None, :]), axis=-1)
    mean = probs @ const.points
    e2 = probs @ (np.abs(const.points) ** 2)
    var = np.clip(e2 - np.abs(mean) ** 2, VAR_FLOOR, const.energy)
    return mean, var


def symbol_log_priors(llrs: np.ndarray, const: QamConstellation) -> np.ndarray:
    """Per-symbol log prior pmf implied by per-bit LLRs; shape (..., Q)."""
    llrs = np.clip(np.asarray(llrs, dtype=float), -LLR_CLAMP, LLR_CLAMP)
    t = np.tanh(llrs / 2.0)
    p_bit = 0.5 * (1.0 + const.labels_pm * t[..., None, :])
    return np.sum(np.log(np.maximum(p_bit, 1e-300)), axis=-1)


def llrs_to_bits(llrs: np.ndarray) -> np.ndarray:
    """Hard decisions from LLRs (L >= 0 -> bit 0)."""
    return (np.asarray(llrs) < 0).astype(np.int8)


@dataclass
class SoftSymbolVector:
    """Per-symbol posterior means and variances (in units of E_s)."""

    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=complex)
        self.variances = np.asarray(self.variances, dtype=float)
        if self.means.shape != self.variances.shape:
            raise ValueError("means and variances must have the same shape")
        if np.any(self.variances < 0):
            raise ValueError("variances must be nonnegative")


class Interleaver:
    """Seeded Fisher-Yates permutation of a fixed length."""

    def __init__(self, permutation: np.ndarray, seed: int | None = None):
        permutation = np.asarray(permutation, dtype=np.int64)
        n = permutation.size
        if not np.array_equal(np.sort(permutation), np.arange(n)):
            raise ValueError("not a permutation")
        self.permutation = permutation
        self.seed = seed
        self._inverse = np.empty(n, dtype=np.int64)
        self._inverse[permutation] = np.arange(n)

    @classmethod
    def random(cls, n: int, seed: int) -> "Interleaver":
        rng = np.random.default_rng(seed)
        return cls(rng.permutation(n), seed=seed)

    @property
    def size(self) -> int:
        return self.permutation.size

    def interleave(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v)
        if v.shape[-1] != self.size:
            raise ValueError(f"length {v.shape[-1]} != interleaver size {self.size}")
        return v[..., self.permutation]

    def deinterleave(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v)
        if v.shape[-1] != self.size:
            raise ValueError(f"length {v.shape[-1]} != interleaver size {self.size}")
        return v[..., self._inverse]


def row_interleaver_seed(frame_seed: int, row: int) -> int:
    """Per-codeword interleaver seed: frame seed XOR row index."""
    return int(frame_seed) ^ int(row)
