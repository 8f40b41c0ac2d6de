"""Delay-Doppler channel realizations and the banded time-domain matrices
they induce on each staggered block.

A realization is a set of P paths (complex gain, integer delay tap, real
Doppler tap).  Because the frame's last L delay rows are null, the N blocks
never interfere and each block n sees its own lower-banded M x M matrix

    [H_n]_{q, q-l_p} += h_p * exp(j 2 pi k_p (n M + q - l_p) / (M N)).

Sampling happens at t = (nM + q) T / M with the Doppler phase referenced to
the path arrival (t - tau_p), which is where the ``q - l_p`` comes from.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChannelRealization:
    """P-path delay-Doppler channel tied to an (M, N) frame geometry."""

    gains: np.ndarray     # complex, unit total power
    delays: np.ndarray    # integer taps, delays[0] == 0
    dopplers: np.ndarray  # real taps in [-k_max, k_max]
    l_max: int
    M: int
    N: int

    def __post_init__(self):
        object.__setattr__(self, "gains", np.asarray(self.gains, dtype=complex))
        object.__setattr__(self, "delays", np.asarray(self.delays, dtype=np.int64))
        object.__setattr__(self, "dopplers", np.asarray(self.dopplers, dtype=float))
        if self.gains.size < 1:
            raise ValueError("need at least one path")
        if np.any(self.delays < 0) or np.any(self.delays > self.l_max):
            raise ValueError("delay taps must lie in [0, l_max]")

    @property
    def n_paths(self) -> int:
        return self.gains.size

    def to_json(self) -> str:
        rec = {
            "l_max": int(self.l_max),
            "M": int(self.M),
            "N": int(self.N),
            "paths": [
                {
                    "gain_re": float(g.real),
                    "gain_im": float(g.imag),
                    "delay_tap": int(l),
                    "doppler_tap": float(k),
                }
                for g, l, k in zip(self.gains, self.delays, self.dopplers)
            ],
        }
        return json.dumps(rec, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ChannelRealization":
        rec = json.loads(text)
        paths = rec["paths"]
        gains = np.array([p["gain_re"] + 1j * p["gain_im"] for p in paths])
        delays = np.array([p["delay_tap"] for p in paths])
        dopplers = np.array([p["doppler_tap"] for p in paths])
        return cls(gains, delays, dopplers, rec["l_max"], rec["M"], rec["N"])


@dataclass
class SubChannel:
    """The (L+1) x (l'+L+1) slice of H_n acting on one target symbol."""

    matrix: np.ndarray
    row_start: int   # first row of the slice inside H_n (= m)
    col_start: int   # first column (= max(m - L, 0))
    target_col: int  # l' = min(m, L): column multiplying the target symbol


def draw_channel(
    rng_seed,
    P: int,
    l_max: int,
    k_max: float,
    dims: tuple[int, int],
) -> ChannelRealization:
    """Random realization: distinct delay taps (tap 0 always present),
    Doppler taps ~ U(-k_max, k_max), complex Gaussian gains normalized to
    unit total power."""
    if P < 1:
        raise ValueError("P must be >= 1")
    if P > l_max + 1:
        raise ValueError(f"cannot place {P} distinct delay taps in [0, {l_max}]")
    M, N = dims
    rng = np.random.default_rng(rng_seed)
    delays = np.concatenate(
        ([0], rng.choice(np.arange(1, l_max + 1), size=P - 1, replace=False))
    ) if P > 1 else np.array([0])
    dopplers = rng.uniform(-k_max, k_max, size=P)
    gains = rng.standard_normal(P) + 1j * rng.standard_normal(P)
    gains /= np.linalg.norm(gains)
    return ChannelRealization(gains, delays, dopplers, l_max, M, N)


def build_block_matrix(ch: ChannelRealization, n: int) -> np.ndarray:
    """Lower-banded M x M time-domain matrix for block n."""
    if not (0 <= n < ch.N):
        raise ValueError(f"block index {n} out of range")
    M, N = ch.M, ch.N
    H = np.zeros((M, M), dtype=complex)
    q = np.arange(M)
    for h, l, k in zip(ch.gains, ch.delays, ch.dopplers):
        rows = q[l:]
        cols = rows - l
        H[rows, cols] += h * np.exp(2j * np.pi * k * (n * M + cols) / (M * N))
    return H


def extract_subchannel(H_n: np.ndarray, m: int, L: int) -> SubChannel:
    """Slice the sub-channel for target symbol s_{n,m} out of H_n."""
    m_lo = max(m - L, 0)
    sub = H_n[m : m + L + 1, m_lo : m + L + 1]
    return SubChannel(
        matrix=np.array(sub),
        row_start=m,
        col_start=m_lo,
        target_col=min(m, L),
    )


def subchannel_stack(ch: ChannelRealization, m: int, L: int) -> np.ndarray:
    """Sub-channel matrices for layer m across all N blocks at once.

    Returns an (N, L+1, W) array with W = min(m, L) + L + 1; entry 0 of the
    column axis corresponds to symbol index max(m - L, 0).  Equivalent to
    extracting extract_subchannel(build_block_matrix(ch, n), m, L) per block
    but O(P L^2) instead of O(M^2) per block.
    """
    M, N = ch.M, ch.N
    m_lo = max(m - L, 0)
    W = m - m_lo + L + 1
    stack = np.zeros((N, L + 1, W), dtype=complex)
    n = np.arange(N)
    cols = np.arange(m_lo, m + L + 1)
    for h, l, k in zip(ch.gains, ch.delays, ch.dopplers):
        rows = cols + l - m  # row index inside the slice for each column
        valid = (rows >= 0) & (rows <= L) & (cols + l < M)
        if not np.any(valid):
            continue
        col_phase = h * np.exp(2j * np.pi * k * cols[valid] / (M * N))
        block_phase = np.exp(2j * np.pi * k * n / N)
        stack[:, rows[valid], np.nonzero(valid)[0]] += (
            block_phase[:, None] * col_phase[None, :]
        )
    return stack


def apply_channel(
    ch: ChannelRealization,
    s_blocks: np.ndarray,
    snr_db: float,
    rng,
    es: float = 1.0,
) -> tuple[np.ndarray, float]:
    """r_n = H_n s_n + z_n for every block; returns (r_blocks, sigma_n^2).

    The noise variance is E_s / 10^(snr_db/10) per complex sample, with E_s
    the nominal energy of a data-bearing sample (1 for the unit-energy
    constellations used here).  Pass snr_db = inf to disable noise.
    """
    s_blocks = np.asarray(s_blocks, dtype=complex)
    N, M = s_blocks.shape
    if (M, N) != (ch.M, ch.N):
        raise ValueError("blocks do not match channel dimensions")
    r = np.zeros_like(s_blocks)
    n = np.arange(N)
    for h, l, k in zip(ch.gains, ch.delays, ch.dopplers):
        src = np.arange(M - l)
        phase = np.exp(2j * np.pi * k * (n[:, None] * M + src[None, :]) / (M * N))
        r[:, l:] += h * phase * s_blocks[:, : M - l]
    if np.isinf(snr_db):
        return r, 0.0
    sigma2 = es / 10.0 ** (snr_db / 10.0)
    noise = rng.standard_normal(r.shape) + 1j * rng.standard_normal(r.shape)
    r += np.sqrt(sigma2 / 2.0) * noise
    return r, sigma2
