"""Iterative cross-domain SIC-MMSE detection.

Per symbol layer m and block n the detector (i) soft-cancels interference
from the received window using the current soft estimates, (ii) applies a
per-layer MMSE filter built from the sub-channel and the residual
interference variances, and (iii) normalizes the output to an unbiased
symbol estimate with post-filter variance (1 - mu) / mu * E_s.  The N
per-block estimates of one layer are transported to the delay-Doppler
domain by a unitary DFT, where symbol posteriors and per-bit LLRs are
formed; posterior (or decoder) soft symbols travel back the same way and
prime the cancellation of the next layer.

State is kept per frame: time-domain prior means/variances per (block,
symbol) and an interference-reduced residual per block, so each layer's
cancellation is a window slice plus one rank-one correction instead of a
fresh pass over all taps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .channel import ChannelRealization, subchannel_stack
from .frame import (
    LLR_CLAMP,
    VAR_FLOOR,
    QamConstellation,
    SoftSymbolVector,
    soft_symbol_from_llrs,
    symbol_log_priors,
)
from .modem import dft_row, idft_row

MU_ERASE = 1e-9  # bias below this treats the symbol as erased


@dataclass
class DetectorState:
    """Per-frame detection state shared across layers and turbo iterations."""

    means: np.ndarray      # (N, M) complex: time-domain soft estimates
    variances: np.ndarray  # (N, M): residual-interference variances
    residual: np.ndarray   # (N, M) complex: r_n minus channel applied to means
    sigma2: float
    L: int
    es: float = 1.0
    i_d: int = 1

    @classmethod
    def initial(
        cls,
        r_blocks: np.ndarray,
        ch: ChannelRealization,
        sigma2: float,
        L: int,
        es: float = 1.0,
    ) -> "DetectorState":
        """Uninformative first-iteration state: zero means, variance E_s."""
        r_blocks = np.asarray(r_blocks, dtype=complex)
        N, M = r_blocks.shape
        means = np.zeros((N, M), dtype=complex)
        variances = np.zeros((N, M))
        variances[:, : M - L] = es
        return cls(means, variances, r_blocks.copy(), float(sigma2), L, es)

    @classmethod
    def from_priors(
        cls,
        r_blocks: np.ndarray,
        ch: ChannelRealization,
        sigma2: float,
        L: int,
        means: np.ndarray,
        variances: np.ndarray,
        es: float = 1.0,
        i_d: int = 2,
    ) -> "DetectorState":
        """State primed with decoder feedback from the previous iteration."""
        from .channel import apply_channel

        r_blocks = np.asarray(r_blocks, dtype=complex)
        cancelled, _ = apply_channel(ch, means, np.inf, rng=None)
        return cls(
            np.asarray(means, dtype=complex).copy(),
            np.asarray(variances, dtype=float).copy(),
            r_blocks - cancelled,
            float(sigma2),
            L,
            es,
            i_d,
        )


@dataclass
class LayerDetection:
    """Output of one layer sweep across all N blocks."""

    estimates: np.ndarray    # (N,): normalized time-domain estimates
    bias: np.ndarray         # (N,): MMSE bias mu in (0, 1]
    post_var: np.ndarray     # (N,): post-MMSE variances
    dd_estimates: np.ndarray # (N,): DFT of the normalized estimates
    dd_var: float            # constant DD-domain variance (mean of post_var)
    target_col: np.ndarray   # (N, L+1): sub-channel column of the target


def soft_cancel(state: DetectorState, ch: ChannelRealization, m: int,
                n: int | None = None) -> np.ndarray:
    """Interference-cancelled window for layer m; all blocks or just block n.

    Equals the received window minus contributions of every other symbol at
    its current soft estimate (already-swept layers use this iteration's
    estimates, later layers the previous iteration's, by construction of the
    running residual).
    """
    L = state.L
    stack = subchannel_stack(ch, m, L)
    h = stack[:, :, min(m, L)]
    rhat = state.residual[:, m : m + L + 1] + h * state.means[:, m][:, None]
    return rhat if n is None else rhat[n]


def mmse_filter(
    state: DetectorState, ch: ChannelRealization, m: int, n: int | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-layer MMSE outputs (normalized estimate, bias mu, post variance)."""
    det = detect_layer(state, ch, m)
    if n is None:
        return det.estimates, det.bias, det.post_var
    return det.estimates[n], det.bias[n], det.post_var[n]


def detect_layer(state: DetectorState, ch: ChannelRealization, m: int) -> LayerDetection:
    """Soft-cancel + MMSE-filter layer m in every block, then move to DD."""
    L, es, sigma2 = state.L, state.es, state.sigma2
    m_lo = max(m - L, 0)
    lp = min(m, L)
    stack = subchannel_stack(ch, m, L)          # (N, L+1, W)
    h = stack[:, :, lp]                          # (N, L+1)
    rhat = state.residual[:, m : m + L + 1] + h * state.means[:, m][:, None]

    Vw = state.variances[:, m_lo : m + L + 1].copy()
    Vw[:, lp] = es
    A = np.einsum("nij,nj,nkj->nik", stack, Vw, stack.conj(), optimize=True)
    dim = L + 1
    A[:, np.arange(dim), np.arange(dim)] += sigma2
    if sigma2 == 0.0:
        tr = np.einsum("nii->n", A).real
        A[:, np.arange(dim), np.arange(dim)] += (1e-12 * tr / dim + 1e-30)[:, None]
        u = np.linalg.solve(A, h[..., None])[..., 0]
    else:
        try:
            u = np.linalg.solve(A, h[..., None])[..., 0]
        except np.linalg.LinAlgError:
            tr = np.einsum("nii->n", A).real
            A[:, np.arange(dim), np.arange(dim)] += (1e-12 * tr / dim + 1e-30)[:, None]
            u = np.linalg.solve(A, h[..., None])[..., 0]

    mu = np.einsum("ni,ni->n", u.conj(), h).real
    shat = np.einsum("ni,ni->n", u.conj(), rhat)
    erased = mu < MU_ERASE
    mu_safe = np.clip(mu, MU_ERASE, 1.0)
    estimates = np.where(erased, 0.0, shat / mu_safe)
    post_var = np.where(erased, es, np.maximum(1.0 - mu_safe, 0.0) / mu_safe * es)

    dd_est = dft_row(estimates)
    dd_var = float(max(np.mean(post_var), VAR_FLOOR))
    return LayerDetection(estimates, mu_safe, post_var, dd_est, dd_var, h)


def dd_posterior(
    dd_estimates: np.ndarray,
    dd_var: float,
    const: QamConstellation,
    log_priors: np.ndarray | None = None,
) -> tuple[SoftSymbolVector, np.ndarray]:
    """Symbol-wise Gaussian posterior and per-bit LLRs in the DD domain.

    p(q | y) is proportional to prior(q) * exp(-|y - q|^2 / dd_var); the LLR
    of bit p is the log ratio of the posterior masses of the bit-0 and bit-1
    constellation subsets, clamped to +-LLR_CLAMP.
    """
    dd_estimates = np.asarray(dd_estimates, dtype=complex)
    v = max(float(dd_var), VAR_FLOOR)
    d2 = np.abs(dd_estimates[:, None] - const.points[None, :]) ** 2
    loglik = -d2 / v
    if log_priors is not None:
        loglik = loglik + log_priors
    b = const.bits_per_symbol
    llrs = np.empty((dd_estimates.size, b))
    for p in range(b):
        mask = const.bit0_mask[p]
        llrs[:, p] = logsumexp(loglik[:, mask], axis=1) - logsumexp(
            loglik[:, ~mask], axis=1
        )
    llrs = np.clip(llrs, -LLR_CLAMP, LLR_CLAMP)
    w = np.exp(loglik - logsumexp(loglik, axis=1, keepdims=True))
    means = w @ const.points
    e2 = w @ (np.abs(const.points) ** 2)
    variances = np.clip(e2 - np.abs(means) ** 2, VAR_FLOOR, const.energy)
    return SoftSymbolVector(means, variances), llrs


def transport_covariance(variances: np.ndarray) -> np.ndarray:
    """Diagonal of F^H diag(v) F: the mean of v replicated (either domain
    direction, since only the diagonal is retained)."""
    variances = np.asarray(variances, dtype=float)
    return np.full_like(variances, variances.mean())


def apply_layer_feedback(
    state: DetectorState,
    ch: ChannelRealization,
    m: int,
    dd_means: np.ndarray,
    dd_variances: np.ndarray,
    target_col: np.ndarray | None = None,
) -> None:
    """Install new DD-domain soft symbols for layer m as time-domain priors.

    Updates the running residual by the change in this layer's contribution,
    so subsequent cancellations see the refreshed estimate.
    """
    L = state.L
    if target_col is None:
        target_col = subchannel_stack(ch, m, L)[:, :, min(m, L)]
    time_means = idft_row(np.asarray(dd_means, dtype=complex))
    delta = time_means - state.means[:, m]
    state.residual[:, m : m + L + 1] -= target_col * delta[:, None]
    state.means[:, m] = time_means
    state.variances[:, m] = float(np.mean(dd_variances))


@dataclass
class SceDetection:
    """Whole-frame detection sweep output (one turbo iteration)."""

    llrs: np.ndarray       # (rows, N, bits)
    dd_means: np.ndarray   # (rows, N)
    dd_vars: np.ndarray    # (rows, N)
    post_vars: np.ndarray  # (rows, N): time-domain post-MMSE variances
    mmse_solves: int


def detect_frame_sce(
    r_blocks: np.ndarray,
    ch: ChannelRealization,
    sigma2: float,
    const: QamConstellation,
    L: int,
    prior_llrs: np.ndarray | None = None,
    i_d: int = 1,
) -> SceDetection:
    """One full SIC-MMSE sweep over all layers with internal DD feedback.

    `prior_llrs` is the decoder's re-interleaved a-posteriori output from
    the previous turbo iteration, shaped (rows, N, bits); it primes both
    the time-domain cancellation and the DD symbol priors.  The LLR tensor
    covers every layer and is only complete after the last layer.
    """
    r_blocks = np.asarray(r_blocks, dtype=complex)
    N, M = r_blocks.shape
    rows = M - L
    es = const.energy

    if prior_llrs is None:
        state = DetectorState.initial(r_blocks, ch, sigma2, L, es)
        log_priors = None
    else:
        if prior_llrs.shape != (rows, N, const.bits_per_symbol):
            raise ValueError("prior LLR tensor has wrong shape")
        sm, sv = soft_symbol_from_llrs(prior_llrs, const)
        means = np.zeros((N, M), dtype=complex)
        variances = np.zeros((N, M))
        means[:, :rows] = idft_row(sm).T
        variances[:, :rows] = sv.mean(axis=1)[None, :]
        state = DetectorState.from_priors(
            r_blocks, ch, sigma2, L, means, variances, es, i_d
        )
        log_priors = symbol_log_priors(prior_llrs, const)

    llrs = np.empty((rows, N, const.bits_per_symbol))
    dd_means = np.empty((rows, N), dtype=complex)
    dd_vars = np.empty((rows, N))
    post_vars = np.empty((rows, N))
    for m in range(rows):
        det = detect_layer(state, ch, m)
        lp = None if log_priors is None else log_priors[m]
        soft, layer_llrs = dd_posterior(det.dd_estimates, det.dd_var, const, lp)
        llrs[m] = layer_llrs
        dd_means[m] = soft.means
        dd_vars[m] = soft.variances
        post_vars[m] = det.post_var
        apply_layer_feedback(state, ch, m, soft.means, soft.variances, det.target_col)
    return SceDetection(llrs, dd_means, dd_vars, post_vars, rows * N)
