"""End-to-end receiver architectures.

Two schemes share the same SIC-MMSE detector:

* PCE-SDF: one short codeword per delay row.  Each detected layer is
  decoded immediately and the decoder's a-posteriori soft symbols prime the
  next layer's cancellation (successive decoding feedback).  Rows whose
  parity held are skipped in later turbo iterations; their hard-decision
  symbols are frozen as zero-variance priors.

* SCE-PDF: one long codeword over the whole frame.  The detector sweeps
  every layer (feeding its own DD posteriors between layers), then the
  decoder runs once and its a-posteriori output primes the next full sweep
  (parallel decoding feedback).

Decoder feedback is always the full a-posteriori LLR vector, never the
extrinsic part.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization
from .detector import (
    DetectorState,
    apply_layer_feedback,
    dd_posterior,
    detect_frame_sce,
    detect_layer,
)
from .frame import (
    FrameConfig,
    Interleaver,
    QamConstellation,
    llrs_to_bits,
    map_bits_to_symbols,
    row_interleaver_seed,
    soft_symbol_from_llrs,
)
from .ldpc import DecoderConfig, LdpcCode, decode_bp
from .modem import DdGrid, modulate


@dataclass
class TurboConfig:
    """Receiver iteration budget and scheme selection."""

    scheme: str = "pce"                     # "pce" or "sce"
    max_turbo: int = 1
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    skip_converged: bool = True             # PCE only

    def __post_init__(self):
        if self.scheme not in ("pce", "sce"):
            raise ValueError("scheme must be 'pce' or 'sce'")
        if self.max_turbo < 1:
            raise ValueError("max_turbo must be >= 1")


@dataclass
class RunStats:
    """Per-iteration convergence and complexity accounting."""

    beta: list = field(default_factory=list)           # parity-failure fraction
    mmse_solves: list = field(default_factory=list)    # per turbo iteration
    bp_iterations: list = field(default_factory=list)  # summed BP iterations
    codewords_decoded: list = field(default_factory=list)
    row_parity: np.ndarray | None = None               # final per-codeword flags


@dataclass
class ReceiverResult:
    info_bits: np.ndarray          # final hard decisions
    info_per_iter: list            # decisions after each turbo iteration
    stats: RunStats
    first_iter_llrs: np.ndarray | None = None  # detector LLRs of iteration 1


@dataclass
class TxFrame:
    """Transmit-side view of one frame: grid plus the bit bookkeeping
    needed for error counting and LLR sign-folding."""

    grid: DdGrid
    info_bits: np.ndarray      # (rows, k_c) for PCE, (k_long,) for SCE
    code_bits: np.ndarray      # codeword-domain bits
    symbol_bits: np.ndarray    # (rows, N, bits): interleaved, as mapped

    @property
    def blocks(self) -> np.ndarray:
        return modulate(self.grid)


def transmit_pce(
    info_bits: np.ndarray,
    code: LdpcCode,
    const: QamConstellation,
    fc: FrameConfig,
    frame_seed: int,
) -> TxFrame:
    """Encode one codeword per delay row, interleave, map, and grid."""
    rows = fc.n_data_rows
    info_bits = np.asarray(info_bits, dtype=np.uint8).reshape(rows, code.k)
    if code.n != fc.bits_per_row:
        raise ValueError(
            f"row codeword length {code.n} != N*log2|Q| = {fc.bits_per_row}"
        )
    coded = np.empty((rows, code.n), dtype=np.int8)
    sym_bits = np.empty((rows, fc.N, fc.bits_per_symbol), dtype=np.int8)
    data = np.empty((rows, fc.N), dtype=complex)
    for m in range(rows):
        coded[m] = code.encode(info_bits[m])
        pi = Interleaver.random(code.n, row_interleaver_seed(frame_seed, m))
        interleaved = pi.interleave(coded[m])
        sym_bits[m] = interleaved.reshape(fc.N, fc.bits_per_symbol)
        data[m] = map_bits_to_symbols(interleaved, const)
    return TxFrame(DdGrid.from_data(data, fc.L), info_bits, coded, sym_bits)


def transmit_sce(
    info_bits: np.ndarray,
    long_code: LdpcCode,
    const: QamConstellation,
    fc: FrameConfig,
    frame_seed: int,
) -> TxFrame:
    """Encode the whole frame as one codeword, interleave, map, and grid."""
    rows = fc.n_data_rows
    if long_code.n != fc.bits_per_frame:
        raise ValueError(
            f"long codeword length {long_code.n} != frame payload {fc.bits_per_frame}"
        )
    info_bits = np.asarray(info_bits, dtype=np.uint8).ravel()
    coded = long_code.encode(info_bits)
    pi = Interleaver.random(long_code.n, row_interleaver_seed(frame_seed, 0))
    interleaved = pi.interleave(coded)
    sym_bits = interleaved.reshape(rows, fc.N, fc.bits_per_symbol)
    data = map_bits_to_symbols(interleaved, const).reshape(rows, fc.N)
    return TxFrame(DdGrid.from_data(data, fc.L), info_bits, coded, sym_bits)


def run_pce_sdf(
    r_blocks: np.ndarray,
    ch: ChannelRealization,
    sigma2: float,
    code: LdpcCode,
    cfg: TurboConfig,
    const: QamConstellation,
    fc: FrameConfig,
    frame_seed: int,
    collect_llrs: bool = False,
) -> ReceiverResult:
    """Joint detection and decoding with successive decoding feedback."""
    rows, N, bps = fc.n_data_rows, fc.N, fc.bits_per_symbol
    if code.n != N * bps:
        raise ValueError("row code length does not match the frame geometry")
    interleavers = [
        Interleaver.random(code.n, row_interleaver_seed(frame_seed, m))
        for m in range(rows)
    ]
    state = DetectorState.initial(r_blocks, ch, sigma2, fc.L, const.energy)
    converged = np.zeros(rows, dtype=bool)
    row_ok = np.zeros(rows, dtype=bool)
    llr_out = [None] * rows
    stats = RunStats()
    info_per_iter = []
    first_llrs = np.empty((rows, N, bps)) if collect_llrs else None

    for it in range(1, cfg.max_turbo + 1):
        solves = bp_iters = decoded = 0
        for m in range(rows):
            if cfg.skip_converged and converged[m]:
                continue
            det = detect_layer(state, ch, m)
            solves += N
            _, llr_sym = dd_posterior(det.dd_estimates, det.dd_var, const)
            if collect_llrs and it == 1:
                first_llrs[m] = llr_sym
            res = decode_bp(code, interleavers[m].deinterleave(llr_sym.ravel()),
                            cfg.decoder)
            bp_iters += res.iters_used
            decoded += 1
            llr_out[m] = res.llr_out
            row_ok[m] = res.parity_ok
            if res.parity_ok and cfg.skip_converged:
                converged[m] = True
                hard_sym = interleavers[m].interleave(llrs_to_bits(res.llr_out))
                fb_means = map_bits_to_symbols(hard_sym, const)
                fb_vars = np.zeros(N)
            else:
                sym_llrs = interleavers[m].interleave(res.llr_out).reshape(N, bps)
                fb_means, fb_vars = soft_symbol_from_llrs(sym_llrs, const)
            apply_layer_feedback(state, ch, m, fb_means, fb_vars, det.target_col)
        state.i_d = it + 1
        stats.beta.append(1.0 - float(np.mean(row_ok)))
        stats.mmse_solves.append(solves)
        stats.bp_iterations.append(bp_iters)
        stats.codewords_decoded.append(decoded)
        info_pos = code.info_positions()
        info_per_iter.append(
            np.stack([llrs_to_bits(llr_out[m])[info_pos] for m in range(rows)])
        )
    stats.row_parity = row_ok.copy()
    return ReceiverResult(info_per_iter[-1], info_per_iter, stats, first_llrs)


def run_sce_pdf(
    r_blocks: np.ndarray,
    ch: ChannelRealization,
    sigma2: float,
    long_code: LdpcCode,
    cfg: TurboConfig,
    const: QamConstellation,
    fc: FrameConfig,
    frame_seed: int,
    collect_llrs: bool = False,
) -> ReceiverResult:
    """Whole-frame detection followed by one long decode per turbo iteration."""
    rows, N, bps = fc.n_data_rows, fc.N, fc.bits_per_symbol
    if long_code.n != rows * N * bps:
        raise ValueError("long code length does not match the frame payload")
    pi = Interleaver.random(long_code.n, row_interleaver_seed(frame_seed, 0))
    stats = RunStats()
    info_per_iter = []
    prior_llrs = None
    llr_out = None
    parity_ok = False
    first_llrs = None

    for it in range(1, cfg.max_turbo + 1):
        if not parity_ok:
            det = detect_frame_sce(r_blocks, ch, sigma2, const, fc.L,
                                   prior_llrs, it)
            if collect_llrs and it == 1:
                first_llrs = det.llrs.copy()
            res = decode_bp(long_code, pi.deinterleave(det.llrs.reshape(-1)),
                            cfg.decoder)
            llr_out = res.llr_out
            parity_ok = res.parity_ok
            prior_llrs = pi.interleave(llr_out).reshape(rows, N, bps)
            stats.mmse_solves.append(det.mmse_solves)
            stats.bp_iterations.append(res.iters_used)
            stats.codewords_decoded.append(1)
        else:
            stats.mmse_solves.append(0)
            stats.bp_iterations.append(0)
            stats.codewords_decoded.append(0)
        stats.beta.append(0.0 if parity_ok else 1.0)
        info_per_iter.append(llrs_to_bits(llr_out)[long_code.info_positions()])
    stats.row_parity = np.array([parity_ok])
    return ReceiverResult(info_per_iter[-1], info_per_iter, stats, first_llrs)


def collect_stats(stats: RunStats) -> dict:
    """Flatten a RunStats into a plain record for aggregation."""
    return {
        "beta": list(stats.beta),
        "mmse_solves": list(stats.mmse_solves),
        "bp_iterations": list(stats.bp_iterations),
        "codewords_decoded": list(stats.codewords_decoded),
        "unconverged": int(np.sum(~stats.row_parity)),
    }
