"""Link-level simulation and analysis toolkit for zero-padded ODDM with
per-row parallel channel encoding and successive decoding feedback."""

from .frame import (
    FrameConfig,
    Interleaver,
    QamConstellation,
    SoftSymbolVector,
    map_bits_to_symbols,
    hard_demap,
    soft_symbol_from_llrs,
)
from .modem import DdGrid, modulate, demodulate, dft_row, idft_row
from .channel import (
    ChannelRealization,
    SubChannel,
    draw_channel,
    build_block_matrix,
    extract_subchannel,
    apply_channel,
)
from .detector import (
    DetectorState,
    detect_frame_sce,
    detect_layer,
    dd_posterior,
    transport_covariance,
)
from .ldpc import (
    DecoderConfig,
    LdpcCode,
    decode_bp,
    load_alist,
    save_alist,
    standard_code,
    build_long_code,
)
from .receiver import TurboConfig, RunStats, run_pce_sdf, run_sce_pdf
from .analysis import (
    GaussianMixture,
    fit_mixture_em,
    de_run,
    threshold_sigma,
    predict_pce_finite,
    q_function,
    q_inv,
)

__version__ = "0.1.0"
