"""LDPC codes: alist I/O, quasi-cyclic construction and encoding,
sum-product belief-propagation decoding, and degree-profile extraction.

The shipped rate-1/2 and rate-3/4 (648, .) codes follow the IEEE 802.11
quasi-cyclic layout (Z = 27): a 12x24 (resp. 6x24) base matrix whose first
parity block column has the (1, 0, 1) shift pattern and whose remaining
parity columns form the identity staircase, which yields O(n) encoding by
back-substitution.  A long rate-1/2 code for whole-frame encoding is built
by lifting the same base matrix with a larger Z.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import scipy.sparse as sp

MSG_CLAMP = 30.0
_TANH_FLOOR = 1e-30

# 802.11-style base matrices, Z = 27.  -1 marks an all-zero block; s >= 0 a
# cyclic shift of the identity by s.
WIFI_BASE_R12 = np.array([
    [ 0, -1, -1, -1,  0,  0, -1, -1,  0, -1, -1,  0,  1,  0, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1],
    [22,  0, -1, -1, 17, -1,  0,  0, 12, -1, -1, -1, -1,  0,  0, -1, -1, -1, -1, -1, -1, -1, -1, -1],
    [ 6, -1,  0, -1, 10, -1, -1, -1, 24, -1,  0, -1, -1, -1,  0,  0, -1, -1, -1, -1, -1, -1, -1, -1],
    [ 2, -1, -1,  0, 20, -1, -1, -1, 25,  0, -1, -1, -1, -1, -1,  0,  0, -1, -1, -1, -1, -1, -1, -1],
    [23, -1, -1, -1,  3, -1, -1, -1,  0, -1,  9, 11, -1, -1, -1, -1,  0,  0, -1, -1, -1, -1, -1, -1],
    [24, -1, 23,  1, 17, -1,  3, -1, 10, -1, -1, -1, -1, -1, -1, -1, -1,  0,  0, -1, -1, -1, -1, -1],
    [25, -1, -1, -1,  8, -1, -1, -1,  7, 18, -1, -1,  0, -1, -1, -1, -1, -1,  0,  0, -1, -1, -1, -1],
    [13, 24, -1, -1,  0, -1,  8, -1,  6, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1,  0,  0, -1, -1, -1],
    [ 7, 20, -1, 16, 22, 10, -1, -1, 23, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1,  0,  0, -1, -1],
    [11, -1, -1, -1, 19, -1, -1, -1, 13, -1,  3, 17, -1, -1, -1, -1, -1, -1, -1, -1, -1,  0,  0, -1],
    [25, -1,  8, -1, 23, 18, -1, 14,  9, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1,  0,  0],
    [ 3, -1, -1, -1, 16, -1, -1,  2, 25,  5, -1, -1,  1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1,  0],
], dtype=np.int64)

WIFI_BASE_R34 = np.array([
    [16, 17, 22, 24,  9,  3, 14, -1,  4,  2,  7, -1, 26, -1,  2, -1, 21, -1,  1,  0, -1, -1, -1, -1],
    [25, 12, 12,  3,  3, 26,  6, 21, -1, 15, 22, -1, 15, -1,  4, -1, -1, 16, -1,  0,  0, -1, -1, -1],
    [25, 18, 26, 16, 22, 23,  9, -1,  0, -1,  4, -1,  4, -1,  8, 23, 11, -1, -1, -1,  0,  0, -1, -1],
    [ 9,  7,  0,  1, 17, -1, -1,  7,  3, -1,  3, 23, -1, 16, -1, -1, 21, -1,  0, -1, -1,  0,  0, -1],
    [24,  5, 26,  7,  1, -1, -1, 15, 24, 15, -1,  8, -1, 13, -1, 13, -1, 11, -1, -1, -1, -1,  0,  0],
    [ 2,  2, 19, 14, 24,  1, 15, 19, -1, 21, -1,  2, -1, 24, -1,  3, -1,  2,  1, -1, -1, -1, -1,  0],
], dtype=np.int64)


@dataclass
class DecoderConfig:
    """Belief-propagation settings: flooding sum-product, a-posteriori
    output, optional early stop on parity satisfaction."""

    max_iters: int = 50
    early_stop: bool = True

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class DecodeResult:
    llr_out: np.ndarray
    parity_ok: bool
    iters_used: int


class LdpcCode:
    """Sparse parity-check code with degree profiles and an encoding recipe.

    Either a quasi-cyclic recipe (base matrix + lift size) or a dense
    generator derived by GF(2) elimination backs :meth:`encode`.
    """

    def __init__(self, H: sp.csr_matrix, base: np.ndarray | None = None,
                 z: int | None = None):
        H = sp.csr_matrix(H, dtype=np.uint8)
        H.sum_duplicates()
        self.H = H
        self.n_checks, self.n = H.shape
        self.k = self.n - self.n_checks
        self.base = base
        self.z = z
        self._generator_p = None  # parity part of a systematic generator
        self._gen_info_cols = None
        self._gen_parity_cols = None
        self._build_edges()
        self._build_profiles()

    # -- structure ----------------------------------------------------

    def _build_edges(self):
        coo = self.H.tocoo()
        order = np.lexsort((coo.col, coo.row))  # edges grouped by check
        self.edge_chk = coo.row[order].astype(np.int64)
        self.edge_var = coo.col[order].astype(np.int64)
        self.n_edges = self.edge_chk.size
        # boundaries of each check's edge group
        self.chk_ptr = np.searchsorted(self.edge_chk, np.arange(self.n_checks))
        # same edges regrouped by variable, for per-bit accumulation
        self.var_order = np.argsort(self.edge_var, kind="stable")
        self.var_ptr = np.searchsorted(self.edge_var[self.var_order], np.arange(self.n))
        self.var_degree = np.asarray(self.H.sum(axis=0)).ravel().astype(np.int64)
        self.chk_degree = np.asarray(self.H.sum(axis=1)).ravel().astype(np.int64)
        if np.any(self.var_degree == 0) or np.any(self.chk_degree == 0):
            raise ValueError("parity-check matrix has an empty row or column")

    def _build_profiles(self):
        edges = float(self.n_edges)
        v_deg, v_cnt = np.unique(self.var_degree, return_counts=True)
        c_deg, c_cnt = np.unique(self.chk_degree, return_counts=True)
        self.var_degrees = v_deg
        self.lambda_edge = v_deg * v_cnt / edges      # edge-perspective lambda_i
        self.lambda_node = v_cnt / float(self.n)      # node-perspective
        self.chk_degrees = c_deg
        self.rho_edge = c_deg * c_cnt / edges
        self.d_l_max = int(v_deg.max())
        self.d_r_max = int(c_deg.max())

    # -- construction -------------------------------------------------

    @classmethod
    def from_base_matrix(cls, base: np.ndarray, z: int) -> "LdpcCode":
        """Expand a quasi-cyclic base matrix with lift size z."""
        base = np.asarray(base, dtype=np.int64)
        mb, nb = base.shape
        rows, cols = [], []
        r = np.arange(z)
        for i in range(mb):
            for j in range(nb):
                s = base[i, j]
                if s < 0:
                    continue
                rows.append(i * z + r)
                cols.append(j * z + (r + s) % z)
        data = np.ones(z * sum(1 for s in base.ravel() if s >= 0), dtype=np.uint8)
        H = sp.csr_matrix(
            (data, (np.concatenate(rows), np.concatenate(cols))),
            shape=(mb * z, nb * z),
        )
        return cls(H, base=base, z=z)

    # -- encoding ------------------------------------------------------

    def encode(self, info_bits: np.ndarray) -> np.ndarray:
        info_bits = np.asarray(info_bits, dtype=np.uint8).ravel()
        if info_bits.size != self.k:
            raise ValueError(f"expected {self.k} info bits, got {info_bits.size}")
        if self.base is not None:
            return self._encode_qc(info_bits)
        return self._encode_dense(info_bits)

    def _encode_qc(self, u: np.ndarray) -> np.ndarray:
        base, z = self.base, self.z
        mb, nb = base.shape
        kb = nb - mb
        blocks = u.reshape(kb, z)
        # syndromes of the systematic part, one per block row
        s = np.zeros((mb, z), dtype=np.uint8)
        for i in range(mb):
            for j in range(kb):
                sh = base[i, j]
                if sh >= 0:
                    s[i] ^= np.roll(blocks[j], -sh)
        # first parity block: the staircase cancels pairwise and the two
        # shift-1 rotations of p0 cancel, leaving the middle shift-0 term
        p = np.zeros((mb, z), dtype=np.uint8)
        p[0] = np.bitwise_xor.reduce(s, axis=0)
        col0 = base[:, kb]
        p1 = s[0] ^ np.roll(p[0], -col0[0])
        parity = [p[0], p1]
        prev = p1
        for i in range(1, mb - 1):
            nxt = s[i] ^ prev
            if col0[i] >= 0:
                nxt = nxt ^ np.roll(p[0], -col0[i])
            parity.append(nxt)
            prev = nxt
        c = np.concatenate([u] + parity)
        return c.astype(np.int8)

    def _encode_dense(self, u: np.ndarray) -> np.ndarray:
        if self._generator_p is None:
            self._build_dense_generator()
        parity = (self._generator_p @ u) % 2
        c = np.empty(self.n, dtype=np.int8)
        c[self._gen_info_cols] = u
        c[self._gen_parity_cols] = parity
        return c

    def _build_dense_generator(self):
        """GF(2) elimination of H into [A | I] under a column permutation,
        giving parity = A @ info."""
        Hd = self.H.toarray().astype(np.uint8)
        m, n = Hd.shape
        pivot_cols = []
        row = 0
        for col in range(n - 1, -1, -1):
            if row >= m:
                break
            pivots = np.nonzero(Hd[row:, col])[0]
            if pivots.size == 0:
                continue
            pr = row + pivots[0]
            if pr != row:
                Hd[[row, pr]] = Hd[[pr, row]]
            others = np.nonzero(Hd[:, col])[0]
            others = others[others != row]
            Hd[others] ^= Hd[row]
            pivot_cols.append(col)
            row += 1
        if row < m:
            raise ValueError("parity-check matrix is rank deficient; cannot encode")
        parity_cols = np.array(pivot_cols[::-1], dtype=np.int64)
        info_cols = np.setdiff1d(np.arange(n), parity_cols)
        A = Hd[:, info_cols]
        P = np.empty_like(A)
        # row with pivot parity_cols[j] determines parity bit j
        for i, col in enumerate(pivot_cols):
            j = np.searchsorted(parity_cols, col)
            P[j] = A[i]
        self._generator_p = P
        self._gen_info_cols = info_cols
        self._gen_parity_cols = parity_cols

    def info_positions(self) -> np.ndarray:
        """Codeword positions carrying the systematic bits."""
        if self.base is not None:
            return np.arange(self.k)
        if self._generator_p is None:
            self._build_dense_generator()
        return self._gen_info_cols

    # -- checking -------------------------------------------------------

    def parity_check(self, bits: np.ndarray) -> bool:
        bits = np.asarray(bits, dtype=np.uint8)
        syn = self.H.dot(bits.T) % 2
        return not np.any(syn)

    def syndrome_weight(self, bits: np.ndarray) -> int:
        bits = np.asarray(bits, dtype=np.uint8)
        return int(np.sum(self.H.dot(bits) % 2))


def decode_bp(
    code: LdpcCode, llr_in: np.ndarray, cfg: DecoderConfig | None = None
) -> DecodeResult:
    """Flooding sum-product decoding with a-posteriori LLR output.

    Early-stops when the hard decisions satisfy every parity check;
    non-convergence is reported via parity_ok = False.
    """
    cfg = cfg or DecoderConfig()
    llr_in = np.asarray(llr_in, dtype=float)
    if llr_in.shape != (code.n,):
        raise ValueError(f"expected {code.n} LLRs, got shape {llr_in.shape}")
    if not np.all(np.isfinite(llr_in)):
        raise ValueError("LLRs must be finite")
    out, ok, iters = _decode_batch(code, llr_in[None, :], cfg)
    return DecodeResult(out[0], bool(ok[0]), int(iters[0]))


def decode_bp_batch(
    code: LdpcCode, llr_in: np.ndarray, cfg: DecoderConfig | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Decode a (B, n) batch of independent codewords over the same code."""
    cfg = cfg or DecoderConfig()
    llr_in = np.atleast_2d(np.asarray(llr_in, dtype=float))
    return _decode_batch(code, llr_in, cfg)


def _decode_batch(code: LdpcCode, llr: np.ndarray, cfg: DecoderConfig):
    B = llr.shape[0]
    ev, ec, ptr = code.edge_var, code.edge_chk, code.chk_ptr
    c2v = np.zeros((B, code.n_edges))
    post = llr.copy()
    parity_ok = np.zeros(B, dtype=bool)
    iters_used = np.full(B, cfg.max_iters, dtype=np.int64)
    active = np.ones(B, dtype=bool)

    for it in range(1, cfg.max_iters + 1):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        # variable -> check: posterior minus own incoming message
        v2c = np.clip(post[idx][:, ev] - c2v[idx], -MSG_CLAMP, MSG_CLAMP)
        t = np.tanh(v2c / 2.0)
        mag = np.log(np.maximum(np.abs(t), _TANH_FLOOR))
        neg = (t < 0).astype(np.int64)
        mag_tot = np.add.reduceat(mag, ptr, axis=1)
        neg_tot = np.add.reduceat(neg, ptr, axis=1)
        ex_mag = mag_tot[:, ec] - mag
        ex_sign = 1.0 - 2.0 * ((neg_tot[:, ec] - neg) & 1)
        prod = np.clip(np.exp(ex_mag), 0.0, 1.0 - 1e-15)
        new_c2v = np.clip(ex_sign * 2.0 * np.arctanh(prod), -MSG_CLAMP, MSG_CLAMP)
        c2v[idx] = new_c2v
        # a-posteriori LLR: channel plus all incoming check messages
        sum_c2v = np.add.reduceat(new_c2v[:, code.var_order], code.var_ptr, axis=1)
        p = llr[idx] + sum_c2v
        post[idx] = p
        hard = (p < 0).astype(np.int64)
        syn = np.add.reduceat(hard[:, ev], ptr, axis=1) & 1
        done = ~np.any(syn, axis=1)
        newly = idx[done]
        parity_ok[newly] = True
        iters_used[newly] = it
        if cfg.early_stop:
            active[newly] = False

    return post, parity_ok, iters_used


# -- alist I/O ----------------------------------------------------------


def parse_alist(text: str) -> LdpcCode:
    """Parse the standard alist sparse-matrix format (padded or reduced)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 4:
        raise ValueError("alist file too short")
    try:
        n, m = map(int, lines[0].split())
        dv_max, dc_max = map(int, lines[1].split())
        col_deg = list(map(int, lines[2].split()))
        row_deg = list(map(int, lines[3].split()))
    except ValueError as e:
        raise ValueError(f"malformed alist header: {e}") from None
    if len(col_deg) != n or len(row_deg) != m:
        raise ValueError("degree list lengths do not match dimensions")
    if max(col_deg) != dv_max or max(row_deg) != dc_max:
        raise ValueError("stated maximum degrees do not match degree lists")
    if sum(col_deg) != sum(row_deg):
        raise ValueError("column and row degree totals disagree")
    body = lines[4:]
    if len(body) < n + m:
        raise ValueError("alist body truncated")

    rows_idx, cols_idx = [], []
    for j in range(n):
        entries = [int(x) for x in body[j].split() if int(x) != 0]
        if len(entries) != col_deg[j]:
            raise ValueError(f"column {j} lists {len(entries)} entries, "
                             f"declared degree {col_deg[j]}")
        rows_idx.extend(e - 1 for e in entries)
        cols_idx.extend([j] * len(entries))
    H = sp.csr_matrix(
        (np.ones(len(rows_idx), dtype=np.uint8), (rows_idx, cols_idx)),
        shape=(m, n),
    )
    # cross-check against the row lists
    row_counts = np.asarray(H.sum(axis=1)).ravel()
    for i in range(m):
        entries = [int(x) for x in body[n + i].split() if int(x) != 0]
        if len(entries) != row_deg[i] or row_counts[i] != row_deg[i]:
            raise ValueError(f"row {i} inconsistent with declared degree")
        got = set(np.nonzero(H[i].toarray().ravel())[0] + 1)
        if got != set(entries):
            raise ValueError(f"row {i} entries disagree with column lists")
    return LdpcCode(H)


def load_alist(path) -> LdpcCode:
    with open(path, "r", encoding="ascii") as f:
        return parse_alist(f.read())


def save_alist(code: LdpcCode, path) -> None:
    H = code.H.tocsc()
    n, m = code.n, code.n_checks
    col_lists = [H.indices[H.indptr[j]:H.indptr[j + 1]] + 1 for j in range(n)]
    Hr = code.H.tocsr()
    row_lists = [Hr.indices[Hr.indptr[i]:Hr.indptr[i + 1]] + 1 for i in range(m)]
    dv = max(len(c) for c in col_lists)
    dc = max(len(r) for r in row_lists)
    with open(path, "w", encoding="ascii") as f:
        f.write(f"{n} {m}\n{dv} {dc}\n")
        f.write(" ".join(str(len(c)) for c in col_lists) + "\n")
        f.write(" ".join(str(len(r)) for r in row_lists) + "\n")
        for c in col_lists:
            pad = [0] * (dv - len(c))
            f.write(" ".join(map(str, list(c) + pad)) + "\n")
        for r in row_lists:
            pad = [0] * (dc - len(r))
            f.write(" ".join(map(str, list(r) + pad)) + "\n")


# -- shipped codes --------------------------------------------------------

_STANDARD_BASES = {
    "wifi_648_r12": (WIFI_BASE_R12, 27),
    "wifi_648_r34": (WIFI_BASE_R34, 27),
}


def standard_code(name: str) -> LdpcCode:
    """Construct one of the shipped 802.11-layout codes by name."""
    if name not in _STANDARD_BASES:
        raise KeyError(f"unknown code {name!r}; have {sorted(_STANDARD_BASES)}")
    base, z = _STANDARD_BASES[name]
    return LdpcCode.from_base_matrix(base, z)


def standard_alist_path(name: str):
    """Path of the shipped alist file for a standard code."""
    return resources.files("oddmsim.codes").joinpath(f"{name}.alist")


def build_long_code(n: int, base: np.ndarray | None = None) -> LdpcCode:
    """Rate-1/2 code of length n by lifting the rate-1/2 base matrix.

    Used for whole-frame encoding when a single long codeword must match
    the frame payload exactly; n must be a multiple of 24.
    """
    base = WIFI_BASE_R12 if base is None else base
    nb = base.shape[1]
    if n % nb:
        raise ValueError(f"length {n} is not a multiple of {nb}")
    z = n // nb
    scaled = np.where(base >= 0, (base * z) // 27 % z, -1)
    return LdpcCode.from_base_matrix(scaled, z)
