"""Performance prediction: symmetric-Gaussian-mixture modeling of detector
LLRs (fitted by EM), Gaussian-approximation density evolution through the
sum-product decoder, and the finite-blocklength correction that accounts
for per-codeword channel variation in the parallel-encoded scheme.

All LLR densities are handled in the all-zeros-codeword convention: a
mixture component N(mu, 2*mu) is a "symmetric Gaussian" and the check-node
transfer function is psi(x) = E[tanh(N(x, 2x)/2)].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import erfc, erfcinv, expit, logsumexp

# Message mean treated as certainty.  With psi^-1 arguments clamped at
# 1 - 1e-12, the saturated fixed point of a perfect channel sits near 92,
# so the cap must lie below it but above any sub-threshold stall.
DE_CAP = 80.0
PSI_X_MIN = 1e-4
PSI_X_MAX = 100.0
_PSI_ARG_EPS = 1e-12    # clamp for arguments of psi^-1


def q_function(x):
    """Gaussian tail probability Q(x)."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def q_inv(p):
    """Inverse of the Q function."""
    return np.sqrt(2.0) * erfcinv(2.0 * np.asarray(p, dtype=float))


class PsiTable:
    """Tabulated psi(x) = E[tanh(N(x, 2x)/2)] with monotone interpolation.

    Built once by 64-node Gauss-Hermite quadrature on a log-spaced grid;
    psi is strictly increasing with psi(0) = 0 and limit 1, inverted by
    bisection on the table.
    """

    def __init__(self, n_nodes: int = 64, n_grid: int = 600):
        nodes, weights = np.polynomial.hermite.hermgauss(n_nodes)
        x = np.logspace(np.log10(PSI_X_MIN), np.log10(PSI_X_MAX), n_grid)
        # u = x + sqrt(2 * 2x) * t against weight exp(-t^2)/sqrt(pi)
        u = x[:, None] + np.sqrt(4.0 * x)[:, None] * nodes[None, :]
        vals = (np.tanh(u / 2.0) @ weights) / np.sqrt(np.pi)
        self.x = x
        self.y = vals
        self._interp = PchipInterpolator(x, vals, extrapolate=False)
        self.y_max = float(vals[-1])

    def psi(self, x):
        scalar = np.ndim(x) == 0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        low = x < PSI_X_MIN
        high = x > PSI_X_MAX
        mid = ~(low | high)
        # linear through the origin below the table; saturate above
        out[low] = np.maximum(x[low], 0.0) * (self.y[0] / PSI_X_MIN)
        out[high] = self.y_max
        out[mid] = self._interp(x[mid])
        return float(out[0]) if scalar else out

    def psi_inv(self, y: float) -> float:
        y = float(np.clip(y, _PSI_ARG_EPS, 1.0 - _PSI_ARG_EPS))
        # quadrature noise makes the table top unreliable at the 1e-12
        # level; saturate once y is within ~2e-12 of certainty
        if y >= min(self.y_max, 1.0 - 2e-12):
            return PSI_X_MAX
        if y <= self.y[0]:
            return y * PSI_X_MIN / self.y[0]
        lo, hi = PSI_X_MIN, PSI_X_MAX
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if float(self._interp(mid)) < y:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


_psi_singleton: PsiTable | None = None


def psi_table() -> PsiTable:
    global _psi_singleton
    if _psi_singleton is None:
        _psi_singleton = PsiTable()
    return _psi_singleton


# -- symmetric Gaussian mixtures -----------------------------------------


@dataclass
class GaussianMixture:
    """Mixture of symmetric Gaussians N(mu_j, 2*mu_j), canonical (sorted)."""

    weights: np.ndarray
    means: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        m = np.asarray(self.means, dtype=float)
        if w.shape != m.shape or w.ndim != 1:
            raise ValueError("weights and means must be 1-D and matching")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to 1")
        if np.any(m < 0):
            raise ValueError("means must be nonnegative")
        order = np.argsort(m)
        self.weights = w[order]
        self.means = m[order]

    @property
    def n_components(self) -> int:
        return self.weights.size

    def log_pdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        mu = np.maximum(self.means, 1e-12)
        lw = np.log(np.maximum(self.weights, 1e-300))
        comp = (
            lw
            - 0.5 * np.log(4.0 * np.pi * mu)
            - (x[..., None] - mu) ** 2 / (4.0 * mu)
        )
        return logsumexp(comp, axis=-1)

    def pdf(self, x: np.ndarray) -> np.ndarray:
        return np.exp(self.log_pdf(x))

    def cdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        mu = np.maximum(self.means, 1e-12)
        z = (x[..., None] - mu) / np.sqrt(2.0 * mu)
        return (0.5 * erfc(-z / np.sqrt(2.0)) * self.weights).sum(axis=-1)

    def channel_mean(self) -> float:
        """Mean LLR contributed by the channel (sum of pi_j mu_j)."""
        return float(np.dot(self.weights, self.means))

    def pre_decode_error(self) -> float:
        """P(LLR < 0) under the mixture: the raw detector bit error rate."""
        return float(np.dot(self.weights, q_function(np.sqrt(self.means / 2.0))))


def fold_llrs(llrs: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """Map LLRs to the all-zeros-codeword convention (channel adapter)."""
    return np.asarray(llrs, dtype=float) * (1.0 - 2.0 * np.asarray(bits))


def _kmeanspp_centers(x: np.ndarray, J: int, rng) -> np.ndarray:
    centers = [x[rng.integers(x.size)]]
    for _ in range(J - 1):
        d2 = np.min((x[:, None] - np.array(centers)) ** 2, axis=1)
        tot = d2.sum()
        if tot <= 0:
            centers.append(x[rng.integers(x.size)])
            continue
        centers.append(x[rng.choice(x.size, p=d2 / tot)])
    return np.array(centers)


def fit_mixture_em(
    llr_samples: np.ndarray,
    J: int = 3,
    seed: int = 0,
    max_iters: int = 500,
    tol: float = 1e-8,
    restarts: int = 5,
) -> GaussianMixture:
    """EM fit of a J-component symmetric Gaussian mixture to folded LLRs.

    The symmetry constraint (variance = 2 * mean) is enforced at every
    M-step, which has the closed form mu = sqrt(1 + <x^2>) - 1 per
    component.  Converged when the per-sample log-likelihood gain drops
    below `tol`; best of `restarts` seeded k-means++ initializations wins.
    """
    x = np.asarray(llr_samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty sample set")
    if J < 1:
        raise ValueError("J must be >= 1")
    rng = np.random.default_rng(seed)
    x2 = x**2

    best = None
    best_ll = -np.inf
    for _ in range(restarts):
        centers = np.abs(_kmeanspp_centers(np.abs(x), J, rng))
        mu = np.maximum(np.sqrt(1.0 + centers**2) - 1.0, 1e-6)
        pi = np.full(J, 1.0 / J)
        prev_ll = -np.inf
        for _ in range(max_iters):
            mu_s = np.maximum(mu, 1e-8)
            log_comp = (
                np.log(np.maximum(pi, 1e-300))
                - 0.5 * np.log(4.0 * np.pi * mu_s)
                - (x[:, None] - mu_s) ** 2 / (4.0 * mu_s)
            )
            norm = logsumexp(log_comp, axis=1)
            ll = float(np.mean(norm))
            resp = np.exp(log_comp - norm[:, None])
            nk = resp.sum(axis=0)
            alive = nk > 1e-12
            pi = nk / x.size
            mean_x2 = np.where(alive, resp.T @ x2 / np.maximum(nk, 1e-300), mu**2 + 2 * mu)
            mu = np.where(alive, np.sqrt(1.0 + mean_x2) - 1.0, mu)
            if ll - prev_ll < tol and np.isfinite(prev_ll):
                break
            prev_ll = ll
        if ll > best_ll:
            best_ll = ll
            best = (pi.copy(), mu.copy())
    pi, mu = best
    pi = np.maximum(pi, 0.0)
    pi /= pi.sum()
    return GaussianMixture(pi, np.maximum(mu, 0.0))


# -- density evolution ----------------------------------------------------


@dataclass
class Profiles:
    """Degree profiles of an LDPC ensemble (edge and node perspective)."""

    var_degrees: np.ndarray
    lambda_edge: np.ndarray
    lambda_node: np.ndarray
    chk_degrees: np.ndarray
    rho_edge: np.ndarray

    @classmethod
    def of(cls, code) -> "Profiles":
        return cls(
            code.var_degrees,
            code.lambda_edge,
            code.lambda_node,
            code.chk_degrees,
            code.rho_edge,
        )

    @classmethod
    def regular(cls, dv: int, dc: int) -> "Profiles":
        return cls(
            np.array([dv]), np.array([1.0]), np.array([1.0]),
            np.array([dc]), np.array([1.0]),
        )


@dataclass
class DeState:
    """Running density-evolution state for one turbo iteration."""

    mixture: GaussianMixture
    m_bc: float = 0.0
    i_c: int = 0
    i_d: int = 1


def de_bit_update(
    mixture: GaussianMixture, m_bc: float, profiles: Profiles
) -> tuple[np.ndarray, np.ndarray]:
    """Bit-to-check message density: component means mu_j + (i-1) m_bc with
    weights pi_j lambda_i, flattened over (component, degree)."""
    means = mixture.means[:, None] + (profiles.var_degrees[None, :] - 1) * m_bc
    weights = mixture.weights[:, None] * profiles.lambda_edge[None, :]
    return means.ravel(), weights.ravel()


def de_check_update(
    means: np.ndarray, weights: np.ndarray, profiles: Profiles,
    psi: PsiTable | None = None,
) -> float:
    """Check-to-bit mean via the psi transfer, averaged over check degrees."""
    psi = psi or psi_table()
    s = float(np.dot(weights, psi.psi(means)))
    if s <= _PSI_ARG_EPS:  # all-zero messages stay zero exactly
        return 0.0
    s = min(s, 1.0 - _PSI_ARG_EPS)
    out = 0.0
    for j, rho in zip(profiles.chk_degrees, profiles.rho_edge):
        out += rho * psi.psi_inv(s ** (j - 1))
    return out


@dataclass
class DeResult:
    feedback_trajectory: list      # m_{MMSE<-D} after each turbo iteration
    m_bc: float                    # final check-to-bit mean
    p_b: float                     # predicted bit error probability
    decoded: bool                  # message mean reached the certainty cap


def prior_variance_from_feedback(m_feedback: float, psi: PsiTable | None = None) -> float:
    """Map a decoder-feedback LLR mean to a residual symbol variance.

    E_s * (1 - E[tanh(L/2)]) with L ~ N(m, 2m): the soft-symbol MSE implied
    by a consistent Gaussian feedback density.  This is the single point
    where decoder-side analysis couples back into the detector model.
    """
    psi = psi or psi_table()
    return float(np.clip(1.0 - psi.psi(np.asarray(m_feedback)), 0.0, 1.0))


def de_run(
    mixture: GaussianMixture,
    profiles: Profiles,
    i_c_max: int,
    i_d_max: int = 1,
    detector_response=None,
    psi: PsiTable | None = None,
) -> DeResult:
    """Gaussian-approximation DE through the decoder, with optional turbo
    coupling back into a detector model.

    Each turbo iteration restarts the decoder (m_bc = 0) on the current
    channel mixture and runs i_c_max bit/check updates (early exit at the
    certainty cap).  The mean passed back to the detector is the node-
    perspective a-posteriori check-message sum; if `detector_response` is
    given it maps the implied residual prior variance to the next turbo
    iteration's channel mixture.  The final error probability follows the
    intrinsic-mean logistic rule.
    """
    psi = psi or psi_table()
    trajectory = []
    mix = mixture
    decoded = False
    m_bc = 0.0
    for i_d in range(1, i_d_max + 1):
        state = DeState(mix, m_bc=0.0, i_d=i_d)
        for i_c in range(1, i_c_max + 1):
            means, weights = de_bit_update(state.mixture, state.m_bc, profiles)
            state.m_bc = de_check_update(means, weights, profiles, psi)
            state.i_c = i_c
            if state.m_bc >= DE_CAP:
                state.m_bc = DE_CAP
                decoded = True
                break
        m_bc = state.m_bc
        m_fb = float(np.dot(profiles.lambda_node,
                            profiles.var_degrees * m_bc))
        trajectory.append(m_fb)
        if i_d < i_d_max and detector_response is not None:
            mix = detector_response(prior_variance_from_feedback(m_fb, psi))
    m_intr = trajectory[-1] + mix.channel_mean()
    p_b = float(expit(-m_intr))
    return DeResult(trajectory, m_bc, p_b, decoded)


def de_decodes(
    mixture: GaussianMixture, profiles: Profiles, i_c_max: int = 1000,
    psi: PsiTable | None = None,
) -> bool:
    """True when DE drives the check-message mean to the certainty cap."""
    return de_run(mixture, profiles, i_c_max, psi=psi).decoded


def threshold_sigma(
    profiles: Profiles,
    lo: float = 0.3,
    hi: float = 2.0,
    i_c_max: int = 1000,
    rel_width: float = 1e-4,
    psi: PsiTable | None = None,
) -> float:
    """Decoding threshold sigma* over the biAWGN channel (LLR mean 2/sigma^2)
    by bisection; channels with sigma < sigma* decode."""
    psi = psi or psi_table()

    def decodes(sigma: float) -> bool:
        mix = GaussianMixture(np.array([1.0]), np.array([2.0 / sigma**2]))
        return de_decodes(mix, profiles, i_c_max, psi)

    if not decodes(lo):
        raise ValueError("lower bracket does not decode; widen the bracket")
    if decodes(hi):
        raise ValueError("upper bracket decodes; widen the bracket")
    while (hi - lo) > rel_width * lo:
        mid = 0.5 * (lo + hi)
        if decodes(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def threshold_error_probability(sigma_star: float) -> float:
    """Pre-decoding bit error probability at the decoding threshold."""
    return float(q_function(1.0 / sigma_star))


def residual_error_fraction(
    profiles: Profiles,
    sigma_star: float,
    noise_margin: float = 1.02,
    i_c_max: int = 1000,
    psi: PsiTable | None = None,
) -> float:
    """Fraction of bits left in error when the channel sits just past the
    threshold (noise scaled by `noise_margin`), from the DE fixed point."""
    psi = psi or psi_table()
    sigma = sigma_star * noise_margin
    m_ch = 2.0 / sigma**2
    mix = GaussianMixture(np.array([1.0]), np.array([m_ch]))
    m_bc = 0.0
    for _ in range(i_c_max):
        means, weights = de_bit_update(mix, m_bc, profiles)
        new = de_check_update(means, weights, profiles, psi)
        if abs(new - m_bc) < 1e-10:
            m_bc = new
            break
        m_bc = new
    post = m_ch + profiles.var_degrees * m_bc
    return float(np.dot(profiles.lambda_node, q_function(np.sqrt(post / 2.0))))


# -- finite blocklength ----------------------------------------------------


@dataclass
class FiniteLengthModel:
    """Parameters of the per-codeword error model for short codes."""

    p_th: float          # channel error probability at the DE threshold
    n_c: int             # codeword length
    alpha: float         # residual bit error fraction past the threshold

    def __post_init__(self):
        if not (0.0 < self.p_th < 1.0):
            raise ValueError("p_th must lie in (0, 1)")
        if self.n_c < 1:
            raise ValueError("n_c must be >= 1")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must lie in [0, 1]")


@dataclass
class FiniteLengthPrediction:
    p_block: np.ndarray   # per-row block error probability
    p_bit: np.ndarray     # per-row bit error probability
    frame_avg: float      # average over rows


def predict_pce_finite(
    p_0: np.ndarray, p_th: float, n_c: int, alpha: float
) -> FiniteLengthPrediction:
    """Finite-blocklength error prediction for row codewords.

    The observed pre-decoding error rate of a length-n_c codeword is
    modeled as N(p_0, p_0 (1 - p_0) / n_c); a block fails when it exceeds
    the threshold error probability, and a failed block retains a fraction
    alpha of erroneous bits.
    """
    model = FiniteLengthModel(p_th, n_c, alpha)
    p0 = np.atleast_1d(np.asarray(p_0, dtype=float))
    if np.any(p0 < 0) or np.any(p0 >= 1):
        raise ValueError("p_0 must lie in [0, 1)")
    sigma = np.sqrt(p0 * (1.0 - p0) / model.n_c)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (model.p_th - p0) / sigma
    p_block = np.where(
        sigma > 0, q_function(np.where(sigma > 0, z, 0.0)),
        (p0 > model.p_th).astype(float),
    )
    p_bit = model.alpha * p_block
    return FiniteLengthPrediction(p_block, p_bit, float(np.mean(p_bit)))
