"""Two-stage joint-subcarrier carrier phase recovery.

Stage 1 (NLPC) filters the subcarrier intensity waveforms with a real MxM
MIMO response to predict and remove the fast intensity-driven nonlinear
phase distortion.  Stage 2 (PPNC) smooths and interpolates pilot-derived
phasors with a bank of P parallel 2Mx2M Wiener filters to remove the
residual slow phase noise.  Both filter sets are trained by regularized
least squares on training frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.linalg import cho_factor, cho_solve

from .core import SymbolFrame, is_pow2, mimo_convolve_overlap_save
from .tx import PilotSchedule


@dataclass(frozen=True)
class NlpcFilter:
    """Real MxM matrix impulse response over lags -n_c..n_c, applied by
    overlap-save with block length n_fft, on mean-removed intensities."""

    taps: np.ndarray            # (2*n_c+1, M, M) float64
    n_fft: int
    mean_intensity: np.ndarray  # (M,)

    def __post_init__(self):
        t = np.asarray(self.taps, dtype=np.float64)
        if t.ndim != 3 or t.shape[0] % 2 == 0 or t.shape[1] != t.shape[2]:
            raise ValueError("taps must have shape (2*n_c+1, M, M)")
        if not np.all(np.isfinite(t)):
            raise ValueError("taps must be finite")
        if not is_pow2(self.n_fft) or self.n_fft <= t.shape[0]:
            raise ValueError("n_fft must be a power of two exceeding 2*n_c+1")
        object.__setattr__(self, "taps", t)
        object.__setattr__(self, "mean_intensity",
                           np.asarray(self.mean_intensity, dtype=np.float64))

    @property
    def n_c(self) -> int:
        return (self.taps.shape[0] - 1) // 2

    @property
    def n_subcarriers(self) -> int:
        return self.taps.shape[1]


@dataclass(frozen=True)
class PpncFilterBank:
    """P parallel complex 2Mx2M responses over pilot lags -n_d..n_d, one per
    intra-period offset p = 0..P-1 from the preceding pilot."""

    taps: np.ndarray  # (P, 2*n_d+1, 2M, 2M) complex128
    period: int

    def __post_init__(self):
        t = np.asarray(self.taps, dtype=np.complex128)
        if (t.ndim != 4 or t.shape[0] != self.period or t.shape[1] % 2 == 0
                or t.shape[2] != t.shape[3] or t.shape[2] % 2 != 0):
            raise ValueError("taps must have shape (P, 2*n_d+1, 2M, 2M)")
        if self.period < 2:
            raise ValueError("period must be >= 2")
        if not np.all(np.isfinite(t.view(np.float64))):
            raise ValueError("taps must be finite")
        object.__setattr__(self, "taps", t)

    @property
    def n_d(self) -> int:
        return (self.taps.shape[1] - 1) // 2

    @property
    def n_streams(self) -> int:
        return self.taps.shape[2]


@dataclass
class PhaseEstimate:
    theta: np.ndarray | None = None  # (M, K) radians
    psi: np.ndarray | None = None    # (2M, K) complex phasors


def compute_intensities(frame: SymbolFrame) -> np.ndarray:
    """Per-subcarrier polarization-summed intensities, shape (M, K)."""
    r = frame.streams
    return np.abs(r[0::2]) ** 2 + np.abs(r[1::2]) ** 2


def nlpc_apply(frame: SymbolFrame, filt: NlpcFilter) -> tuple[SymbolFrame, np.ndarray]:
    """Rotate each subcarrier (both polarizations identically) by the phase
    predicted from the mean-removed intensities."""
    if filt.n_subcarriers != frame.n_subcarriers:
        raise ValueError("filter subcarrier count does not match frame")
    di = compute_intensities(frame) - filt.mean_intensity[:, None]
    theta = mimo_convolve_overlap_save(di, filt.taps, filt.n_fft)
    rot = np.exp(-1j * theta)
    y = frame.streams * np.repeat(rot, 2, axis=0)
    return frame.with_streams(y), theta


def _lagged_features(values: np.ndarray, n_lags_half: int) -> np.ndarray:
    """(K, M*(2N+1)) design matrix of edge-replicated lagged values.

    Column (m, i) holds values[m, k - N + i]; a filter row acting on this
    layout corresponds to taps reversed along the lag axis.
    """
    m, k = values.shape
    padded = np.pad(values, [(0, 0), (n_lags_half, n_lags_half)], mode="edge")
    win = sliding_window_view(padded, 2 * n_lags_half + 1, axis=1)  # (M, K, 2N+1)
    return win.transpose(1, 0, 2).reshape(k, m * (2 * n_lags_half + 1))


def nlpc_target_phases(frame: SymbolFrame, unwrap: bool = True,
                       smooth: int = 9) -> np.ndarray:
    """Training targets: per-subcarrier common-rotation phase estimates
    arg(x* r summed over polarizations), continuous along time.

    Plain sample-by-sample unwrapping is fragile: a single noisy angle
    difference beyond pi inserts a spurious 2*pi step that corrupts every
    later target.  Instead the angle of a short moving average of the
    correlation phasors is unwrapped (its noise is far below the slip
    threshold) and each raw angle is wrapped onto the branch nearest that
    smooth reference, which preserves full per-symbol detail.
    """
    if frame.known_symbols is None:
        raise ValueError("training frames need known_symbols")
    x, r = frame.known_symbols, frame.streams
    corr = np.conj(x[0::2]) * r[0::2] + np.conj(x[1::2]) * r[1::2]
    theta = np.angle(corr)
    if not unwrap:
        return theta
    if smooth > 1:
        kernel = np.ones(smooth) / smooth
        pad = smooth // 2
        padded = np.pad(corr, [(0, 0), (pad, pad)], mode="edge")
        ref = np.stack([np.convolve(row, kernel, mode="valid")
                        for row in padded])
        ref_theta = np.unwrap(np.angle(ref), axis=1)
        return ref_theta + np.angle(np.exp(1j * (theta - ref_theta)))
    return np.unwrap(theta, axis=1)


def nlpc_train(frames, n_c: int, n_fft: int, ridge: float = 1e-6,
               sample_mask: np.ndarray | None = None) -> NlpcFilter:
    """Least-squares fit of the intensity-to-phase MIMO response.

    ``ridge`` is relative to the mean diagonal of the normal matrix.
    ``sample_mask`` optionally restricts which symbols contribute target
    rows (their intensity context is still used).
    """
    if isinstance(frames, SymbolFrame):
        frames = [frames]
    m = frames[0].n_subcarriers
    if not is_pow2(n_fft) or n_fft <= 2 * n_c + 1:
        raise ValueError("n_fft must be a power of two exceeding 2*n_c+1")
    n_feat = m * (2 * n_c + 1)
    total = sum(f.n_symbols for f in frames)
    if total <= n_feat:
        raise ValueError("not enough training symbols for the filter length")

    mean_i = np.zeros(m)
    for f in frames:
        mean_i += compute_intensities(f).sum(axis=1)
    mean_i /= total

    xtx = np.zeros((n_feat, n_feat))
    xty = np.zeros((n_feat, m))
    for f in frames:
        di = compute_intensities(f) - mean_i[:, None]
        theta = nlpc_target_phases(f)
        theta = theta - theta.mean(axis=1, keepdims=True)
        feats = _lagged_features(di, n_c)
        if sample_mask is not None:
            feats = feats[sample_mask]
            theta = theta[:, sample_mask]
        xtx += feats.T @ feats
        xty += feats.T @ theta.T
    lam = ridge * np.trace(xtx) / n_feat
    if lam == 0 and np.linalg.matrix_rank(xtx) < n_feat:
        raise np.linalg.LinAlgError(
            "normal matrix is rank deficient; use ridge > 0")
    xtx[np.diag_indices_from(xtx)] += lam
    coef = cho_solve(cho_factor(xtx), xty)  # (n_feat, M)
    # undo the feature-layout lag reversal: column (m_in, i) <-> lag n_c - i
    taps = coef.reshape(m, 2 * n_c + 1, m)[:, ::-1, :].transpose(1, 2, 0)
    return NlpcFilter(np.ascontiguousarray(taps), n_fft, mean_i)


def _pilot_phasors(frame: SymbolFrame) -> tuple[np.ndarray, np.ndarray]:
    """Received/known pilot phasor samples, shape (2M, n_pilots)."""
    if frame.known_symbols is None:
        raise ValueError("pilot phasors need known_symbols")
    mask = frame.pilot_mask
    x = frame.known_symbols[:, mask]
    if np.any(x == 0):
        raise ValueError("zero-valued pilot symbol")
    return frame.streams[:, mask] / x, np.flatnonzero(mask)


def _pilot_windows(phi: np.ndarray, n_d: int) -> np.ndarray:
    """(n_pilots, 2M*(2*n_d+1)) stacked windows phi[:, n - n'] for
    n' = -n_d..n_d, edge-replicated at the ends."""
    padded = np.pad(phi, [(0, 0), (n_d, n_d)], mode="edge")
    win = sliding_window_view(padded, 2 * n_d + 1, axis=1)  # (2M, Np, 2n_d+1)
    # reverse so window index i corresponds to phi[:, n - n'] with n' = i - n_d
    win = win[:, :, ::-1]
    return win.transpose(1, 2, 0).reshape(phi.shape[1], -1)


def ppnc_train(frames, schedule: PilotSchedule, n_d: int,
               ridge: float = 1e-6, complex_taps: bool = True,
               weighted: bool = True,
               sample_mask: np.ndarray | None = None) -> PpncFilterBank:
    """Fit the per-offset pilot-phasor interpolation filters by least
    squares against the full-rate reference phasors y/x.

    With ``weighted`` (the default) each output stream i solves a separate
    weighted problem with weights |x_i(k)|^2, i.e. it minimizes the symbol
    error |y_i - psi*x_i|^2 directly.  The unweighted objective fits the
    phasor residual |y_i/x_i - psi|^2, which over-weights low-amplitude
    symbols whose phasors are noisiest (a factor 1/|x|^2) and measurably
    degrades the filters under shaped QAM.
    """
    if isinstance(frames, SymbolFrame):
        frames = [frames]
    n_streams = frames[0].streams.shape[0]
    p_len = schedule.period
    n_feat = n_streams * (2 * n_d + 1)
    # one normal system per (offset, output stream) when weighted, since the
    # weights differ per output; a single shared system otherwise
    n_sys = n_streams if weighted else 1
    xtx = np.zeros((p_len, n_sys, n_feat, n_feat), dtype=np.complex128)
    xty = np.zeros((p_len, n_feat, n_streams), dtype=np.complex128)
    for f in frames:
        phi, pilot_idx = _pilot_phasors(f)
        ref = f.streams / f.known_symbols  # full-rate reference phasors
        wins = _pilot_windows(phi, n_d)    # (Np, n_feat)
        n_pil = phi.shape[1]
        for p in range(p_len):
            k = pilot_idx + p
            valid = k < f.n_symbols
            n_idx = np.arange(n_pil)[valid]
            k = k[valid]
            if sample_mask is not None:
                keep = sample_mask[k]
                n_idx, k = n_idx[keep], k[keep]
            a = wins[n_idx]
            if weighted:
                w = np.abs(f.known_symbols[:, k]) ** 2  # (2M, nk)
                for i in range(n_streams):
                    aw = a * w[i][:, None]
                    xtx[p, i] += a.conj().T @ aw
                    xty[p, :, i] += a.conj().T @ (w[i] * ref[i, k])
            else:
                xtx[p, 0] += a.conj().T @ a
                xty[p] += a.conj().T @ ref[:, k].T
    taps = np.empty((p_len, 2 * n_d + 1, n_streams, n_streams),
                    dtype=np.complex128)
    for p in range(p_len):
        coef = np.empty((n_feat, n_streams), dtype=np.complex128)
        for i in range(n_streams):
            g = xtx[p, i if weighted else 0]
            rhs = xty[p, :, i]
            if not complex_taps:
                g, rhs = np.real(g), np.real(rhs)
            else:
                g = g.copy()
            lam = ridge * np.real(np.trace(g)) / n_feat
            g[np.diag_indices_from(g)] += lam
            coef[:, i] = np.linalg.solve(g, rhs)
        taps[p] = coef.reshape(2 * n_d + 1, n_streams, n_streams).transpose(0, 2, 1)
    return PpncFilterBank(taps, p_len)


@dataclass(frozen=True)
class PilotMeanCorrector:
    """Global pilot-mean phase remover with a trained per-stream offset.

    The offset compensates the systematic difference between the residual
    phase seen at (constant-modulus) pilot instants and at data instants;
    it is estimated on a training frame with known data symbols.
    """

    offset: np.ndarray  # (2M,) radians, added to the pilot-mean phase

    @staticmethod
    def train(frame: SymbolFrame) -> "PilotMeanCorrector":
        if frame.known_symbols is None:
            raise ValueError("corrector training needs known_symbols")
        phi, _ = _pilot_phasors(frame)
        pilot_phase = np.angle(phi.sum(axis=1))
        keep = ~frame.pilot_mask
        corr = np.sum(np.conj(frame.known_symbols[:, keep])
                      * frame.streams[:, keep], axis=1)
        data_phase = np.angle(corr)
        return PilotMeanCorrector(np.angle(np.exp(1j * (data_phase
                                                        - pilot_phase))))


def pilot_mean_phase_removal(frame: SymbolFrame,
                             corrector: PilotMeanCorrector | None = None
                             ) -> SymbolFrame:
    """Remove one constant phase per stream, estimated from pilot instants
    only (the infinite-memory limit of pilot-phasor Wiener smoothing)."""
    phi, _ = _pilot_phasors(frame)
    mean = phi.sum(axis=1)
    if np.any(np.abs(mean) == 0):
        raise ValueError("degenerate pilot phasor sum")
    phase = np.angle(mean)
    if corrector is not None:
        phase = phase + corrector.offset
    rot = np.exp(-1j * phase)
    return frame.with_streams(frame.streams * rot[:, None])


def ppnc_apply(frame: SymbolFrame, bank: PpncFilterBank,
               schedule: PilotSchedule) -> tuple[SymbolFrame, np.ndarray]:
    """Interpolate pilot phasors to full rate and derotate every sample by
    the estimated phase.  Only pilot-instant samples are read as phasors."""
    if bank.n_streams != frame.streams.shape[0]:
        raise ValueError("filter bank stream count does not match frame")
    if bank.period != schedule.period:
        raise ValueError("filter bank period does not match the pilot schedule")
    phi, pilot_idx = _pilot_phasors(frame)
    n_d = bank.n_d
    wins = _pilot_windows(phi, n_d)  # (Np, 2M*(2n_d+1))
    k_all = np.arange(frame.n_symbols)
    rel = k_all - schedule.offset
    n_of_k = np.clip(rel // schedule.period, 0, phi.shape[1] - 1)
    p_of_k = rel - (rel // schedule.period) * schedule.period  # always in [0, P)
    psi = np.empty((bank.n_streams, frame.n_symbols), dtype=np.complex128)
    flat = bank.taps.reshape(bank.period, 2 * n_d + 1, bank.n_streams,
                             bank.n_streams)
    for p in range(bank.period):
        sel = p_of_k == p
        if not np.any(sel):
            continue
        # coefficient layout matching _pilot_windows: (lag n', input stream)
        coef = flat[p].transpose(0, 2, 1).reshape(-1, bank.n_streams)
        psi[:, sel] = (wins[n_of_k[sel]] @ coef).T
    z = frame.streams * np.exp(-1j * np.angle(psi))
    return frame.with_streams(z), psi


def jscpr_run(frame: SymbolFrame, nlpc: NlpcFilter | None,
              ppnc: PpncFilterBank | None,
              schedule: PilotSchedule | None = None
              ) -> tuple[SymbolFrame, PhaseEstimate]:
    """Cascade NLPC then PPNC; either stage may be disabled (None)."""
    est = PhaseEstimate()
    out = frame
    if nlpc is not None:
        out, est.theta = nlpc_apply(out, nlpc)
    if ppnc is not None:
        if schedule is None:
            raise ValueError("PPNC needs the pilot schedule")
        out, est.psi = ppnc_apply(out, ppnc, schedule)
    return out, est
