"""SNR estimation and the real-multiplication complexity model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SymbolFrame, is_pow2

SNR_CAP_DB = 80.0


@dataclass(frozen=True)
class SnrReport:
    per_stream_db: np.ndarray
    aggregate_db: float
    capped: bool


def estimate_snr(frame: SymbolFrame, known_symbols: np.ndarray | None = None,
                 pilot_mask: np.ndarray | None = None,
                 extra_exclude: np.ndarray | None = None) -> SnrReport:
    """Per-stream and aggregate SNR against the known symbols.

    Pilot instants (and any ``extra_exclude`` instants) are excluded.  The
    aggregate is the linear-domain mean over streams, in dB.  Zero error
    energy is capped at +80 dB and flagged.
    """
    x = known_symbols if known_symbols is not None else frame.known_symbols
    if x is None:
        raise ValueError("SNR estimation needs known symbols")
    mask = pilot_mask if pilot_mask is not None else frame.pilot_mask
    keep = ~np.asarray(mask, dtype=bool)
    if extra_exclude is not None:
        keep &= ~np.asarray(extra_exclude, dtype=bool)
    if keep.sum() == 0:
        raise ValueError("no symbols left after exclusions")
    z = frame.streams[:, keep]
    xr = np.asarray(x)[:, keep]
    sig = np.sum(np.abs(xr) ** 2, axis=1)
    err = np.sum(np.abs(z - xr) ** 2, axis=1)
    cap_lin = 10 ** (SNR_CAP_DB / 10)
    capped = bool(np.any(err <= sig / cap_lin))
    snr_lin = np.minimum(np.divide(sig, np.maximum(err, 1e-300)), cap_lin)
    per_stream = 10 * np.log10(snr_lin)
    aggregate = 10 * np.log10(np.mean(snr_lin))
    return SnrReport(per_stream, float(aggregate), capped)


def complexity(n_fft: int, n_c: int, m: int, n_d: int) -> tuple[float, float, float]:
    """Real multiplications per complex symbol for the two recovery stages.

    Stage 1 (frequency-domain MIMO intensity filter):
        0.5 * n_fft/(n_fft - 2*n_c) * (log2(n_fft) + (3*m + 13)/2)
    Stage 2 (time-domain pilot filter bank):
        4*m*(2*n_d + 1) + 3
    """
    if not is_pow2(n_fft):
        raise ValueError("n_fft must be a power of two")
    if n_fft <= 2 * n_c:
        raise ValueError("n_fft must exceed 2*n_c")
    if m < 1 or n_d < 0 or n_c < 0:
        raise ValueError("invalid filter dimensions")
    c_nlpc = 0.5 * n_fft / (n_fft - 2 * n_c) * (np.log2(n_fft) + (3 * m + 13) / 2)
    c_ppnc = 4 * m * (2 * n_d + 1) + 3
    return float(c_nlpc), float(c_ppnc), float(c_nlpc + c_ppnc)
