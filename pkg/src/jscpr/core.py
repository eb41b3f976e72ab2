"""Foundational signal types and DSP primitives.

Everything here is pure and deterministic: complex sample/symbol containers,
a power-of-two FFT contract, root-raised-cosine pulse design, direct and
overlap-save MIMO convolution, frequency shifting and rational resampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.signal import resample_poly
from scipy.signal.windows import tukey


def is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


def _as_complex(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.complex128)
    if not np.all(np.isfinite(a.view(np.float64))):
        raise ValueError("samples must be finite (no NaN/Inf)")
    return a


@dataclass(frozen=True)
class ComplexSeq:
    """A complex baseband sample stream at a fixed sample rate [Hz]."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        object.__setattr__(self, "samples", _as_complex(self.samples))
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True)
class Waveform:
    """A bundle of equal-length sample streams sharing one sample rate.

    For a dual-polarization aggregate the channels are (pol-x, pol-y);
    ``center_offsets`` records the carrier offset of each channel [Hz].
    """

    channels: tuple[ComplexSeq, ...]
    center_offsets: tuple[float, ...] = ()

    def __post_init__(self):
        chans = tuple(self.channels)
        if not chans:
            raise ValueError("waveform needs at least one channel")
        n, fs = len(chans[0]), chans[0].sample_rate
        for c in chans:
            if len(c) != n or c.sample_rate != fs:
                raise ValueError("all channels must share length and sample rate")
        offs = tuple(self.center_offsets) or (0.0,) * len(chans)
        if len(offs) != len(chans):
            raise ValueError("center_offsets must match channel count")
        object.__setattr__(self, "channels", chans)
        object.__setattr__(self, "center_offsets", offs)

    @property
    def sample_rate(self) -> float:
        return self.channels[0].sample_rate

    @property
    def n_samples(self) -> int:
        return len(self.channels[0])

    def arrays(self) -> np.ndarray:
        """Channel samples stacked as a (n_channels, n_samples) array."""
        return np.stack([c.samples for c in self.channels])

    @staticmethod
    def from_arrays(arrs, sample_rate, center_offsets=()):
        chans = tuple(ComplexSeq(a, sample_rate) for a in arrs)
        return Waveform(chans, tuple(center_offsets))


@dataclass
class SymbolFrame:
    """2M symbol streams (subcarrier m on streams 2m, 2m+1 for pol x/y).

    ``pilot_mask`` marks pilot instants, identical across streams.
    ``known_symbols`` optionally carries the transmitted reference sequence.
    """

    streams: np.ndarray  # (2M, K) complex128
    symbol_rate: float
    pilot_mask: np.ndarray  # (K,) bool
    known_symbols: np.ndarray | None = None  # (2M, K) complex128

    def __post_init__(self):
        self.streams = _as_complex(np.atleast_2d(self.streams))
        if self.streams.shape[0] % 2 != 0:
            raise ValueError("stream count must be even (two polarizations)")
        self.pilot_mask = np.asarray(self.pilot_mask, dtype=bool)
        if self.pilot_mask.shape != (self.streams.shape[1],):
            raise ValueError("pilot_mask length must match symbol count")
        if self.known_symbols is not None:
            self.known_symbols = _as_complex(self.known_symbols)
            if self.known_symbols.shape != self.streams.shape:
                raise ValueError("known_symbols shape must match streams")

    @property
    def n_subcarriers(self) -> int:
        return self.streams.shape[0] // 2

    @property
    def n_symbols(self) -> int:
        return self.streams.shape[1]

    def with_streams(self, streams) -> "SymbolFrame":
        return SymbolFrame(streams, self.symbol_rate, self.pilot_mask,
                           self.known_symbols)


# ---------------------------------------------------------------------------
# FFT contract (power-of-two lengths only)

def _check_pow2(n: int):
    if not is_pow2(n):
        raise ValueError(f"length {n} is not a power of two")


def fft_forward(seq: ComplexSeq) -> ComplexSeq:
    _check_pow2(len(seq))
    return ComplexSeq(np.fft.fft(seq.samples), seq.sample_rate)


def fft_inverse(seq: ComplexSeq) -> ComplexSeq:
    _check_pow2(len(seq))
    return ComplexSeq(np.fft.ifft(seq.samples), seq.sample_rate)


def fft_pow2(x: np.ndarray, axis: int = -1) -> np.ndarray:
    _check_pow2(x.shape[axis])
    return np.fft.fft(x, axis=axis)


def ifft_pow2(x: np.ndarray, axis: int = -1) -> np.ndarray:
    _check_pow2(x.shape[axis])
    return np.fft.ifft(x, axis=axis)


# ---------------------------------------------------------------------------
# Root-raised-cosine pulse

def rrc_taps(roll_off: float, samples_per_symbol: int, span_symbols: int) -> np.ndarray:
    """Unit-energy time-domain RRC taps spanning ``span_symbols`` symbols.

    The singular points t=0 and t=+-T/(4*roll_off) use the analytic limits.
    A raised-cosine taper over the outer 30% of the span suppresses the
    truncation-edge ISI of low-roll-off designs.
    """
    if not 0 < roll_off <= 1:
        raise ValueError("roll_off must be in (0, 1]")
    if samples_per_symbol < 2:
        raise ValueError("need at least 2 samples per symbol")
    if span_symbols % 2 != 0:
        raise ValueError("span_symbols must be even")
    b = roll_off
    n = span_symbols * samples_per_symbol
    t = (np.arange(n + 1) - n / 2) / samples_per_symbol  # in symbol periods
    h = np.empty_like(t)
    eps = 1e-10
    at_zero = np.abs(t) < eps
    at_sing = np.abs(np.abs(t) - 1.0 / (4 * b)) < eps
    regular = ~(at_zero | at_sing)
    tr = t[regular]
    h[regular] = (np.sin(np.pi * tr * (1 - b)) +
                  4 * b * tr * np.cos(np.pi * tr * (1 + b))) / (
                      np.pi * tr * (1 - (4 * b * tr) ** 2))
    h[at_zero] = 1 - b + 4 * b / np.pi
    h[at_sing] = (b / np.sqrt(2)) * (
        (1 + 2 / np.pi) * np.sin(np.pi / (4 * b)) +
        (1 - 2 / np.pi) * np.cos(np.pi / (4 * b)))
    h *= tukey(n + 1, 0.3)
    return h / np.sqrt(np.sum(h ** 2))


def rrc_response(freqs_hz: np.ndarray, symbol_rate: float, roll_off: float) -> np.ndarray:
    """Square root of the raised-cosine spectrum, evaluated at ``freqs_hz``.

    The underlying raised cosine is 1 in the flat region and satisfies the
    symbol-rate folding (Nyquist) criterion exactly.
    """
    b = roll_off
    f = np.abs(np.asarray(freqs_hz, dtype=float))
    f1 = 0.5 * symbol_rate * (1 - b)
    f2 = 0.5 * symbol_rate * (1 + b)
    rc = np.zeros_like(f)
    rc[f <= f1] = 1.0
    trans = (f > f1) & (f < f2)
    rc[trans] = 0.5 * (1 + np.cos(np.pi / (b * symbol_rate) * (f[trans] - f1)))
    return np.sqrt(rc)


# ---------------------------------------------------------------------------
# MIMO convolution

def _taps_array(taps) -> np.ndarray:
    t = np.asarray(taps)
    if t.ndim != 3 or t.shape[0] % 2 == 0:
        raise ValueError("taps must have shape (2N+1, M_out, M_in)")
    return t


def _edge_pad(x: np.ndarray, n: int) -> np.ndarray:
    if n == 0:
        return x
    return np.pad(x, [(0, 0)] * (x.ndim - 1) + [(n, n)], mode="edge")


def mimo_convolve_direct(inputs, taps) -> np.ndarray:
    """out_m(k) = sum_{m',j} H[j, m, m'] * in_{m'}(k - j), j = -N..N.

    Inputs are edge-replicated by N samples on each side, so the output has
    the same length as the input.
    """
    t = _taps_array(taps)
    x = np.atleast_2d(np.asarray(inputs))
    n_lag, m_out, m_in = t.shape
    if x.shape[0] != m_in:
        raise ValueError(f"expected {m_in} input streams, got {x.shape[0]}")
    n = (n_lag - 1) // 2
    xp = _edge_pad(x, n)
    dtype = np.result_type(x.dtype, t.dtype)
    out = np.zeros((m_out, x.shape[1]), dtype=dtype)
    for mo in range(m_out):
        for mi in range(m_in):
            out[mo] += np.convolve(xp[mi], t[:, mo, mi], mode="valid")
    return out


def mimo_convolve_overlap_save(inputs, taps, n_fft: int) -> np.ndarray:
    """Overlap-save FFT implementation of :func:`mimo_convolve_direct`."""
    t = _taps_array(taps)
    x = np.atleast_2d(np.asarray(inputs))
    n_lag, m_out, m_in = t.shape
    n = (n_lag - 1) // 2
    if not is_pow2(n_fft):
        raise ValueError("n_fft must be a power of two")
    if n_fft <= 2 * n + 1:
        raise ValueError("n_fft must exceed the filter length 2N+1")
    if x.shape[0] != m_in:
        raise ValueError(f"expected {m_in} input streams, got {x.shape[0]}")
    k = x.shape[1]
    step = n_fft - 2 * n
    xp = _edge_pad(x, n)
    # pad the tail so every block is full length
    n_blocks = -(-k // step)
    total = n_blocks * step + 2 * n
    xp = np.pad(xp, [(0, 0), (0, total - xp.shape[1])], mode="edge")
    hf = np.fft.fft(np.concatenate([t, np.zeros((n_fft - n_lag, m_out, m_in),
                                                dtype=t.dtype)]), axis=0)
    out = np.empty((m_out, n_blocks * step), dtype=np.complex128)
    for blk in range(n_blocks):
        seg = xp[:, blk * step:blk * step + n_fft]
        xf = np.fft.fft(seg, axis=1)
        yf = np.einsum("foi,if->of", hf, xf)
        y = np.fft.ifft(yf, axis=1)
        out[:, blk * step:(blk + 1) * step] = y[:, 2 * n:]
    out = out[:, :k]
    if np.issubdtype(np.result_type(x.dtype, t.dtype), np.complexfloating):
        return out
    return out.real


# ---------------------------------------------------------------------------
# Frequency shift / resampling

def frequency_shift(seq: ComplexSeq, offset_hz: float) -> ComplexSeq:
    if abs(offset_hz) > seq.sample_rate / 2:
        raise ValueError("shift beyond Nyquist")
    if offset_hz == 0:
        return seq
    n = np.arange(len(seq))
    rot = np.exp(2j * np.pi * offset_hz * n / seq.sample_rate)
    return ComplexSeq(seq.samples * rot, seq.sample_rate)


def shift_array(x: np.ndarray, offset_hz: float, sample_rate: float) -> np.ndarray:
    if offset_hz == 0:
        return x
    n = np.arange(x.shape[-1])
    return x * np.exp(2j * np.pi * offset_hz * n / sample_rate)


def roll_shift_array(x: np.ndarray, offset_hz: float, sample_rate: float) -> np.ndarray:
    """Frequency shift snapped to the DFT grid (circularly consistent).

    The offset is rounded to the nearest spectral bin, so shift by +f then -f
    is an exact identity on periodic frames.
    """
    n = x.shape[-1]
    bins = int(round(offset_hz * n / sample_rate))
    if bins == 0:
        return x.copy()
    return np.fft.ifft(np.roll(np.fft.fft(x, axis=-1), bins, axis=-1), axis=-1)


def resample(seq: ComplexSeq, new_rate: float) -> ComplexSeq:
    """Rational-ratio resampling with a sharp kaiser anti-alias filter."""
    if not new_rate > 0:
        raise ValueError("new_rate must be positive")
    ratio = Fraction(new_rate / seq.sample_rate).limit_denominator(10 ** 6)
    y = resample_poly(seq.samples, ratio.numerator, ratio.denominator,
                      window=("kaiser", 12.0))
    return ComplexSeq(y, seq.sample_rate * float(ratio))
