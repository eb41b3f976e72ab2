"""Transmitter chain: shaped 64-QAM symbols, pilots, RRC subcarrier
multiplexing, WDM multiplexing and laser phase noise."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (ComplexSeq, SymbolFrame, Waveform, roll_shift_array,
                   rrc_response, shift_array)

_QAM64_LEVELS = np.array([-7, -5, -3, -1, 1, 3, 5, 7], dtype=float)


@dataclass(frozen=True)
class ConstellationSpec:
    """Square 64-QAM with Maxwell-Boltzmann point probabilities.

    Points are scaled so that the mean symbol energy under ``probabilities``
    is exactly 1.
    """

    points: np.ndarray          # (64,) complex
    probabilities: np.ndarray   # (64,)
    mb_lambda: float

    @staticmethod
    def shaped_64qam(mb_lambda: float) -> "ConstellationSpec":
        re, im = np.meshgrid(_QAM64_LEVELS, _QAM64_LEVELS)
        pts = (re + 1j * im).ravel()
        energy = np.abs(pts) ** 2
        w = np.exp(-mb_lambda * energy)
        p = w / w.sum()
        pts = pts / np.sqrt(np.sum(p * energy))
        return ConstellationSpec(pts, p, mb_lambda)

    def entropy_bits(self) -> float:
        p = self.probabilities[self.probabilities > 0]
        return float(-np.sum(p * np.log2(p)))


def mb_lambda_for_entropy(target_entropy: float, tol: float = 1e-6) -> float:
    """Shaping parameter whose 64-QAM entropy matches ``target_entropy`` bits.

    Attainable range is (2, 6]: lambda=0 is uniform (6 bit), lambda->inf
    collapses onto the four innermost points (2 bit).
    """
    if not 2.0 < target_entropy <= 6.0:
        raise ValueError("target entropy must lie in (2, 6] bits")
    if abs(target_entropy - 6.0) < tol:
        return 0.0
    lo, hi = 0.0, 1.0
    while ConstellationSpec.shaped_64qam(hi).entropy_bits() > target_entropy:
        hi *= 2
        if hi > 1e6:
            raise RuntimeError("bisection bracket failed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        h = ConstellationSpec.shaped_64qam(mid).entropy_bits()
        if abs(h - target_entropy) < tol:
            return mid
        if h > target_entropy:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _default_pilot_alphabet() -> np.ndarray:
    return (np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / np.sqrt(2))


@dataclass(frozen=True)
class PilotSchedule:
    """Pilots every ``period`` symbols starting at ``offset``, shared by all
    streams. The alphabet is constant-modulus QPSK at unit (RMS) power."""

    period: int
    offset: int = 0
    alphabet: np.ndarray = field(default_factory=_default_pilot_alphabet)

    def __post_init__(self):
        if self.period < 2:
            raise ValueError("pilot period must be >= 2")
        if not 0 <= self.offset < self.period:
            raise ValueError("pilot offset must lie in [0, period)")

    def mask(self, n_symbols: int) -> np.ndarray:
        m = np.zeros(n_symbols, dtype=bool)
        m[self.offset::self.period] = True
        return m

    def values(self, n_pilots: int) -> np.ndarray:
        reps = -(-n_pilots // len(self.alphabet))
        return np.tile(self.alphabet, reps)[:n_pilots]


@dataclass(frozen=True)
class SubcarrierPlan:
    n_subcarriers: int
    symbol_rate: float        # baud per subcarrier
    spacing: float            # Hz
    roll_off: float

    def __post_init__(self):
        if self.n_subcarriers < 1:
            raise ValueError("need at least one subcarrier")
        if self.spacing < self.symbol_rate * (1 + self.roll_off) - 1e-6:
            raise ValueError("subcarrier spacing causes spectral overlap")

    def center_offsets(self) -> np.ndarray:
        m = np.arange(self.n_subcarriers)
        return (m - (self.n_subcarriers - 1) / 2) * self.spacing

    @property
    def occupied_bandwidth(self) -> float:
        return ((self.n_subcarriers - 1) * self.spacing
                + self.symbol_rate * (1 + self.roll_off))


@dataclass(frozen=True)
class LaserSpec:
    linewidth: float  # Hz

    def __post_init__(self):
        if self.linewidth < 0:
            raise ValueError("linewidth must be nonnegative")


def generate_frame(seed, n_symbols: int, spec: ConstellationSpec,
                   plan: SubcarrierPlan, pilots: PilotSchedule) -> SymbolFrame:
    """Draw i.i.d. shaped symbols for all 2M streams and stamp in pilots."""
    if n_symbols % pilots.period != 0:
        raise ValueError("n_symbols must be a multiple of the pilot period")
    rng = np.random.default_rng(seed)
    n_streams = 2 * plan.n_subcarriers
    idx = rng.choice(len(spec.points), size=(n_streams, n_symbols),
                     p=spec.probabilities)
    streams = spec.points[idx]
    mask = pilots.mask(n_symbols)
    vals = pilots.values(int(mask.sum()))
    streams[:, mask] = vals[None, :]
    return SymbolFrame(streams, plan.symbol_rate, mask,
                       known_symbols=streams.copy())


def _shape_spectrum(symbols: np.ndarray, sps: int, symbol_rate: float,
                    roll_off: float) -> np.ndarray:
    """Frequency-domain RRC shaping of one symbol stream (circular)."""
    k = len(symbols)
    up = np.zeros(k * sps, dtype=np.complex128)
    up[::sps] = symbols
    f = np.fft.fftfreq(k * sps, d=1.0 / (sps * symbol_rate))
    h = np.sqrt(sps) * rrc_response(f, symbol_rate, roll_off)
    return np.fft.ifft(np.fft.fft(up) * h)


def modulate_subcarriers(frame: SymbolFrame, plan: SubcarrierPlan,
                         samples_per_symbol: int) -> Waveform:
    """RRC-shape each subcarrier, shift to its offset, and sum per
    polarization. Returns a two-channel (pol-x, pol-y) waveform."""
    fs = samples_per_symbol * plan.symbol_rate
    offsets = plan.center_offsets()
    guard = np.max(np.abs(offsets)) + plan.symbol_rate * (1 + plan.roll_off) / 2
    if guard > fs / 2:
        raise ValueError("aggregate sample rate too low for the subcarrier plan")
    n = frame.n_symbols * samples_per_symbol
    out = np.zeros((2, n), dtype=np.complex128)
    for m in range(plan.n_subcarriers):
        for pol in range(2):
            w = _shape_spectrum(frame.streams[2 * m + pol], samples_per_symbol,
                                plan.symbol_rate, plan.roll_off)
            out[pol] += roll_shift_array(w, offsets[m], fs)
    return Waveform.from_arrays(out, fs)


def apply_phase_noise(waveform: Waveform, laser: LaserSpec, seed) -> Waveform:
    """Rotate all channels by one Wiener phase process (variance
    2*pi*linewidth*dt per sample)."""
    if laser.linewidth == 0:
        return waveform
    rng = np.random.default_rng(seed)
    dt = 1.0 / waveform.sample_rate
    inc = rng.normal(0.0, np.sqrt(2 * np.pi * laser.linewidth * dt),
                     size=waveform.n_samples)
    phi = np.cumsum(inc)
    rot = np.exp(1j * phi)
    return Waveform.from_arrays(waveform.arrays() * rot, waveform.sample_rate,
                                waveform.center_offsets)


def mux_wdm(channel_waveforms: list[Waveform], channel_spacing: float) -> Waveform:
    """Shift the per-channel dual-pol waveforms onto a grid centered on zero
    frequency and sum them polarization-wise."""
    n_ch = len(channel_waveforms)
    if n_ch == 0:
        raise ValueError("no channels to multiplex")
    fs = channel_waveforms[0].sample_rate
    offsets = (np.arange(n_ch) - (n_ch - 1) / 2) * channel_spacing
    acc = None
    for wf, off in zip(channel_waveforms, offsets):
        if abs(off) > fs / 2:
            raise ValueError("WDM grid exceeds Nyquist")
        shifted = roll_shift_array(wf.arrays(), off, fs)
        acc = shifted if acc is None else acc + shifted
    return Waveform.from_arrays(acc, fs)
