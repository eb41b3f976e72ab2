"""Binary file formats: trained filter container and waveform container.

Both formats are little-endian with a magic string header and are required
to round-trip bit-exactly.
"""

from __future__ import annotations

import struct

import numpy as np

from .core import Waveform
from .recovery import NlpcFilter, PpncFilterBank

FILTER_MAGIC = b"JSCPR1"
WAVEFORM_MAGIC = b"WVFM1"
_WAVEFORM_VERSION = 1


class FormatError(ValueError):
    pass


def _write_f64(fh, arr):
    fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_f64(fh, count, what):
    raw = fh.read(8 * count)
    if len(raw) != 8 * count:
        raise FormatError(f"truncated file while reading {what}")
    return np.frombuffer(raw, dtype="<f8").copy()


def _complex_to_interleaved(arr):
    a = np.ascontiguousarray(arr, dtype=np.complex128)
    return a.view(np.float64)


def save_filters(path, nlpc: NlpcFilter | None, ppnc: PpncFilterBank | None):
    """Write the trained filters: magic, dimensions (M, N_c, N_FFT, P, N_d),
    then row-major float64 taps (real, then interleaved complex)."""
    m = nlpc.n_subcarriers if nlpc is not None else (
        ppnc.n_streams // 2 if ppnc is not None else 0)
    if m == 0:
        raise ValueError("nothing to serialize")
    n_c = nlpc.n_c if nlpc is not None else -1
    n_fft = nlpc.n_fft if nlpc is not None else 0
    p = ppnc.period if ppnc is not None else 0
    n_d = ppnc.n_d if ppnc is not None else -1
    with open(path, "wb") as fh:
        fh.write(FILTER_MAGIC)
        fh.write(struct.pack("<5i", m, n_c, n_fft, p, n_d))
        if nlpc is not None:
            _write_f64(fh, nlpc.mean_intensity)
            _write_f64(fh, nlpc.taps)
        if ppnc is not None:
            _write_f64(fh, _complex_to_interleaved(ppnc.taps))


def load_filters(path) -> tuple[NlpcFilter | None, PpncFilterBank | None]:
    with open(path, "rb") as fh:
        magic = fh.read(len(FILTER_MAGIC))
        if magic != FILTER_MAGIC:
            raise FormatError("bad filter file magic")
        header = fh.read(20)
        if len(header) != 20:
            raise FormatError("truncated filter header")
        m, n_c, n_fft, p, n_d = struct.unpack("<5i", header)
        nlpc = None
        if n_c >= 0:
            mean_i = _read_f64(fh, m, "mean intensity")
            taps = _read_f64(fh, (2 * n_c + 1) * m * m, "stage-1 taps")
            nlpc = NlpcFilter(taps.reshape(2 * n_c + 1, m, m), n_fft, mean_i)
        ppnc = None
        if p > 0:
            count = p * (2 * n_d + 1) * (2 * m) * (2 * m) * 2
            flat = _read_f64(fh, count, "stage-2 taps")
            taps = flat.view(np.complex128).reshape(p, 2 * n_d + 1, 2 * m, 2 * m)
            ppnc = PpncFilterBank(taps, p)
        if fh.read(1):
            raise FormatError("trailing bytes in filter file")
    return nlpc, ppnc


def export_waveform(waveform: Waveform, path):
    """Write magic, version, channel count, sample rate, center offsets and
    per-channel interleaved float64 real/imag samples."""
    with open(path, "wb") as fh:
        fh.write(WAVEFORM_MAGIC)
        fh.write(struct.pack("<iiq", _WAVEFORM_VERSION, len(waveform.channels),
                             waveform.n_samples))
        fh.write(struct.pack("<d", waveform.sample_rate))
        _write_f64(fh, np.asarray(waveform.center_offsets))
        for ch in waveform.channels:
            _write_f64(fh, _complex_to_interleaved(ch.samples))


def import_waveform(path) -> Waveform:
    with open(path, "rb") as fh:
        magic = fh.read(len(WAVEFORM_MAGIC))
        if magic != WAVEFORM_MAGIC:
            raise FormatError("bad waveform file magic")
        header = fh.read(16)
        if len(header) != 16:
            raise FormatError("truncated waveform header")
        version, n_ch, n_samp = struct.unpack("<iiq", header)
        if version != _WAVEFORM_VERSION:
            raise FormatError(f"unsupported waveform version {version}")
        raw = fh.read(8)
        if len(raw) != 8:
            raise FormatError("truncated waveform header")
        (fs,) = struct.unpack("<d", raw)
        offsets = _read_f64(fh, n_ch, "center offsets")
        chans = []
        for _ in range(n_ch):
            flat = _read_f64(fh, 2 * n_samp, "samples")
            chans.append(flat.view(np.complex128))
        if fh.read(1):
            raise FormatError("trailing bytes in waveform file")
    return Waveform.from_arrays(chans, fs, offsets.tolist())
