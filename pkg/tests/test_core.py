"""Unit tests for the signal containers and DSP primitives."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jscpr.core import (ComplexSeq, SymbolFrame, Waveform, fft_forward,
                        fft_inverse, frequency_shift, is_pow2,
                        mimo_convolve_direct, mimo_convolve_overlap_save,
                        next_pow2, resample, roll_shift_array, rrc_response,
                        rrc_taps, shift_array)


class TestContainers:
    def test_complex_seq_rejects_nan(self):
        with pytest.raises(ValueError):
            ComplexSeq(np.array([1.0, np.nan]), 1.0)

    def test_complex_seq_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            ComplexSeq(np.zeros(4), 0.0)

    def test_waveform_requires_equal_lengths(self):
        a = ComplexSeq(np.zeros(4), 1.0)
        b = ComplexSeq(np.zeros(5), 1.0)
        with pytest.raises(ValueError):
            Waveform((a, b))

    def test_waveform_arrays_round_trip(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((2, 16)) + 1j * rng.standard_normal((2, 16))
        wf = Waveform.from_arrays(x, 10.0, (0.0, 0.0))
        assert np.array_equal(wf.arrays(), x)
        assert wf.sample_rate == 10.0
        assert wf.n_samples == 16

    def test_symbol_frame_checks_shapes(self):
        with pytest.raises(ValueError):
            SymbolFrame(np.zeros((3, 8)), 1.0, np.zeros(8, bool))
        with pytest.raises(ValueError):
            SymbolFrame(np.zeros((2, 8)), 1.0, np.zeros(7, bool))
        with pytest.raises(ValueError):
            SymbolFrame(np.zeros((2, 8)), 1.0, np.zeros(8, bool),
                        known_symbols=np.zeros((2, 9)))

    def test_symbol_frame_properties(self):
        f = SymbolFrame(np.zeros((4, 8)), 1.0, np.zeros(8, bool))
        assert f.n_subcarriers == 2
        assert f.n_symbols == 8


class TestFftContract:
    def test_pow2_helpers(self):
        assert is_pow2(1) and is_pow2(64)
        assert not is_pow2(0) and not is_pow2(48)
        assert next_pow2(48) == 64

    def test_fft_rejects_non_pow2(self):
        seq = ComplexSeq(np.zeros(12), 1.0)
        with pytest.raises(ValueError):
            fft_forward(seq)

    def test_fft_round_trip(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        seq = ComplexSeq(x, 2.0)
        back = fft_inverse(fft_forward(seq))
        assert np.allclose(back.samples, x, atol=1e-12)


class TestRrc:
    def test_taps_unit_energy(self):
        h = rrc_taps(0.05, 8, 64)
        assert abs(np.sum(h ** 2) - 1.0) < 1e-12

    def test_taps_symmetric(self):
        h = rrc_taps(0.2, 4, 16)
        assert np.allclose(h, h[::-1], atol=1e-14)

    def test_taps_cascade_isi(self):
        """RC cascade sampled at symbol instants is close to a delta."""
        sps = 8
        h = rrc_taps(0.05, sps, 64)
        rc = np.convolve(h, h)
        center = len(rc) // 2
        peak = rc[center]
        isi = rc[center % sps::sps].copy()
        isi[center // sps] = 0.0
        assert np.max(np.abs(isi)) / peak < 1e-3

    def test_taps_validation(self):
        with pytest.raises(ValueError):
            rrc_taps(0.0, 8, 16)
        with pytest.raises(ValueError):
            rrc_taps(0.5, 1, 16)
        with pytest.raises(ValueError):
            rrc_taps(0.5, 8, 15)

    def test_response_flat_and_nyquist(self):
        rs, b = 1.0, 0.25
        f = np.linspace(-1, 1, 4001)
        s = rrc_response(f, rs, b) ** 2
        flat = np.abs(f) <= 0.5 * rs * (1 - b) + 1e-12
        assert np.allclose(s[flat], 1.0)
        # folding criterion: G(f) + G(rs - f) == 1 across the transition
        ft = np.linspace(0.5 * rs * (1 - b), 0.5 * rs * (1 + b), 501)
        total = rrc_response(ft, rs, b) ** 2 + rrc_response(rs - ft, rs, b) ** 2
        assert np.allclose(total, 1.0, atol=1e-12)


def _random_mimo_instance(rng, m_in=None, m_out=None):
    m_in = m_in or rng.integers(1, 5)
    m_out = m_out or rng.integers(1, 5)
    n = rng.integers(0, 17)
    k = rng.integers(2 * n + 2, 200)
    taps = rng.standard_normal((2 * n + 1, m_out, m_in))
    x = rng.standard_normal((m_in, k))
    return x, taps


class TestMimoConvolution:
    def test_identity_filter(self):
        x = np.arange(12.0).reshape(2, 6)
        taps = np.zeros((3, 2, 2))
        taps[1] = np.eye(2)
        assert np.allclose(mimo_convolve_direct(x, taps), x)

    def test_lag_orientation(self):
        """A filter with only the +1 lag outputs x delayed by one sample."""
        x = np.array([[1.0, 2.0, 3.0, 4.0]])
        taps = np.zeros((3, 1, 1))
        taps[2, 0, 0] = 1.0  # j = +1 -> out(k) = x(k-1)
        out = mimo_convolve_direct(x, taps)
        assert np.allclose(out, [[1.0, 1.0, 2.0, 3.0]])  # edge-replicated

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(7)
        x, taps = _random_mimo_instance(rng)
        n = (taps.shape[0] - 1) // 2
        k = x.shape[1]
        ref = np.zeros((taps.shape[1], k))
        for mo in range(taps.shape[1]):
            for mi in range(taps.shape[2]):
                for j in range(-n, n + 1):
                    src = np.clip(np.arange(k) - j, 0, k - 1)
                    ref[mo] += taps[j + n, mo, mi] * x[mi, src]
        assert np.allclose(mimo_convolve_direct(x, taps), ref, atol=1e-12)

    def test_overlap_save_input_validation(self):
        x = np.zeros((2, 10))
        taps = np.zeros((5, 2, 2))
        with pytest.raises(ValueError):
            mimo_convolve_overlap_save(x, taps, 48)  # not a power of two
        with pytest.raises(ValueError):
            mimo_convolve_overlap_save(x, taps, 4)   # shorter than filter
        with pytest.raises(ValueError):
            mimo_convolve_direct(np.zeros((3, 10)), taps)

    def test_real_in_real_out(self):
        rng = np.random.default_rng(3)
        x, taps = _random_mimo_instance(rng)
        out = mimo_convolve_overlap_save(x, taps, 64)
        assert out.dtype == np.float64

    def test_complex_input_supported(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((2, 50)) + 1j * rng.standard_normal((2, 50))
        taps = rng.standard_normal((5, 2, 2))
        direct = mimo_convolve_direct(x, taps)
        os = mimo_convolve_overlap_save(x, taps, 32)
        assert np.max(np.abs(direct - os)) < 1e-10


class TestFrequencyShift:
    def test_shift_round_trip_exact_on_grid(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        fs = 64.0
        y = roll_shift_array(x, 7.0, fs)     # exactly 7 bins
        back = roll_shift_array(y, -7.0, fs)
        assert np.max(np.abs(back - x)) < 1e-12

    def test_roll_shift_snaps_to_bins(self):
        x = np.exp(2j * np.pi * 3 * np.arange(32) / 32)
        y = roll_shift_array(x, 2.4 / 32 * 32, 32.0)  # rounds to 2 bins
        expect = np.exp(2j * np.pi * 5 * np.arange(32) / 32)
        assert np.max(np.abs(y - expect)) < 1e-12

    def test_frequency_shift_matches_array_version(self):
        x = np.arange(8.0) + 0j
        seq = ComplexSeq(x, 16.0)
        a = frequency_shift(seq, 3.0).samples
        b = shift_array(x, 3.0, 16.0)
        assert np.allclose(a, b)

    def test_shift_beyond_nyquist_rejected(self):
        with pytest.raises(ValueError):
            frequency_shift(ComplexSeq(np.zeros(8), 4.0), 3.0)


class TestResample:
    def test_tone_preserved(self):
        fs = 100.0
        t = np.arange(1000) / fs
        x = np.exp(2j * np.pi * 5.0 * t)
        out = resample(ComplexSeq(x, fs), 150.0)
        assert out.sample_rate == pytest.approx(150.0)
        t2 = np.arange(len(out)) / out.sample_rate
        expect = np.exp(2j * np.pi * 5.0 * t2)
        mid = slice(100, len(out) - 100)
        err = np.mean(np.abs(out.samples[mid] - expect[mid]) ** 2)
        assert err < 1e-4


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_overlap_save_equals_direct_property(seed):
    rng = np.random.default_rng(seed)
    x, taps = _random_mimo_instance(rng)
    n = (taps.shape[0] - 1) // 2
    n_fft = next_pow2(max(2 * n + 2, rng.integers(2 * n + 2, 128)))
    direct = mimo_convolve_direct(x, taps)
    os = mimo_convolve_overlap_save(x, taps, n_fft)
    assert np.max(np.abs(direct - os)) < 1e-10
