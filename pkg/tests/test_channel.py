"""Unit tests for fiber propagation, Raman gain and ASE noise."""

import numpy as np
import pytest

from jscpr.channel import (FiberParams, PowerEvolution, RamanParams,
                           StepConfig, calibrate_raman, power_evolution,
                           ssfm_propagate)
from jscpr.core import Waveform


def _fiber(**kw):
    base = dict(length_km=80.0, attenuation_db_per_km=0.2,
                gamma_per_w_km=1.3, dispersion_ps_nm_km=17.0)
    base.update(kw)
    return FiberParams(**base)


NO_PUMP = RamanParams(0.0)


class TestParams:
    def test_alpha_conversion(self):
        f = _fiber(attenuation_db_per_km=0.2)
        # 0.2 dB/km over 1 km is a factor 10**-0.02 in power
        assert np.exp(-f.alpha_np_per_m * 1e3) == pytest.approx(10 ** -0.02)

    def test_beta2_sign_and_magnitude(self):
        f = _fiber()
        # D = 17 ps/nm/km at 1550 nm -> beta2 ~ -21.7 ps^2/km
        assert f.beta2_s2_per_m * 1e27 == pytest.approx(-21.7, abs=0.2)

    def test_negative_length_rejected(self):
        with pytest.raises(ValueError):
            _fiber(length_km=-1.0)

    def test_step_config_validation(self):
        with pytest.raises(ValueError):
            StepConfig(policy="bogus")
        with pytest.raises(ValueError):
            StepConfig(max_step_km=0.0)


class TestPowerEvolution:
    def test_passive_loss(self):
        pe = power_evolution(_fiber(), NO_PUMP)
        # 80 km at 0.2 dB/km = 16 dB loss
        loss_db = -10 * pe.log_gain(80e3) / np.log(10)
        assert loss_db == pytest.approx(16.0, abs=1e-9)

    def test_pump_gain_monotonic_toward_end(self):
        pe = power_evolution(_fiber(), RamanParams(0.5))
        g = pe.gain(np.linspace(0, 80e3, 200))
        # gain profile dips then recovers near the pumped fiber end
        assert np.argmin(g) not in (0, 199)

    def test_gain_integral_matches_quadrature(self):
        pe = power_evolution(_fiber(), RamanParams(0.4))
        z = np.linspace(10e3, 30e3, 20001)
        ref = np.trapezoid(pe.gain(z), z)
        assert pe.gain_integral(10e3, 30e3) == pytest.approx(ref, rel=1e-9)

    def test_pump_integral_closed_form(self):
        pe = power_evolution(_fiber(), RamanParams(0.4))
        z = np.linspace(0, 80e3, 200001)
        ref = np.trapezoid(pe.g_r * pe.pump_power(z), z)
        assert pe.pump_integral(0, 80e3) == pytest.approx(ref, rel=1e-7)


class TestCalibration:
    def test_hits_target(self):
        fiber = _fiber(length_km=250.0)
        raman = calibrate_raman(fiber, RamanParams(0.0), 10.0, -15.0)
        pe = PowerEvolution(fiber, raman)
        rx_dbm = 10.0 + 10 * pe.log_gain(fiber.length_m) / np.log(10)
        assert abs(rx_dbm - (-15.0)) < 0.01

    def test_target_below_passive_rejected(self):
        fiber = _fiber(length_km=10.0)  # passive RX = launch - 2 dB
        with pytest.raises(ValueError):
            calibrate_raman(fiber, RamanParams(0.0), 10.0, 0.0)


def _cw_waveform(power_w, n=4096, fs=10e9):
    amp = np.sqrt(power_w / 2)  # split across two polarizations
    x = np.full((2, n), amp, dtype=complex)
    return Waveform.from_arrays(x, fs)


class TestSsfm:
    def test_zero_dispersion_nonlinear_phase(self):
        """Constant envelope, no dispersion: phase = (8/9)*gamma*P*L_eff."""
        fiber = _fiber(dispersion_ps_nm_km=0.0, length_km=80.0)
        p = 5e-3
        wf = _cw_waveform(p)
        out = ssfm_propagate(wf, fiber, NO_PUMP, StepConfig(max_step_km=1.0))
        alpha = fiber.alpha_np_per_m
        l_eff = (1 - np.exp(-alpha * fiber.length_m)) / alpha
        expect = (8.0 / 9.0) * fiber.gamma_per_w_km / 1e3 * p * l_eff
        phase = np.angle(out.arrays()[0] / wf.arrays()[0])
        assert np.max(np.abs(phase - expect)) < 1e-6

    def test_dispersed_gaussian_closed_form(self):
        """Linear propagation of a Gaussian pulse matches the analytic
        solution A(L,t) = T0/sqrt(T0^2 - j*b2*L) * exp(-t^2/(2(T0^2 - j*b2*L)))."""
        fiber = _fiber(gamma_per_w_km=0.0, attenuation_db_per_km=0.0,
                       length_km=40.0)
        fs = 200e9
        n = 8192
        t = (np.arange(n) - n // 2) / fs
        t0 = 20e-12
        a0 = np.exp(-t ** 2 / (2 * t0 ** 2))
        wf = Waveform.from_arrays(np.stack([a0, a0]).astype(complex), fs)
        out = ssfm_propagate(wf, fiber, NO_PUMP, StepConfig(max_step_km=40.0))
        b2l = fiber.beta2_s2_per_m * fiber.length_m
        denom = t0 ** 2 - 1j * b2l
        ref = t0 / np.sqrt(denom) * np.exp(-t ** 2 / (2 * denom))
        got = out.arrays()[0]
        rel_l2 = np.linalg.norm(got - ref) / np.linalg.norm(ref)
        assert rel_l2 < 1e-6

    def test_self_convergence_slope(self):
        """Halving the step size divides the symmetric-splitting error by
        about four (global second order)."""
        fiber = _fiber(length_km=80.0)
        rng = np.random.default_rng(11)
        n, fs = 4096, 100e9
        spec = (rng.standard_normal((2, n)) + 1j * rng.standard_normal((2, n)))
        f = np.fft.fftfreq(n, 1 / fs)
        spec[:, np.abs(f) > 15e9] = 0.0
        x = np.fft.ifft(spec, axis=1)
        x *= np.sqrt(3e-3 / np.mean(np.sum(np.abs(x) ** 2, axis=0)))
        wf = Waveform.from_arrays(x, fs)

        def run(step_km):
            cfg = StepConfig(policy="uniform", max_step_km=step_km)
            return ssfm_propagate(wf, fiber, NO_PUMP, cfg).arrays()

        ref = run(0.25)
        errs = [np.linalg.norm(run(s) - ref) for s in (4.0, 2.0, 1.0)]
        slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert 1.7 <= slopes[-1] <= 2.3

    def test_noise_seed_reproducible(self):
        fiber = _fiber(length_km=50.0)
        wf = _cw_waveform(1e-3, n=1024)
        raman = RamanParams(0.3)
        a = ssfm_propagate(wf, fiber, raman, noise_seed=99).arrays()
        b = ssfm_propagate(wf, fiber, raman, noise_seed=99).arrays()
        c = ssfm_propagate(wf, fiber, raman, noise_seed=100).arrays()
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_no_noise_without_seed(self):
        fiber = _fiber(length_km=50.0, dispersion_ps_nm_km=0.0,
                       gamma_per_w_km=0.0)
        wf = _cw_waveform(1e-3, n=512)
        out = ssfm_propagate(wf, fiber, RamanParams(0.3))
        # deterministic pure loss/gain: envelope stays flat
        mag = np.abs(out.arrays())
        assert np.ptp(mag) / np.mean(mag) < 1e-12

    def test_ase_power_matches_psd_budget(self):
        """Accumulated ASE power approximates n_sp*h*nu*fs * integral g dz."""
        fiber = _fiber(length_km=100.0, dispersion_ps_nm_km=0.0,
                       gamma_per_w_km=0.0)
        raman = RamanParams(0.45)
        fs, n = 50e9, 1 << 15
        wf = Waveform.from_arrays(np.zeros((2, n), complex), fs)
        out = ssfm_propagate(wf, fiber, raman, noise_seed=5)
        measured = np.mean(np.abs(out.arrays()[0]) ** 2)
        pe = PowerEvolution(fiber, raman)
        nu = 299792458.0 / 1550e-9
        # each slice of noise is amplified by G(L)/G(z) after injection
        z = np.linspace(0, fiber.length_m, 20001)
        dens = pe.g_r * pe.pump_power(z) * pe.gain(fiber.length_m) / pe.gain(z)
        total = raman.spontaneous_factor * 6.62607015e-34 * nu * fs * \
            np.trapezoid(dens, z)
        assert measured == pytest.approx(total, rel=0.05)

    def test_requires_dual_polarization(self):
        wf = Waveform.from_arrays(np.zeros((1, 64), complex), 1e9)
        with pytest.raises(ValueError):
            ssfm_propagate(wf, _fiber(), NO_PUMP)

    def test_zero_length_identity(self):
        wf = _cw_waveform(1e-3, n=256)
        out = ssfm_propagate(wf, _fiber(length_km=0.0), NO_PUMP)
        assert np.array_equal(out.arrays(), wf.arrays())
