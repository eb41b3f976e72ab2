"""Unit tests for configuration loading, file formats and the CLI."""

import numpy as np
import pytest

from jscpr.cli import main
from jscpr.config import (ConfigError, LinkConfig, config_from_dict,
                          load_config)
from jscpr.core import Waveform
from jscpr.iofmt import (FormatError, export_waveform, import_waveform,
                         load_filters, save_filters)
from jscpr.recovery import NlpcFilter, PpncFilterBank

FAST_CONFIG = """
subcarriers: {count: 2, symbol_rate_gbd: 4.0, spacing_ghz: 4.4, roll_off: 0.1}
pilots: {period: 16}
fiber: {length_km: 0.0}
laser: {linewidth_khz: 0.0}
dsp: {n_c: 8, n_fft: 128, n_d: 1}
sim:
  samples_per_symbol: 4
  train_symbols: 4096
  test_symbols: 2048
  edge_guard_symbols: 64
run:
  schemes: [MPR, NLPC, PPNC, JSCPR]
  launch_powers_dbm: [0.0]
"""


@pytest.fixture
def fast_config_path(tmp_path):
    p = tmp_path / "fast.yaml"
    p.write_text(FAST_CONFIG)
    return str(p)


class TestConfig:
    def test_defaults_valid(self):
        cfg = LinkConfig()
        cfg.validate()
        assert cfg.subcarriers.count == 4
        assert cfg.dsp.n_c == 250

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"bogus": {}})

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"fiber": {"lenth_km": 100}})

    def test_unknown_scheme_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"run": {"schemes": ["XYZ"]}})

    def test_equal_seeds_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"run": {"seeds": {"data_train": 7,
                                                "data_test": 7}}})

    def test_symbol_count_period_divisibility(self):
        with pytest.raises(ConfigError):
            config_from_dict({"sim": {"train_symbols": 1000},
                              "pilots": {"period": 32}})

    def test_load_from_file(self, fast_config_path):
        cfg = load_config(fast_config_path)
        assert cfg.subcarriers.count == 2
        assert cfg.run.schemes == ("MPR", "NLPC", "PPNC", "JSCPR")


class TestFilterFile:
    def _filters(self):
        rng = np.random.default_rng(0)
        nlpc = NlpcFilter(rng.standard_normal((9, 2, 2)), 64,
                          rng.random(2) + 1.0)
        ppnc = PpncFilterBank(
            rng.standard_normal((8, 3, 4, 4))
            + 1j * rng.standard_normal((8, 3, 4, 4)), 8)
        return nlpc, ppnc

    def test_round_trip(self, tmp_path):
        nlpc, ppnc = self._filters()
        path = tmp_path / "filters.bin"
        save_filters(path, nlpc, ppnc)
        n2, p2 = load_filters(path)
        assert np.array_equal(n2.taps, nlpc.taps)
        assert np.array_equal(n2.mean_intensity, nlpc.mean_intensity)
        assert n2.n_fft == nlpc.n_fft
        assert np.array_equal(p2.taps, ppnc.taps)
        assert p2.period == ppnc.period

    def test_single_stage_round_trip(self, tmp_path):
        nlpc, ppnc = self._filters()
        p1 = tmp_path / "nlpc.bin"
        save_filters(p1, nlpc, None)
        n2, p2 = load_filters(p1)
        assert p2 is None and np.array_equal(n2.taps, nlpc.taps)
        p2path = tmp_path / "ppnc.bin"
        save_filters(p2path, None, ppnc)
        n3, p3 = load_filters(p2path)
        assert n3 is None and np.array_equal(p3.taps, ppnc.taps)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOTJSCPR" + b"\x00" * 64)
        with pytest.raises(FormatError):
            load_filters(path)

    def test_truncation_detected(self, tmp_path):
        nlpc, ppnc = self._filters()
        path = tmp_path / "filters.bin"
        save_filters(path, nlpc, ppnc)
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(FormatError):
            load_filters(path)

    def test_trailing_bytes_detected(self, tmp_path):
        nlpc, _ = self._filters()
        path = tmp_path / "filters.bin"
        save_filters(path, nlpc, None)
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(FormatError):
            load_filters(path)


class TestWaveformFile:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((2, 100)) + 1j * rng.standard_normal((2, 100))
        wf = Waveform.from_arrays(x, 3.25e9, (-1.0, 1.0))
        path = tmp_path / "wave.bin"
        export_waveform(wf, path)
        back = import_waveform(path)
        assert np.array_equal(back.arrays(), x)
        assert back.sample_rate == 3.25e9
        assert back.center_offsets == (-1.0, 1.0)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"XXXXX" + b"\x00" * 32)
        with pytest.raises(FormatError):
            import_waveform(path)

    def test_truncation(self, tmp_path):
        rng = np.random.default_rng(2)
        wf = Waveform.from_arrays(rng.standard_normal((1, 32)) + 0j, 1.0)
        path = tmp_path / "wave.bin"
        export_waveform(wf, path)
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(FormatError):
            import_waveform(path)


class TestCli:
    def test_complexity_command(self, fast_config_path, capsys):
        assert main(["complexity", fast_config_path]) == 0
        out = capsys.readouterr().out
        assert "RM/2D" in out

    def test_simulate_command(self, fast_config_path, capsys):
        assert main(["simulate", fast_config_path]) == 0
        out = capsys.readouterr().out
        for scheme in ("MPR", "NLPC", "PPNC", "JSCPR"):
            assert scheme in out

    def test_sweep_deterministic_csv(self, fast_config_path, tmp_path):
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        assert main(["sweep", fast_config_path, "--out", str(out1),
                     "--no-timings"]) == 0
        assert main(["sweep", fast_config_path, "--out", str(out2),
                     "--no-timings"]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_train_apply_round_trip(self, fast_config_path, tmp_path, capsys):
        filters = tmp_path / "filters.bin"
        wave = tmp_path / "wave.bin"
        result = tmp_path / "result.csv"
        assert main(["train", fast_config_path, "--out", str(filters)]) == 0
        assert main(["export-waveform", fast_config_path, "--out",
                     str(wave)]) == 0
        assert main(["apply", "--filters", str(filters), "--in", str(wave),
                     "--out", str(result), "--config", fast_config_path]) == 0
        header, row = result.read_text().strip().splitlines()
        assert header.startswith("snr_db_aggregate")
        assert float(row.split(",")[0]) > 40.0  # loopback link

    def test_missing_config_is_error(self, capsys):
        assert main(["simulate", "/nonexistent/config.yaml"]) == 1
        assert "error:" in capsys.readouterr().err

    def test_bad_config_key_is_error(self, tmp_path, capsys):
        p = tmp_path / "bad.yaml"
        p.write_text("fiber: {lenth_km: 1.0}\n")
        assert main(["simulate", str(p)]) == 1
        assert "error:" in capsys.readouterr().err
