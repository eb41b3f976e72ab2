"""Experiment configuration: strict YAML loading into typed sections."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import yaml

from .channel import FiberParams, RamanParams, StepConfig
from .tx import LaserSpec, PilotSchedule, SubcarrierPlan

SCHEMES = ("MPR", "CPR", "NLPC", "PPNC", "JSCPR")


class ConfigError(ValueError):
    pass


def _from_dict(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section '{where}' must be a mapping")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown key(s) in '{where}': {sorted(unknown)}")
    return cls(**data)


@dataclass(frozen=True)
class ConstellationConfig:
    entropy_bits: float = 5.0


@dataclass(frozen=True)
class SubcarrierConfig:
    count: int = 4
    symbol_rate_gbd: float = 45.0
    spacing_ghz: float = 47.25
    roll_off: float = 0.05

    def plan(self) -> SubcarrierPlan:
        return SubcarrierPlan(self.count, self.symbol_rate_gbd * 1e9,
                              self.spacing_ghz * 1e9, self.roll_off)


@dataclass(frozen=True)
class PilotConfig:
    period: int = 32
    offset: int = 0

    def schedule(self) -> PilotSchedule:
        return PilotSchedule(self.period, self.offset)


@dataclass(frozen=True)
class WdmConfig:
    channels: int = 1
    spacing_ghz: float = 200.0


@dataclass(frozen=True)
class FiberConfig:
    length_km: float = 250.0
    attenuation_db_per_km: float = 0.2
    gamma_per_w_km: float = 1.27
    dispersion_ps_nm_km: float = 17.0
    reference_wavelength_nm: float = 1550.0

    def params(self) -> FiberParams:
        return FiberParams(self.length_km, self.attenuation_db_per_km,
                           self.gamma_per_w_km, self.dispersion_ps_nm_km,
                           self.reference_wavelength_nm)


@dataclass(frozen=True)
class RamanConfig:
    pump_attenuation_db_per_km: float = 0.25
    gain_efficiency_per_w_km: float = 0.4
    spontaneous_factor: float = 1.13
    target_rx_power_dbm_per_channel: float = -15.0

    def params(self) -> RamanParams:
        return RamanParams(0.0, self.pump_attenuation_db_per_km,
                           self.gain_efficiency_per_w_km,
                           self.spontaneous_factor,
                           self.target_rx_power_dbm_per_channel)


@dataclass(frozen=True)
class LaserConfig:
    linewidth_khz: float = 0.0

    def spec(self) -> LaserSpec:
        return LaserSpec(self.linewidth_khz * 1e3)


@dataclass(frozen=True)
class DspConfig:
    n_c: int = 250
    n_fft: int = 2048
    n_d: int = 2
    ridge: float = 1e-6
    ppnc_ridge: float = 3e-2
    ppnc_ridge_grid: tuple = (3e-3, 1e-2, 3e-2, 1e-1, 3e-1)
    ppnc_complex_taps: bool = True
    cpr_bandwidth_grid: tuple = (1e-4, 3e-4, 1e-3, 3e-3, 1e-2)


@dataclass(frozen=True)
class SimConfig:
    samples_per_symbol: int = 8
    train_symbols: int = 65536
    test_symbols: int = 32768
    edge_guard_symbols: int = 1024
    step_policy: str = "adaptive"
    max_step_km: float = 2.0
    max_nonlinear_phase_rad: float = 1e-3

    def step_config(self) -> StepConfig:
        return StepConfig(self.step_policy, self.max_step_km,
                          self.max_nonlinear_phase_rad)


@dataclass(frozen=True)
class SeedConfig:
    data_train: int = 1001
    data_test: int = 2002
    noise: int = 3003
    phase: int = 4004


@dataclass(frozen=True)
class RunConfig:
    schemes: tuple = ("MPR", "JSCPR")
    launch_powers_dbm: tuple = (10.0,)
    seeds: SeedConfig = field(default_factory=SeedConfig)


@dataclass(frozen=True)
class LinkConfig:
    constellation: ConstellationConfig = field(default_factory=ConstellationConfig)
    subcarriers: SubcarrierConfig = field(default_factory=SubcarrierConfig)
    pilots: PilotConfig = field(default_factory=PilotConfig)
    wdm: WdmConfig = field(default_factory=WdmConfig)
    fiber: FiberConfig = field(default_factory=FiberConfig)
    raman: RamanConfig = field(default_factory=RamanConfig)
    laser: LaserConfig = field(default_factory=LaserConfig)
    dsp: DspConfig = field(default_factory=DspConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def validate(self):
        plan = self.subcarriers.plan()  # raises on spacing overlap
        if self.run.seeds.data_train == self.run.seeds.data_test:
            raise ConfigError("train and test data seeds must be disjoint")
        for s in self.run.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"unknown scheme '{s}' (choose from {SCHEMES})")
        if self.sim.train_symbols % self.pilots.period or \
                self.sim.test_symbols % self.pilots.period:
            raise ConfigError("symbol counts must be multiples of the pilot period")
        fs = self.sim.samples_per_symbol * plan.symbol_rate
        band = plan.occupied_bandwidth
        if self.wdm.channels > 1:
            band = (self.wdm.channels - 1) * self.wdm.spacing_ghz * 1e9 + band
        if band > fs:
            raise ConfigError("samples_per_symbol too low for the occupied band")
        if self.dsp.n_fft <= 2 * self.dsp.n_c:
            raise ConfigError("n_fft must exceed 2*n_c")
        if 2 * self.sim.edge_guard_symbols >= self.sim.test_symbols:
            raise ConfigError("edge guard consumes the whole test frame")
        return self


_SECTIONS = {
    "constellation": ConstellationConfig,
    "subcarriers": SubcarrierConfig,
    "pilots": PilotConfig,
    "wdm": WdmConfig,
    "fiber": FiberConfig,
    "raman": RamanConfig,
    "laser": LaserConfig,
    "dsp": DspConfig,
    "sim": SimConfig,
}


def config_from_dict(data: dict) -> LinkConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(data) - set(_SECTIONS) - {"run"}
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")
    kwargs = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            section = dict(data[name])
            if name == "dsp":
                for key in ("cpr_bandwidth_grid", "ppnc_ridge_grid"):
                    if key in section:
                        section[key] = tuple(section[key])
            kwargs[name] = _from_dict(cls, section, name)
    if "run" in data:
        run = dict(data["run"])
        unknown = set(run) - {"schemes", "launch_powers_dbm", "seeds"}
        if unknown:
            raise ConfigError(f"unknown key(s) in 'run': {sorted(unknown)}")
        seeds = _from_dict(SeedConfig, run.get("seeds", {}), "run.seeds")
        kwargs["run"] = RunConfig(tuple(run.get("schemes", ("MPR", "JSCPR"))),
                                  tuple(float(p) for p in
                                        run.get("launch_powers_dbm", (10.0,))),
                                  seeds)
    return LinkConfig(**kwargs).validate()


def load_config(path) -> LinkConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return config_from_dict(data or {})
