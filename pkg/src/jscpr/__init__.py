"""Subcarrier-multiplexed coherent fiber link simulator with two-stage
joint-subcarrier carrier phase recovery."""

from .core import (ComplexSeq, SymbolFrame, Waveform, fft_forward, fft_inverse,
                   frequency_shift, mimo_convolve_direct,
                   mimo_convolve_overlap_save, resample, rrc_taps)
from .tx import (ConstellationSpec, LaserSpec, PilotSchedule, SubcarrierPlan,
                 apply_phase_noise, generate_frame, mb_lambda_for_entropy,
                 modulate_subcarriers, mux_wdm)
from .channel import (FiberParams, RamanParams, StepConfig, calibrate_raman,
                      power_evolution, ssfm_propagate)
from .rx import align_frame, cd_compensate, demodulate_subcarriers, demux_channel
from .recovery import (NlpcFilter, PhaseEstimate, PilotMeanCorrector,
                       PpncFilterBank, compute_intensities, jscpr_run,
                       nlpc_apply, nlpc_train, pilot_mean_phase_removal,
                       ppnc_apply, ppnc_train)
from .baselines import gaussian_cpr, mean_phase_removal, optimize_cpr_bandwidth
from .metrics import SnrReport, complexity, estimate_snr
from .config import LinkConfig, load_config
from .experiment import (run_experiment, run_point, simulate_point,
                         train_ppnc_validated, write_csv)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
