"""Multi-user massive-MIMO receiver simulation with LNA and ADC linearization."""

from .signal import ConfigError, WaveformConfig, gen_qam_frame, make_frame
from .channel import build_channel, steering_vector
from .impairments import AdcConfig, LnaParams, lna, lna_params_from_spec, quantize
from .linearize import (SatRecoveryConfig, beamspace_compensate, per_antenna_inverse,
                        recover_frame, saturation_recovery)
from .metrics import bussgang_distortion, link_budget
from .harness import ScenarioConfig, ResultRow, run_scenario, sweep, emit_results

__version__ = "0.1.0"
