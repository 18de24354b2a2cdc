"""Downlink optimization for a rail-side reflecting surface link.

Per-frame joint transmit beam and discrete surface phase optimization, a
window-level power allocator, reference schemes, and a paired-trial sweep
harness with a small CLI.
"""

__version__ = "0.1.0"

from .errors import ConvergenceError, InvalidConfigError, InvalidInputError
from .scenario import (FrameSchedule, ScenarioConfig, apply_overrides,
                       build_schedule, load_config, parse_config_text)
from .channel import ChannelRealization, dump_channel, synthesize_frame
from .rate import (aggregate_rate, composite_elements, effective_gains,
                   per_user_rates, sic_sinr)
from .optimizer import (AoResult, BbResult, BeamVector, PhaseVector,
                        alternating_optimize, bb_discrete_search,
                        codebook_delta, codebook_levels,
                        continuous_phase_opt, optimal_beamformer)
from .power import (MultiplierState, PowerWindow, allocate_window, kkt_power,
                    update_multipliers, waterfill_oracle, window_throughput)
from .baselines import (CeParams, FrameSolution, cross_entropy_solution,
                        no_surface_solution, random_phase_solution,
                        successive_refinement_solution)
from .harness import (SweepResult, SweepRow, SweepSpec, emit_csv, read_csv,
                      run_frame_trial, run_sweep, run_throughput_trial)

__all__ = [
    "__version__",
    "ConvergenceError", "InvalidConfigError", "InvalidInputError",
    "FrameSchedule", "ScenarioConfig", "apply_overrides", "build_schedule",
    "load_config", "parse_config_text",
    "ChannelRealization", "dump_channel", "synthesize_frame",
    "aggregate_rate", "composite_elements", "effective_gains",
    "per_user_rates", "sic_sinr",
    "AoResult", "BbResult", "BeamVector", "PhaseVector",
    "alternating_optimize", "bb_discrete_search", "codebook_delta",
    "codebook_levels", "continuous_phase_opt", "optimal_beamformer",
    "MultiplierState", "PowerWindow", "allocate_window", "kkt_power",
    "update_multipliers", "waterfill_oracle", "window_throughput",
    "CeParams", "FrameSolution", "cross_entropy_solution",
    "no_surface_solution", "random_phase_solution",
    "successive_refinement_solution",
    "SweepResult", "SweepRow", "SweepSpec", "emit_csv", "read_csv",
    "run_frame_trial", "run_sweep", "run_throughput_trial",
]
