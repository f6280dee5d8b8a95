"""Aerial-IRS downlink simulator: channel model, beamforming, AoI dynamics and
per-slot SCA trajectory/scheduling optimisation."""

from .aoi import AoiState, ScheduleError, initial_state, step_aoi, step_xi, step_z
from .beamforming import (SlotDecision, array_gain, closed_form_snr, make_decision,
                          mrt_beamformer, optimal_phases)
from .channel import ChannelRealization, GeometryError, brute_force_snr, build_channels
from .config import ConfigError, ScenarioConfig, load_scenario
from .sca import SubproblemInfeasible, round_schedule, sca_loop, solve_subproblem
from .simulation import EpisodeResult, SweepSpec, convergence_report, run_episode, run_sweep

__version__ = "0.1.0"

__all__ = [
    "AoiState", "ScheduleError", "initial_state", "step_aoi", "step_xi", "step_z",
    "SlotDecision", "array_gain", "closed_form_snr", "make_decision", "mrt_beamformer",
    "optimal_phases", "ChannelRealization", "GeometryError", "brute_force_snr",
    "build_channels", "ConfigError", "ScenarioConfig", "load_scenario",
    "SubproblemInfeasible", "round_schedule", "sca_loop", "solve_subproblem",
    "EpisodeResult", "SweepSpec", "convergence_report", "run_episode", "run_sweep",
]
