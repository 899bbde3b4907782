"""Deterministic simulator and optimization toolkit for a multi-resonator
microwave frequency-comb memory.

Frequency-tunable resonators side-coupled to a common feedline absorb a
coherent pulse as a collective excitation, hold it while the comb is
closed, and re-emit it as a photon echo one comb period of comb-on time
after the input.
"""

__version__ = "0.1.0"

from .errors import CombMemError, ConfigurationError, DiagnosticError, ValidationError
from .model import (CombConfig, MemoryConfig, build_comb, impedance_matching_delta,
                    spectral_span)
from .schedules import (DetuningSchedule, Segment, echo_suppression, multimode_schedule,
                        static_comb, write_close_read)
from .dynamics import (Pulse, PulseTrain, SimulationResult, assemble_generator,
                       drive_vector, input_field, simulate, spectrum_via_fft_crosscheck,
                       transmission_spectrum)
from .analysis import (EchoMetrics, EchoWindow, SweepResult, bandwidth_from_sweep,
                       decay_fit, echo_peak_time, echo_windows, heterodyne_render,
                       phase_difference, storage_efficiency, window_energy,
                       write_sweep_csv, write_trace_csv)
from .timebin import (TimeBinReport, TimeBinState, echo_window_pair, encode, fidelity,
                      leakage_noise, output_state_metrics, run_protocol,
                      timebin_schedule)
from .optimizer import (GridSweep, OptimizationReport, bandwidth_vs_delta,
                        efficiency_point, first_echo_efficiency, optimize_delta,
                        optimize_fwhm, sweep_grid)
from .config import RunConfig, SolverSettings, default_config, parse_config, serialize_config

__all__ = [name for name in dir() if not name.startswith("_")]
