"""Vertical-dynamics simulator for a rail wagon riding on two bogies.

Sequential and barrier-synchronized multi-worker RK4 engines integrate the
wagon/two-bogie suspension equations under a harmonic track irregularity;
an exact frequency-domain solution of the same linear model serves as an
independent correctness oracle.
"""

from .errors import (ConfigError, DelaysUndefinedError, InsufficientWindowError,
                     IntegrationDivergedError, InvalidPlanError,
                     InvalidProfileError, NonFiniteInputError, RailsimError,
                     SingularMatrixError, StepSizeUnderflowError,
                     UndampedResonanceError)
from .model import (ForcingSample, N_STATES, STATE_LABELS, SystemMatrices,
                    VehicleParams, assemble_matrices, derivative,
                    free_dissipation_rate, mechanical_energy)
from .track import (TrackProfile, WheelDelays, excitation_frequency,
                    profile_height, profile_rate, wheel_delays, wheel_forcing)
from .integrate import (Scenario, StepControl, TimeSeries, adaptive_rk45,
                        integrate_adaptive, integrate_fixed, rk4_step,
                        step_schedule)
from .parallel import (PaddedStateBuffer, ParallelStats, PinOutcome,
                       WorkerPlan, WorkerStats, default_plan, make_plan,
                       pin_and_prioritize, run_parallel)
from .oracle import (AmplitudeEstimate, HarmonicComponent, StateSpace,
                     SteadyStateResponse, amplitude_from_series,
                     build_state_space, complex_solve, harmonic_components,
                     steady_state_response, transient_settle_comparison)
from .config import SimConfig, config_from_dict, parse_config, serialize_config

__version__ = "0.1.0"
