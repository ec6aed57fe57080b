"""RIS-assisted secure ISAC toolkit.

Synthesizes uplink channels through a reconfigurable intelligent surface,
optimizes the RIS phases to jointly maximize user sum rate and hide user
spatial signatures from a wiretapper, and evaluates both parties' MUSIC
localization and communication rates.
"""

from .geometry import (RisGeometry, UeState, array_response, element_distance_exact,
                       element_distance_fresnel, fresnel_response,
                       fresnel_response_matrix, ue_position)
from .channel import (ChannelSet, RicianParams, build_channel_set, effective_channel,
                      identity_phase, near_field_channel, random_phase_vector,
                      sample_far_field_channel)
from .signals import ReceivedBlock, SymbolBlock, generate_symbols, receive
from .objective import (DegenerateChannelError, ObjectiveConfig, ObjectiveEval,
                        combiner, evaluate, gradient, joint_objective,
                        occultation_penalty, sinr, sum_rate)
from .optimizer import (OptimizerConfig, OptimizerTrace, armijo_search, optimize,
                        polak_ribiere_beta, project_tangent, retract)
from .sensing import (MusicSpectrum, ScanGrid, SensingReport, associate_and_score,
                      locate_users, music_aoa_spectrum, music_distance_spectrum,
                      nmse, noise_subspace, sample_covariance, steering)
from .harness import (ScenarioConfig, ExperimentResult, dbm_to_watt, parse_config,
                      run_gradcheck, run_nmse_sweep, run_optimize, run_rate_cdf,
                      run_spectra, watt_to_dbm)

__version__ = "0.1.0"
