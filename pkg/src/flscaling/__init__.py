"""Finite-length scaling analysis of LDPC ensembles over erasure channels."""

from .ensembles import (DegreeDistribution, EnsembleSpec, TannerGraph,
                        min_stopping_set_leq, sample_graph,
                        sample_graph_expurgated, validate_and_normalize)
from .density_evolution import (CriticalData, DeProfile, MarginallyStableError,
                                asymptotic_bit_curve, critical_data, profile_at,
                                threshold)
from .covariance_evolution import (EvolutionState, RateCoefficients, ScalingParams,
                                   Trajectory, alpha, beta, initial_moments,
                                   integrate_to_critical, omega_constant,
                                   poisson_rescale, rate_coefficients, scaling_params)
from .peeling_sim import (Channel, McCurve, McRow, PeelOutcome, erase, mc_curve,
                          peel, trajectory_stats)
from .cycle_exact import (block_scaling_approx, cycle_params, error_floor_bit,
                          exact_block_prob, forest_count, limit_block_curve,
                          log_forest_count, mother_curve_f, stable_density_p)
from .scaling_predict import (FitResult, ScalingForm, UnfittableError,
                              fit_alpha_beta, predict_curve, q_function,
                              shannon_exact)

__version__ = "0.1.0"
