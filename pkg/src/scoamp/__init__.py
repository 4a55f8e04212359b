"""Orthogonal AMP and state evolution for spatially coupled compressed sensing."""

__version__ = "0.1.0"

from .coupling import (CouplingConfig, build_all_x_vec, build_x_vec, measure,
                       sample_signals, uniform_gamma, window_indices)
from .denoiser import (BernoulliGaussianPrior, denoise_vector, mmse, posterior_mean,
                       posterior_var)
from .oamp import IterationTrace, OampState, error_vectors, run
from .sensing import (SensingOperator, SingularProfile, condition_number_profile, fwht,
                      sample_haar_dense, structured_operator, make_operators)
from .state_evolution import (DivergenceError, SeTrajectory, compare_se_mc,
                              default_profiles, run_se, se_step)
