"""Interleaved block-sparse transforms and cross-domain memory AMP."""

from .denoisers import DenoiserResult, denoise_bernoulli_gaussian, denoise_qpsk
from .errors import (ConfigurationError, MaterializationLimitError, NormalizationError,
                     UnsupportedMetricError)
from .estimators import (CostMeter, EstimatorRun, MampConfig, MampState, TrajectoryPoint,
                         damping_update, estimate_cross_covariance, lmmse_estimate_gaussian,
                         lmmse_mse_gaussian, mle_step, nle_orthogonalize, run_cd_mamp,
                         run_cd_oamp)
from .ibs import (BASES, DIRECTIONS, VARIANTS, IbsOperator, IbsSpec, assemble_ibs,
                  build_ibs_transform, build_multicarrier, relative_complexity)
from .kernels import (OpCounter, fft_adjoint, fft_forward, fft_operator, fwht_forward,
                      fwht_operator, is_power_of_two)
from .operators import (DiagonalOperator, LinearOperator, PermutationOperator, adjoint,
                        block_diag_union, compose, identity, materialize_dense, row_select)
from .rng import Permutation, generator, make_permutation, raw_words
from .scenarios import (BernoulliGaussianPrior, CirculantOperator, MultipathChannel,
                        QpskPrior, SensingDiagonal, SystemInstance,
                        TimeVaryingChannelOperator, ber_qpsk, doppler_preset_4ghz_100kmh_15khz,
                        gen_multipath_channel, gen_sensing_diagonal, mse, mse_db,
                        simulate_observation)
from .spectral import (SpectralProfile, eigen_bounds, gram_eigenvalues, spectral_profile,
                       trace_moments)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
