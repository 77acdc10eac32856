"""Simulation and inference for Cox extremal processes: max-stable storm fields
whose storm centres follow a log-Gaussian Cox process."""

__version__ = "0.1.0"

from .covariance import CovarianceModel, Family, check_sample_continuity, evaluate, matern, powered_exponential
from .errors import (CoxExtremesError, DomainError, EmbeddingError, NumericalError, ParameterError,
                     SimulationRunaway)
from .gaussian_field import GaussianFieldSampler, IntensityMeanPolicy, simulate_gaussian, simulate_log_gaussian
from .grid import GridField, GridSpec, Rect, integrate, read_gf1, write_gf1
from .intensity import (CorrectionField, KernelConfig, asymptotic_kernel_estimator, correcting_factor,
                        corrected_intensity, kernel_intensity)
from .pcf import (ContrastConfig, ContrastResult, PCFEstimate, estimate_pcf, lgcp_pcf, matern_family,
                  minimum_contrast)
from .points import PointPattern, read_pp1, repair_to_base, sample_poisson, thin, write_pp1
from .simulation import (SimulationResult, StormEvent, block_maxima_mda, extract_contributing, simulate_extremal,
                         simulate_mmm)
from .storm import (DiskStorm, GaussianStorm, ScalingConstants, StormMixture, evaluate_shape, shape_integral,
                    truncation_constants)
from .study import StudyConfig, StudyRow, mrv, mse, run_benchmark_cell, run_study
