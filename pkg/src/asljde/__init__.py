"""Physiologically informed joint detection-estimation for functional ASL.

The package simulates BOLD/perfusion impulse responses with the extended
balloon model, links them through a linearized response operator, generates
synthetic ASL parcel datasets, and fits them with Gibbs samplers in three
flavors (non-physiological joint, physiological one-step joint, and the
physiological two-step procedure), plus an evaluation harness.
"""

from .balloon import (InvalidGrid, NonPositiveVolume, PhysioParams,
                      ResponseFunction, StateTrajectory, bold_from_states,
                      generate_responses, integrate_balloon)
from .design import (DesignSet, InvalidParadigm, Paradigm, build_design,
                     default_paradigm)
from .inference import (METHODS, ChainConfig, M1Result, PosteriorSummary,
                        ResidualSeries, compute_residuals, fit_joint, fit_m1,
                        fit_m2, fit_method, fit_physio_2step, save_summary)
from .linop import (GridMismatch, OmegaOperator, SingularOperator,
                    SmoothnessPrior, apply_omega, apply_omega_inverse,
                    build_omega, smoothness_prior)
from .metrics import (RrmseReport, SweepResult, ZeroTruth, compare_methods,
                      rrmse, run_noise_sweep, shape_rrmse, time_to_peak)
from .sampler import (ChainDiverged, LatentState, MixtureParams, ParcelModel,
                      PriorConfig, ResolvedPriors, SingularPrecision,
                      initialize_state, run_chain, sample_levels_and_labels,
                      sample_nuisance, sample_response)
from .simulate import (DimensionMismatch, GroundTruth, ParcelDataset,
                       TruthConfig, load_dataset, save_dataset,
                       simulate_dataset)

__version__ = "0.1.0"
