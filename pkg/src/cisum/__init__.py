"""cisum: sum-parameter estimation toolkit for multi-component cisoids.

Synthesis of noisy cisoid ensembles, closed-form and numerically exact
Cramer-Rao bounds for the global sum-parameters, three estimators (the
iterative global method plus Zoom-IpFFT and Root-MUSIC baselines), and a
seeded Monte-Carlo benchmark harness.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .bench import (ExperimentConfig, ScenarioTemplate, SummaryRow,
                    TrialRecord, default_experiment_config, nrmse,
                    paper_table_repro, run_experiment)
from .bounds import (ClosedFormCrb, CrbReport, FimMatrix, SumParamJacobian,
                     crb_audit, crb_numerical, crb_omega_closed,
                     crb_phi_closed, crb_phi_closed_approx, crb_sigma_closed,
                     crb_single_tone, fim_full, jacobian_sum_params)
from .errors import (EstimationError, IllConditionedMatrixError,
                     InfeasibleScenarioError, NumericalError)
from .estimators import (EgemConfig, EstimationResult, egem_estimate,
                         ls_amp_phase, root_music_estimate,
                         root_music_frequencies, zoom_ipfft_estimate)
from .signals import (Cisoid, CisoidEnsemble, NoiseModel, SampledSignal,
                      ScenarioConfig, SumParams, ground_truth_sum_params,
                      random_ensemble, snr_db, synthesize, total_power)
from .spectrum import (Periodogram, SpectralPeak, blackman_harris_4,
                       noise_floor_estimate, periodogram, zoom_refine_peak)

__version__ = "0.1.0"
