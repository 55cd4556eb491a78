"""Stochastic DC algorithms with weighted running averages.

Subpackages of interest: :mod:`sdca.algorithms` (SDCA1-4, PSS, DCA),
:mod:`sdca.models` (E-PCA and phase retrieval), :mod:`sdca.weights`
(schedules and their checks), :mod:`sdca.diagnostics`, :mod:`sdca.data`
and :mod:`sdca.bench` (experiment harness behind ``sdca-bench``).
"""

from .algorithms import (AlgorithmConfig, ConfigError, ConstantStep, DiminishingStep, RunRecord,
                         run, run_dca, run_pss, run_sdca)
from .core import (SamplePoint, SparseVector, StochasticDCProgram, empirical_objective,
                   probe_subgradients, random_point_in_ball, sample_objective)
from .data import (Dataset, LibsvmParseError, SampleStream, export_libsvm, load_libsvm,
                   normalize_rows, parse_libsvm, split_validation, stream_shuffled)
from .diagnostics import (criticality_residual, empirical_weighted_lln, lyapunov_value_sdca3,
                          rate_fit)
from .kernels import BACKEND
from .models import (EpcaDecomposition1, EpcaDecomposition2, FiniteDCProgram, PhaseRetrieval,
                     epca_reference_value, make_epca, make_phase_retrieval,
                     planted_phase_retrieval, synth_spiked_gaussian)
from .subsolvers import (BallIndicator, CustomRegularizer, SubproblemSpec, ZeroRegularizer,
                         solve_ball_quadratic, solve_inner_dca, solve_projected_gradient)
from .weights import (Constant, Power, SubExponential, WeightAccumulator, parse_schedule,
                      verify_conditions)

__version__ = "0.1.0"
