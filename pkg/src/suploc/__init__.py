"""Location of the supremum of stationary processes on an interval.

Exact laws for phase-shift models, Monte Carlo estimates for Gaussian and
Ornstein-Uhlenbeck models, and checkers for the density bounds and
variation inequalities these laws satisfy.
"""

from .argmax import (
    LocalMaxRateEstimate,
    SupLocation,
    Window,
    detect_multiplicity,
    estimate_local_max_rate,
    exact_phase_argmax,
    grid_argmax,
    phase_candidates,
    refine_two_wave_argmax,
)
from .errors import ConstructionError, DataError, ParameterError, RefinementError, SuplocError
from .estimate import DensityEstimate, TauSample, clopper_pearson, histogram, ks_uniform, mc_tau_sample
from .models import (
    OrnsteinUhlenbeckModel,
    PhaseShiftModel,
    PiecewiseLinearWaveform,
    RngSpec,
    SawtoothCombParams,
    TwoWaveCoefficients,
    TwoWaveGaussianModel,
    build_sawtooth_comb,
    build_triangle,
    eval_phase,
    sample_two_wave,
    simulate_ou,
)
from .theory import (
    CheckReport,
    ExactLaw,
    check_key_lemma,
    check_thm31,
    check_thm32a,
    check_window_monotonicity,
    exact_tau_law_phase,
    general_bound,
    symmetric_bound,
    tv,
)

__version__ = "0.1.0"
