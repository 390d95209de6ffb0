"""Fractional Yule process: special functions, laws, simulation and estimation."""

from .distributions import (
    FypParams,
    StatePmf,
    conditional_state_pmf,
    fractional_moment,
    log_moments,
    population_mean,
    population_variance,
    sojourn_distribution,
    state_pmf,
    state_pmf_mixture,
    waiting_distribution,
)
from .estimation import (
    EstimationResult,
    FractionalMomentEstimator,
    LogMomentEstimator,
    estimate_fractional_moments,
    estimate_log_moments,
)
from .exceptions import (
    CancellationError,
    DegenerateDataError,
    DomainError,
    EstimationError,
    FypError,
    KappaTooLargeError,
    MLOverflowError,
    NoRootError,
    SeriesDivergenceError,
)
from .sampling import (
    RandomStream,
    SamplePath,
    sample_exponential,
    sample_positive_stable,
    sample_wright,
    simulate_classical_yule,
    simulate_log_sojourns,
    simulate_marginal_alg1,
    simulate_marginals_alg1,
    simulate_path_alg2,
    simulate_populations_alg2,
    simulate_sojourns,
)
from .study import StudyConfig, run_study
from .specfun import mittag_leffler, reciprocal_gamma, wright_m_density

__version__ = "0.1.0"
