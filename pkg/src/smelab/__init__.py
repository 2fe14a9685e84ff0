"""Set-membership identification under unbounded sub-Gaussian process noise.

The package builds high-probability ellipsoidal parameter sets for linear
regression models of dynamical systems from a concentration bound on the
noise sample covariance, and ships a seeded Monte Carlo harness for the two
benchmark systems (scalar linear plant, lifted pendulum).
"""

__version__ = "0.1.0"

from .experiments import (
    ExperimentConfig,
    MonteCarloRecord,
    SlopeFit,
    default_config,
    empirical_coverage,
    empty_fraction,
    export_csv,
    fit_loglog_slope,
    load_records_csv,
    mean_volume,
    run_monte_carlo,
    summarize,
    write_summary,
)
from .noise import (
    CovarianceBoundReport,
    NoiseBoundParams,
    NoiseModel,
    calibrate_kappa,
    covariance_bound_holds,
    epsilon,
    kappa_delta,
    sample_noise,
    verify_covariance_bounds,
)
from .numerics import (
    chi2_quantile,
    ellipsoid_volume,
    is_psd,
    kernel_basis,
    pseudoinverse,
)
from .sme import (
    EllipsoidalParamSet,
    ExcitationError,
    QmiBlocks,
    build_chi2_set,
    build_noise_filtered_set,
    build_stochastic_set,
    is_empty,
    is_member,
    kernel_basis_oracle_set,
    ols_estimate,
    qmi_blocks,
    radius_sq,
    set_volume,
)
from .systems import (
    LtiParams,
    PendulumParams,
    PeReport,
    TrajectoryData,
    check_pe,
    lift_pendulum,
    rescale_isotropic,
    simulate_lti,
    simulate_pendulum,
)
