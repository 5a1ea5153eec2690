"""Panel-data tools for measuring convergence in country outcomes.

The package estimates the speed at which countries close the gap to their
own long-run paths, with particular care for two classic traps: the
cross-section growth regression's built-in bias toward slow convergence,
and the way common trends masquerade as unit roots in pooled dynamic
panels. Cross-section-augmented estimators, a jackknife bias correction,
closed-form bias benchmarks, synthetic data generators, and a two-step
treatment of time-invariant country characteristics round out the kit.
"""

from .panel import (
    PanelDataset,
    PanelError,
    SeriesTransform,
    CrossSectionAverageSet,
    apply_transform,
    cross_section_averages,
    load_country_csv,
    load_long_csv,
    restrict,
    write_long_csv,
)
from .lstsq import (
    KernelError,
    NlsResult,
    RegressionResult,
    gauss_newton_nls,
    least_squares,
    residual_project,
)
from .dgp import (
    CovariateSpec,
    DgpError,
    DgpSpec,
    FactorSpec,
    HeterogeneityDraw,
    HeterogeneitySpec,
    PanelTruth,
    ZLinkSpec,
    draw_heterogeneity,
    replication_seed,
    simulate_factor,
    simulate_panel,
)
from .bias import (
    BiasPrediction,
    barro_asymptotic_bias,
    kappa_squared,
    nickell_bias_approx,
    twfe_bias_stationary_factor,
    twfe_limit_trended,
)
from .estimators import (
    BarroResult,
    EstimateReport,
    Statistic,
    barro_estimate,
    dccemg_estimate,
    dccep_estimate,
    default_lag_order,
    ecm_from_level_ar,
    fe_gte_estimate,
    half_panel_jackknife,
    level_ar_from_ecm,
    long_run_effect,
    mean_lag,
    speed_from_initial_level_coef,
    twfe_estimate,
)
from .twostep import (
    FilteredIntercepts,
    TimeInvariantResult,
    filtered_intercepts,
    time_invariant_effects,
)

__version__ = "0.1.0"
