"""Nonlinear-interference PSD of Raman-tilted WDM links.

Workflow: describe the link (link_model), solve the coupled pump
depletion along each span (srs_solver), condense every power profile
to a three-parameter exponential (profile_fitter), and evaluate the
closed-form NLI per channel (cfm_engine), with a brute-force integral
reference on the side (gn_oracle).  pipeline chains the stages and
config_io reads link configs and writes reports.
"""

from .cfm_engine import (
    CfmTables,
    ChannelNli,
    CorrectionFactors,
    SpanLossTable,
    beta2_eff,
    choose_M,
    coherence_term,
    f_int,
    f_int_exact,
    h_coeff,
    harmonic,
    island_integral,
    nli_cfm5,
    nli_incoherent,
    nli_m1_legacy,
    propagate_psd,
    si,
    span_loss,
    zeta_sq,
)
from .config_io import (
    db_to_linear,
    dbm_to_watts,
    load_link,
    load_rho_factors,
    report_to_dict,
    watts_to_dbm,
    write_csv,
    write_json,
)
from .errors import (
    ConfigError,
    DegenerateFitError,
    DispersionSingularityError,
    LinkValidationError,
    NliCfmError,
    NumericError,
    QuadratureError,
    SolverDivergenceError,
)
from .gn_oracle import (
    Island,
    QuadSpec,
    count_mci_islands,
    enumerate_islands,
    integrate_island_numeric,
    nli_reference,
)
from .link_model import (
    Channel,
    Diagnostic,
    Link,
    RamanGainProfile,
    Span,
    local_dispersion,
    span_loss_db,
    validate,
)
from .pipeline import (
    NliReport,
    RunConfig,
    StageTimings,
    benchmark,
    fit_all_profiles,
    run_pipeline,
    solve_link_evolutions,
)
from .profile_fitter import (
    FitSettings,
    FittedProfile,
    fit_cost,
    fit_profile,
    fit_span_profiles,
    model_profile,
    solve_alpha01,
)
from .srs_solver import (
    GridSpec,
    PowerEvolution,
    analytic_flat_solution,
    analytic_uniform_solution,
    evaluate_gain,
    perturbative_profile,
    perturbative_triple,
    solve_power_evolution,
)

__version__ = "0.1.0"
