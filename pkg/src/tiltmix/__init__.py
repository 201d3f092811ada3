"""Semi-supervised estimation under exponential tilt mixture models.

A library and CLI for maximum-likelihood estimation when labeled data are
complemented by unlabeled rows whose class mixture carries information about
the class-1 log-density-ratio (the tilt). Four estimator cases cover the two
sampling designs (random and outcome-stratified) crossed with whether the
unlabeled class proportion is tied to the labeled one, free, or known, plus
a labeled-only logistic baseline. The package also computes the limiting
variance matrices of every case, generates simulation scenarios, and runs
replication studies comparing estimators on common datasets.
"""

from . import errors
from ._kernels import BACKEND
from .avar import (
    IntegrationMode,
    IntegrationSpec,
    OssConfig,
    RsConfig,
    SBlocks,
    TiltedSupport,
    VarianceReport,
    compute_s_blocks,
    config_from_scenario,
    gamma_matrix,
    psd_check,
    u_case,
    v_constant,
)
from .etm_oss import OssCounts, fit_m3, fit_m4, kappa_oss
from .etm_rs import KappaEval, fit_m1, fit_m2, kappa_m1, kappa_m2, solve_alpha, solve_rho_u
from .harness import (
    DiffSummary,
    McSummary,
    render_summary_csv,
    run_scenario,
    summarize_diff,
    write_summary_csv,
)
from .model import (
    Case,
    ConditionalParams,
    Dataset,
    Design,
    EtmEstimate,
    G0Weights,
    TiltParams,
    bayes_boundary,
    dump_dataset,
    from_conditional,
    g0_weights,
    load_dataset,
    posterior_prob,
    tilt_values,
    to_conditional,
    z_matrix,
)
from .numerics import (
    SolveDiagnostics,
    SolverSettings,
    grad_check,
    newton_maximize,
    solve_monotone_root,
    sym_eig_desc,
)
from .simgen import GaussianPair, Scenario, gen_oss, gen_rs, generate, true_params
from .supervised import SandwichBlocks, fit_logistic, sandwich_avar

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Case",
    "ConditionalParams",
    "Dataset",
    "Design",
    "DiffSummary",
    "EtmEstimate",
    "G0Weights",
    "GaussianPair",
    "IntegrationMode",
    "IntegrationSpec",
    "KappaEval",
    "McSummary",
    "OssConfig",
    "OssCounts",
    "RsConfig",
    "SBlocks",
    "SandwichBlocks",
    "Scenario",
    "SolveDiagnostics",
    "SolverSettings",
    "TiltParams",
    "TiltedSupport",
    "VarianceReport",
    "bayes_boundary",
    "compute_s_blocks",
    "config_from_scenario",
    "dump_dataset",
    "errors",
    "fit_logistic",
    "fit_m1",
    "fit_m2",
    "fit_m3",
    "fit_m4",
    "from_conditional",
    "g0_weights",
    "gamma_matrix",
    "gen_oss",
    "gen_rs",
    "generate",
    "grad_check",
    "kappa_m1",
    "kappa_m2",
    "kappa_oss",
    "load_dataset",
    "newton_maximize",
    "posterior_prob",
    "psd_check",
    "render_summary_csv",
    "run_scenario",
    "sandwich_avar",
    "solve_alpha",
    "solve_monotone_root",
    "solve_rho_u",
    "summarize_diff",
    "sym_eig_desc",
    "tilt_values",
    "to_conditional",
    "true_params",
    "u_case",
    "v_constant",
    "write_summary_csv",
    "z_matrix",
]
