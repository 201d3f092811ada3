"""Replication engine: repeated simulate-and-fit over a scenario grid.

For each replication the engine generates one dataset, fits both the
requested tilt-mixture case and the logistic baseline on that same dataset,
and collects the tilt-scale coefficient vectors (beta0, beta11, ..., beta1d).
Aggregation reports per-coefficient means, unbiased marginal variances, and
the descending eigenvalues of the difference between the two estimators'
sample covariance matrices (baseline minus tilt-mixture): positive
eigenvalues measure the variance reduction bought by the unlabeled rows.

Replications run on independent substreams, so results are identical for a
fixed ``seed_base`` whether they run serially or across a process pool;
records are sorted by replication index before any reduction. Replications
whose fit raises an estimation error are counted and excluded from moments.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    AllReplicationsFailed,
    EstimationError,
    NotApplicable,
    ShapeMismatch,
)
from .etm_oss import fit_m3, fit_m4
from .etm_rs import fit_m1, fit_m2
from .model import Case, Design, g0_weights
from .numerics import SolverSettings, sym_eig_desc
from .simgen import Scenario, generate
from .supervised import fit_logistic

__all__ = [
    "DiffSummary",
    "McSummary",
    "summarize_diff",
    "run_scenario",
    "render_summary_csv",
    "write_summary_csv",
]


@dataclass(frozen=True)
class DiffSummary:
    """Moment summary of two paired estimator samples (R replications x p)."""

    ave_etm: np.ndarray
    ave_logistic: np.ndarray
    mvar_etm: np.ndarray
    mvar_logistic: np.ndarray
    lambdas: np.ndarray
    cov_etm: np.ndarray
    cov_logistic: np.ndarray


@dataclass(frozen=True)
class McSummary:
    """One scenario-by-case cell of the replication study.

    ``lambdas`` holds the descending eigenvalues of
    cov(logistic) - cov(tilt-mixture). ``degenerate_variance`` marks cells
    with fewer than two converged replications, whose variance fields are
    zeros by convention. The residual maxima record, over converged
    tilt-mixture fits, how far the fitted base-law weights are from their two
    normalizations (sum w = 1 and sum w e = 1) and, scaled by the total row
    count, from the mixing-weight stationarity condition.
    """

    rho_u_star: float
    case: Case
    ave_etm: np.ndarray
    ave_logistic: np.ndarray
    mvar_etm: np.ndarray
    mvar_logistic: np.ndarray
    lambdas: np.ndarray
    n_converged: int
    n_failed: int
    degenerate_variance: bool = False
    max_weight_residual: float = 0.0
    max_weighted_tilt_residual: float = 0.0
    max_alpha_residual: float = 0.0


def summarize_diff(samples_etm: np.ndarray, samples_logistic: np.ndarray) -> DiffSummary:
    """Means, marginal variances and covariance-difference eigenvalues.

    Both inputs are R x p matrices of per-replication coefficient vectors,
    row i of one paired with row i of the other. Variances and covariances
    use the unbiased divisor R - 1.

    Raises:
        ShapeMismatch: shapes differ, inputs are not 2-D, or R < 2.
    """
    etm = np.asarray(samples_etm, dtype=float)
    log = np.asarray(samples_logistic, dtype=float)
    if etm.ndim != 2 or log.ndim != 2:
        raise ShapeMismatch(
            f"expected R x p sample matrices, got shapes {etm.shape} and {log.shape}"
        )
    if etm.shape != log.shape:
        raise ShapeMismatch(f"sample shapes differ: {etm.shape} vs {log.shape}")
    if etm.shape[0] < 2:
        raise ShapeMismatch("need at least 2 replications for a sample variance")

    cov_etm = np.atleast_2d(np.cov(etm, rowvar=False, ddof=1))
    cov_log = np.atleast_2d(np.cov(log, rowvar=False, ddof=1))
    return DiffSummary(
        ave_etm=etm.mean(axis=0),
        ave_logistic=log.mean(axis=0),
        mvar_etm=np.diag(cov_etm).copy(),
        mvar_logistic=np.diag(cov_log).copy(),
        lambdas=sym_eig_desc(cov_log - cov_etm),
        cov_etm=cov_etm,
        cov_logistic=cov_log,
    )


_FITTERS = {
    Case.M1: fit_m1,
    Case.M2: fit_m2,
    Case.M3: fit_m3,
    Case.M4: fit_m4,
}


def _replicate(args: tuple) -> tuple:
    """Worker body: one generate-and-fit replication.

    Returns ``(rep_index, True, etm_vec, logistic_vec, residuals)`` on
    success or ``(rep_index, False, error_name, message, None)`` when either
    fit raises an estimation error. Top-level so process pools can pickle it.
    """
    s, case, settings, rep_index = args
    ds = generate(s, rep_index)
    try:
        log_est = fit_logistic(ds, settings)
        if case is Case.M4:
            etm_est = fit_m4(ds, rho_u_known=s.rho_u_star, settings=settings)
        else:
            etm_est = _FITTERS[case](ds, settings)
    except EstimationError as exc:
        return (rep_index, False, type(exc).__name__, str(exc), None)
    g0 = g0_weights(ds, etm_est.tilt, etm_est.alpha)
    residuals = (
        abs(g0.sum_w - 1.0),
        abs(g0.sum_we - 1.0),
        ds.n_total * abs(g0.sum_w - 1.0),
    )
    return (
        rep_index,
        True,
        etm_est.tilt.as_vector(),
        log_est.tilt.as_vector(),
        residuals,
    )


def run_scenario(
    s: Scenario,
    case: Case | str,
    settings: SolverSettings | None = None,
    workers: int = 1,
) -> McSummary:
    """Run every replication of a scenario for one tilt-mixture case.

    The logistic baseline is fitted on the same dataset as the tilt-mixture
    estimator in every replication. For case M4 the known unlabeled
    proportion is the scenario's ``rho_u_star``.

    Args:
        s: the scenario (design must match the case).
        case: one of M1/M2 (random sampling) or M3/M4 (outcome-stratified).
        settings: solver settings forwarded to both fits.
        workers: process count; values <= 1 run serially. Results are
            identical either way.

    Raises:
        NotApplicable: the case has no replication semantics here (logistic)
            or does not match the scenario's design.
        AllReplicationsFailed: no replication converged.
    """
    case = Case(case)
    if case in (Case.M1, Case.M2):
        if s.design is not Design.RANDOM_SAMPLING:
            raise NotApplicable(f"case {case.value} needs a random-sampling scenario")
    elif case in (Case.M3, Case.M4):
        if s.design is not Design.OUTCOME_STRATIFIED:
            raise NotApplicable(f"case {case.value} needs an outcome-stratified scenario")
    else:
        raise NotApplicable(
            "the replication engine compares tilt-mixture cases against the "
            "logistic baseline; pick one of m1, m2, m3, m4"
        )

    jobs = [(s, case, settings, rep) for rep in range(s.replications)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_replicate, jobs, chunksize=8))
    else:
        records = [_replicate(job) for job in jobs]
    records.sort(key=lambda rec: rec[0])

    etm_rows = []
    log_rows = []
    n_failed = 0
    max_w = 0.0
    max_we = 0.0
    max_alpha = 0.0
    for rec in records:
        if not rec[1]:
            n_failed += 1
            continue
        etm_rows.append(rec[2])
        log_rows.append(rec[3])
        res_w, res_we, res_alpha = rec[4]
        max_w = max(max_w, res_w)
        max_we = max(max_we, res_we)
        max_alpha = max(max_alpha, res_alpha)

    n_converged = len(etm_rows)
    if n_converged == 0:
        raise AllReplicationsFailed(
            f"all {s.replications} replications failed for case {case.value}"
        )

    p = s.d + 1
    if n_converged == 1:
        ave_etm = np.asarray(etm_rows[0], dtype=float)
        ave_log = np.asarray(log_rows[0], dtype=float)
        zeros = np.zeros(p)
        return McSummary(
            rho_u_star=s.rho_u_star,
            case=case,
            ave_etm=ave_etm,
            ave_logistic=ave_log,
            mvar_etm=zeros.copy(),
            mvar_logistic=zeros.copy(),
            lambdas=zeros.copy(),
            n_converged=1,
            n_failed=n_failed,
            degenerate_variance=True,
            max_weight_residual=max_w,
            max_weighted_tilt_residual=max_we,
            max_alpha_residual=max_alpha,
        )

    diff = summarize_diff(np.vstack(etm_rows), np.vstack(log_rows))
    return McSummary(
        rho_u_star=s.rho_u_star,
        case=case,
        ave_etm=diff.ave_etm,
        ave_logistic=diff.ave_logistic,
        mvar_etm=diff.mvar_etm,
        mvar_logistic=diff.mvar_logistic,
        lambdas=diff.lambdas,
        n_converged=n_converged,
        n_failed=n_failed,
        degenerate_variance=False,
        max_weight_residual=max_w,
        max_weighted_tilt_residual=max_we,
        max_alpha_residual=max_alpha,
    )


def _coef_names(p: int) -> list[str]:
    return ["beta0"] + [f"beta1{j}" for j in range(1, p)]


def render_summary_csv(summaries: list[McSummary]) -> str:
    """One CSV document, one row per summary, deterministic byte-for-byte.

    Columns: rho_u_star, case, the per-coefficient means and marginal
    variances of both estimators, the covariance-difference eigenvalues, and
    the convergence counts. Floats are rendered with ``repr``, the shortest
    digits that round-trip.
    """
    if not summaries:
        raise ShapeMismatch("need at least one summary to render")
    p = summaries[0].ave_etm.size
    for summary in summaries:
        if summary.ave_etm.size != p:
            raise ShapeMismatch("summaries mix coefficient dimensions")
    names = _coef_names(p)
    header = (
        ["rho_u_star", "case"]
        + [f"ave_etm_{c}" for c in names]
        + [f"ave_logistic_{c}" for c in names]
        + [f"mvar_etm_{c}" for c in names]
        + [f"mvar_logistic_{c}" for c in names]
        + [f"lambda_{k}" for k in range(1, p + 1)]
        + ["n_converged", "n_failed"]
    )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for summary in summaries:
        row = [repr(float(summary.rho_u_star)), summary.case.value]
        for vec in (
            summary.ave_etm,
            summary.ave_logistic,
            summary.mvar_etm,
            summary.mvar_logistic,
            summary.lambdas,
        ):
            row.extend(repr(float(v)) for v in vec)
        row.extend([str(summary.n_converged), str(summary.n_failed)])
        writer.writerow(row)
    return buf.getvalue()


def write_summary_csv(summaries: list[McSummary], path: str | Path) -> None:
    """Write the summary CSV to a file (see render_summary_csv)."""
    Path(path).write_text(render_summary_csv(summaries), encoding="utf-8")
