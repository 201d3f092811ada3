"""Tilt-mixture estimation under the random-sampling design.

Two cases are fitted by profiling a Lagrangian objective kappa over its scalar
saddle variable alpha (and, for the unrestricted case, the unlabeled
proportion):

* restricted (``fit_m1``): labeled and unlabeled class proportions are assumed
  equal; parameters (beta, rho) are maximized jointly.
* unrestricted (``fit_m2``): labeled proportion rho_ell separates and equals
  the labeled class-1 fraction; rho_u and alpha are profiled out of the
  beta-maximization.

kappa for the restricted case, with e_i = exp(z_i' beta), N = n + n2:

    sum_lab y_i z_i'beta + sum_unlab log(1 - rho + rho e_i)
    - sum_all log(1 - alpha + alpha e_i)
    + n1 log rho + n0 log(1 - rho) - N log N

The unrestricted kappa replaces rho by rho_u in the unlabeled term and by
rho_ell in the Bernoulli term. alpha solves sum_all (e_i - 1)/(1 - alpha +
alpha e_i) = 0, equivalently it normalizes the profiled base-measure weights.
Profile gradients are plain kappa blocks (envelope property); profile Hessians
carry the implicit-function correction for each profiled scalar.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from . import _kernels
from .errors import (
    AlphaOutOfRange,
    DegenerateTilts,
    DimensionMismatch,
    NoInteriorRoot,
    NonFiniteInput,
    NoSignChange,
    RhoOutOfRange,
)
from .model import (
    Case,
    Dataset,
    Design,
    EtmEstimate,
    TiltParams,
    g0_weights,
    posterior_prob,
    tilt_values,
    to_conditional,
)
from .numerics import SolverSettings, newton_maximize, solve_monotone_root

__all__ = [
    "KappaEval",
    "kappa_m1",
    "kappa_m2",
    "solve_alpha",
    "solve_rho_u",
    "fit_m1",
    "fit_m2",
]

#: Tilts all within this distance of 1 make the mixing weight unidentified.
DEGENERATE_TILT_TOL = 1e-12


@dataclass
class KappaEval:
    """Objective value with gradient and Hessian over the active block."""

    value: float
    grad: np.ndarray
    hessian: np.ndarray


def _require_rs(ds: Dataset, what: str) -> None:
    if ds.design is not Design.RANDOM_SAMPLING:
        raise DimensionMismatch(f"{what} requires the random-sampling design")


def _check_unit(value: float, name: str, err) -> float:
    value = float(value)
    if not (np.isfinite(value) and 0.0 < value < 1.0):
        raise err(f"{name} must lie strictly inside (0, 1), got {value!r}")
    return value


def _class1_zsum(ds: Dataset) -> np.ndarray:
    return ds.labeled_z[ds.labeled_y == 1].sum(axis=0)


def _inner_settings(settings: SolverSettings) -> SolverSettings:
    """Tightened settings for the scalar inner solves."""
    return SolverSettings(
        grad_tol=min(settings.grad_tol, 1e-12),
        max_iter=max(settings.max_iter, 200),
        step_halvings_max=settings.step_halvings_max,
        boundary_eps=settings.boundary_eps,
        divergence_cap=settings.divergence_cap,
    )


def _mixing_root(e: np.ndarray, settings: SolverSettings, what: str) -> float:
    """Root of g(a) = sum (e_i - 1)/(1 - a + a e_i) on (0, 1).

    g is strictly decreasing; finding its root is the stationarity condition
    for every profiled mixing proportion in the package.
    """
    e = np.asarray(e, dtype=float)
    if e.ndim != 1 or e.size < 1:
        raise DimensionMismatch(f"{what}: tilt vector must be 1-D and non-empty")
    if not np.all(np.isfinite(e)) or np.any(e <= 0.0):
        raise NonFiniteInput(f"{what}: tilts must be finite and positive")
    shifted = e - 1.0
    if float(np.max(np.abs(shifted))) <= DEGENERATE_TILT_TOL:
        raise DegenerateTilts(
            f"{what}: all tilts equal 1 within {DEGENERATE_TILT_TOL:g}"
        )
    if float(e.min()) >= 1.0 or float(e.max()) <= 1.0:
        raise NoInteriorRoot(f"{what}: tilts lie on one side of 1")

    def g(a: float) -> float:
        return float((shifted / (1.0 - a + a * e)).sum())

    def gprime(a: float) -> float:
        r = shifted / (1.0 - a + a * e)
        return -float((r * r).sum())

    try:
        return solve_monotone_root(g, 0.0, 1.0, settings, fprime=gprime)
    except NoSignChange as exc:
        raise NoInteriorRoot(f"{what}: score has no interior root ({exc})") from exc


def solve_alpha(
    all_z: np.ndarray, beta: TiltParams, settings: SolverSettings
) -> float:
    """Mixing weight solving sum_i (e_i - 1)/(1 - a + a e_i) = 0 over all rows.

    Equivalently, the weight at which the profiled base-measure weights
    1/(N(1 - a + a e_i)) sum to one; uniqueness follows from the sum being
    strictly decreasing in ``a``.

    Raises:
        DegenerateTilts: every tilt equals 1 within 1e-12.
        NoInteriorRoot: all tilts on one side of 1, or no interior sign change.
    """
    e = tilt_values(np.asarray(all_z, dtype=float), beta.as_vector())
    return _mixing_root(e, settings, "solve_alpha")


def solve_rho_u(
    unlabeled_z: np.ndarray, beta: TiltParams, settings: SolverSettings
) -> float:
    """Unlabeled class-1 proportion solving the same score over unlabeled rows.

    Errors as :func:`solve_alpha`.
    """
    e = tilt_values(np.asarray(unlabeled_z, dtype=float), beta.as_vector())
    return _mixing_root(e, settings, "solve_rho_u")


def _bernoulli_parts(n1: int, n0: int, rho: float):
    """Value, first and second rho-derivatives of the labeled Bernoulli terms."""
    value = n1 * np.log(rho) + n0 * np.log(1.0 - rho)
    grad = n1 / rho - n0 / (1.0 - rho)
    hess = -n1 / rho**2 - n0 / (1.0 - rho) ** 2
    return value, grad, hess


def kappa_m1(ds: Dataset, beta: TiltParams, rho: float, alpha: float) -> KappaEval:
    """Restricted-case objective with one shared proportion.

    Active block order: (beta0, beta1..., rho, alpha). The value includes the
    -N log N weight-normalization constant.
    """
    _require_rs(ds, "kappa_m1")
    rho = _check_unit(rho, "rho", RhoOutOfRange)
    alpha = _check_unit(alpha, "alpha", AlphaOutOfRange)
    beta_vec = beta.as_vector()
    if beta_vec.size != ds.d + 1:
        raise DimensionMismatch("tilt dimension does not match the dataset")
    e_all = tilt_values(ds.all_z, beta_vec)
    e_u = e_all[ds.n :]
    Lu, s1u, s2u, v1u, v2u, M2u = _kernels.tilt_reductions(ds.unlabeled_z, e_u, rho)
    La, s1a, s2a, v1a, v2a, M2a = _kernels.tilt_reductions(ds.all_z, e_all, alpha)
    t1 = _class1_zsum(ds)
    n_total = ds.n_total
    bval, bgrad, bhess = _bernoulli_parts(ds.n1, ds.n0, rho)

    q = beta_vec.size
    value = float(t1 @ beta_vec) + Lu - La + bval - n_total * np.log(n_total)
    grad = np.empty(q + 2)
    grad[:q] = t1 + rho * v1u - alpha * v1a
    grad[q] = s1u + bgrad
    grad[q + 1] = -s1a
    hess = np.zeros((q + 2, q + 2))
    hess[:q, :q] = rho * (1.0 - rho) * M2u - alpha * (1.0 - alpha) * M2a
    hess[:q, q] = v2u
    hess[q, :q] = v2u
    hess[:q, q + 1] = -v2a
    hess[q + 1, :q] = -v2a
    hess[q, q] = -s2u + bhess
    hess[q + 1, q + 1] = s2a
    return KappaEval(value, grad, hess)


def kappa_m2(
    ds: Dataset, beta: TiltParams, rho_l: float, rho_u: float, alpha: float
) -> KappaEval:
    """Unrestricted-case objective with separate proportions.

    Active block order: (beta0, beta1..., rho_l, rho_u, alpha).
    """
    _require_rs(ds, "kappa_m2")
    rho_l = _check_unit(rho_l, "rho_l", RhoOutOfRange)
    rho_u = _check_unit(rho_u, "rho_u", RhoOutOfRange)
    alpha = _check_unit(alpha, "alpha", AlphaOutOfRange)
    beta_vec = beta.as_vector()
    if beta_vec.size != ds.d + 1:
        raise DimensionMismatch("tilt dimension does not match the dataset")
    e_all = tilt_values(ds.all_z, beta_vec)
    e_u = e_all[ds.n :]
    Lu, s1u, s2u, v1u, v2u, M2u = _kernels.tilt_reductions(ds.unlabeled_z, e_u, rho_u)
    La, s1a, s2a, v1a, v2a, M2a = _kernels.tilt_reductions(ds.all_z, e_all, alpha)
    t1 = _class1_zsum(ds)
    n_total = ds.n_total
    bval, bgrad, bhess = _bernoulli_parts(ds.n1, ds.n0, rho_l)

    q = beta_vec.size
    value = float(t1 @ beta_vec) + Lu - La + bval - n_total * np.log(n_total)
    grad = np.empty(q + 3)
    grad[:q] = t1 + rho_u * v1u - alpha * v1a
    grad[q] = bgrad
    grad[q + 1] = s1u
    grad[q + 2] = -s1a
    hess = np.zeros((q + 3, q + 3))
    hess[:q, :q] = rho_u * (1.0 - rho_u) * M2u - alpha * (1.0 - alpha) * M2a
    hess[q, q] = bhess
    hess[:q, q + 1] = v2u
    hess[q + 1, :q] = v2u
    hess[q + 1, q + 1] = -s2u
    hess[:q, q + 2] = -v2a
    hess[q + 2, :q] = -v2a
    hess[q + 2, q + 2] = s2a
    return KappaEval(value, grad, hess)


def _degenerate_fallback(
    ds: Dataset, case: Case, logistic_est: EtmEstimate
) -> EtmEstimate:
    """Estimate returned when all tilts collapse to 1 (mixing unidentified).

    The conditional fit is still well-defined; the unidentified nuisances are
    pinned to the labeled class-1 fraction and the estimate is flagged.
    """
    rho_hat = float(np.mean(posterior_prob(ds.all_x, logistic_est.conditional)))
    ybar = ds.n1 / ds.n
    rho_ell = rho_hat if case is Case.M1 else ybar
    tilt = TiltParams(
        logistic_est.conditional.beta0c - float(logit(rho_ell)),
        logistic_est.conditional.beta1c.copy(),
    )
    return EtmEstimate(
        case=case,
        tilt=tilt,
        conditional=logistic_est.conditional,
        rho_ell=rho_ell,
        rho_u=ybar if case is Case.M2 else rho_hat,
        alpha=ybar,
        diagnostics=logistic_est.diagnostics,
        warning="degenerate_tilts",
    )


def fit_m1(ds: Dataset, settings: SolverSettings | None = None) -> EtmEstimate:
    """Restricted-case fit: Newton on the profile of kappa over (beta, rho).

    alpha is eliminated at every trial point by :func:`solve_alpha`; the
    profile Hessian carries the implicit correction
    ``- k_beta_alpha k_alpha_alpha^{-1} k_alpha_beta``. rho is iterated on the
    log-odds scale so the parameter stays interior. With no unlabeled rows the
    fit coincides with the supervised one (the unlabeled score vanishes) and
    is delegated to it.

    Raises:
        SingleClass, Separation: from the supervised initialization.
        NoInteriorRoot: the mixing score has no interior root at some accepted
            point (data inconsistent with the model).
        MaxIterExceeded, Diverged: from the outer Newton solve.
    """
    from .supervised import fit_logistic

    settings = settings or SolverSettings()
    _require_rs(ds, "fit_m1")
    logistic_est = fit_logistic(ds, settings)
    ybar = ds.n1 / ds.n
    if ds.n2 == 0:
        return EtmEstimate(
            case=Case.M1,
            tilt=logistic_est.tilt,
            conditional=logistic_est.conditional,
            rho_ell=ybar,
            rho_u=ybar,
            alpha=ybar,
            diagnostics=logistic_est.diagnostics,
        )

    inner = _inner_settings(settings)
    t1 = _class1_zsum(ds)
    n1, n0, n_total = ds.n1, ds.n0, ds.n_total
    q = ds.d + 1
    log_n_term = n_total * np.log(n_total)

    def profile(phi: np.ndarray):
        beta_vec = phi[:q]
        rho = float(expit(phi[q]))
        if not 0.0 < rho < 1.0:
            raise RhoOutOfRange("profile left the open interval for rho")
        e_all = tilt_values(ds.all_z, beta_vec)
        alpha = _mixing_root(e_all, inner, "solve_alpha")
        e_u = e_all[ds.n :]
        Lu, s1u, s2u, v1u, v2u, M2u = _kernels.tilt_reductions(
            ds.unlabeled_z, e_u, rho
        )
        La, s1a, s2a, v1a, v2a, M2a = _kernels.tilt_reductions(
            ds.all_z, e_all, alpha
        )
        bval, bgrad, bhess = _bernoulli_parts(n1, n0, rho)
        delta = rho * (1.0 - rho)

        value = float(t1 @ beta_vec) + Lu - La + bval - log_n_term
        g_beta = t1 + rho * v1u - alpha * v1a
        g_rho = s1u + bgrad
        if s2a <= 0.0:
            raise DegenerateTilts("alpha curvature vanished during profiling")
        h_bb = (
            rho * (1.0 - rho) * M2u
            - alpha * (1.0 - alpha) * M2a
            - np.outer(v2a, v2a) / s2a
        )
        h_brho = v2u
        h_rr = -s2u + bhess

        grad = np.empty(q + 1)
        grad[:q] = g_beta
        grad[q] = g_rho * delta
        hess = np.empty((q + 1, q + 1))
        hess[:q, :q] = h_bb
        hess[:q, q] = h_brho * delta
        hess[q, :q] = h_brho * delta
        hess[q, q] = delta**2 * h_rr + delta * (1.0 - 2.0 * rho) * g_rho
        return value, grad, hess

    phi0 = np.concatenate([logistic_est.tilt.as_vector(), [float(logit(ybar))]])
    try:
        phi, diag = newton_maximize(profile, phi0, settings)
    except DegenerateTilts:
        return _degenerate_fallback(ds, Case.M1, logistic_est)

    beta_hat = phi[:q]
    rho_hat = float(expit(phi[q]))
    alpha_hat = _mixing_root(tilt_values(ds.all_z, beta_hat), inner, "solve_alpha")
    tilt = TiltParams.from_vector(beta_hat)
    g0_weights(ds, tilt, alpha_hat)  # normalization self-check
    return EtmEstimate(
        case=Case.M1,
        tilt=tilt,
        conditional=to_conditional(tilt, rho_hat),
        rho_ell=rho_hat,
        rho_u=rho_hat,
        alpha=alpha_hat,
        diagnostics=diag,
    )


def fit_m2(ds: Dataset, settings: SolverSettings | None = None) -> EtmEstimate:
    """Unrestricted-case fit: Newton over beta with both scalars profiled.

    rho_ell separates from the rest of the objective and equals the labeled
    class-1 fraction exactly. rho_u and alpha are eliminated per trial point
    (their cross-curvature is zero, so the profile Hessian subtracts one
    rank-one correction for each).

    Requires at least one unlabeled row. Errors as :func:`fit_m1`, plus
    NoInteriorRoot from the rho_u score.
    """
    from .supervised import fit_logistic

    settings = settings or SolverSettings()
    _require_rs(ds, "fit_m2")
    if ds.n2 < 1:
        raise DimensionMismatch("the unrestricted case requires unlabeled rows")
    logistic_est = fit_logistic(ds, settings)
    ybar = ds.n1 / ds.n

    inner = _inner_settings(settings)
    t1 = _class1_zsum(ds)
    n1, n0, n_total = ds.n1, ds.n0, ds.n_total
    q = ds.d + 1
    bval_const = _bernoulli_parts(n1, n0, ybar)[0]
    log_n_term = n_total * np.log(n_total)

    def profile(beta_vec: np.ndarray):
        e_all = tilt_values(ds.all_z, beta_vec)
        e_u = e_all[ds.n :]
        rho_u = _mixing_root(e_u, inner, "solve_rho_u")
        alpha = _mixing_root(e_all, inner, "solve_alpha")
        Lu, s1u, s2u, v1u, v2u, M2u = _kernels.tilt_reductions(
            ds.unlabeled_z, e_u, rho_u
        )
        La, s1a, s2a, v1a, v2a, M2a = _kernels.tilt_reductions(
            ds.all_z, e_all, alpha
        )
        if s2a <= 0.0 or s2u <= 0.0:
            raise DegenerateTilts("mixing curvature vanished during profiling")
        value = float(t1 @ beta_vec) + Lu - La + bval_const - log_n_term
        grad = t1 + rho_u * v1u - alpha * v1a
        hess = (
            rho_u * (1.0 - rho_u) * M2u
            - alpha * (1.0 - alpha) * M2a
            + np.outer(v2u, v2u) / s2u
            - np.outer(v2a, v2a) / s2a
        )
        return value, grad, hess

    try:
        beta_hat, diag = newton_maximize(
            profile, logistic_est.tilt.as_vector(), settings
        )
    except DegenerateTilts:
        return _degenerate_fallback(ds, Case.M2, logistic_est)

    e_all = tilt_values(ds.all_z, beta_hat)
    rho_u_hat = _mixing_root(e_all[ds.n :], inner, "solve_rho_u")
    alpha_hat = _mixing_root(e_all, inner, "solve_alpha")
    tilt = TiltParams.from_vector(beta_hat)
    g0_weights(ds, tilt, alpha_hat)  # normalization self-check
    return EtmEstimate(
        case=Case.M2,
        tilt=tilt,
        conditional=to_conditional(tilt, ybar),
        rho_ell=ybar,
        rho_u=rho_u_hat,
        alpha=alpha_hat,
        diagnostics=diag,
    )
