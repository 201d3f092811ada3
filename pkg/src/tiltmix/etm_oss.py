"""Tilt-mixture estimation under the outcome-stratified design.

The sample is drawn in three strata of fixed size: n1 labeled class-1 rows
(stratum proportion 1), n0 labeled class-0 rows (proportion 0), and n2
unlabeled rows whose class-1 proportion rho2 is a free parameter (``fit_m3``)
or supplied externally (``fit_m4``).

With e_i = exp(z_i' beta) and N = n0 + n1 + n2, the objective is

    kappa = sum_{class 1} z_i'beta + sum_unlab log(1 - rho2 + rho2 e_i)
            - sum_all log(1 - alpha + alpha e_i) - N log N

The class-1 stratum's mixture term log(1 - 1 + 1*e_i) reduces to z_i'beta and
the class-0 stratum's log(1 - 0 + 0*e_i) vanishes, which is why only those
two sums appear. alpha is the saddle (min) variable enforcing base-measure
normalization: at its root, sum_i 1/(1 - alpha + alpha e_i) = N.

Both fits run Newton on the beta-profile with alpha (and, for ``fit_m3``,
rho2) eliminated per trial point; the cross-curvature between rho2 and alpha
is identically zero, so each eliminated scalar contributes an independent
rank-one Schur correction to the profile Hessian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    AlphaOutOfRange,
    DegenerateTilts,
    DimensionMismatch,
    RhoOutOfRange,
    SingleClass,
)
from .etm_rs import (
    KappaEval,
    _check_unit,
    _class1_zsum,
    _inner_settings,
    _mixing_root,
)
from .model import (
    Case,
    Dataset,
    Design,
    EtmEstimate,
    TiltParams,
    g0_weights,
    tilt_values,
    to_conditional,
)
from .numerics import SolverSettings, newton_maximize

__all__ = ["OssCounts", "kappa_oss", "fit_m3", "fit_m4"]


@dataclass(frozen=True)
class OssCounts:
    """Stratum sizes fixed by the outcome-stratified sampling design."""

    n0: int
    n1: int
    n2: int

    def __post_init__(self) -> None:
        for name in ("n0", "n1", "n2"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise DimensionMismatch(f"{name} must be an integer")
        if self.n0 < 1 or self.n1 < 1:
            raise SingleClass("both labeled strata must be non-empty")
        if self.n2 < 0:
            raise DimensionMismatch("n2 must be non-negative")

    @classmethod
    def from_dataset(cls, ds: Dataset) -> "OssCounts":
        return cls(n0=int(ds.n0), n1=int(ds.n1), n2=int(ds.n2))

    @property
    def n(self) -> int:
        return self.n0 + self.n1

    @property
    def n_total(self) -> int:
        return self.n0 + self.n1 + self.n2

    @property
    def rho_l_star(self) -> float:
        """The design-fixed labeled class-1 proportion n1/n."""
        return self.n1 / self.n


def _require_oss(ds: Dataset, what: str) -> None:
    if ds.design is not Design.OUTCOME_STRATIFIED:
        raise DimensionMismatch(f"{what} requires the outcome-stratified design")


def kappa_oss(ds: Dataset, beta: TiltParams, rho2: float, alpha: float) -> KappaEval:
    """Stratified objective; active block order (beta0, beta1..., rho2, alpha).

    The value includes the -N log N weight-normalization constant. rho2
    enters only through the unlabeled rows, so with n2 = 0 its gradient and
    curvature entries are exactly zero.
    """
    _require_oss(ds, "kappa_oss")
    rho2 = _check_unit(rho2, "rho2", RhoOutOfRange)
    alpha = _check_unit(alpha, "alpha", AlphaOutOfRange)
    beta_vec = beta.as_vector()
    if beta_vec.size != ds.d + 1:
        raise DimensionMismatch("tilt dimension does not match the dataset")
    e_all = tilt_values(ds.all_z, beta_vec)
    e_u = e_all[ds.n :]
    Lu, s1u, s2u, v1u, v2u, M2u = _kernels.tilt_reductions(ds.unlabeled_z, e_u, rho2)
    La, s1a, s2a, v1a, v2a, M2a = _kernels.tilt_reductions(ds.all_z, e_all, alpha)
    t1 = _class1_zsum(ds)
    n_total = ds.n_total

    q = beta_vec.size
    value = float(t1 @ beta_vec) + Lu - La - n_total * np.log(n_total)
    grad = np.empty(q + 2)
    grad[:q] = t1 + rho2 * v1u - alpha * v1a
    grad[q] = s1u
    grad[q + 1] = -s1a
    hess = np.zeros((q + 2, q + 2))
    hess[:q, :q] = rho2 * (1.0 - rho2) * M2u - alpha * (1.0 - alpha) * M2a
    hess[:q, q] = v2u
    hess[q, :q] = v2u
    hess[:q, q + 1] = -v2a
    hess[q + 1, :q] = -v2a
    hess[q, q] = -s2u
    hess[q + 1, q + 1] = s2a
    return KappaEval(value, grad, hess)


def fit_m3(ds: Dataset, settings: SolverSettings | None = None) -> EtmEstimate:
    """Stratified fit with the unlabeled proportion estimated.

    Newton on the beta-profile; per trial point alpha solves the
    normalization score over all rows and rho2 the matching score over the
    unlabeled rows. With n2 = 0 the unlabeled block drops out, rho_u is
    reported as None, and the maximizer coincides with the supervised fit.
    Conditional parameters use the design proportion n1/n.

    Raises:
        SingleClass, Separation: from the supervised initialization.
        DegenerateTilts: all tilts collapse to 1 (mixing unidentified); the
            stratified cases treat this as a failure rather than falling back.
        NoInteriorRoot: a profiled score has no root inside (0, 1).
        MaxIterExceeded, Diverged: from the outer Newton solve.
    """
    from .supervised import fit_logistic

    settings = settings or SolverSettings()
    _require_oss(ds, "fit_m3")
    counts = OssCounts.from_dataset(ds)
    logistic_est = fit_logistic(ds, settings)

    inner = _inner_settings(settings)
    t1 = _class1_zsum(ds)
    n_total = counts.n_total
    log_n_term = n_total * np.log(n_total)
    has_unlabeled = counts.n2 >= 1

    def profile(beta_vec: np.ndarray):
        e_all = tilt_values(ds.all_z, beta_vec)
        alpha = _mixing_root(e_all, inner, "solve_alpha")
        La, _s1a, s2a, v1a, v2a, M2a = _kernels.tilt_reductions(
            ds.all_z, e_all, alpha
        )
        if s2a <= 0.0:
            raise DegenerateTilts("alpha curvature vanished during profiling")
        value = float(t1 @ beta_vec) - La - log_n_term
        grad = t1 - alpha * v1a
        hess = -alpha * (1.0 - alpha) * M2a - np.outer(v2a, v2a) / s2a
        if has_unlabeled:
            e_u = e_all[ds.n :]
            rho2 = _mixing_root(e_u, inner, "solve_rho_u")
            Lu, _s1u, s2u, v1u, v2u, M2u = _kernels.tilt_reductions(
                ds.unlabeled_z, e_u, rho2
            )
            if s2u <= 0.0:
                raise DegenerateTilts("rho2 curvature vanished during profiling")
            value += Lu
            grad = grad + rho2 * v1u
            hess = hess + rho2 * (1.0 - rho2) * M2u + np.outer(v2u, v2u) / s2u
        return value, grad, hess

    beta_hat, diag = newton_maximize(profile, logistic_est.tilt.as_vector(), settings)

    e_all = tilt_values(ds.all_z, beta_hat)
    alpha_hat = _mixing_root(e_all, inner, "solve_alpha")
    rho_u_hat = (
        _mixing_root(e_all[ds.n :], inner, "solve_rho_u") if has_unlabeled else None
    )
    tilt = TiltParams.from_vector(beta_hat)
    g0_weights(ds, tilt, alpha_hat)  # normalization self-check
    rho_l = counts.rho_l_star
    return EtmEstimate(
        case=Case.M3,
        tilt=tilt,
        conditional=to_conditional(tilt, rho_l),
        rho_ell=rho_l,
        rho_u=rho_u_hat,
        alpha=alpha_hat,
        diagnostics=diag,
    )


def fit_m4(
    ds: Dataset, rho_u_known: float, settings: SolverSettings | None = None
) -> EtmEstimate:
    """Stratified fit with the unlabeled proportion supplied, not estimated.

    Newton on the beta-profile with only alpha eliminated; the unlabeled
    mixture terms use the fixed rho_u_known, so the profile Hessian carries a
    single rank-one correction. A proportion far from what the data support
    is not rejected up front; the optimizer may move beta to compensate, and
    a genuinely incompatible value surfaces as a solver error.

    Raises:
        RhoOutOfRange: rho_u_known outside (0, 1).
        Others as :func:`fit_m3`, minus the rho2 root-finding errors.
    """
    from .supervised import fit_logistic

    settings = settings or SolverSettings()
    _require_oss(ds, "fit_m4")
    rho_u_known = _check_unit(rho_u_known, "rho_u_known", RhoOutOfRange)
    counts = OssCounts.from_dataset(ds)
    logistic_est = fit_logistic(ds, settings)

    inner = _inner_settings(settings)
    t1 = _class1_zsum(ds)
    n_total = counts.n_total
    log_n_term = n_total * np.log(n_total)
    has_unlabeled = counts.n2 >= 1
    rho2 = rho_u_known

    def profile(beta_vec: np.ndarray):
        e_all = tilt_values(ds.all_z, beta_vec)
        alpha = _mixing_root(e_all, inner, "solve_alpha")
        La, _s1a, s2a, v1a, v2a, M2a = _kernels.tilt_reductions(
            ds.all_z, e_all, alpha
        )
        if s2a <= 0.0:
            raise DegenerateTilts("alpha curvature vanished during profiling")
        value = float(t1 @ beta_vec) - La - log_n_term
        grad = t1 - alpha * v1a
        hess = -alpha * (1.0 - alpha) * M2a - np.outer(v2a, v2a) / s2a
        if has_unlabeled:
            e_u = e_all[ds.n :]
            Lu, _s1u, _s2u, v1u, _v2u, M2u = _kernels.tilt_reductions(
                ds.unlabeled_z, e_u, rho2
            )
            value += Lu
            grad = grad + rho2 * v1u
            hess = hess + rho2 * (1.0 - rho2) * M2u
        return value, grad, hess

    beta_hat, diag = newton_maximize(profile, logistic_est.tilt.as_vector(), settings)

    e_all = tilt_values(ds.all_z, beta_hat)
    alpha_hat = _mixing_root(e_all, inner, "solve_alpha")
    tilt = TiltParams.from_vector(beta_hat)
    g0_weights(ds, tilt, alpha_hat)  # normalization self-check
    rho_l = counts.rho_l_star
    return EtmEstimate(
        case=Case.M4,
        tilt=tilt,
        conditional=to_conditional(tilt, rho_l),
        rho_ell=rho_l,
        rho_u=rho_u_known,
        alpha=alpha_hat,
        diagnostics=diag,
    )
