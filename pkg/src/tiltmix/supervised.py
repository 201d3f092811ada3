"""Supervised baseline: logistic MLE on the labeled rows plus its sandwich
variance estimate over the joint parameter (beta_c, rho_ell).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import Separation, SingleClass, SingularH
from .model import (
    Case,
    ConditionalParams,
    Dataset,
    Design,
    EtmEstimate,
    from_conditional,
)
from .numerics import SolverSettings, newton_maximize

__all__ = ["SandwichBlocks", "fit_logistic", "sandwich_avar", "SEPARATION_NORM"]

#: Conditional-scale norm beyond which a still-unconverged fit is declared
#: separated.
SEPARATION_NORM = 30.0


@dataclass
class SandwichBlocks:
    """Empirical sandwich pieces for the supervised fit.

    ``H`` is minus the average Jacobian of the stacked score, ``G`` the average
    score outer product, and ``U0 = H^-1 G H^-T`` estimates the asymptotic
    variance of sqrt(n) (beta_c, rho_ell). Parameter order: (beta0c, beta1c...,
    rho_ell).
    """

    H: np.ndarray
    G: np.ndarray
    U0: np.ndarray


def _logistic_fgh(z: np.ndarray, y: np.ndarray):
    """Log-likelihood triple for the conditional fit."""

    def fgh(bc: np.ndarray):
        lin = z @ bc
        # log(1 + exp(lin)) computed stably for both signs of lin
        value = float(y @ lin - np.logaddexp(0.0, lin).sum())
        p = expit(lin)
        grad = z.T @ (y - p)
        w = p * (1.0 - p)
        hess = -(z * w[:, None]).T @ z
        return value, grad, hess

    return fgh


def fit_logistic(ds: Dataset, settings: SolverSettings | None = None) -> EtmEstimate:
    """Maximum likelihood logistic fit on the labeled rows.

    The conditional-scale Newton iteration starts at zero. Under random
    sampling ``rho_ell`` is the sample class-1 fraction; under the
    outcome-stratified design it is fixed at n1/n.

    Raises:
        SingleClass: labels contain only one class.
        Separation: iterates exceed ``SEPARATION_NORM`` in max-norm while the
            gradient is still above tolerance.
        MaxIterExceeded: no convergence within the iteration budget.
    """
    settings = settings or SolverSettings()
    y = ds.labeled_y.astype(float)
    n1 = ds.n1
    if n1 == 0 or n1 == ds.n:
        raise SingleClass(f"labeled rows contain a single class (n1 = {n1})")
    z = ds.labeled_z

    def guard(x: np.ndarray, grad_norm: float) -> None:
        if float(np.max(np.abs(x))) > SEPARATION_NORM and grad_norm > settings.grad_tol:
            raise Separation(
                "conditional coefficients exceed "
                f"{SEPARATION_NORM:g} before convergence; data are separated"
            )

    bc, diag = newton_maximize(
        _logistic_fgh(z, y), np.zeros(z.shape[1]), settings, on_iterate=guard
    )
    cond = ConditionalParams(bc[0], bc[1:])
    # Sample class-1 fraction (random sampling) coincides with the
    # design-fixed fraction n1/n (outcome-stratified).
    rho_ell = n1 / ds.n
    tilt = from_conditional(cond, rho_ell)
    return EtmEstimate(
        case=Case.LOGISTIC,
        tilt=tilt,
        conditional=cond,
        rho_ell=rho_ell,
        rho_u=None,
        alpha=None,
        diagnostics=diag,
    )


def sandwich_avar(ds: Dataset, est: EtmEstimate) -> SandwichBlocks:
    """Empirical sandwich variance for the supervised fit under random sampling.

    Scores per labeled row i, at the fitted (beta_c, rho):
        psi_beta_i = (y_i - p_i) z_i          with p_i = sigmoid(z_i' beta_c)
        psi_rho_i  = (y_i - rho) / (rho (1 - rho))
    ``H`` averages minus their parameter Jacobian (upper triangular by
    construction: psi_rho does not involve beta_c), ``G`` averages the outer
    products, both divided by n.

    Raises:
        ValueError: estimate is not a random-sampling logistic fit.
        SingularH: the bread matrix cannot be inverted.
    """
    if est.case is not Case.LOGISTIC:
        raise ValueError("sandwich_avar expects a logistic estimate")
    if ds.design is not Design.RANDOM_SAMPLING:
        raise ValueError("sandwich_avar is defined for the random-sampling design")
    z = ds.labeled_z
    y = ds.labeled_y.astype(float)
    n = ds.n
    rho = est.rho_ell
    delta = rho * (1.0 - rho)
    p = expit(z @ est.conditional.as_vector())
    w = p * (1.0 - p)

    q = z.shape[1]
    H = np.zeros((q + 1, q + 1))
    H[:q, :q] = (z * w[:, None]).T @ z / n
    # -d(psi_beta)/d(rho) = z e/(1-rho+rho e)^2 = z p(1-p)/(rho(1-rho))
    H[:q, q] = z.T @ w / (n * delta)
    ybar = float(y.mean())
    H[q, q] = (delta + (ybar - rho) * (1.0 - 2.0 * rho)) / delta**2

    psi = np.hstack([(y - p)[:, None] * z, ((y - rho) / delta)[:, None]])
    G = psi.T @ psi / n

    try:
        X = np.linalg.solve(H, G)
        U0 = np.linalg.solve(H, X.T).T
    except np.linalg.LinAlgError as exc:
        raise SingularH(f"sandwich bread matrix is singular: {exc}") from exc
    if not np.all(np.isfinite(U0)):
        raise SingularH("sandwich inversion produced non-finite values")
    U0 = 0.5 * (U0 + U0.T)
    return SandwichBlocks(H=H, G=G, U0=U0)
