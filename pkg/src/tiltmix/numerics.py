"""Shared numerical routines: safeguarded root finding, damped Newton
maximization, symmetric eigenvalues, and a finite-difference gradient checker.

All iterative routines are governed by :class:`SolverSettings` and report
:class:`SolveDiagnostics`, so every fit in the package exposes the same
convergence bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    Diverged,
    DimensionMismatch,
    MaxIterExceeded,
    NonFiniteInput,
    NoSignChange,
    SingularHessian,
    EstimationError,
)

__all__ = [
    "SolverSettings",
    "SolveDiagnostics",
    "solve_monotone_root",
    "newton_maximize",
    "sym_eig_desc",
    "grad_check",
]


@dataclass(frozen=True)
class SolverSettings:
    """Tuning knobs shared by every iterative solver in the package.

    Attributes:
        grad_tol: convergence threshold on the max-norm of a gradient or on
            the absolute value of a scalar score.
        max_iter: iteration cap for Newton loops and root searches.
        step_halvings_max: cap on line-search halvings per Newton step.
        boundary_eps: open-interval margin used when a parameter lives in
            (0, 1) (or a general open bracket); evaluations never touch the
            endpoints.
        divergence_cap: iterate-norm bound beyond which a maximization is
            declared divergent.
    """

    grad_tol: float = 1e-10
    max_iter: int = 200
    step_halvings_max: int = 50
    boundary_eps: float = 1e-10
    divergence_cap: float = 1e6

    def __post_init__(self) -> None:
        if not (self.grad_tol > 0.0 and np.isfinite(self.grad_tol)):
            raise ValueError("grad_tol must be a positive finite float")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.step_halvings_max < 1:
            raise ValueError("step_halvings_max must be at least 1")
        if not (0.0 < self.boundary_eps < 0.5):
            raise ValueError("boundary_eps must lie in (0, 0.5)")
        if not (self.divergence_cap > 0.0):
            raise ValueError("divergence_cap must be positive")


@dataclass
class SolveDiagnostics:
    """Convergence report attached to every estimate.

    Attributes:
        iterations: number of accepted update steps.
        final_grad_norm: max-norm of the gradient (or |score|) at exit.
        converged: whether the gradient test was met.
        objective_value: objective at the returned point.
    """

    iterations: int
    final_grad_norm: float
    converged: bool
    objective_value: float


def solve_monotone_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    settings: SolverSettings,
    fprime: Callable[[float], float] | None = None,
) -> float:
    """Find the root of a monotone scalar function on an open interval.

    Newton steps (or secant steps when ``fprime`` is not given) are safeguarded
    by an enclosing bracket: any candidate that leaves the current bracket is
    replaced by its midpoint, so progress is at worst bisection.

    Args:
        f: monotone scalar function.
        lo, hi: open-interval endpoints, ``lo < hi``. Evaluations are shifted
            inward by ``settings.boundary_eps * (hi - lo)``.
        settings: solver settings; convergence is ``|f(x)| <= grad_tol`` or
            the enclosing bracket collapsing to adjacent floats, which
            locates the root to machine precision regardless of the noise
            floor of the score evaluation.
        fprime: optional analytic derivative of ``f``.

    Returns:
        The root as a float.

    Raises:
        NoSignChange: the inward-shifted endpoint values share a sign.
        MaxIterExceeded: no convergence within ``settings.max_iter``.
        NonFiniteInput: an endpoint evaluation was NaN or infinite.
    """
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise NonFiniteInput(f"invalid bracket [{lo}, {hi}]")
    margin = settings.boundary_eps * (hi - lo)
    a = lo + margin
    b = hi - margin
    fa = float(f(a))
    fb = float(f(b))
    if not (np.isfinite(fa) and np.isfinite(fb)):
        raise NonFiniteInput("endpoint evaluation is not finite")
    if abs(fa) <= settings.grad_tol:
        return a
    if abs(fb) <= settings.grad_tol:
        return b
    if np.sign(fa) == np.sign(fb):
        raise NoSignChange(
            f"f({a:.6g}) = {fa:.6g} and f({b:.6g}) = {fb:.6g} share a sign"
        )

    x = 0.5 * (a + b)
    for _ in range(settings.max_iter):
        fx = float(f(x))
        if not np.isfinite(fx):
            raise NonFiniteInput("interior evaluation is not finite")
        if abs(fx) <= settings.grad_tol:
            return x
        if np.sign(fx) == np.sign(fa):
            a, fa = x, fx
        else:
            b, fb = x, fx
        if fprime is not None:
            slope = float(fprime(x))
        else:
            slope = (fb - fa) / (b - a)
        cand = x - fx / slope if np.isfinite(slope) and slope != 0.0 else np.nan
        if not (np.isfinite(cand) and a < cand < b):
            cand = 0.5 * (a + b)
        if b - a <= 4.0 * np.finfo(float).eps * max(abs(a), abs(b)):
            # Bracket collapsed to adjacent floats: the root is located to
            # machine precision even when summation noise keeps the score
            # residual above grad_tol.
            return a if abs(fa) <= abs(fb) else b
        x = cand
    raise MaxIterExceeded(
        f"no root within {settings.max_iter} iterations (|f| = {abs(fx):.3g})"
    )


def _try_fgh(fgh, x):
    """Evaluate an objective triple, mapping guard trips to None."""
    try:
        value, grad, hess = fgh(x)
    except (EstimationError, FloatingPointError):
        return None
    value = float(value)
    if not np.isfinite(value):
        return None
    return value, np.asarray(grad, dtype=float), hess


def newton_maximize(
    fgh: Callable[[np.ndarray], tuple],
    init: Sequence[float] | np.ndarray,
    settings: SolverSettings,
    on_iterate: Callable[[np.ndarray, float], None] | None = None,
) -> tuple[np.ndarray, SolveDiagnostics]:
    """Maximize a smooth objective by damped Newton ascent.

    Each step solves the Newton system on a symmetrized Hessian whose
    nonnegative curvature directions are flipped to their magnitudes (with a
    small floor), so the direction is always ascent and reduces to the exact
    Newton step wherever the Hessian is negative definite; if the
    eigendecomposition fails, the gradient is used instead. Step halving
    accepts a
    trial that improves the objective beyond a relative noise floor, or, once
    value changes sink into that floor near an optimum, a trial that does not
    decrease the value (within the floor) while shrinking the gradient norm
    by at least ten percent, which preserves the quadratic endgame of full
    Newton steps when objective evaluations have reached their resolution.

    Args:
        fgh: callable returning ``(value, gradient, hessian)`` at a point.
        init: starting point.
        settings: solver settings.
        on_iterate: optional callback invoked as ``on_iterate(x, grad_norm)``
            at the start of each iteration (before the convergence test);
            it may raise to abort the solve.

    Returns:
        ``(x, diagnostics)`` with ``diagnostics.converged`` True.

    Raises:
        MaxIterExceeded: iteration or line-search budget exhausted; the
            exception carries the final diagnostics.
        Diverged: iterate norm exceeded ``settings.divergence_cap``.
        SingularHessian: no usable ascent direction could be formed.
        NonFiniteInput: the initial point or evaluation is not finite.
    """
    x = np.array(init, dtype=float).copy()
    if x.ndim != 1:
        raise DimensionMismatch("init must be a 1-D point")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("initial point is not finite")
    # The first evaluation is direct so that domain errors raised by the
    # objective (guard trips, missing inner roots) keep their type instead of
    # being folded into the line search.
    value, g, H = fgh(x)
    fx = float(value)
    g = np.asarray(g, dtype=float)
    if not (np.isfinite(fx) and np.all(np.isfinite(g))):
        raise NonFiniteInput("objective or gradient is not finite at the initial point")

    iterations = 0
    for _ in range(settings.max_iter):
        gnorm = float(np.linalg.norm(g, ord=np.inf))
        if on_iterate is not None:
            on_iterate(x, gnorm)
        if gnorm <= settings.grad_tol:
            return x, SolveDiagnostics(iterations, gnorm, True, fx)

        step = None
        if np.all(np.isfinite(H)):
            h_sym = np.asarray(H, dtype=float)
            h_sym = 0.5 * (h_sym + h_sym.T)
            try:
                lam, vec = np.linalg.eigh(h_sym)
                floor = 1e-8 * max(1.0, float(np.max(np.abs(lam))))
                inv_curv = 1.0 / np.maximum(np.abs(lam), floor)
                cand = vec @ (inv_curv * (vec.T @ g))
                if np.all(np.isfinite(cand)) and float(cand @ g) > 0.0:
                    step = cand
            except np.linalg.LinAlgError:
                step = None
        if step is None:
            if not np.all(np.isfinite(g)) or gnorm == 0.0:
                raise SingularHessian("no usable ascent direction")
            step = g / max(1.0, gnorm)

        accepted = None
        t = 1.0
        noise = 1e-12 * (1.0 + abs(fx))
        for _ in range(settings.step_halvings_max + 1):
            trial = x + t * step
            if np.array_equal(trial, x):
                # The displacement underflowed against x, so smaller steps
                # cannot move the iterate either.
                break
            res = _try_fgh(fgh, trial)
            if res is not None and np.all(np.isfinite(res[1])):
                val_t = float(res[0])
                gnorm_t = float(np.linalg.norm(np.asarray(res[1], dtype=float), ord=np.inf))
                improved = val_t > fx + noise
                held_with_smaller_grad = val_t >= fx - noise and gnorm_t <= 0.9 * gnorm
                if improved or held_with_smaller_grad:
                    accepted = (trial, res)
                    break
            t *= 0.5
        if accepted is None:
            raise MaxIterExceeded(
                "line search failed to improve the objective",
                SolveDiagnostics(iterations, gnorm, False, fx),
            )
        x, (fx, g, H) = accepted
        iterations += 1
        if float(np.linalg.norm(x)) > settings.divergence_cap:
            raise Diverged(
                f"iterate norm {np.linalg.norm(x):.3g} exceeds the divergence cap"
            )

    gnorm = float(np.linalg.norm(g, ord=np.inf))
    if gnorm <= settings.grad_tol:
        return x, SolveDiagnostics(iterations, gnorm, True, fx)
    raise MaxIterExceeded(
        f"no convergence within {settings.max_iter} iterations",
        SolveDiagnostics(iterations, gnorm, False, fx),
    )


def sym_eig_desc(m: np.ndarray) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, in descending order.

    The input is symmetrized as ``(m + m.T) / 2`` before decomposition, which
    removes floating-point asymmetry from accumulated products.

    Raises:
        DimensionMismatch: ``m`` is not a square 2-D array.
        NonFiniteInput: ``m`` contains NaN or infinity.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteInput("matrix contains non-finite entries")
    vals = np.linalg.eigvalsh(0.5 * (m + m.T))
    return vals[::-1].copy()


def grad_check(
    value_and_grad: Callable[[np.ndarray], tuple],
    point: Sequence[float] | np.ndarray,
    rel_tol: float,
) -> bool:
    """Compare an analytic gradient against central finite differences.

    Uses per-coordinate steps ``1e-6 * (1 + |x_i|)`` and accepts coordinate
    ``i`` when ``|fd_i - g_i| <= max(rel_tol * max(|g_i|, |fd_i|), 1e-8)``.

    Args:
        value_and_grad: callable returning ``(value, gradient)``.
        point: evaluation point.
        rel_tol: relative tolerance per coordinate.

    Returns:
        True when every coordinate passes.

    Raises:
        NonFiniteInput: the point or any evaluation is not finite.
    """
    x = np.array(point, dtype=float).copy()
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("point is not finite")
    value, grad = value_and_grad(x)
    grad = np.asarray(grad, dtype=float)
    if not (np.isfinite(value) and np.all(np.isfinite(grad))):
        raise NonFiniteInput("objective or gradient is not finite at the point")
    if grad.shape != x.shape:
        raise DimensionMismatch(
            f"gradient shape {grad.shape} does not match point shape {x.shape}"
        )

    ok = True
    for i in range(x.size):
        h = 1e-6 * (1.0 + abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        fp = float(value_and_grad(xp)[0])
        fm = float(value_and_grad(xm)[0])
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteInput(f"finite-difference evaluation failed at coordinate {i}")
        fd = (fp - fm) / (2.0 * h)
        tol_i = max(rel_tol * max(abs(grad[i]), abs(fd)), 1e-8)
        ok = ok and abs(fd - grad[i]) <= tol_i
    return ok
