"""Core data model: datasets, tilt/conditional parameterizations, base-measure
weights, and the algebraic maps between them.

A binary mixture is described by a base distribution G0 (class 0), a tilted
class-1 distribution dG1 = exp(beta0 + x'beta1) dG0, and class proportions.
The tilt scale ``(beta0, beta1)`` and the conditional (logistic) scale
``(beta0c, beta1c)`` are linked by ``beta0c = beta0 + logit(rho)`` and
``beta1c = beta1`` for the relevant labeled-class proportion ``rho``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit, logit

from .errors import (
    AlphaOutOfRange,
    DimensionMismatch,
    InputOutputError,
    NonFiniteInput,
    NormalizationViolated,
    OverflowGuardTripped,
    RhoOutOfRange,
)
from .numerics import SolveDiagnostics

__all__ = [
    "Design",
    "Case",
    "Dataset",
    "TiltParams",
    "ConditionalParams",
    "EtmEstimate",
    "G0Weights",
    "tilt_weight",
    "to_conditional",
    "from_conditional",
    "posterior_prob",
    "g0_weights",
    "bayes_boundary",
    "load_dataset",
    "dump_dataset",
]

#: Linear predictors beyond this magnitude would overflow/underflow exp().
LINPRED_GUARD = 700.0


class Design(str, Enum):
    """Sampling design of the labeled rows."""

    RANDOM_SAMPLING = "rs"
    OUTCOME_STRATIFIED = "oss"


class Case(str, Enum):
    """Which estimator produced (or should produce) an estimate."""

    LOGISTIC = "logistic"
    M1 = "m1"
    M2 = "m2"
    M3 = "m3"
    M4 = "m4"


def _check_finite(arr: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains non-finite values")


def z_matrix(x: np.ndarray) -> np.ndarray:
    """Prepend an intercept column: rows become z = (1, x')'."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D covariate array, got shape {x.shape}")
    return np.hstack([np.ones((x.shape[0], 1)), x])


@dataclass(frozen=True)
class Dataset:
    """Semi-supervised sample: labeled (x, y) rows plus unlabeled x rows.

    Covariate rows are augmented with an intercept once, at construction;
    ``labeled_z``, ``unlabeled_z`` and ``all_z`` are derived fields. Row order
    is labeled first, then unlabeled, which is the order every sum over "all
    rows" uses. Under the outcome-stratified design the labeled block must be
    sorted as zeros-then-ones.
    """

    labeled_x: np.ndarray
    labeled_y: np.ndarray
    unlabeled_x: np.ndarray
    design: Design
    labeled_z: np.ndarray = field(init=False, repr=False, compare=False)
    unlabeled_z: np.ndarray = field(init=False, repr=False, compare=False)
    all_z: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        lx = np.asarray(self.labeled_x, dtype=float)
        ly = np.asarray(self.labeled_y)
        ux = np.asarray(self.unlabeled_x, dtype=float)
        if lx.ndim != 2 or lx.shape[0] < 1 or lx.shape[1] < 1:
            raise DimensionMismatch(f"labeled_x must be (n, d) with n,d >= 1, got {lx.shape}")
        if ux.ndim != 2:
            raise DimensionMismatch(f"unlabeled_x must be 2-D, got shape {ux.shape}")
        if ux.shape[0] > 0 and ux.shape[1] != lx.shape[1]:
            raise DimensionMismatch(
                f"unlabeled_x has {ux.shape[1]} columns, labeled_x has {lx.shape[1]}"
            )
        if ux.shape[0] == 0:
            ux = ux.reshape(0, lx.shape[1])
        if ly.ndim != 1 or ly.shape[0] != lx.shape[0]:
            raise DimensionMismatch("labeled_y must be 1-D and match labeled_x rows")
        _check_finite(lx, "labeled_x")
        _check_finite(ux, "unlabeled_x")
        yvals = np.unique(ly)
        if not np.all(np.isin(yvals, (0, 1))):
            raise DimensionMismatch("labeled_y entries must be 0 or 1")
        ly = ly.astype(np.int64)
        design = Design(self.design)
        if design is Design.OUTCOME_STRATIFIED and np.any(np.diff(ly) < 0):
            raise DimensionMismatch(
                "outcome-stratified labeled rows must be sorted zeros-then-ones"
            )
        object.__setattr__(self, "labeled_x", lx)
        object.__setattr__(self, "labeled_y", ly)
        object.__setattr__(self, "unlabeled_x", ux)
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "labeled_z", z_matrix(lx))
        object.__setattr__(self, "unlabeled_z", z_matrix(ux))
        object.__setattr__(
            self, "all_z", np.vstack([self.labeled_z, self.unlabeled_z])
        )

    @property
    def n(self) -> int:
        return self.labeled_x.shape[0]

    @property
    def d(self) -> int:
        return self.labeled_x.shape[1]

    @property
    def n2(self) -> int:
        return self.unlabeled_x.shape[0]

    @property
    def n_total(self) -> int:
        return self.n + self.n2

    @property
    def n1(self) -> int:
        return int(self.labeled_y.sum())

    @property
    def n0(self) -> int:
        return self.n - self.n1

    @property
    def all_x(self) -> np.ndarray:
        return np.vstack([self.labeled_x, self.unlabeled_x])


@dataclass(frozen=True)
class TiltParams:
    """Tilt-scale parameters: dG1/dG0(x) = exp(beta0 + x'beta1)."""

    beta0: float
    beta1: np.ndarray

    def __post_init__(self) -> None:
        b1 = np.atleast_1d(np.asarray(self.beta1, dtype=float))
        if b1.ndim != 1 or b1.size < 1:
            raise DimensionMismatch("beta1 must be a 1-D vector")
        if not (np.isfinite(self.beta0) and np.all(np.isfinite(b1))):
            raise NonFiniteInput("tilt parameters must be finite")
        object.__setattr__(self, "beta0", float(self.beta0))
        object.__setattr__(self, "beta1", b1)

    def as_vector(self) -> np.ndarray:
        """Stack as (beta0, beta1_1, ..., beta1_d)."""
        return np.concatenate([[self.beta0], self.beta1])

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "TiltParams":
        vec = np.asarray(vec, dtype=float)
        return cls(float(vec[0]), vec[1:].copy())

    @property
    def d(self) -> int:
        return self.beta1.size


@dataclass(frozen=True)
class ConditionalParams:
    """Conditional (logistic) scale: P(y=1|x) = sigmoid(beta0c + x'beta1c)."""

    beta0c: float
    beta1c: np.ndarray

    def __post_init__(self) -> None:
        b1 = np.atleast_1d(np.asarray(self.beta1c, dtype=float))
        if b1.ndim != 1 or b1.size < 1:
            raise DimensionMismatch("beta1c must be a 1-D vector")
        if not (np.isfinite(self.beta0c) and np.all(np.isfinite(b1))):
            raise NonFiniteInput("conditional parameters must be finite")
        object.__setattr__(self, "beta0c", float(self.beta0c))
        object.__setattr__(self, "beta1c", b1)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([[self.beta0c], self.beta1c])


@dataclass
class EtmEstimate:
    """Fitted parameters on both scales, with nuisance values and diagnostics.

    ``rho_ell`` is the labeled-class-1 proportion relevant to the conditional
    map; ``rho_u`` the unlabeled one (None when not estimated or undefined);
    ``alpha`` the pooled mixing weight defining the base-measure weights.
    ``warning`` is set (e.g. ``"degenerate_tilts"``) when a fit returned with
    an unidentified nuisance pinned to a documented fallback.
    """

    case: Case
    tilt: TiltParams
    conditional: ConditionalParams
    rho_ell: float | None
    rho_u: float | None
    alpha: float | None
    diagnostics: SolveDiagnostics
    warning: str | None = None

    def as_dict(self) -> dict:
        """JSON-ready representation (plain floats and lists)."""
        return {
            "case": self.case.value,
            "beta0": self.tilt.beta0,
            "beta1": self.tilt.beta1.tolist(),
            "beta0c": self.conditional.beta0c,
            "beta1c": self.conditional.beta1c.tolist(),
            "rho_ell": self.rho_ell,
            "rho_u": self.rho_u,
            "alpha": self.alpha,
            "warning": self.warning,
            "diagnostics": {
                "iterations": self.diagnostics.iterations,
                "final_grad_norm": self.diagnostics.final_grad_norm,
                "converged": self.diagnostics.converged,
                "objective_value": self.diagnostics.objective_value,
            },
        }


@dataclass(frozen=True)
class G0Weights:
    """Profiled base-measure weights w_i = 1 / (N (1 - alpha + alpha e_i)).

    At a solved mixing weight these satisfy ``sum w = 1`` (within 1e-10) and
    ``sum w e = 1`` (within 1e-8); the recorded sums let callers check how far
    a given alpha is from stationarity.
    """

    weights: np.ndarray
    sum_w: float
    sum_we: float


def tilt_values(z: np.ndarray, beta_vec: np.ndarray) -> np.ndarray:
    """exp(z @ beta) for a stacked design matrix, overflow-guarded.

    Raises:
        OverflowGuardTripped: any |linear predictor| exceeds the exp guard.
    """
    lin = z @ beta_vec
    if lin.size and float(np.max(np.abs(lin))) > LINPRED_GUARD:
        raise OverflowGuardTripped(
            f"linear predictor magnitude exceeds {LINPRED_GUARD:g}"
        )
    return np.exp(lin)


def tilt_weight(x: Sequence[float] | np.ndarray, tilt: TiltParams) -> float:
    """Density ratio dG1/dG0 at a single point x."""
    x = np.asarray(x, dtype=float)
    if x.shape != (tilt.d,):
        raise DimensionMismatch(f"x has shape {x.shape}, expected ({tilt.d},)")
    _check_finite(x, "x")
    lin = tilt.beta0 + float(x @ tilt.beta1)
    if abs(lin) > LINPRED_GUARD:
        raise OverflowGuardTripped(
            f"linear predictor {lin:.3g} exceeds the exp guard"
        )
    return float(np.exp(lin))


def _check_open_unit(value: float, name: str, err) -> float:
    value = float(value)
    if not (np.isfinite(value) and 0.0 < value < 1.0):
        raise err(f"{name} must lie strictly inside (0, 1), got {value!r}")
    return value


def to_conditional(tilt: TiltParams, rho: float) -> ConditionalParams:
    """Map tilt-scale parameters to the conditional scale at proportion rho."""
    rho = _check_open_unit(rho, "rho", RhoOutOfRange)
    return ConditionalParams(tilt.beta0 + float(logit(rho)), tilt.beta1.copy())


def from_conditional(cond: ConditionalParams, rho: float) -> TiltParams:
    """Inverse of :func:`to_conditional`."""
    rho = _check_open_unit(rho, "rho", RhoOutOfRange)
    return TiltParams(cond.beta0c - float(logit(rho)), cond.beta1c.copy())


def posterior_prob(x: np.ndarray, cond: ConditionalParams) -> float | np.ndarray:
    """P(y=1|x) under the conditional parameters.

    Accepts a single point ``(d,)`` (returns a float) or a matrix ``(m, d)``
    (returns a vector).
    """
    x = np.asarray(x, dtype=float)
    _check_finite(x, "x")
    if x.ndim == 1:
        if x.shape != (cond.beta1c.size,):
            raise DimensionMismatch(
                f"x has shape {x.shape}, expected ({cond.beta1c.size},)"
            )
        return float(expit(cond.beta0c + x @ cond.beta1c))
    if x.ndim == 2:
        if x.shape[1] != cond.beta1c.size:
            raise DimensionMismatch(
                f"x has {x.shape[1]} columns, expected {cond.beta1c.size}"
            )
        return expit(cond.beta0c + x @ cond.beta1c)
    raise DimensionMismatch(f"x must be 1-D or 2-D, got shape {x.shape}")


def g0_weights(ds: Dataset, tilt: TiltParams, alpha: float) -> G0Weights:
    """Base-measure weights over all rows at a given mixing weight.

    Raises:
        AlphaOutOfRange: alpha outside (0, 1).
        NormalizationViolated: either normalization is off by more than 1e-6,
            which signals a stale alpha for these parameters.
    """
    alpha = _check_open_unit(alpha, "alpha", AlphaOutOfRange)
    e = tilt_values(ds.all_z, tilt.as_vector())
    n_total = ds.n_total
    w = 1.0 / (n_total * (1.0 - alpha + alpha * e))
    sum_w = float(w.sum())
    sum_we = float((w * e).sum())
    if abs(sum_w - 1.0) > 1e-6 or abs(sum_we - 1.0) > 1e-6:
        raise NormalizationViolated(
            f"weight sums ({sum_w:.9f}, {sum_we:.9f}) deviate from 1 beyond 1e-6"
        )
    return G0Weights(w, sum_w, sum_we)


def bayes_boundary(tilt: TiltParams, rho0: float, x0: Sequence[float] | np.ndarray) -> float:
    """Log posterior odds of class 1 at x0 under prior proportion rho0.

    Zero marks the decision boundary.
    """
    rho0 = _check_open_unit(rho0, "rho0", RhoOutOfRange)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (tilt.d,):
        raise DimensionMismatch(f"x0 has shape {x0.shape}, expected ({tilt.d},)")
    _check_finite(x0, "x0")
    return float(tilt.beta0 + logit(rho0) + x0 @ tilt.beta1)


# --- CSV I/O -----------------------------------------------------------------
#
# Format: header "y,x1,...,xd"; one row per observation; an empty y marks an
# unlabeled row. Labeled rows are written first.


def load_dataset(path: str | Path, design: Design | str) -> Dataset:
    """Read a dataset CSV. Under OSS the labeled block is stably sorted 0-then-1."""
    design = Design(design)
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise InputOutputError(f"{path}: empty file") from None
            if len(header) < 2 or header[0].strip() != "y":
                raise InputOutputError(
                    f"{path}: expected header 'y,x1,...,xd', got {header!r}"
                )
            d = len(header) - 1
            lab_x: list[list[float]] = []
            lab_y: list[int] = []
            unl_x: list[list[float]] = []
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != d + 1:
                    raise InputOutputError(
                        f"{path}:{lineno}: expected {d + 1} fields, got {len(row)}"
                    )
                try:
                    xs = [float(c) for c in row[1:]]
                except ValueError as exc:
                    raise InputOutputError(f"{path}:{lineno}: {exc}") from None
                ytxt = row[0].strip()
                if ytxt == "":
                    unl_x.append(xs)
                elif ytxt in ("0", "1"):
                    lab_y.append(int(ytxt))
                    lab_x.append(xs)
                else:
                    raise InputOutputError(
                        f"{path}:{lineno}: y must be 0, 1, or empty, got {ytxt!r}"
                    )
    except OSError as exc:
        raise InputOutputError(f"cannot read {path}: {exc}") from exc
    if not lab_x:
        raise InputOutputError(f"{path}: no labeled rows")
    lx = np.asarray(lab_x, dtype=float)
    ly = np.asarray(lab_y, dtype=np.int64)
    ux = (
        np.asarray(unl_x, dtype=float)
        if unl_x
        else np.empty((0, d), dtype=float)
    )
    if design is Design.OUTCOME_STRATIFIED:
        order = np.argsort(ly, kind="stable")
        lx, ly = lx[order], ly[order]
    return Dataset(lx, ly, ux, design)


def dump_dataset(ds: Dataset, path: str | Path) -> None:
    """Write a dataset in the CSV format read by :func:`load_dataset`."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["y"] + [f"x{j + 1}" for j in range(ds.d)])
            for yi, xi in zip(ds.labeled_y, ds.labeled_x):
                writer.writerow([int(yi)] + [format(v, ".17g") for v in xi])
            for xi in ds.unlabeled_x:
                writer.writerow([""] + [format(v, ".17g") for v in xi])
    except OSError as exc:
        raise InputOutputError(f"cannot write {path}: {exc}") from exc
