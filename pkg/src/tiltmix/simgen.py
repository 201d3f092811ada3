"""Scenario definitions and reproducible data generation for the two designs.

A scenario couples a pair of equal-covariance Gaussians (the class-0 and
class-1 covariate laws) with sample sizes and mixing proportions:

* random sampling: ``n`` labeled rows whose labels are Bernoulli(rho_l_star)
  and whose covariates follow the label's Gaussian, plus ``n2`` unlabeled
  rows drawn from the Bernoulli(rho_u_star) mixture with the latent label
  discarded;
* outcome-stratified sampling: exactly ``n - n1`` class-0 rows and ``n1``
  class-1 rows (zeros first, then ones), plus the same kind of unlabeled
  mixture block.

Because the two Gaussians share a (diagonal) covariance, their log density
ratio is linear in x, so the tilt model holds exactly with coefficients given
by :func:`true_params`.

Reproducibility contract: each replication uses its own generator seeded by
mixing ``seed_base`` with ``rep_index`` through ``numpy.random.SeedSequence``
(a 64-bit hash mix), so streams for distinct replications are independent and
a replication's data never depends on which worker produced it or in which
order. Within one replication the draw order is fixed and documented on the
generator functions; given (``seed_base``, ``rep_index``) the output is
bit-identical across runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonFiniteInput, RhoOutOfRange
from .model import Dataset, Design, TiltParams

__all__ = ["GaussianPair", "Scenario", "true_params", "gen_rs", "gen_oss"]

_U64_MAX = 2**64 - 1


@dataclass(frozen=True)
class GaussianPair:
    """Two Gaussian covariate laws with a shared diagonal covariance.

    ``mu0`` and ``mu1`` are the class-0 and class-1 mean vectors;
    ``sigma_diag`` holds the common per-coordinate variances (not standard
    deviations), all strictly positive.
    """

    mu0: np.ndarray
    mu1: np.ndarray
    sigma_diag: np.ndarray

    def __post_init__(self) -> None:
        mu0 = np.atleast_1d(np.asarray(self.mu0, dtype=float))
        mu1 = np.atleast_1d(np.asarray(self.mu1, dtype=float))
        sig = np.atleast_1d(np.asarray(self.sigma_diag, dtype=float))
        if not (mu0.ndim == mu1.ndim == sig.ndim == 1):
            raise DimensionMismatch("mu0, mu1 and sigma_diag must be 1-D vectors")
        if not (mu0.size == mu1.size == sig.size >= 1):
            raise DimensionMismatch(
                f"mu0, mu1, sigma_diag must share one length >= 1, got "
                f"{mu0.size}, {mu1.size}, {sig.size}"
            )
        for name, arr in (("mu0", mu0), ("mu1", mu1), ("sigma_diag", sig)):
            if not np.all(np.isfinite(arr)):
                raise NonFiniteInput(f"{name} must be finite")
        if not np.all(sig > 0.0):
            raise RhoOutOfRange("sigma_diag must be strictly positive componentwise")
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "mu1", mu1)
        object.__setattr__(self, "sigma_diag", sig)

    @property
    def d(self) -> int:
        return self.mu0.size

    @property
    def sd_diag(self) -> np.ndarray:
        """Per-coordinate standard deviations."""
        return np.sqrt(self.sigma_diag)


@dataclass(frozen=True)
class Scenario:
    """A complete data-generating configuration for one simulation cell.

    Exactly one of ``n1`` (outcome-stratified) and ``rho_l_star`` (random
    sampling) must be supplied, matching ``design``. ``rho_u_star`` is the
    class-1 proportion of the unlabeled mixture; ``seed_base`` roots every
    random stream.
    """

    pair: GaussianPair
    design: Design
    n: int
    n2: int
    rho_u_star: float
    replications: int
    seed_base: int
    n1: int | None = None
    rho_l_star: float | None = None

    def __post_init__(self) -> None:
        design = Design(self.design)
        object.__setattr__(self, "design", design)
        for name in ("n", "n2", "replications", "seed_base"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, (int, np.integer)):
                raise DimensionMismatch(f"{name} must be an integer, got {val!r}")
            object.__setattr__(self, name, int(val))
        if self.n < 1:
            raise DimensionMismatch(f"n must be >= 1, got {self.n}")
        if self.n2 < 0:
            raise DimensionMismatch(f"n2 must be >= 0, got {self.n2}")
        if self.replications < 1:
            raise DimensionMismatch(
                f"replications must be >= 1, got {self.replications}"
            )
        if not 0 <= self.seed_base <= _U64_MAX:
            raise DimensionMismatch("seed_base must fit in an unsigned 64-bit int")
        if not (np.isfinite(self.rho_u_star) and 0.0 < self.rho_u_star < 1.0):
            raise RhoOutOfRange(f"rho_u_star must lie in (0, 1), got {self.rho_u_star}")
        object.__setattr__(self, "rho_u_star", float(self.rho_u_star))

        if design is Design.OUTCOME_STRATIFIED:
            if self.rho_l_star is not None:
                raise DimensionMismatch(
                    "rho_l_star applies to the random-sampling design only; "
                    "outcome-stratified scenarios fix n1"
                )
            n1 = self.n1
            if isinstance(n1, bool) or not isinstance(n1, (int, np.integer)):
                raise DimensionMismatch("outcome-stratified scenarios need integer n1")
            n1 = int(n1)
            if not 1 <= n1 < self.n:
                raise DimensionMismatch(f"n1 must satisfy 1 <= n1 < n, got n1={n1}, n={self.n}")
            object.__setattr__(self, "n1", n1)
        else:
            if self.n1 is not None:
                raise DimensionMismatch(
                    "n1 applies to the outcome-stratified design only; "
                    "random-sampling scenarios fix rho_l_star"
                )
            rho = self.rho_l_star
            if rho is None or not (np.isfinite(rho) and 0.0 < float(rho) < 1.0):
                raise RhoOutOfRange(
                    f"random-sampling scenarios need rho_l_star in (0, 1), got {rho!r}"
                )
            object.__setattr__(self, "rho_l_star", float(rho))

    @property
    def d(self) -> int:
        return self.pair.d

    @property
    def rho_l(self) -> float:
        """Labeled class-1 proportion: rho_l_star, or n1/n when stratified."""
        if self.design is Design.OUTCOME_STRATIFIED:
            return self.n1 / self.n
        return self.rho_l_star

    @property
    def n_total(self) -> int:
        return self.n + self.n2


def true_params(pair: GaussianPair) -> TiltParams:
    """Exact tilt coefficients of the pair's log density ratio.

    For equal-covariance Gaussians, log(dG1/dG0)(x) = beta0 + x'beta1 with
    beta1 = Sigma^{-1} (mu1 - mu0) and
    beta0 = -(mu1' Sigma^{-1} mu1 - mu0' Sigma^{-1} mu0) / 2.
    """
    inv_sig = 1.0 / pair.sigma_diag
    beta1 = inv_sig * (pair.mu1 - pair.mu0)
    beta0 = -0.5 * float(np.sum(inv_sig * (pair.mu1**2 - pair.mu0**2)))
    return TiltParams(beta0, beta1)


def _rep_rng(seed_base: int, rep_index: int) -> np.random.Generator:
    """Independent substream for one replication.

    ``SeedSequence`` hash-mixes the 64-bit base entropy with the spawn key, so
    distinct ``rep_index`` values yield non-overlapping streams and the pair
    (``seed_base``, ``rep_index``) pins the stream exactly.
    """
    if isinstance(rep_index, bool) or not isinstance(rep_index, (int, np.integer)):
        raise DimensionMismatch(f"rep_index must be an integer, got {rep_index!r}")
    if rep_index < 0:
        raise DimensionMismatch(f"rep_index must be >= 0, got {rep_index}")
    seq = np.random.SeedSequence(entropy=seed_base, spawn_key=(int(rep_index),))
    return np.random.default_rng(seq)


def _mixture_block(
    rng: np.random.Generator, pair: GaussianPair, count: int, rho: float
) -> np.ndarray:
    """``count`` mixture covariate rows; latent labels are drawn and dropped.

    Draw order: first ``count`` uniforms deciding the latent class, then a
    ``count`` x d block of standard normals.
    """
    latent = (rng.random(count) < rho).astype(np.int64)
    eps = rng.standard_normal((count, pair.d))
    return pair.mu0 + latent[:, None] * (pair.mu1 - pair.mu0) + pair.sd_diag * eps


def gen_rs(s: Scenario, rep_index: int) -> Dataset:
    """One random-sampling replication.

    Draw order within the substream: n label uniforms, then the n x d labeled
    normal block, then the unlabeled mixture block (n2 uniforms followed by
    the n2 x d normal block).
    """
    if s.design is not Design.RANDOM_SAMPLING:
        raise DimensionMismatch("gen_rs requires a random-sampling scenario")
    rng = _rep_rng(s.seed_base, rep_index)
    y = (rng.random(s.n) < s.rho_l_star).astype(np.int64)
    eps = rng.standard_normal((s.n, s.d))
    x = s.pair.mu0 + y[:, None] * (s.pair.mu1 - s.pair.mu0) + s.pair.sd_diag * eps
    ux = _mixture_block(rng, s.pair, s.n2, s.rho_u_star)
    return Dataset(
        labeled_x=x, labeled_y=y, unlabeled_x=ux, design=Design.RANDOM_SAMPLING
    )


def gen_oss(s: Scenario, rep_index: int) -> Dataset:
    """One outcome-stratified replication.

    Draw order within the substream: the (n - n1) x d class-0 normal block,
    then the n1 x d class-1 normal block, then the unlabeled mixture block.
    Labels are zeros-then-ones by construction, every replication.
    """
    if s.design is not Design.OUTCOME_STRATIFIED:
        raise DimensionMismatch("gen_oss requires an outcome-stratified scenario")
    rng = _rep_rng(s.seed_base, rep_index)
    n0 = s.n - s.n1
    x0 = s.pair.mu0 + s.pair.sd_diag * rng.standard_normal((n0, s.d))
    x1 = s.pair.mu1 + s.pair.sd_diag * rng.standard_normal((s.n1, s.d))
    x = np.vstack([x0, x1])
    y = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(s.n1, dtype=np.int64)])
    ux = _mixture_block(rng, s.pair, s.n2, s.rho_u_star)
    return Dataset(
        labeled_x=x, labeled_y=y, unlabeled_x=ux, design=Design.OUTCOME_STRATIFIED
    )


def generate(s: Scenario, rep_index: int) -> Dataset:
    """Design-dispatching convenience wrapper over gen_rs / gen_oss."""
    if s.design is Design.RANDOM_SAMPLING:
        return gen_rs(s, rep_index)
    return gen_oss(s, rep_index)
