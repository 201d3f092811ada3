"""Asymptotic variance engine for the tilt-mixture estimators.

Everything here is built from a handful of base-law moment matrices. Writing
``e(x) = exp(beta0 + x'beta1)`` for the tilt, ``z = (1, x)`` and
``den_t = 1 - t + t e(x)`` for a mixing weight ``t``, the ingredients are

    M(t)  = integral of e z z' / den_t   dG0   ((d+1) x (d+1)),
    q0(t) = integral of (1 - e)^2 / den_t dG0  (scalar),

evaluated at three mixing weights: the labeled class-1 proportion
``rho_l``, the unlabeled proportion ``rho_u_star``, and the pooled proportion
``alpha_star``. The S-blocks are exact scalar/matrix combinations of these,
and each estimator's limiting matrix ``U`` is a closed-form function of the
S-blocks (Schur complements and rank-one corrections). Reports compare a
semi-supervised case against the labeled-only baseline through the scaled
difference ``baseline/n - U_case/N``.

Integration is either:

* oracle Monte Carlo against a known Gaussian base law (``mc_draws`` i.i.d.
  draws, fixed-size blocks with per-block seeding so the result never depends
  on how the work is partitioned), or
* empirical plug-in, replacing dG0 by a discrete measure: either the fitted
  base-law weights of an estimate over all observed covariate rows, or an
  explicitly supplied weighted support.

Oracle draws recalibrate the intercept to the sampled measure: the defining
property of the intercept is that the tilts average to one under the base
law, so the sampled tilts are divided by their sample mean before any moment
is formed. The sampled measure then satisfies the same exact normalization
as the population, which removes the heavy-tailed normalization noise from
every downstream identity (the plug-in path needs no such step because
fitted weights already carry the dual normalization ``sum w = sum w e = 1``).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .errors import (
    DegenerateS22,
    DimensionMismatch,
    MissingG0,
    MissingWeights,
    NonFiniteInput,
    NonpositiveV,
    NormalizationViolated,
    NotApplicable,
    RhoOutOfRange,
    SingularBlock,
)
from .model import Case, Dataset, Design, EtmEstimate, TiltParams, g0_weights, tilt_values, z_matrix
from .numerics import sym_eig_desc
from .simgen import Scenario, true_params

__all__ = [
    "IntegrationMode",
    "IntegrationSpec",
    "RsConfig",
    "OssConfig",
    "TiltedSupport",
    "SBlocks",
    "VarianceReport",
    "compute_s_blocks",
    "u_case",
    "v_constant",
    "psd_check",
    "gamma_matrix",
]

_U64_MAX = 2**64 - 1
_MC_BLOCK = 1 << 17
_DEGENERATE_TILT_TOL = 1e-12
_RHO_MATCH_TOL = 1e-9


class IntegrationMode(str, Enum):
    """How base-law integrals are evaluated."""

    ORACLE_MONTE_CARLO = "oracle-mc"
    EMPIRICAL_PLUGIN = "plugin"


@dataclass(frozen=True)
class IntegrationSpec:
    """Integration settings: mode, Monte Carlo budget, and seed."""

    mode: IntegrationMode = IntegrationMode.ORACLE_MONTE_CARLO
    mc_draws: int = 1_000_000
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", IntegrationMode(self.mode))
        for name in ("mc_draws", "seed"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, (int, np.integer)):
                raise DimensionMismatch(f"{name} must be an integer, got {val!r}")
            object.__setattr__(self, name, int(val))
        if self.mode is IntegrationMode.ORACLE_MONTE_CARLO and self.mc_draws < 1:
            raise DimensionMismatch("mc_draws must be >= 1 in oracle Monte Carlo mode")
        if not 0 <= self.seed <= _U64_MAX:
            raise DimensionMismatch("seed must fit in an unsigned 64-bit int")


def _check_unit_open(value: float, name: str) -> float:
    value = float(value)
    if not (np.isfinite(value) and 0.0 < value < 1.0):
        raise RhoOutOfRange(f"{name} must lie in (0, 1), got {value}")
    return value


def _check_count(value, name: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise DimensionMismatch(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise DimensionMismatch(f"{name} must be >= {minimum}, got {value}")
    return value


@dataclass(frozen=True)
class RsConfig:
    """Counts and true proportions for a random-sampling comparison."""

    n: int
    n2: int
    rho_l_star: float
    rho_u_star: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "n", _check_count(self.n, "n", 1))
        object.__setattr__(self, "n2", _check_count(self.n2, "n2", 0))
        object.__setattr__(self, "rho_l_star", _check_unit_open(self.rho_l_star, "rho_l_star"))
        object.__setattr__(self, "rho_u_star", _check_unit_open(self.rho_u_star, "rho_u_star"))

    @property
    def design(self) -> Design:
        return Design.RANDOM_SAMPLING

    @property
    def n_total(self) -> int:
        return self.n + self.n2

    @property
    def rho_l(self) -> float:
        return self.rho_l_star

    @property
    def alpha_star(self) -> float:
        """Pooled class-1 proportion (n rho_l + n2 rho_u) / N."""
        return (self.n * self.rho_l_star + self.n2 * self.rho_u_star) / self.n_total

    @property
    def delta_l(self) -> float:
        return self.rho_l * (1.0 - self.rho_l)

    @property
    def stratum_variance(self) -> float:
        """Variance of the per-stratum class-1 proportion around alpha_star."""
        a = self.alpha_star
        return (
            self.n * (self.rho_l_star - a) ** 2 + self.n2 * (self.rho_u_star - a) ** 2
        ) / self.n_total


@dataclass(frozen=True)
class OssConfig:
    """Counts and true proportions for an outcome-stratified comparison."""

    n0: int
    n1: int
    n2: int
    rho_u_star: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "n0", _check_count(self.n0, "n0", 1))
        object.__setattr__(self, "n1", _check_count(self.n1, "n1", 1))
        object.__setattr__(self, "n2", _check_count(self.n2, "n2", 0))
        object.__setattr__(self, "rho_u_star", _check_unit_open(self.rho_u_star, "rho_u_star"))

    @property
    def design(self) -> Design:
        return Design.OUTCOME_STRATIFIED

    @property
    def n(self) -> int:
        return self.n0 + self.n1

    @property
    def n_total(self) -> int:
        return self.n + self.n2

    @property
    def rho_l(self) -> float:
        return self.n1 / self.n

    @property
    def alpha_star(self) -> float:
        """Pooled class-1 proportion (n1 + rho_u n2) / N."""
        return (self.n1 + self.rho_u_star * self.n2) / self.n_total

    @property
    def delta_l(self) -> float:
        return self.rho_l * (1.0 - self.rho_l)

    @property
    def stratum_variance(self) -> float:
        """Variance of the per-stratum class-1 proportion around alpha_star.

        The three strata carry proportions 0 (labeled class 0), 1 (labeled
        class 1) and rho_u_star (unlabeled).
        """
        a = self.alpha_star
        return (
            self.n0 * a**2
            + self.n1 * (1.0 - a) ** 2
            + self.n2 * (self.rho_u_star - a) ** 2
        ) / self.n_total


@dataclass(frozen=True)
class TiltedSupport:
    """An explicit discrete base measure: support points and weights.

    Weights must be nonnegative and sum to one (within 1e-6); they play the
    role of the base-law weights in plug-in integration.
    """

    x: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        w = np.asarray(self.weights, dtype=float)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise DimensionMismatch(f"support x must be (m, d), got shape {x.shape}")
        if w.shape != (x.shape[0],):
            raise DimensionMismatch(
                f"weights shape {w.shape} does not match {x.shape[0]} support rows"
            )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
            raise NonFiniteInput("support and weights must be finite")
        if np.any(w < 0.0):
            raise NormalizationViolated("weights must be nonnegative")
        total = float(w.sum())
        if abs(total - 1.0) > 1e-6:
            raise NormalizationViolated(f"weights must sum to 1, got {total}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class SBlocks:
    """The S-matrix building blocks shared by every limiting-variance formula.

    ``Sl11``/``Sl12`` are the labeled-only blocks (at mixing weight
    ``rho_l``); ``S11``..``s44`` are the pooled blocks (at ``alpha_star`` and
    ``rho_u_star``). ``S11_tilde`` is the outcome-stratified variant; because
    only the unlabeled stratum has a nondegenerate class indicator, it is the
    same expression as ``S11`` and differs only through the design's
    ``alpha_star``. ``a``, ``B``, ``D`` partition the labeled moment matrix
    M(rho_l) as [[a, B'], [B, D]]. ``delta_r``/``delta_s`` are the stratum
    variances of the two designs; each equals the config's own stratum
    variance. ``degenerate`` flags an all-ones tilt (beta = 0), for which
    ``s22 = 0`` and no U matrix is defined.
    """

    S11: np.ndarray
    S11_tilde: np.ndarray
    S12: np.ndarray
    S13: np.ndarray
    s22: float
    s33: float
    s44: float
    Sl11: np.ndarray
    Sl12: np.ndarray
    delta_l: float
    delta_r: float
    delta_s: float
    alpha_star: float
    a: float
    B: np.ndarray
    D: np.ndarray
    degenerate: bool
    config: RsConfig | OssConfig


@dataclass(frozen=True)
class VarianceReport:
    """One case's limiting matrix against the labeled-only baseline."""

    case: Case
    U_case: np.ndarray
    U_baseline: np.ndarray
    scaled_diff: np.ndarray
    eigenvalues_desc: np.ndarray
    n: int
    n_total: int

    def as_dict(self) -> dict:
        return {
            "case": self.case.value,
            "u_case": self.U_case.tolist(),
            "u_baseline": self.U_baseline.tolist(),
            "scaled_diff": self.scaled_diff.tolist(),
            "eigenvalues_desc": self.eigenvalues_desc.tolist(),
            "n": self.n,
            "n_total": self.n_total,
        }


def config_from_scenario(s: Scenario) -> RsConfig | OssConfig:
    """Counts-and-proportions view of a scenario."""
    if s.design is Design.RANDOM_SAMPLING:
        return RsConfig(n=s.n, n2=s.n2, rho_l_star=s.rho_l_star, rho_u_star=s.rho_u_star)
    return OssConfig(n0=s.n - s.n1, n1=s.n1, n2=s.n2, rho_u_star=s.rho_u_star)


def _config_from_estimate(ds: Dataset, est: EtmEstimate) -> RsConfig | OssConfig:
    """Plug-in counts: sizes from the data, proportions from the fit."""
    if ds.design is Design.RANDOM_SAMPLING:
        rho_l = est.rho_ell
        if rho_l is None:
            raise MissingWeights("estimate lacks a labeled class-1 proportion")
        rho_u = est.rho_u if est.rho_u is not None else rho_l
        return RsConfig(n=ds.n, n2=ds.n2, rho_l_star=rho_l, rho_u_star=rho_u)
    rho_u = est.rho_u if est.rho_u is not None else ds.n1 / ds.n
    return OssConfig(n0=ds.n0, n1=ds.n1, n2=ds.n2, rho_u_star=rho_u)


def _gaussian_block(pair, seed: int, block_index: int, rows: int) -> np.ndarray:
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(block_index,))
    rng = np.random.default_rng(seq)
    eps = rng.standard_normal((rows, pair.d))
    return pair.mu0 + pair.sd_diag * eps


def _block_sizes(total: int) -> list[int]:
    sizes = [_MC_BLOCK] * (total // _MC_BLOCK)
    if total % _MC_BLOCK:
        sizes.append(total % _MC_BLOCK)
    return sizes


def _moments_from_support(
    z: np.ndarray, w: np.ndarray, e: np.ndarray, lams: dict[str, float]
) -> tuple[dict[str, tuple[float, np.ndarray]], bool]:
    """(q0, M) per mixing-weight role, plus the degenerate-tilt flag.

    Equal mixing weights share one computation, so roles that coincide get
    bit-identical matrices.
    """
    by_value: dict[float, tuple[float, np.ndarray]] = {}
    for lam in set(lams.values()):
        q0, _, M = _kernels.weighted_tilt_moments(z, w, e, lam)
        by_value[lam] = (float(q0), 0.5 * (M + M.T))
    degenerate = bool(np.max(np.abs(e - 1.0)) <= _DEGENERATE_TILT_TOL)
    return {role: by_value[lam] for role, lam in lams.items()}, degenerate


def _oracle_moments(
    pair, beta_vec: np.ndarray, lams: dict[str, float], spec: IntegrationSpec
) -> tuple[dict[str, tuple[float, np.ndarray]], bool]:
    """Monte Carlo moments with intercept calibration, block by block.

    Blocks have a fixed size and per-block seeds, so sums depend only on
    (seed, mc_draws), never on how blocks might be scheduled. The first pass
    measures the sampled tilt mass; the second regenerates the same draws and
    accumulates the moments with tilts divided by that mass.
    """
    sizes = _block_sizes(spec.mc_draws)
    mass_sum = 0.0
    for bi, rows in enumerate(sizes):
        x = _gaussian_block(pair, spec.seed, bi, rows)
        e = tilt_values(z_matrix(x), beta_vec)
        mass_sum += float(e.sum())
    mass = mass_sum / spec.mc_draws
    if not (np.isfinite(mass) and mass > 0.0):
        raise NonFiniteInput(f"sampled tilt mass is not a positive float: {mass}")

    values = sorted(set(lams.values()))
    q0_acc = {lam: 0.0 for lam in values}
    m_acc = {lam: np.zeros((pair.d + 1, pair.d + 1)) for lam in values}
    max_dev = 0.0
    for bi, rows in enumerate(sizes):
        x = _gaussian_block(pair, spec.seed, bi, rows)
        z = z_matrix(x)
        e = tilt_values(z, beta_vec) / mass
        max_dev = max(max_dev, float(np.max(np.abs(e - 1.0))))
        w = np.full(rows, 1.0 / spec.mc_draws)
        for lam in values:
            q0, _, M = _kernels.weighted_tilt_moments(z, w, e, lam)
            q0_acc[lam] += float(q0)
            m_acc[lam] += M
    by_value = {lam: (q0_acc[lam], 0.5 * (m_acc[lam] + m_acc[lam].T)) for lam in values}
    degenerate = max_dev <= _DEGENERATE_TILT_TOL
    return {role: by_value[lam] for role, lam in lams.items()}, degenerate


def _assemble_blocks(
    moments: dict[str, tuple[float, np.ndarray]],
    degenerate: bool,
    config: RsConfig | OssConfig,
) -> SBlocks:
    n2_frac = config.n2 / config.n_total
    alpha = config.alpha_star
    rho_u = config.rho_u_star
    delta_l = config.delta_l

    q0_l, M_l = moments["rho_l"]
    q0_a, M_a = moments["alpha"]
    q0_u, M_u = moments["rho_u"]

    S11 = alpha * (1.0 - alpha) * M_a - n2_frac * rho_u * (1.0 - rho_u) * M_u
    stratum_var = config.stratum_variance
    return SBlocks(
        S11=S11,
        S11_tilde=S11.copy(),
        S12=M_a[:, 0].copy(),
        S13=-n2_frac * M_u[:, 0],
        s22=-q0_a,
        s33=n2_frac * q0_u,
        s44=(config.n / config.n_total) / delta_l,
        Sl11=delta_l * M_l,
        Sl12=M_l[:, 0].copy(),
        delta_l=delta_l,
        delta_r=stratum_var,
        delta_s=stratum_var,
        alpha_star=alpha,
        a=float(M_l[0, 0]),
        B=M_l[1:, 0].copy(),
        D=M_l[1:, 1:].copy(),
        degenerate=degenerate,
        config=config,
    )


def compute_s_blocks(
    source: Scenario | Dataset | TiltedSupport,
    params: TiltParams | EtmEstimate | None = None,
    spec: IntegrationSpec | None = None,
    *,
    config: RsConfig | OssConfig | None = None,
) -> SBlocks:
    """Evaluate the S-blocks for one configuration.

    Args:
        source: where the base-law integrals come from. A ``Scenario`` selects
            oracle Monte Carlo against its known Gaussian pair; a ``Dataset``
            selects plug-in integration with the fitted base-law weights of
            ``params`` (an estimate) over all covariate rows; a
            ``TiltedSupport`` selects plug-in integration over an explicit
            weighted support.
        params: tilt coefficients. For a scenario, a ``TiltParams`` (defaults
            to the scenario pair's exact log-density-ratio coefficients); for
            a dataset, the fitted ``EtmEstimate`` (mandatory, supplies tilt,
            proportions and the mixing weight behind the base-law weights);
            for an explicit support, a ``TiltParams``.
        spec: integration settings; the mode must match the source kind.
        config: counts-and-proportions override. Mandatory for an explicit
            support, optional otherwise (defaults derive from the source).

    Raises:
        MissingG0: oracle mode was requested without a known scenario.
        MissingWeights: plug-in mode lacks fitted or explicit weights.
    """
    if spec is None:
        spec = IntegrationSpec()

    if isinstance(source, Scenario):
        if spec.mode is not IntegrationMode.ORACLE_MONTE_CARLO:
            raise MissingWeights(
                "plug-in integration needs a dataset with a fit, or an explicit "
                "weighted support; a scenario only provides a known base law"
            )
        if params is None:
            beta = true_params(source.pair)
        elif isinstance(params, EtmEstimate):
            beta = params.tilt
        else:
            beta = params
        cfg = config if config is not None else config_from_scenario(source)
        lams = {"rho_l": cfg.rho_l, "rho_u": cfg.rho_u_star, "alpha": cfg.alpha_star}
        moments, degenerate = _oracle_moments(source.pair, beta.as_vector(), lams, spec)
        return _assemble_blocks(moments, degenerate, cfg)

    if spec.mode is not IntegrationMode.EMPIRICAL_PLUGIN:
        raise MissingG0(
            "oracle Monte Carlo integration needs a scenario with a known "
            "Gaussian pair"
        )

    if isinstance(source, Dataset):
        if not isinstance(params, EtmEstimate):
            raise MissingWeights(
                "plug-in integration over a dataset needs the fitted estimate "
                "that defines the base-law weights"
            )
        if params.alpha is None:
            raise MissingWeights(
                "estimate carries no mixing weight; fit a tilt-mixture case first"
            )
        g0 = g0_weights(source, params.tilt, params.alpha)
        z = source.all_z
        e = tilt_values(z, params.tilt.as_vector())
        w = g0.weights
        cfg = config if config is not None else _config_from_estimate(source, params)
    elif isinstance(source, TiltedSupport):
        if isinstance(params, EtmEstimate):
            beta = params.tilt
        elif isinstance(params, TiltParams):
            beta = params
        else:
            raise MissingWeights("explicit-support integration needs tilt coefficients")
        if config is None:
            raise DimensionMismatch(
                "explicit-support integration needs a counts config (RsConfig "
                "or OssConfig)"
            )
        z = z_matrix(source.x)
        e = tilt_values(z, beta.as_vector())
        w = source.weights
        cfg = config
    else:
        raise DimensionMismatch(
            f"source must be a Scenario, Dataset or TiltedSupport, got {type(source)!r}"
        )

    lams = {"rho_l": cfg.rho_l, "rho_u": cfg.rho_u_star, "alpha": cfg.alpha_star}
    moments, degenerate = _moments_from_support(z, w, e, lams)
    return _assemble_blocks(moments, degenerate, cfg)


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def _safe_inv(m: np.ndarray, what: str) -> np.ndarray:
    try:
        out = np.linalg.inv(m)
    except np.linalg.LinAlgError as exc:
        raise SingularBlock(f"{what} is singular") from exc
    if not np.all(np.isfinite(out)):
        raise SingularBlock(f"{what} inverse is not finite")
    return out


def _baseline_beta_block(blocks: SBlocks) -> np.ndarray:
    """Labeled-only limiting matrix for the tilt coefficients.

    inv(Sl11) - delta_l * inv(Sl11) Sl12 Sl12' inv(Sl11); the profiled-out
    class proportion contributes the rank-one correction.
    """
    inv = _safe_inv(blocks.Sl11, "Sl11")
    try:
        w = np.linalg.solve(blocks.Sl11, blocks.Sl12)
    except np.linalg.LinAlgError as exc:
        raise SingularBlock("Sl11 is singular") from exc
    return _symmetrize(inv - blocks.delta_l * np.outer(w, w))


def _s13_term(blocks: SBlocks) -> np.ndarray:
    """outer(S13)/s33, with the empty-unlabeled-block convention 0/0 = 0."""
    if blocks.s33 == 0.0:
        if float(np.max(np.abs(blocks.S13))) == 0.0:
            return np.zeros((blocks.S13.size, blocks.S13.size))
        raise SingularBlock("s33 vanished while S13 is nonzero")
    return np.outer(blocks.S13, blocks.S13) / blocks.s33


def _corner_block(core: np.ndarray, corner: float) -> np.ndarray:
    q = core.shape[0]
    out = np.zeros((q + 1, q + 1))
    out[:q, :q] = core
    out[q, q] = corner
    return out


def u_case(
    case: Case | str,
    blocks: SBlocks,
    counts: RsConfig | OssConfig | None = None,
) -> VarianceReport:
    """Limiting matrix of one estimator case, against its baseline.

    The baseline is the labeled-only limiting matrix: over (tilt coefficients,
    class proportion) for the random-sampling cases M1/M2, or over the tilt
    coefficients alone for the outcome-stratified cases M3/M4. The report's
    ``scaled_diff`` is ``baseline/n - U_case/N``.

    Raises:
        NotApplicable: case without a limiting-matrix formula here (logistic),
            design mismatch with the blocks, or an M1 request whose
            configuration has different labeled and unlabeled proportions
            (M1 equates them by assumption).
        DegenerateS22: blocks from an all-ones tilt (beta = 0).
        SingularBlock: a required matrix inverse does not exist.
    """
    case = Case(case)
    cfg = counts if counts is not None else blocks.config
    if case in (Case.M1, Case.M2):
        if cfg.design is not Design.RANDOM_SAMPLING:
            raise NotApplicable(f"case {case.value} needs random-sampling counts")
    elif case in (Case.M3, Case.M4):
        if cfg.design is not Design.OUTCOME_STRATIFIED:
            raise NotApplicable(f"case {case.value} needs outcome-stratified counts")
    else:
        raise NotApplicable(f"no limiting-matrix formula for case {case.value}")
    if blocks.degenerate or not blocks.s22 < 0.0:
        raise DegenerateS22(
            f"s22 = {blocks.s22} does not identify the mixture (tilts degenerate)"
        )

    s22_term = np.outer(blocks.S12, blocks.S12) / blocks.s22

    if case is Case.M1:
        if abs(cfg.rho_l - cfg.rho_u_star) > _RHO_MATCH_TOL:
            raise NotApplicable(
                "M1 equates the labeled and unlabeled proportions; this "
                f"configuration has rho_l={cfg.rho_l} and rho_u={cfg.rho_u_star}"
            )
        core = blocks.S11 - s22_term
        q = core.shape[0]
        full = np.zeros((q + 1, q + 1))
        full[:q, :q] = core
        full[:q, q] = blocks.S13
        full[q, :q] = blocks.S13
        full[q, q] = blocks.s33 + blocks.s44
        U = _safe_inv(full, "the M1 information block")
    elif case is Case.M2:
        core = blocks.S11 - s22_term - _s13_term(blocks)
        U = _corner_block(_safe_inv(core, "the M2 information block"), 1.0 / blocks.s44)
    elif case is Case.M3:
        core = blocks.S11_tilde - s22_term - _s13_term(blocks)
        U = _safe_inv(core, "the M3 information block")
    else:
        core = blocks.S11_tilde - s22_term
        U = _safe_inv(core, "the M4 information block")
    U = _symmetrize(U)

    beta_block = _baseline_beta_block(blocks)
    if cfg.design is Design.RANDOM_SAMPLING:
        baseline = _corner_block(beta_block, blocks.delta_l)
    else:
        baseline = beta_block

    scaled_diff = _symmetrize(baseline / cfg.n - U / cfg.n_total)
    return VarianceReport(
        case=case,
        U_case=U,
        U_baseline=baseline,
        scaled_diff=scaled_diff,
        eigenvalues_desc=sym_eig_desc(scaled_diff),
        n=cfg.n,
        n_total=cfg.n_total,
    )


def v_constant(
    blocks: SBlocks, counts: RsConfig | OssConfig | None = None
) -> float:
    """Closed-form gap constant for the known-proportion case M4.

    When the labeled and unlabeled class-1 proportions coincide, the scaled
    difference between the baseline and the M4 limit is a rank-one matrix
    whose only nonzero entry (the intercept slot) equals

        v = (1 - a) n2 / (delta_l n (a n2 + n)).

    Returns 0.0 when there is no unlabeled data and in the uninformative
    limit a -> 1.

    Raises:
        NotApplicable: the configuration's proportions differ.
        NonpositiveV: a > 1, which signals inconsistent blocks.
    """
    cfg = counts if counts is not None else blocks.config
    if cfg.n2 == 0:
        return 0.0
    if abs(cfg.rho_l - cfg.rho_u_star) > _RHO_MATCH_TOL:
        raise NotApplicable(
            "the gap constant applies when the labeled and unlabeled "
            f"proportions coincide; got rho_l={cfg.rho_l}, rho_u={cfg.rho_u_star}"
        )
    a = blocks.a
    v = (1.0 - a) * cfg.n2 / (blocks.delta_l * cfg.n * (a * cfg.n2 + cfg.n))
    if v < 0.0:
        raise NonpositiveV(f"gap constant is negative (a = {a} > 1): blocks inconsistent")
    return float(v)


def psd_check(m: np.ndarray, tol: float) -> bool:
    """Whether a symmetric matrix is positive semidefinite within tolerance.

    True iff the minimum eigenvalue is >= -tol.
    """
    eigs = sym_eig_desc(m)
    return bool(eigs[-1] >= -float(tol))


def gamma_matrix(d: int, rho_l_star: float) -> np.ndarray:
    """Jacobian mapping the joint (tilt, proportion) limit to the conditional scale.

    The conditional intercept is the tilt intercept plus the log-odds of the
    labeled proportion, so the Jacobian is the (d+1) x (d+2) matrix
    [[1, 0...0, 1/delta_l], [0, I_d, 0]].
    """
    d = _check_count(d, "d", 1)
    rho = _check_unit_open(rho_l_star, "rho_l_star")
    delta = rho * (1.0 - rho)
    out = np.zeros((d + 1, d + 2))
    out[0, 0] = 1.0
    out[0, d + 1] = 1.0 / delta
    out[1:, 1 : d + 1] = np.eye(d)
    return out
