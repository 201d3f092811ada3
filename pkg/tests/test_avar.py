"""Limiting-variance blocks, case formulas, and the gap constant."""

import numpy as np
import pytest

from tiltmix.avar import (
    IntegrationMode,
    IntegrationSpec,
    OssConfig,
    RsConfig,
    TiltedSupport,
    compute_s_blocks,
    gamma_matrix,
    psd_check,
    u_case,
    v_constant,
)
from tiltmix.errors import (
    DegenerateS22,
    DimensionMismatch,
    MissingG0,
    MissingWeights,
    NonpositiveV,
    NormalizationViolated,
    NotApplicable,
    RhoOutOfRange,
)
from tiltmix.etm_rs import fit_m1
from tiltmix.model import Case, Design, TiltParams
from tiltmix.simgen import Scenario
from tiltmix.supervised import fit_logistic

TWO_POINT_BETA = TiltParams(-np.log(2.0), np.array([np.log(3.0)]))


def _two_point_support(w0=0.5):
    return TiltedSupport(x=np.array([0.0, 1.0]), weights=np.array([w0, 1.0 - w0]))


def _oracle_blocks(pair, *, design, rho_u, rho_l=0.5, draws=200_000, seed=11):
    if design is Design.RANDOM_SAMPLING:
        s = Scenario(
            pair=pair,
            design=design,
            n=400,
            n2=4000,
            rho_u_star=rho_u,
            replications=1,
            seed_base=0,
            rho_l_star=rho_l,
        )
    else:
        s = Scenario(
            pair=pair,
            design=design,
            n=400,
            n1=200,
            n2=4000,
            rho_u_star=rho_u,
            replications=1,
            seed_base=0,
        )
    spec = IntegrationSpec(mode="oracle-mc", mc_draws=draws, seed=seed)
    return compute_s_blocks(s, spec=spec)


class TestConfigs:
    def test_rs_alpha_star_fraction(self):
        cfg = RsConfig(n=400, n2=4000, rho_l_star=0.5, rho_u_star=0.25)
        assert cfg.alpha_star == pytest.approx(3.0 / 11.0, abs=1e-15)
        assert cfg.n_total == 4400
        assert cfg.rho_l == 0.5
        assert cfg.delta_l == 0.25
        assert cfg.design is Design.RANDOM_SAMPLING

    def test_oss_alpha_star_fraction(self):
        cfg = OssConfig(n0=200, n1=200, n2=4000, rho_u_star=0.25)
        assert cfg.alpha_star == pytest.approx(3.0 / 11.0, abs=1e-15)
        assert cfg.rho_l == 0.5
        assert cfg.n == 400
        assert cfg.design is Design.OUTCOME_STRATIFIED

    def test_validation(self):
        with pytest.raises(RhoOutOfRange):
            RsConfig(n=10, n2=0, rho_l_star=0.0, rho_u_star=0.5)
        with pytest.raises(DimensionMismatch):
            RsConfig(n=0, n2=0, rho_l_star=0.5, rho_u_star=0.5)
        with pytest.raises(DimensionMismatch):
            OssConfig(n0=1, n1=1, n2=-1, rho_u_star=0.5)
        with pytest.raises(DimensionMismatch):
            RsConfig(n=True, n2=0, rho_l_star=0.5, rho_u_star=0.5)

    def test_integration_settings_validation(self):
        assert IntegrationSpec().mode is IntegrationMode.ORACLE_MONTE_CARLO
        with pytest.raises(ValueError):
            IntegrationSpec(mode="nonsense")
        with pytest.raises(DimensionMismatch):
            IntegrationSpec(mc_draws=0)
        with pytest.raises(DimensionMismatch):
            IntegrationSpec(seed=-1)

    def test_oss_stratum_variance_positive(self):
        cfg = OssConfig(n0=200, n1=200, n2=4000, rho_u_star=0.25)
        assert cfg.stratum_variance > 0.0


class TestTiltedSupport:
    def test_validation(self):
        with pytest.raises(NormalizationViolated):
            TiltedSupport(x=np.array([0.0, 1.0]), weights=np.array([0.5, 0.6]))
        with pytest.raises(NormalizationViolated):
            TiltedSupport(x=np.array([0.0, 1.0]), weights=np.array([-0.2, 1.2]))
        with pytest.raises(DimensionMismatch):
            TiltedSupport(x=np.array([0.0, 1.0]), weights=np.array([1.0]))

    def test_column_promotion(self):
        sup = _two_point_support()
        assert sup.x.shape == (2, 1)


class TestPluginBlocks:
    def test_two_point_hand_values(self):
        # Tilts {1/2, 3/2} with equal weights at rho_l = alpha = 1/2.
        cfg = RsConfig(n=10, n2=0, rho_l_star=0.5, rho_u_star=0.5)
        blocks = compute_s_blocks(
            _two_point_support(),
            TWO_POINT_BETA,
            IntegrationSpec(mode="plugin"),
            config=cfg,
        )
        assert blocks.a == pytest.approx(14.0 / 15.0, abs=1e-12)
        assert blocks.s22 == pytest.approx(-4.0 / 15.0, abs=1e-12)
        assert blocks.delta_l == 0.25
        assert not blocks.degenerate

    def test_s22_identity_at_matched_proportions(self):
        cfg = RsConfig(n=10, n2=0, rho_l_star=0.5, rho_u_star=0.5)
        blocks = compute_s_blocks(
            _two_point_support(),
            TWO_POINT_BETA,
            IntegrationSpec(mode="plugin"),
            config=cfg,
        )
        assert blocks.s22 == pytest.approx(
            (blocks.a - 1.0) / blocks.delta_l, abs=1e-14
        )

    def test_support_requires_config(self):
        with pytest.raises(DimensionMismatch):
            compute_s_blocks(
                _two_point_support(), TWO_POINT_BETA, IntegrationSpec(mode="plugin")
            )

    def test_dataset_plugin_needs_mixture_estimate(self, rs_dataset):
        with pytest.raises(MissingWeights):
            compute_s_blocks(rs_dataset, None, IntegrationSpec(mode="plugin"))
        logistic = fit_logistic(rs_dataset)
        with pytest.raises(MissingWeights):
            compute_s_blocks(rs_dataset, logistic, IntegrationSpec(mode="plugin"))

    def test_dataset_plugin_blocks(self, rs_dataset):
        est = fit_m1(rs_dataset)
        blocks = compute_s_blocks(rs_dataset, est, IntegrationSpec(mode="plugin"))
        assert blocks.S11.shape == (rs_dataset.d + 1, rs_dataset.d + 1)
        assert blocks.s22 < 0.0


class TestOracleBlocks:
    def test_zero_tilt_is_degenerate(self, mild_pair):
        s = Scenario(
            pair=mild_pair,
            design=Design.RANDOM_SAMPLING,
            n=100,
            n2=100,
            rho_u_star=0.5,
            replications=1,
            seed_base=0,
            rho_l_star=0.5,
        )
        blocks = compute_s_blocks(
            s,
            TiltParams(0.0, np.zeros(2)),
            IntegrationSpec(mode="oracle-mc", mc_draws=100_000, seed=3),
        )
        assert blocks.degenerate
        assert blocks.a == pytest.approx(1.0, abs=1e-9)
        assert blocks.s22 == pytest.approx(0.0, abs=1e-9)
        # With unit tilts the labeled moment matrix is the base-law second
        # moment, so its off-diagonal first row estimates the mean.
        se = 3.0 * np.sqrt(np.array([1.0, 1.0]) / 100_000)
        assert np.all(np.abs(blocks.B - np.array([0.0, 0.0])) <= se)
        with pytest.raises(DegenerateS22):
            u_case(Case.M1, blocks)

    def test_calibrated_s22_identity(self, bench_pair):
        blocks = _oracle_blocks(
            bench_pair, design=Design.OUTCOME_STRATIFIED, rho_u=0.5
        )
        assert blocks.s22 == pytest.approx(
            (blocks.a - 1.0) / blocks.delta_l, abs=1e-10
        )

    def test_determinism_by_seed(self, mild_pair):
        b1 = _oracle_blocks(mild_pair, design=Design.RANDOM_SAMPLING, rho_u=0.5, draws=50_000, seed=5)
        b2 = _oracle_blocks(mild_pair, design=Design.RANDOM_SAMPLING, rho_u=0.5, draws=50_000, seed=5)
        b3 = _oracle_blocks(mild_pair, design=Design.RANDOM_SAMPLING, rho_u=0.5, draws=50_000, seed=6)
        assert np.array_equal(b1.S11, b2.S11)
        assert b1.s22 == b2.s22
        assert not np.array_equal(b1.S11, b3.S11)

    def test_scenario_rejects_plugin_mode(self, mild_pair):
        s = Scenario(
            pair=mild_pair,
            design=Design.RANDOM_SAMPLING,
            n=100,
            n2=100,
            rho_u_star=0.5,
            replications=1,
            seed_base=0,
            rho_l_star=0.5,
        )
        with pytest.raises(MissingWeights):
            compute_s_blocks(s, spec=IntegrationSpec(mode="plugin"))

    def test_dataset_rejects_oracle_mode(self, rs_dataset):
        est = fit_m1(rs_dataset)
        with pytest.raises(MissingG0):
            compute_s_blocks(rs_dataset, est, IntegrationSpec(mode="oracle-mc"))


class TestUCase:
    def test_logistic_has_no_formula(self, mild_pair):
        blocks = _oracle_blocks(mild_pair, design=Design.RANDOM_SAMPLING, rho_u=0.5, draws=50_000)
        with pytest.raises(NotApplicable):
            u_case(Case.LOGISTIC, blocks)

    def test_m1_needs_matched_proportions(self, mild_pair):
        blocks = _oracle_blocks(mild_pair, design=Design.RANDOM_SAMPLING, rho_u=0.25, draws=50_000)
        with pytest.raises(NotApplicable):
            u_case(Case.M1, blocks)

    def test_design_mismatch(self, mild_pair):
        rs_blocks = _oracle_blocks(mild_pair, design=Design.RANDOM_SAMPLING, rho_u=0.5, draws=50_000)
        oss_blocks = _oracle_blocks(mild_pair, design=Design.OUTCOME_STRATIFIED, rho_u=0.5, draws=50_000)
        with pytest.raises(NotApplicable):
            u_case(Case.M3, rs_blocks)
        with pytest.raises(NotApplicable):
            u_case(Case.M1, oss_blocks)

    def test_scaled_diff_psd_at_matched_proportions(self, mild_pair):
        rs_blocks = _oracle_blocks(mild_pair, design=Design.RANDOM_SAMPLING, rho_u=0.5)
        oss_blocks = _oracle_blocks(mild_pair, design=Design.OUTCOME_STRATIFIED, rho_u=0.5)
        for case, blocks in ((Case.M1, rs_blocks), (Case.M2, rs_blocks), (Case.M3, oss_blocks), (Case.M4, oss_blocks)):
            report = u_case(case, blocks)
            tol = 1e-4 * float(np.linalg.norm(report.U_baseline / report.n, 2))
            assert psd_check(report.scaled_diff, tol), case
            assert report.eigenvalues_desc[0] >= report.eigenvalues_desc[-1]

    def test_report_as_dict_keys(self, mild_pair):
        report = u_case(
            Case.M2,
            _oracle_blocks(mild_pair, design=Design.RANDOM_SAMPLING, rho_u=0.5, draws=50_000),
        )
        d = report.as_dict()
        assert set(d) == {
            "case",
            "u_case",
            "u_baseline",
            "scaled_diff",
            "eigenvalues_desc",
            "n",
            "n_total",
        }
        assert d["case"] == "m2"


class TestVConstant:
    def test_no_unlabeled_is_zero(self):
        cfg = RsConfig(n=10, n2=0, rho_l_star=0.5, rho_u_star=0.5)
        blocks = compute_s_blocks(
            _two_point_support(),
            TWO_POINT_BETA,
            IntegrationSpec(mode="plugin"),
            config=cfg,
        )
        assert v_constant(blocks) == 0.0

    def test_mismatched_proportions_not_applicable(self):
        cfg = RsConfig(n=10, n2=20, rho_l_star=0.5, rho_u_star=0.3)
        blocks = compute_s_blocks(
            _two_point_support(),
            TWO_POINT_BETA,
            IntegrationSpec(mode="plugin"),
            config=cfg,
        )
        with pytest.raises(NotApplicable):
            v_constant(blocks)

    def test_inconsistent_blocks_rejected(self):
        # Skewed weights push the labeled moment above one, an impossible
        # configuration for a correctly normalized base law.
        cfg = RsConfig(n=10, n2=5, rho_l_star=0.5, rho_u_star=0.5)
        blocks = compute_s_blocks(
            _two_point_support(w0=0.2),
            TWO_POINT_BETA,
            IntegrationSpec(mode="plugin"),
            config=cfg,
        )
        assert blocks.a > 1.0
        with pytest.raises(NonpositiveV):
            v_constant(blocks)

    def test_two_paths_agree(self, bench_pair):
        blocks = _oracle_blocks(
            bench_pair, design=Design.OUTCOME_STRATIFIED, rho_u=0.5
        )
        v = v_constant(blocks)
        report = u_case(Case.M4, blocks)
        corner = float(report.scaled_diff[0, 0])
        assert v > 0.0
        assert corner == pytest.approx(v, rel=0.01)
        off = np.abs(report.scaled_diff).copy()
        off[0, 0] = 0.0
        assert float(off.max()) <= 0.01 * v


class TestHelpers:
    def test_psd_check(self):
        assert psd_check(np.eye(3), 1e-8)
        assert not psd_check(np.diag([1.0, -1.0]), 1e-8)

    def test_gamma_matrix(self):
        g = gamma_matrix(2, 0.25)
        delta = 0.25 * 0.75
        expect = np.array(
            [
                [1.0, 0.0, 0.0, 1.0 / delta],
                [0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
            ]
        )
        assert np.allclose(g, expect, atol=1e-15)
        with pytest.raises(RhoOutOfRange):
            gamma_matrix(2, 1.0)
