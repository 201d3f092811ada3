"""Gaussian-pair scenarios, exact tilt coefficients, and data generators."""

import numpy as np
import pytest

from tiltmix.errors import DimensionMismatch, NonFiniteInput, RhoOutOfRange
from tiltmix.model import Design
from tiltmix.simgen import GaussianPair, Scenario, gen_oss, gen_rs, generate, true_params


class TestGaussianPair:
    def test_scalar_promotion(self):
        pair = GaussianPair(0.0, 2.0, 1.0)
        assert pair.d == 1
        assert np.array_equal(pair.sd_diag, [1.0])

    def test_validation(self):
        with pytest.raises(DimensionMismatch):
            GaussianPair([0.0, 1.0], [1.0], [1.0, 1.0])
        with pytest.raises(NonFiniteInput):
            GaussianPair([np.inf], [0.0], [1.0])
        with pytest.raises(RhoOutOfRange):
            GaussianPair([0.0], [1.0], [0.0])


class TestTrueParams:
    def test_benchmark_pair_coefficients(self, bench_pair):
        p = true_params(bench_pair)
        assert p.beta0 == pytest.approx(-1.68, abs=1e-12)
        assert p.beta1[0] == pytest.approx(0.6, abs=1e-12)
        assert p.beta1[1] == pytest.approx(0.18, abs=1e-12)

    def test_equal_means_give_zero(self):
        pair = GaussianPair([1.0, -2.0], [1.0, -2.0], [4.0, 9.0])
        p = true_params(pair)
        assert p.beta0 == 0.0
        assert np.array_equal(p.beta1, [0.0, 0.0])

    def test_unit_variance_hand_case(self):
        # mu0 = 0, mu1 = 2, sigma = 1: slope 2, intercept -2.
        p = true_params(GaussianPair(0.0, 2.0, 1.0))
        assert p.beta1[0] == pytest.approx(2.0, abs=1e-15)
        assert p.beta0 == pytest.approx(-2.0, abs=1e-15)


class TestScenarioValidation:
    def test_rs_requires_rho_l(self, mild_pair):
        with pytest.raises(RhoOutOfRange):
            Scenario(
                pair=mild_pair,
                design=Design.RANDOM_SAMPLING,
                n=10,
                n2=0,
                rho_u_star=0.5,
                replications=1,
                seed_base=0,
            )

    def test_rs_rejects_n1(self, mild_pair):
        with pytest.raises(DimensionMismatch):
            Scenario(
                pair=mild_pair,
                design=Design.RANDOM_SAMPLING,
                n=10,
                n2=0,
                rho_u_star=0.5,
                replications=1,
                seed_base=0,
                rho_l_star=0.5,
                n1=5,
            )

    def test_oss_requires_n1(self, mild_pair):
        with pytest.raises(DimensionMismatch):
            Scenario(
                pair=mild_pair,
                design=Design.OUTCOME_STRATIFIED,
                n=10,
                n2=0,
                rho_u_star=0.5,
                replications=1,
                seed_base=0,
            )

    def test_oss_rejects_rho_l(self, mild_pair):
        with pytest.raises(DimensionMismatch):
            Scenario(
                pair=mild_pair,
                design=Design.OUTCOME_STRATIFIED,
                n=10,
                n2=0,
                rho_u_star=0.5,
                replications=1,
                seed_base=0,
                n1=5,
                rho_l_star=0.5,
            )

    def test_n1_bounds(self, mild_pair):
        for bad in (0, 10, 11):
            with pytest.raises(DimensionMismatch):
                Scenario(
                    pair=mild_pair,
                    design=Design.OUTCOME_STRATIFIED,
                    n=10,
                    n2=0,
                    rho_u_star=0.5,
                    replications=1,
                    seed_base=0,
                    n1=bad,
                )

    def test_rho_u_bounds(self, mild_pair):
        with pytest.raises(RhoOutOfRange):
            Scenario(
                pair=mild_pair,
                design=Design.RANDOM_SAMPLING,
                n=10,
                n2=0,
                rho_u_star=1.0,
                replications=1,
                seed_base=0,
                rho_l_star=0.5,
            )

    def test_replications_minimum(self, mild_pair):
        with pytest.raises(DimensionMismatch):
            Scenario(
                pair=mild_pair,
                design=Design.RANDOM_SAMPLING,
                n=10,
                n2=0,
                rho_u_star=0.5,
                replications=0,
                seed_base=0,
                rho_l_star=0.5,
            )

    def test_bool_counts_rejected(self, mild_pair):
        with pytest.raises(DimensionMismatch):
            Scenario(
                pair=mild_pair,
                design=Design.RANDOM_SAMPLING,
                n=True,
                n2=0,
                rho_u_star=0.5,
                replications=1,
                seed_base=0,
                rho_l_star=0.5,
            )

    def test_rho_l_property(self, mild_pair):
        s = Scenario(
            pair=mild_pair,
            design=Design.OUTCOME_STRATIFIED,
            n=10,
            n1=3,
            n2=0,
            rho_u_star=0.5,
            replications=1,
            seed_base=0,
        )
        assert s.rho_l == 0.3
        assert s.n_total == 10


def _rs_scenario(pair, **kw):
    base = dict(
        pair=pair,
        design=Design.RANDOM_SAMPLING,
        n=60,
        n2=40,
        rho_u_star=0.4,
        replications=3,
        seed_base=505,
        rho_l_star=0.5,
    )
    base.update(kw)
    return Scenario(**base)


class TestGenerators:
    def test_rs_shapes_and_determinism(self, mild_pair):
        s = _rs_scenario(mild_pair)
        ds1 = gen_rs(s, 0)
        ds2 = gen_rs(s, 0)
        assert ds1.n == 60 and ds1.n2 == 40 and ds1.d == 2
        assert np.array_equal(ds1.labeled_x, ds2.labeled_x)
        assert np.array_equal(ds1.labeled_y, ds2.labeled_y)
        assert np.array_equal(ds1.unlabeled_x, ds2.unlabeled_x)

    def test_rs_substreams_differ(self, mild_pair):
        s = _rs_scenario(mild_pair)
        ds0 = gen_rs(s, 0)
        ds1 = gen_rs(s, 1)
        assert not np.array_equal(ds0.labeled_x, ds1.labeled_x)

    def test_rs_design_check(self, mild_pair):
        s = _rs_scenario(mild_pair)
        with pytest.raises(DimensionMismatch):
            gen_oss(s, 0)

    def test_rep_index_validation(self, mild_pair):
        s = _rs_scenario(mild_pair)
        with pytest.raises(DimensionMismatch):
            gen_rs(s, -1)
        with pytest.raises(DimensionMismatch):
            gen_rs(s, 0.5)

    def test_oss_counts_exact(self, mild_pair):
        s = Scenario(
            pair=mild_pair,
            design=Design.OUTCOME_STRATIFIED,
            n=50,
            n1=20,
            n2=30,
            rho_u_star=0.4,
            replications=1,
            seed_base=99,
        )
        ds = gen_oss(s, 0)
        assert int(ds.labeled_y.sum()) == 20
        assert np.array_equal(ds.labeled_y, np.sort(ds.labeled_y))
        assert ds.n2 == 30

    def test_oss_no_unlabeled(self, mild_pair):
        s = Scenario(
            pair=mild_pair,
            design=Design.OUTCOME_STRATIFIED,
            n=50,
            n1=20,
            n2=0,
            rho_u_star=0.4,
            replications=1,
            seed_base=99,
        )
        ds = gen_oss(s, 0)
        assert ds.unlabeled_x.shape == (0, 2)

    def test_generate_dispatch(self, mild_pair):
        s_rs = _rs_scenario(mild_pair)
        assert generate(s_rs, 0).design is Design.RANDOM_SAMPLING
        s_oss = Scenario(
            pair=mild_pair,
            design=Design.OUTCOME_STRATIFIED,
            n=50,
            n1=20,
            n2=10,
            rho_u_star=0.4,
            replications=1,
            seed_base=99,
        )
        assert generate(s_oss, 0).design is Design.OUTCOME_STRATIFIED


class TestStatisticalMoments:
    def test_unlabeled_mixture_mean(self):
        pair = GaussianPair([0.0, 1.0], [2.0, -1.0], [1.0, 4.0])
        s = Scenario(
            pair=pair,
            design=Design.RANDOM_SAMPLING,
            n=1,
            n2=100_000,
            rho_u_star=0.5,
            replications=1,
            seed_base=1234,
            rho_l_star=0.5,
        )
        ds = gen_rs(s, 0)
        mean = ds.unlabeled_x.mean(axis=0)
        target = 0.5 * (pair.mu0 + pair.mu1)
        gap = pair.mu1 - pair.mu0
        var = pair.sigma_diag + 0.25 * gap**2
        se = 3.0 * np.sqrt(var / s.n2)
        assert np.all(np.abs(mean - target) <= se)

    def test_oss_class1_stratum_mean(self):
        pair = GaussianPair([0.0], [1.5], [2.0])
        s = Scenario(
            pair=pair,
            design=Design.OUTCOME_STRATIFIED,
            n=100_000,
            n1=50_000,
            n2=0,
            rho_u_star=0.5,
            replications=1,
            seed_base=4321,
        )
        ds = gen_oss(s, 0)
        x1 = ds.labeled_x[ds.labeled_y == 1]
        se = 3.0 * np.sqrt(2.0 / 50_000)
        assert abs(float(x1.mean()) - 1.5) <= se
