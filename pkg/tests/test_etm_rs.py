"""Random-sampling mixture cases: objectives, inner solves, and fits."""

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings as hyp_settings, strategies as st

from tiltmix.errors import (
    DegenerateTilts,
    DimensionMismatch,
    EstimationError,
    NoInteriorRoot,
)
from tiltmix.etm_rs import fit_m1, fit_m2, kappa_m1, kappa_m2, solve_alpha, solve_rho_u
from tiltmix.model import (
    Case,
    Dataset,
    Design,
    TiltParams,
    g0_weights,
    posterior_prob,
    tilt_values,
)
from tiltmix.numerics import SolverSettings, grad_check
from tiltmix.supervised import fit_logistic

SETTINGS = SolverSettings()


def _bisect_root(e, iters=200):
    """Pure-scalar bisection oracle for the mixing-score root."""

    def g(a):
        return math.fsum((ei - 1.0) / (1.0 - a + a * ei) for ei in e)

    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _centered_tilts(rng, m):
    """Lognormal tilts with unit geometric mean, so a root is interior."""
    logs = rng.normal(size=m)
    logs -= logs.mean()
    return np.exp(logs)


def _z_from_tilts(e):
    """Design rows whose tilt at beta = (0, 1) equals the given values."""
    return np.column_stack([np.ones(len(e)), np.log(e)])


def _small_rs(rng):
    labeled_x = rng.normal(size=(20, 2))
    labeled_y = np.array([0, 1] * 10)
    unlabeled_x = rng.normal(size=(10, 2)) + 0.4
    return Dataset(
        labeled_x=labeled_x,
        labeled_y=labeled_y,
        unlabeled_x=unlabeled_x,
        design=Design.RANDOM_SAMPLING,
    )


class TestMixingSolves:
    def test_symmetric_pair_root_is_half(self):
        # Tilts {3, 1/3}: the score is antisymmetric about 1/2.
        z = np.array([[1.0, 1.0], [1.0, -1.0]])
        a = solve_alpha(z, TiltParams(0.0, np.array([math.log(3.0)])), SETTINGS)
        assert a == pytest.approx(0.5, abs=1e-12)

    def test_degenerate_tilts(self):
        z = np.array([[1.0, 0.3], [1.0, -0.2]])
        with pytest.raises(DegenerateTilts):
            solve_alpha(z, TiltParams(0.0, np.zeros(1)), SETTINGS)

    def test_one_sided_tilts(self):
        z = np.array([[1.0, 0.3], [1.0, 0.7]])
        with pytest.raises(NoInteriorRoot):
            solve_alpha(z, TiltParams(0.5, np.zeros(1)), SETTINGS)

    def test_matches_bisection_oracle(self):
        rng = np.random.default_rng(7431)
        beta = TiltParams(0.0, np.ones(1))
        for _ in range(15):
            e = _centered_tilts(rng, 12)
            a_solver = solve_alpha(_z_from_tilts(e), beta, SETTINGS)
            assert a_solver == pytest.approx(_bisect_root(e), abs=1e-10)

    def test_rho_u_matches_bisection_oracle(self):
        rng = np.random.default_rng(991)
        beta = TiltParams(0.0, np.ones(1))
        for _ in range(10):
            e = _centered_tilts(rng, 9)
            r_solver = solve_rho_u(_z_from_tilts(e), beta, SETTINGS)
            assert r_solver == pytest.approx(_bisect_root(e), abs=1e-10)


class TestKappaM1:
    def test_hand_computed_value(self):
        ds = Dataset(
            labeled_x=np.array([[0.0], [1.0]]),
            labeled_y=np.array([1, 0]),
            unlabeled_x=np.array([[2.0]]),
            design=Design.RANDOM_SAMPLING,
        )
        beta = TiltParams(0.1, np.array([-0.3]))
        rho, alpha = 0.4, 0.3
        e1, e2, e3 = math.exp(0.1), math.exp(-0.2), math.exp(-0.5)
        expect = (
            0.1  # class-1 linear term: the single y=1 row has x=0
            + math.log(1 - rho + rho * e3)
            - (
                math.log(1 - alpha + alpha * e1)
                + math.log(1 - alpha + alpha * e2)
                + math.log(1 - alpha + alpha * e3)
            )
            + math.log(rho)
            + math.log(1 - rho)
            - 3.0 * math.log(3.0)
        )
        got = kappa_m1(ds, beta, rho, alpha)
        assert got.value == pytest.approx(expect, rel=1e-12)

    def test_gradient_against_finite_differences(self):
        ds = _small_rs(np.random.default_rng(5150))
        q = ds.d + 1

        def fg(v):
            k = kappa_m1(ds, TiltParams(v[0], v[1:q]), v[q], v[q + 1])
            return k.value, k.grad

        rng = np.random.default_rng(77)
        for _ in range(20):
            point = np.concatenate(
                [rng.uniform(-0.5, 0.5, size=q), rng.uniform(0.1, 0.9, size=2)]
            )
            assert grad_check(fg, point, rel_tol=1e-5)

    def test_saddle_orientation_and_zero_cross_term(self):
        ds = _small_rs(np.random.default_rng(5150))
        q = ds.d + 1
        k = kappa_m1(ds, TiltParams(0.2, np.array([0.3, -0.1])), 0.45, 0.55)
        h = k.hessian
        assert np.array_equal(h, h.T)
        # Concave in each proportion separately, convex in the mixing weight.
        assert h[q, q] < 0.0
        assert h[q + 1, q + 1] > 0.0
        assert h[q, q + 1] == 0.0
        assert h[q + 1, q] == 0.0


class TestKappaM2:
    def test_gradient_against_finite_differences(self):
        ds = _small_rs(np.random.default_rng(31337))
        q = ds.d + 1

        def fg(v):
            k = kappa_m2(ds, TiltParams(v[0], v[1:q]), v[q], v[q + 1], v[q + 2])
            return k.value, k.grad

        rng = np.random.default_rng(13)
        for _ in range(20):
            point = np.concatenate(
                [rng.uniform(-0.5, 0.5, size=q), rng.uniform(0.1, 0.9, size=3)]
            )
            assert grad_check(fg, point, rel_tol=1e-5)

    def test_reduces_to_m1_on_diagonal(self):
        ds = _small_rs(np.random.default_rng(99))
        beta = TiltParams(-0.1, np.array([0.25, 0.4]))
        k1 = kappa_m1(ds, beta, 0.37, 0.61)
        k2 = kappa_m2(ds, beta, 0.37, 0.37, 0.61)
        assert k2.value == pytest.approx(k1.value, rel=1e-14)


class TestFitM1:
    def test_no_unlabeled_delegates_to_supervised(self, rs_dataset):
        labeled_only = Dataset(
            labeled_x=rs_dataset.labeled_x,
            labeled_y=rs_dataset.labeled_y,
            unlabeled_x=np.empty((0, rs_dataset.d)),
            design=Design.RANDOM_SAMPLING,
        )
        est = fit_m1(labeled_only)
        ref = fit_logistic(labeled_only)
        ybar = labeled_only.n1 / labeled_only.n
        assert est.case is Case.M1
        assert np.array_equal(est.conditional.as_vector(), ref.conditional.as_vector())
        assert est.rho_ell == ybar
        assert est.rho_u == ybar
        assert est.alpha == ybar

    def test_coincides_with_supervised(self, rs_dataset, rs_dataset_200):
        for ds in (rs_dataset, rs_dataset_200):
            est = fit_m1(ds)
            ref = fit_logistic(ds)
            gap = np.max(
                np.abs(est.conditional.as_vector() - ref.conditional.as_vector())
            )
            assert gap <= 1e-8
            assert est.diagnostics.converged

    def test_rho_equals_mean_posterior(self, rs_dataset):
        est = fit_m1(rs_dataset)
        probs = posterior_prob(rs_dataset.all_x, est.conditional)
        assert est.rho_ell == pytest.approx(float(np.mean(probs)), abs=1e-8)

    def test_weights_normalized_at_solution(self, rs_dataset_200):
        est = fit_m1(rs_dataset_200)
        res = g0_weights(rs_dataset_200, est.tilt, est.alpha)
        assert abs(res.sum_w - 1.0) <= 1e-8
        assert abs(res.sum_we - 1.0) <= 1e-8

    def test_degenerate_fallback(self):
        ds = Dataset(
            labeled_x=np.array([[0.0], [0.0], [1.0], [1.0]]),
            labeled_y=np.array([0, 1, 0, 1]),
            unlabeled_x=np.array([[0.0], [1.0]]),
            design=Design.RANDOM_SAMPLING,
        )
        est = fit_m1(ds)
        assert est.warning == "degenerate_tilts"
        assert est.rho_ell == pytest.approx(0.5, abs=1e-10)
        assert est.alpha == pytest.approx(0.5, abs=1e-12)

    def test_profile_objective_envelope(self, rs_dataset):
        # Profiling out the mixing weight leaves the remaining gradient
        # blocks unchanged at the solved weight.
        q = rs_dataset.d + 1

        def fg(v):
            beta = TiltParams(v[0], v[1:q])
            alpha = solve_alpha(rs_dataset.all_z, beta, SETTINGS)
            k = kappa_m1(rs_dataset, beta, v[q], alpha)
            return k.value, k.grad[: q + 1]

        for point in (
            np.array([-0.6, 0.4, -0.3, 0.45]),
            np.array([0.2, -0.3, 0.25, 0.55]),
        ):
            assert grad_check(fg, point, rel_tol=1e-5)

    def test_rejects_oss(self, oss_dataset):
        with pytest.raises(DimensionMismatch):
            fit_m1(oss_dataset)

    @given(seed=st.integers(min_value=0, max_value=10_000))
    @hyp_settings(
        max_examples=10,
        deadline=None,
        suppress_health_check=[HealthCheck.filter_too_much, HealthCheck.too_slow],
    )
    def test_property_coincidence_and_normalization(self, seed):
        rng = np.random.default_rng(seed)
        y = rng.integers(0, 2, size=30)
        assume(0 < y.sum() < 30)
        labeled_x = rng.normal(size=(30, 1)) + 1.1 * y[:, None]
        yu = rng.integers(0, 2, size=40)
        unlabeled_x = rng.normal(size=(40, 1)) + 1.1 * yu[:, None]
        ds = Dataset(
            labeled_x=labeled_x,
            labeled_y=y,
            unlabeled_x=unlabeled_x,
            design=Design.RANDOM_SAMPLING,
        )
        try:
            est = fit_m1(ds)
            ref = fit_logistic(ds)
        except EstimationError:
            assume(False)
        assume(est.diagnostics.converged and est.warning is None)
        gap = np.max(np.abs(est.conditional.as_vector() - ref.conditional.as_vector()))
        assert gap <= 1e-7
        res = g0_weights(ds, est.tilt, est.alpha)
        assert abs(res.sum_w - 1.0) <= 1e-8


class TestFitM2:
    def test_labeled_fraction_is_exact(self, rs_dataset_200):
        est = fit_m2(rs_dataset_200)
        assert est.rho_ell == rs_dataset_200.n1 / rs_dataset_200.n
        assert est.case is Case.M2

    def test_stationarity_of_all_blocks(self, rs_dataset_200):
        ds = rs_dataset_200
        est = fit_m2(ds)
        k = kappa_m2(ds, est.tilt, est.rho_ell, est.rho_u, est.alpha)
        assert float(np.max(np.abs(k.grad))) <= 1e-8

    def test_inner_solves_are_reproducible(self, rs_dataset_200):
        ds = rs_dataset_200
        est = fit_m2(ds)
        assert est.rho_u == pytest.approx(
            solve_rho_u(ds.unlabeled_z, est.tilt, SETTINGS), abs=1e-10
        )
        assert est.alpha == pytest.approx(
            solve_alpha(ds.all_z, est.tilt, SETTINGS), abs=1e-10
        )

    def test_requires_unlabeled_rows(self, rs_dataset):
        labeled_only = Dataset(
            labeled_x=rs_dataset.labeled_x,
            labeled_y=rs_dataset.labeled_y,
            unlabeled_x=np.empty((0, rs_dataset.d)),
            design=Design.RANDOM_SAMPLING,
        )
        with pytest.raises(DimensionMismatch):
            fit_m2(labeled_only)

    def test_weights_normalized_at_solution(self, rs_dataset_200):
        est = fit_m2(rs_dataset_200)
        res = g0_weights(rs_dataset_200, est.tilt, est.alpha)
        assert abs(res.sum_w - 1.0) <= 1e-8
        assert abs(res.sum_we - 1.0) <= 1e-8
