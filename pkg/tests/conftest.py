"""Shared fixtures: small seeded datasets and the Gaussian benchmark pair."""

import numpy as np
import pytest

from tiltmix.model import Design
from tiltmix.simgen import GaussianPair, Scenario, gen_oss, gen_rs


@pytest.fixture(scope="session")
def bench_pair() -> GaussianPair:
    """The two-dimensional Gaussian pair used by the benchmark scenario."""
    return GaussianPair([-5.0, -8.0], [10.0, 10.0], [25.0, 100.0])


@pytest.fixture(scope="session")
def mild_pair() -> GaussianPair:
    """A well-separated low-variance pair for fast, stable fits."""
    return GaussianPair([0.0, 0.0], [1.5, -1.0], [1.0, 1.0])


@pytest.fixture(scope="session")
def rs_dataset(mild_pair):
    """Deterministic random-sampling dataset with unlabeled rows."""
    s = Scenario(
        pair=mild_pair,
        design=Design.RANDOM_SAMPLING,
        n=80,
        n2=160,
        rho_u_star=0.4,
        replications=1,
        seed_base=314,
        rho_l_star=0.5,
    )
    return gen_rs(s, 0)


@pytest.fixture(scope="session")
def rs_dataset_200(mild_pair):
    """Deterministic 200-row random-sampling dataset for stationarity checks."""
    s = Scenario(
        pair=mild_pair,
        design=Design.RANDOM_SAMPLING,
        n=200,
        n2=400,
        rho_u_star=0.35,
        replications=1,
        seed_base=2718,
        rho_l_star=0.45,
    )
    return gen_rs(s, 0)


@pytest.fixture(scope="session")
def oss_dataset(mild_pair):
    """Deterministic outcome-stratified dataset with unlabeled rows."""
    s = Scenario(
        pair=mild_pair,
        design=Design.OUTCOME_STRATIFIED,
        n=80,
        n1=40,
        n2=160,
        rho_u_star=0.4,
        replications=1,
        seed_base=2025,
    )
    return gen_oss(s, 0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(8675309)
