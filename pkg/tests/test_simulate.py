import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import pdist
from scipy.stats import kstest

from maternmle import (
    LocationScheme,
    MaternParams,
    PlanError,
    SimulationPlan,
    SpatialDataset,
    build_cov_matrix,
    gen_locations,
    microergodic,
    replicate_seed,
    simulate_grf,
)


def plan(n, scheme=LocationScheme.UNIT_GRID, seed=0):
    return SimulationPlan(
        n=n, theta_true=MaternParams(1.0, 0.1, 0.5), location_scheme=scheme, rng_seed=seed
    )


class TestGenLocations:
    def test_two_by_two_grid_hits_corners(self):
        points = gen_locations(plan(4))
        expected = {(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)}
        assert {tuple(p) for p in points} == expected

    def test_grid_needs_square_n(self):
        with pytest.raises(PlanError):
            plan(5)

    def test_uniform_is_deterministic(self):
        first = gen_locations(plan(100, LocationScheme.UNIFORM_RANDOM, seed=42))
        second = gen_locations(plan(100, LocationScheme.UNIFORM_RANDOM, seed=42))
        np.testing.assert_array_equal(first, second)

    def test_uniform_minimum_separation(self):
        points = gen_locations(plan(200, LocationScheme.UNIFORM_RANDOM, seed=1))
        assert pdist(points).min() >= 1e-9

    def test_plan_validation(self):
        with pytest.raises(PlanError):
            plan(1)
        with pytest.raises(PlanError):
            SimulationPlan(n=4, theta_true=MaternParams(1, 1, 1), replicates=0)
        with pytest.raises(PlanError):
            SimulationPlan(n=4, theta_true=MaternParams(1, 1, 1), domain=(1.0, 0.0, 0.0, 1.0))


class TestSimulateGrf:
    def test_deterministic_given_seed(self):
        locations = gen_locations(plan(25))
        theta = MaternParams(1.0, 0.1, 0.5)
        np.testing.assert_array_equal(
            simulate_grf(locations, theta, 7), simulate_grf(locations, theta, 7)
        )
        assert not np.array_equal(
            simulate_grf(locations, theta, 7), simulate_grf(locations, theta, 8)
        )

    def test_single_point_variance(self):
        # Sample variance over many seeds tracks sigma2 = 4 within 5%.
        theta = MaternParams(4.0, 0.1, 0.5)
        locations = np.array([[0.5, 0.5]])
        draws = np.array([simulate_grf(locations, theta, seed)[0] for seed in range(10_000)])
        assert abs(draws.var() - 4.0) / 4.0 <= 0.05

    def test_sample_covariance_tracks_model(self):
        # Entrywise agreement within 3 standard errors over 50,000 draws.
        theta = MaternParams(1.0, 0.4, 0.8)
        locations = np.array([[0.0, 0.0], [0.25, 0.1], [0.7, 0.9]])
        n_draws = 50_000
        draws = np.empty((n_draws, 3))
        for seed in range(n_draws):
            draws[seed] = simulate_grf(locations, theta, seed)
        sample_cov = np.cov(draws.T, ddof=1)
        sigma = build_cov_matrix(SpatialDataset(locations, np.zeros(3)), theta)
        stderr = np.sqrt((np.outer(np.diag(sigma), np.diag(sigma)) + sigma**2) / n_draws)
        assert np.all(np.abs(sample_cov - sigma) <= 3.0 * stderr)

    def test_marginal_gaussianity(self):
        # Standardized single-location draws pass a KS test at level 0.01.
        theta = MaternParams(2.0, 0.2, 1.1)
        locations = gen_locations(plan(4))
        draws = np.array(
            [simulate_grf(locations, theta, seed)[0] for seed in range(10_000)]
        ) / np.sqrt(theta.sigma2)
        assert kstest(draws, "norm").pvalue > 0.01


class TestMicroergodic:
    def test_reference_values(self):
        assert microergodic(MaternParams(1.0, 0.1, 0.5)) == pytest.approx(10.0, rel=1e-14)
        assert microergodic(MaternParams(2.0, 1.0, 1.7)) == pytest.approx(2.0, rel=1e-14)
        assert microergodic(MaternParams(0.05, 0.05, 0.05)) == pytest.approx(
            0.05 * 0.05**-0.1, rel=1e-12
        )

    @settings(max_examples=100, deadline=None)
    @given(
        st.floats(min_value=0.05, max_value=5.0),
        st.floats(min_value=0.05, max_value=5.0),
        st.floats(min_value=0.05, max_value=2.5),
        st.floats(min_value=0.1, max_value=10.0),
    )
    def test_invariant_under_microergodic_rescaling(self, sigma2, alpha, nu, c):
        # (sigma2, alpha, nu) -> (c^{2 nu} sigma2, c alpha, nu) leaves it fixed.
        base = microergodic(MaternParams(sigma2, alpha, nu))
        rescaled = microergodic(MaternParams(c ** (2 * nu) * sigma2, c * alpha, nu))
        assert rescaled == pytest.approx(base, rel=1e-12)

    def test_overflow_goes_to_inf(self):
        assert microergodic(MaternParams(1.0, 1e-300, 2.0)) == np.inf


class TestReplicateSeed:
    def test_deterministic_and_distinct(self):
        assert replicate_seed(7, 0, 0, 1) == replicate_seed(7, 0, 0, 1)
        seeds = {replicate_seed(7, i, j, r) for i in range(3) for j in range(3) for r in range(5)}
        assert len(seeds) == 45
