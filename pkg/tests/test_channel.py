import math

import numpy as np
import pytest

from lvsim.channel import (
    GeometryError,
    build_covariance,
    mean_vector,
    sample_observation,
    sample_observations,
)

from conftest import FIG1_BS, CLAIMED, make_geometry


class TestMeanVector:
    def test_reference_distance_gives_reference_power(self):
        # three stations at unit distance from the origin
        geo = make_geometry(
            [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]], claimed=[0.5, 0.5], p=-10.0, d=1.0
        )
        u = mean_vector(geo, [0.0, 0.0])
        np.testing.assert_allclose(u, -10.0, rtol=0, atol=1e-12)

    def test_one_decade_is_thirty_db_at_gamma_three(self):
        geo = make_geometry([[10.0, 0.0], [0.0, 10.0]], claimed=[1.0, 1.0])
        u = mean_vector(geo, [0.0, 0.0])
        np.testing.assert_allclose(u, -40.0, rtol=0, atol=1e-12)

    def test_fig1_vector_matches_per_element_evaluation(self, fig1_geometry):
        # oracle: scalar evaluation of the log-distance law, element by element
        expected = [
            -10.0 - 30.0 * math.log10(math.hypot(CLAIMED[0] - bx, CLAIMED[1] - by))
            for bx, by in FIG1_BS
        ]
        got = mean_vector(fig1_geometry, CLAIMED)
        np.testing.assert_allclose(got, expected, rtol=1e-15)
        # frozen values from an independent run of the same scalar oracle
        np.testing.assert_allclose(
            got,
            [-84.31544695064984, -61.53049759918992, -79.03497010887007],
            rtol=1e-13,
        )

    def test_vectorized_matches_scalar(self, fig1_geometry):
        pts = np.array([[550.0, 5.0], [0.0, 100.0], [-300.0, -40.0]])
        batch = mean_vector(fig1_geometry, pts)
        for i, p in enumerate(pts):
            np.testing.assert_array_equal(batch[i], mean_vector(fig1_geometry, p))

    def test_permutation_of_stations_permutes_entries(self, fig1_geometry):
        perm = [2, 0, 1]
        geo = make_geometry(np.asarray(FIG1_BS)[perm])
        np.testing.assert_array_equal(
            mean_vector(geo, [10.0, 3.0]), mean_vector(fig1_geometry, [10.0, 3.0])[perm]
        )

    def test_coincident_location_raises(self, fig1_geometry):
        with pytest.raises(GeometryError):
            mean_vector(fig1_geometry, FIG1_BS[1])


class TestGeometryValidation:
    def test_duplicate_stations_rejected(self):
        with pytest.raises(GeometryError):
            make_geometry([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])

    def test_claimed_on_station_rejected(self):
        with pytest.raises(GeometryError):
            make_geometry([[0.0, 0.0], [1.0, 1.0]], claimed=[1.0, 1.0])

    def test_single_station_rejected(self):
        with pytest.raises(GeometryError):
            make_geometry([[0.0, 0.0]])


class TestCovariance:
    def test_halving_at_correlation_distance(self):
        geo = make_geometry([[0.0, 0.0], [30.0, 0.0]], claimed=[5.0, 5.0])
        model = build_covariance(geo, 4.0, 30.0)
        assert model.covariance[0, 1] == pytest.approx(8.0, rel=1e-14)

    def test_uncorrelated_limit_is_diagonal(self, fig1_geometry):
        model = build_covariance(fig1_geometry, 6.0, 0.0)
        np.testing.assert_array_equal(model.covariance, 36.0 * np.eye(3))

    def test_fig1_matrix_matches_per_entry_evaluation(self, fig1_model):
        # oracle: direct per-entry evaluation of the exponential-decay kernel
        bs = np.asarray(FIG1_BS)
        for i in range(3):
            for j in range(3):
                dij = math.dist(bs[i], bs[j])
                expected = 56.25 * math.exp(-dij / 50.0 * math.log(2.0))
                assert fig1_model.covariance[i, j] == pytest.approx(expected, rel=1e-14)
        np.testing.assert_array_equal(np.diag(fig1_model.covariance), 56.25)
        # station 1 to station 3 spans exactly ten halving distances
        assert fig1_model.covariance[0, 2] == 56.25 / 1024

    def test_bitwise_symmetry(self, fig1_model):
        assert np.array_equal(fig1_model.covariance, fig1_model.covariance.T)

    def test_monotone_in_correlation_distance(self, fig1_geometry):
        prev = None
        for dc in (10.0, 25.0, 50.0, 100.0, 400.0):
            off = build_covariance(fig1_geometry, 7.5, dc).covariance[0, 1]
            if prev is not None:
                assert off > prev
            prev = off

    def test_decays_with_station_separation(self):
        prev = None
        for sep in (10.0, 50.0, 200.0, 1000.0):
            geo = make_geometry([[0.0, 0.0], [sep, 0.0]], claimed=[1.0, 5.0])
            off = build_covariance(geo, 7.5, 50.0).covariance[0, 1]
            if prev is not None:
                assert off < prev
            prev = off
        assert prev < 1e-4

    def test_invalid_parameters_rejected(self, fig1_geometry):
        with pytest.raises(ValueError):
            build_covariance(fig1_geometry, 0.0, 50.0)
        with pytest.raises(ValueError):
            build_covariance(fig1_geometry, 5.0, -1.0)


class TestSampling:
    def test_tiny_variance_collapses_to_mean(self, fig1_geometry):
        model = build_covariance(fig1_geometry, 1e-9, 50.0)
        mean = mean_vector(fig1_geometry, CLAIMED)
        y = sample_observation(model, mean, np.random.default_rng(0))
        np.testing.assert_allclose(y, mean, atol=1e-6)

    def test_seeded_stream_reproducible(self, fig1_model, fig1_geometry):
        mean = mean_vector(fig1_geometry, CLAIMED)
        a = sample_observations(fig1_model, mean, np.random.default_rng(42), 10)
        b = sample_observations(fig1_model, mean, np.random.default_rng(42), 10)
        np.testing.assert_array_equal(a, b)

    def test_empirical_moments_match(self, fig1_model, fig1_geometry):
        n = 100_000
        mean = mean_vector(fig1_geometry, CLAIMED)
        samples = sample_observations(fig1_model, mean, np.random.default_rng(7), n)
        emp_mean = samples.mean(axis=0)
        np.testing.assert_allclose(
            emp_mean, mean, atol=5 * fig1_model.sigma_db / np.sqrt(n)
        )
        emp_cov = np.cov(samples.T)
        r = fig1_model.covariance
        stderr = np.sqrt((np.outer(np.diag(r), np.diag(r)) + r**2) / n)
        assert np.all(np.abs(emp_cov - r) <= 5 * stderr)
