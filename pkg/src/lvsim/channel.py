"""Network geometry, log-distance path loss, and correlated shadowing.

Shadowing is zero-mean Gaussian in dB with an exponential-decay spatial
correlation: the covariance between two base stations halves every
``correlation_distance`` meters of separation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve

__all__ = [
    "GeometryError",
    "CovarianceError",
    "NetworkGeometry",
    "ShadowingModel",
    "mean_vector",
    "build_covariance",
    "sample_observation",
    "sample_observations",
]

# Relative diagonal jitter applied only when the exact kernel matrix fails
# to factor (near-duplicate base stations).
_JITTER_REL = 1e-10


class GeometryError(ValueError):
    """Invalid network geometry (duplicate stations, zero distances, ...)."""


class CovarianceError(ValueError):
    """Shadowing covariance is numerically non-positive-definite."""


@dataclass(frozen=True, eq=False)
class NetworkGeometry:
    """Base-station layout plus the user's claimed location.

    Coordinates are 2-D Euclidean, in meters.  ``ref_power_db`` is the
    received power at ``ref_distance_m`` from the transmitter.
    """

    bs_positions: np.ndarray  # (N, 2)
    claimed_location: np.ndarray  # (2,)
    ref_power_db: float
    ref_distance_m: float
    path_loss_exponent: float

    def __post_init__(self):
        bs = np.atleast_2d(np.asarray(self.bs_positions, dtype=float))
        xc = np.asarray(self.claimed_location, dtype=float).reshape(2)
        object.__setattr__(self, "bs_positions", bs)
        object.__setattr__(self, "claimed_location", xc)
        if bs.ndim != 2 or bs.shape[1] != 2:
            raise GeometryError("bs_positions must be an (N, 2) array")
        if bs.shape[0] < 2:
            raise GeometryError("at least two base stations are required")
        if self.ref_distance_m <= 0:
            raise GeometryError("reference distance must be positive")
        if self.path_loss_exponent <= 0:
            raise GeometryError("path loss exponent must be positive")
        d = np.linalg.norm(bs[:, None, :] - bs[None, :, :], axis=-1)
        np.fill_diagonal(d, np.inf)
        if np.any(d == 0.0):
            raise GeometryError("base-station positions must be pairwise distinct")
        if np.any(np.linalg.norm(bs - xc, axis=-1) == 0.0):
            raise GeometryError("claimed location coincides with a base station")

    @property
    def n_stations(self) -> int:
        return self.bs_positions.shape[0]

    def __eq__(self, other):
        if not isinstance(other, NetworkGeometry):
            return NotImplemented
        return (
            np.array_equal(self.bs_positions, other.bs_positions)
            and np.array_equal(self.claimed_location, other.claimed_location)
            and self.ref_power_db == other.ref_power_db
            and self.ref_distance_m == other.ref_distance_m
            and self.path_loss_exponent == other.path_loss_exponent
        )


@dataclass(frozen=True)
class ShadowingModel:
    """Covariance of the dB shadowing noise across base stations.

    ``covariance`` is N x N symmetric positive definite with every diagonal
    entry equal to ``sigma_db ** 2``; ``chol_lower`` is its lower Cholesky
    factor.  ``diag_jitter`` records any stabilization added to the diagonal
    (zero in the normal case).
    """

    sigma_db: float
    correlation_distance: float
    covariance: np.ndarray
    chol_lower: np.ndarray
    diag_jitter: float = 0.0

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Apply the inverse covariance to ``b`` (columns or a vector)."""
        return cho_solve((self.chol_lower, True), b)


def mean_vector(geometry: NetworkGeometry, location) -> np.ndarray:
    """Deterministic received power (dB) at every base station.

    ``location`` may be a single 2-D point or an array of shape (..., 2);
    the result has shape (..., N).
    """
    loc = np.asarray(location, dtype=float)
    diff = loc[..., None, :] - geometry.bs_positions
    dist = np.linalg.norm(diff, axis=-1)
    if np.any(dist == 0.0):
        raise GeometryError("location coincides with a base station")
    return geometry.ref_power_db - 10.0 * geometry.path_loss_exponent * np.log10(
        dist / geometry.ref_distance_m
    )


def build_covariance(
    geometry: NetworkGeometry, sigma_db: float, correlation_distance: float
) -> ShadowingModel:
    """Construct the shadowing covariance for the given geometry.

    ``correlation_distance == 0`` selects the exactly uncorrelated model
    (diagonal covariance) rather than evaluating the degenerate kernel limit.
    """
    if sigma_db <= 0:
        raise ValueError("sigma_db must be positive")
    if correlation_distance < 0:
        raise ValueError("correlation_distance must be nonnegative")
    bs = geometry.bs_positions
    n = geometry.n_stations
    var = sigma_db**2
    if correlation_distance == 0.0:
        cov = var * np.eye(n)
    else:
        d = np.linalg.norm(bs[:, None, :] - bs[None, :, :], axis=-1)
        cov = var * np.exp(-(d / correlation_distance) * np.log(2.0))
        np.fill_diagonal(cov, var)
    jitter = 0.0
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        jitter = _JITTER_REL * var
        try:
            chol = np.linalg.cholesky(cov + jitter * np.eye(n))
        except np.linalg.LinAlgError as exc:
            raise CovarianceError(
                "shadowing covariance is not positive definite "
                "(near-duplicate base stations?)"
            ) from exc
        cov = cov + jitter * np.eye(n)
    return ShadowingModel(
        sigma_db=float(sigma_db),
        correlation_distance=float(correlation_distance),
        covariance=cov,
        chol_lower=chol,
        diag_jitter=jitter,
    )


def sample_observation(
    model: ShadowingModel, mean: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Draw one dB observation vector: ``mean + L @ z`` with i.i.d. normal z."""
    z = rng.standard_normal(model.chol_lower.shape[0])
    return np.asarray(mean, dtype=float) + model.chol_lower @ z


def sample_observations(
    model: ShadowingModel, mean: np.ndarray, rng: np.random.Generator, n: int
) -> np.ndarray:
    """Draw ``n`` observation vectors at once, shape (n, N)."""
    dim = model.chol_lower.shape[0]
    z = rng.standard_normal((n, dim))
    return np.asarray(mean, dtype=float) + z @ model.chol_lower.T
