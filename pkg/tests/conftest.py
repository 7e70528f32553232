import numpy as np
import pytest

from lvsim.channel import NetworkGeometry, build_covariance

FIG1_BS = [[-250.0, 10.0], [0.0, -10.0], [250.0, 10.0]]
FIG3_BS = [[0.0, 10.0], [131.4, -9.3], [20.6, -0.9]]
CLAIMED = [50.0, 5.0]


def make_geometry(bs, claimed=CLAIMED, p=-10.0, d=1.0, gamma=3.0):
    return NetworkGeometry(
        bs_positions=np.asarray(bs, dtype=float),
        claimed_location=np.asarray(claimed, dtype=float),
        ref_power_db=p,
        ref_distance_m=d,
        path_loss_exponent=gamma,
    )


def random_setup(rng, n_min=3, n_max=5, r=100.0):
    """Random geometry, attacker location outside the r-disc, and model."""
    while True:
        n = int(rng.integers(n_min, n_max + 1))
        bs = np.column_stack(
            [rng.uniform(-250.0, 250.0, n), rng.uniform(-10.0, 10.0, n)]
        )
        dists = np.linalg.norm(bs[:, None, :] - bs[None, :, :], axis=-1)
        np.fill_diagonal(dists, np.inf)
        xc = np.asarray(CLAIMED)
        if dists.min() > 1.0 and np.linalg.norm(bs - xc, axis=-1).min() > 1.0:
            break
    geometry = make_geometry(bs)
    theta = rng.uniform(0, 2 * np.pi)
    x_t = xc + rng.uniform(r, 3 * r) * np.array([np.cos(theta), np.sin(theta)])
    sigma = float(rng.uniform(3.0, 10.0))
    dc = float(rng.uniform(0.0, 200.0))
    model = build_covariance(geometry, sigma, dc)
    return geometry, model, x_t


@pytest.fixture(scope="session")
def fig1_geometry():
    return make_geometry(FIG1_BS)


@pytest.fixture(scope="session")
def fig1_model(fig1_geometry):
    return build_covariance(fig1_geometry, 7.5, 50.0)


@pytest.fixture(scope="session")
def fig3_geometry():
    return make_geometry(FIG3_BS)


@pytest.fixture(scope="session")
def fig3_model(fig3_geometry):
    return build_covariance(fig3_geometry, 5.0, 50.0)
