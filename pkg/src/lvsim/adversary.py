"""Optimal spoofing strategy for an attacker with full model knowledge.

The attacker minimizes the KL divergence between the legitimate and the
attack-induced observation distributions, choosing a transmit-power boost
(closed form) and a true location (deterministic grid-then-refine search
subject to the minimum-distance constraint).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .channel import NetworkGeometry, ShadowingModel, mean_vector
from .detector import build_d_matrix

__all__ = [
    "SearchError",
    "AttackStrategy",
    "SearchConfig",
    "default_search_region",
    "optimal_power_boost",
    "kl_rss",
    "kl_rss_minimized",
    "kl_drss",
    "optimize_true_location",
    "refined_grid_cell",
]

_LOCAL_GRID = 9  # points per axis in each refinement pass
_TIE_EPS = 1e-12


class SearchError(ValueError):
    """Location search cannot run (empty feasible region, bad config)."""


@dataclass(frozen=True)
class AttackStrategy:
    """Attacker's chosen true location and power boost, with its KL cost.

    ``power_boost_relevant`` is False for DRSS attacks, where differencing
    cancels any common boost.
    """

    true_location: tuple
    power_boost_db: float
    kl_nats: float
    power_boost_relevant: bool = True


@dataclass(frozen=True)
class SearchConfig:
    """Deterministic search parameters for the attacker's location.

    ``region`` is (xmin, xmax, ymin, ymax); None derives a default from the
    geometry.  ``min_distance`` is the threat model's exclusion radius around
    the claimed location (boundary feasible).
    """

    min_distance: float
    region: tuple | None = None
    coarse_grid_step: float = 25.0
    refine_iterations: int = 6
    refine_shrink: float = 0.5

    def __post_init__(self):
        if self.min_distance <= 0:
            raise SearchError("min_distance must be positive")
        if self.coarse_grid_step <= 0:
            raise SearchError("coarse_grid_step must be positive")
        if not (0.0 < self.refine_shrink < 1.0):
            raise SearchError("refine_shrink must lie strictly in (0, 1)")
        if self.refine_iterations < 0:
            raise SearchError("refine_iterations must be nonnegative")


def default_search_region(geometry: NetworkGeometry, min_distance: float) -> tuple:
    """Bounding box of the base stations, expanded by 2r per side."""
    bs = geometry.bs_positions
    pad = 2.0 * min_distance
    return (
        float(bs[:, 0].min() - pad),
        float(bs[:, 0].max() + pad),
        float(bs[:, 1].min() - pad),
        float(bs[:, 1].max() + pad),
    )


def optimal_power_boost(u: np.ndarray, v: np.ndarray, cov: np.ndarray) -> float:
    """Closed-form boost minimizing the RSS KL divergence for a fixed location.

    Returns ((u - v)^T R^-1 1) / (1^T R^-1 1).
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    ones = np.ones(u.size)
    try:
        sol = np.linalg.solve(np.asarray(cov, dtype=float), np.column_stack([u - v, ones]))
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular covariance") from exc
    return float(ones @ sol[:, 0] / (ones @ sol[:, 1]))


def _quad_form(chol_lower: np.ndarray, delta: np.ndarray):
    """delta^T C^-1 delta for delta of shape (..., N), via the Cholesky factor."""
    d = np.asarray(delta, dtype=float)
    flat = d.reshape(-1, d.shape[-1])
    sol = cho_solve((chol_lower, True), flat.T)
    out = np.einsum("ij,ji->i", flat, sol)
    return out.reshape(d.shape[:-1]) if d.ndim > 1 else float(out[0])


def kl_rss(
    p_x: float, x_t, geometry: NetworkGeometry, model: ShadowingModel
):
    """KL divergence seen by the RSS detector for boost ``p_x`` at ``x_t``.

    Equals 0.5 (p_x 1 + v - u)^T R^-1 (p_x 1 + v - u); ``x_t`` may be a
    single point or an array of shape (..., 2).
    """
    u = mean_vector(geometry, geometry.claimed_location)
    v = mean_vector(geometry, x_t)
    return 0.5 * _quad_form(model.chol_lower, p_x + v - u)


def kl_rss_minimized(x_t, geometry: NetworkGeometry, model: ShadowingModel):
    """RSS KL divergence after the attacker applies the optimal power boost.

    Vectorized over ``x_t`` of shape (..., 2).
    """
    u = mean_vector(geometry, geometry.claimed_location)
    v = mean_vector(geometry, x_t)
    g = v - u
    n = u.size
    ones = np.ones(n)
    rinv_ones = model.solve(ones)
    a = float(ones @ rinv_ones)
    flat = g.reshape(-1, n)
    sol = cho_solve((model.chol_lower, True), flat.T)  # R^-1 g
    q = np.einsum("ij,ji->i", flat, sol)
    b = flat @ rinv_ones
    out = 0.5 * (q - b**2 / a)
    scalar = np.asarray(x_t, dtype=float).ndim == 1
    return float(out[0]) if scalar else out.reshape(g.shape[:-1])


def kl_drss(x_t, geometry: NetworkGeometry, model: ShadowingModel):
    """KL divergence seen by the DRSS detector; boost-independent.

    Vectorized over ``x_t`` of shape (..., 2).
    """
    d_mat = build_d_matrix(model.covariance)
    try:
        d_chol = np.linalg.cholesky(d_mat)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular differenced covariance") from exc
    u = mean_vector(geometry, geometry.claimed_location)
    v = mean_vector(geometry, x_t)
    g = v - u
    delta = g[..., :-1] - g[..., -1:]
    return 0.5 * _quad_form(d_chol, delta)


def refined_grid_cell(config: SearchConfig) -> float:
    """Spacing of the final refinement grid (the search's resolution)."""
    spacing = 2.0 * config.coarse_grid_step / (_LOCAL_GRID - 1)
    if config.refine_iterations == 0:
        return config.coarse_grid_step
    return spacing * config.refine_shrink ** (config.refine_iterations - 1)


def _argmin_lex(points: np.ndarray, values: np.ndarray):
    """Minimum value; ties within 1e-12 broken by lexicographic (x, y)."""
    vmin = values.min()
    mask = values <= vmin + _TIE_EPS
    cand = points[mask]
    cand_vals = values[mask]
    order = np.lexsort((cand[:, 1], cand[:, 0]))
    best = order[0]
    return cand[best], float(cand_vals[best])


def optimize_true_location(
    objective: str,
    config: SearchConfig,
    geometry: NetworkGeometry,
    model: ShadowingModel,
) -> AttackStrategy:
    """Minimize the KL objective over feasible true locations.

    ``objective`` is "rss" (boost-minimized RSS KL) or "drss".  Coarse
    uniform grid over the region excluding the open min-distance disc, then
    iterative local refinement around the incumbent.
    """
    if objective == "rss":
        evaluate = lambda pts: np.atleast_1d(kl_rss_minimized(pts, geometry, model))
    elif objective == "drss":
        evaluate = lambda pts: np.atleast_1d(kl_drss(pts, geometry, model))
    else:
        raise SearchError(f"unknown objective: {objective!r}")

    xmin, xmax, ymin, ymax = (
        config.region
        if config.region is not None
        else default_search_region(geometry, config.min_distance)
    )
    xc = geometry.claimed_location
    r = config.min_distance

    def feasible(pts):
        ok = np.linalg.norm(pts - xc, axis=-1) >= r
        # grid points exactly on a base station have undefined path loss
        for b in geometry.bs_positions:
            ok &= np.linalg.norm(pts - b, axis=-1) > 0.0
        return ok

    step = config.coarse_grid_step
    xs = np.arange(xmin, xmax + 0.5 * step, step)
    ys = np.arange(ymin, ymax + 0.5 * step, step)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    mask = feasible(pts)
    if not mask.any():
        raise SearchError("feasible region is empty")
    pts = pts[mask]
    incumbent, value = _argmin_lex(pts, evaluate(pts))

    half = step
    for _ in range(config.refine_iterations):
        lx = np.clip(np.linspace(incumbent[0] - half, incumbent[0] + half, _LOCAL_GRID), xmin, xmax)
        ly = np.clip(np.linspace(incumbent[1] - half, incumbent[1] + half, _LOCAL_GRID), ymin, ymax)
        gx, gy = np.meshgrid(lx, ly, indexing="ij")
        local = np.column_stack([gx.ravel(), gy.ravel()])
        local = np.vstack([local, incumbent])
        lmask = feasible(local)
        local = local[lmask]
        incumbent, value = _argmin_lex(local, evaluate(local))
        half *= config.refine_shrink

    if objective == "rss":
        u = mean_vector(geometry, geometry.claimed_location)
        v = mean_vector(geometry, incumbent)
        boost = optimal_power_boost(u, v, model.covariance)
        return AttackStrategy(
            true_location=(float(incumbent[0]), float(incumbent[1])),
            power_boost_db=boost,
            kl_nats=value,
            power_boost_relevant=True,
        )
    return AttackStrategy(
        true_location=(float(incumbent[0]), float(incumbent[1])),
        power_boost_db=0.0,
        kl_nats=value,
        power_boost_relevant=False,
    )
