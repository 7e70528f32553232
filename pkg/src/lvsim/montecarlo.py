"""Monte Carlo estimation of detector rates and KL divergences.

Serves as the independent empirical check on every closed-form rate.
Sampling uses a counter-based Philox stream keyed by the plan seed, so a
given plan reproduces the same counts regardless of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adversary import AttackStrategy
from .channel import NetworkGeometry, ShadowingModel, mean_vector, sample_observations
from .detector import DetectorSpec, decide, drss_transform

__all__ = [
    "PlanError",
    "TrialPlan",
    "EmpiricalRate",
    "KlEstimate",
    "estimate_rate",
    "estimate_kl",
    "agreement_sigma",
]

# Family-wise gate for suite-level empirical-vs-analytic comparisons
# (two-sided 1e-4 per comparison).
SUITE_Z = 3.89


class PlanError(ValueError):
    """Inconsistent trial plan (e.g. H1 without an attack strategy)."""


@dataclass(frozen=True)
class TrialPlan:
    """Specification of one Monte Carlo run."""

    n_trials: int
    seed: int
    hypothesis: str  # "h0" | "h1"
    strategy: AttackStrategy | None = None

    def __post_init__(self):
        if self.n_trials < 1:
            raise PlanError("n_trials must be at least 1")
        if self.hypothesis not in ("h0", "h1"):
            raise PlanError(f"unknown hypothesis: {self.hypothesis!r}")
        if self.hypothesis == "h1" and self.strategy is None:
            raise PlanError("H1 plans require an attack strategy")


@dataclass(frozen=True)
class EmpiricalRate:
    """Empirical accept rate with its binomial standard error."""

    rate: float
    stderr: float
    n_trials: int


@dataclass(frozen=True)
class KlEstimate:
    """Sample-mean KL estimate (nats) with its standard error."""

    value: float
    stderr: float
    n_samples: int


def _rss_mean(plan: TrialPlan, geometry: NetworkGeometry) -> np.ndarray:
    if plan.hypothesis == "h0":
        return mean_vector(geometry, geometry.claimed_location)
    strat = plan.strategy
    return strat.power_boost_db + mean_vector(geometry, strat.true_location)


def estimate_rate(
    plan: TrialPlan,
    spec: DetectorSpec,
    geometry: NetworkGeometry,
    model: ShadowingModel,
) -> EmpiricalRate:
    """Fraction of trials on which the detector accepts H1."""
    mean = _rss_mean(plan, geometry)
    rng = np.random.Generator(np.random.Philox(plan.seed))
    y = sample_observations(model, mean, rng, plan.n_trials)
    obs = drss_transform(y) if spec.mode == "drss" else y
    accepts = decide(spec, obs)
    rate = float(np.mean(accepts))
    stderr = float(np.sqrt(rate * (1.0 - rate) / plan.n_trials))
    return EmpiricalRate(rate=rate, stderr=stderr, n_trials=plan.n_trials)


def estimate_kl(
    x_t,
    p_x: float,
    geometry: NetworkGeometry,
    model: ShadowingModel,
    n_samples: int,
    seed: int,
) -> KlEstimate:
    """Sample-mean estimate of the RSS KL divergence under H0.

    Averages the log-likelihood ratio ln f(y|H0) / ln f(y|attack) over draws
    from the legitimate distribution.
    """
    if n_samples < 1:
        raise PlanError("n_samples must be at least 1")
    u = mean_vector(geometry, geometry.claimed_location)
    m1 = p_x + mean_vector(geometry, x_t)
    rng = np.random.Generator(np.random.Philox(seed))
    y = sample_observations(model, u, rng, n_samples)
    # log ratio of two same-covariance Gaussians: quadratic terms only
    d0 = model.solve((y - u).T)
    d1 = model.solve((y - m1).T)
    ratio = 0.5 * (np.einsum("ij,ji->i", y - m1, d1) - np.einsum("ij,ji->i", y - u, d0))
    value = float(np.mean(ratio))
    stderr = float(np.std(ratio, ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else float("inf")
    return KlEstimate(value=value, stderr=stderr, n_samples=n_samples)


def agreement_sigma(empirical: EmpiricalRate, analytic: float) -> float:
    """Deviation of an empirical rate from its analytic value, in sigmas.

    The standard error is taken at the analytic rate so the gate stays
    meaningful when the empirical count is zero.
    """
    se = np.sqrt(analytic * (1.0 - analytic) / empirical.n_trials)
    diff = abs(empirical.rate - analytic)
    if se == 0.0:
        return 0.0 if diff == 0.0 else float("inf")
    return float(diff / se)
