"""Scenario registry, end-to-end runs, and the theorem-verification suite.

The builtin scenarios reproduce the published figure configurations at desk
scale; ``verify_theorems`` stress-tests the analytic identities on random
geometries.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .adversary import (
    AttackStrategy,
    SearchConfig,
    default_search_region,
    kl_drss,
    kl_rss,
    kl_rss_minimized,
    optimal_power_boost,
    optimize_true_location,
    refined_grid_cell,
)
from .channel import NetworkGeometry, ShadowingModel, build_covariance, mean_vector
from .detector import (
    DetectorSpec,
    analytic_rates,
    build_d_matrix,
    default_threshold_grid,
    drss_transform,
    q_function,
    roc_sweep,
    roc_to_csv,
)
from .montecarlo import SUITE_Z, TrialPlan, agreement_sigma, estimate_rate

__all__ = [
    "ScenarioError",
    "AttackPolicy",
    "Scenario",
    "ModeResult",
    "ScenarioResult",
    "CheckResult",
    "VerificationReport",
    "builtin_scenarios",
    "builtin_scenario",
    "detector_spec",
    "resolve_attack",
    "optimal_auc",
    "run_scenario",
    "verify_theorems",
    "MC_LOG_THRESHOLDS",
]

MC_LOG_THRESHOLDS = (-2.0, -1.0, 0.0, 1.0, 2.0)

# Deployment-wide constants shared by every published configuration.
_CLAIMED = (50.0, 5.0)
_REF_POWER_DB = -10.0
_REF_DISTANCE_M = 1.0
_PATH_LOSS_EXPONENT = 3.0


class ScenarioError(ValueError):
    """Invalid scenario definition."""


@dataclass(frozen=True)
class AttackPolicy:
    """How the attacker's strategy is chosen for a run.

    kind "optimal": full search; "fixed-location": given location, optimal
    boost; "fixed": given location and boost.
    """

    kind: str = "optimal"
    true_location: tuple | None = None
    power_boost_db: float | None = None

    def __post_init__(self):
        if self.kind not in ("optimal", "fixed-location", "fixed"):
            raise ScenarioError(f"unknown attack kind: {self.kind!r}")
        if self.kind != "optimal" and self.true_location is None:
            raise ScenarioError(f"attack kind {self.kind!r} requires a true location")
        if self.kind == "fixed" and self.power_boost_db is None:
            raise ScenarioError("attack kind 'fixed' requires a power boost")


@dataclass(frozen=True)
class Scenario:
    """One complete experiment configuration."""

    name: str
    geometry: NetworkGeometry
    sigma_db: float
    correlation_distance: float
    min_distance: float
    attack: AttackPolicy = AttackPolicy()
    modes: tuple = ("rss", "drss")
    thresholds: tuple | None = None
    mc_trials: int = 100_000
    mc_seed: int = 1
    search: SearchConfig | None = None
    dc_values: tuple | None = None
    r_values: tuple | None = None
    alt_locations: tuple = ()

    def __post_init__(self):
        if self.min_distance <= 0:
            raise ScenarioError("min_distance must be positive")
        for mode in self.modes:
            if mode not in ("rss", "drss"):
                raise ScenarioError(f"unknown mode: {mode!r}")
        for loc in ((self.attack.true_location,) if self.attack.true_location else ()) + tuple(
            self.alt_locations
        ):
            d = math.dist(loc, tuple(self.geometry.claimed_location))
            if d < self.min_distance:
                raise ScenarioError(
                    f"location {loc} lies {d:.6g} m from the claimed location, "
                    f"inside the {self.min_distance:.6g} m minimum-distance disc"
                )

    def search_config(self) -> SearchConfig:
        if self.search is not None:
            return self.search
        return SearchConfig(min_distance=self.min_distance)

    def shadowing(self, correlation_distance: float | None = None) -> ShadowingModel:
        dc = self.correlation_distance if correlation_distance is None else correlation_distance
        return build_covariance(self.geometry, self.sigma_db, dc)


def _geometry(bs) -> NetworkGeometry:
    return NetworkGeometry(
        bs_positions=np.asarray(bs, dtype=float),
        claimed_location=np.asarray(_CLAIMED),
        ref_power_db=_REF_POWER_DB,
        ref_distance_m=_REF_DISTANCE_M,
        path_loss_exponent=_PATH_LOSS_EXPONENT,
    )


_CORRIDOR_BS = [[-250.0, 10.0], [0.0, -10.0], [250.0, 10.0]]
_MIXED_BS = [[0.0, 10.0], [131.4, -9.3], [20.6, -0.9]]


def builtin_scenarios() -> list[Scenario]:
    """The six registered experiment configurations."""
    return [
        Scenario(
            name="fig1",
            geometry=_geometry(_CORRIDOR_BS),
            sigma_db=7.5,
            correlation_distance=50.0,
            min_distance=500.0,
            alt_locations=((650.0, 5.0), (50.0, 505.0)),
            mc_seed=11,
        ),
        Scenario(
            name="fig2",
            geometry=_geometry(
                [[201.4, -9.0], [-161.7, 9.3], [-97.4, 1.2], [91.5, 2.4]]
            ),
            sigma_db=5.0,
            correlation_distance=50.0,
            min_distance=100.0,
            alt_locations=((250.0, 5.0), (50.0, -105.0)),
            mc_seed=12,
        ),
        Scenario(
            name="fig3",
            geometry=_geometry(_MIXED_BS),
            sigma_db=5.0,
            correlation_distance=50.0,
            min_distance=100.0,
            mc_seed=13,
        ),
        Scenario(
            name="fig4",
            geometry=_geometry(_CORRIDOR_BS),
            sigma_db=7.5,
            correlation_distance=50.0,
            min_distance=500.0,
            dc_values=(0.0, 10.0, 50.0, 200.0),
            mc_seed=14,
        ),
        Scenario(
            name="fig5",
            geometry=_geometry(_MIXED_BS),
            sigma_db=5.0,
            correlation_distance=50.0,
            min_distance=100.0,
            dc_values=(0.0, 10.0, 50.0, 200.0),
            mc_seed=15,
        ),
        Scenario(
            name="fig6",
            geometry=_geometry(_MIXED_BS),
            sigma_db=5.0,
            correlation_distance=50.0,
            min_distance=100.0,
            r_values=(100.0, 250.0, 500.0),
            mc_seed=16,
        ),
    ]


def builtin_scenario(name: str) -> Scenario:
    for s in builtin_scenarios():
        if s.name == name:
            return s
    raise ScenarioError(f"unknown builtin scenario: {name!r}")


def resolve_attack(
    scenario: Scenario, mode: str, model: ShadowingModel
) -> AttackStrategy:
    """Attacker strategy for one mode under the scenario's attack policy."""
    geometry = scenario.geometry
    policy = scenario.attack
    if policy.kind == "optimal":
        return optimize_true_location(mode, scenario.search_config(), geometry, model)
    x_t = policy.true_location
    if mode == "drss":
        return AttackStrategy(
            true_location=tuple(x_t),
            power_boost_db=0.0,
            kl_nats=float(kl_drss(x_t, geometry, model)),
            power_boost_relevant=False,
        )
    if policy.kind == "fixed-location":
        u = mean_vector(geometry, geometry.claimed_location)
        v = mean_vector(geometry, x_t)
        boost = optimal_power_boost(u, v, model.covariance)
    else:
        boost = float(policy.power_boost_db)
    return AttackStrategy(
        true_location=tuple(x_t),
        power_boost_db=boost,
        kl_nats=float(kl_rss(boost, x_t, geometry, model)),
        power_boost_relevant=True,
    )


def detector_spec(
    mode: str,
    geometry: NetworkGeometry,
    model: ShadowingModel,
    strategy: AttackStrategy,
    log_threshold: float = 0.0,
) -> DetectorSpec:
    """Detector specification matching a given attack strategy."""
    u = mean_vector(geometry, geometry.claimed_location)
    v = strategy.power_boost_db + mean_vector(geometry, strategy.true_location)
    if mode == "rss":
        return DetectorSpec(mode="rss", mu0=u, mu1=v, cov=model.covariance,
                            log_threshold=log_threshold)
    return DetectorSpec(
        mode="drss",
        mu0=drss_transform(u),
        mu1=drss_transform(v),
        cov=build_d_matrix(model.covariance),
        log_threshold=log_threshold,
    )


def optimal_auc(
    scenario: Scenario,
    mode: str = "rss",
    correlation_distance: float | None = None,
    min_distance: float | None = None,
):
    """ROC area under a re-optimized attack; returns (auc, strategy, spec).

    Optionally overrides the correlation distance or the exclusion radius
    (re-deriving the search region for the latter).
    """
    model = scenario.shadowing(correlation_distance)
    cfg = scenario.search_config()
    if min_distance is not None:
        cfg = replace(cfg, min_distance=min_distance, region=None)
    strategy = optimize_true_location(mode, cfg, scenario.geometry, model)
    spec = detector_spec(mode, scenario.geometry, model, strategy)
    curve = roc_sweep(spec, default_threshold_grid(spec.separation))
    return curve.auc, strategy, spec


@dataclass(frozen=True)
class ModeResult:
    mode: str
    strategy: AttackStrategy
    roc: "RocCurve"  # noqa: F821 - detector.RocCurve
    mc_records: tuple
    alt_rocs: tuple = ()  # (location, RocCurve) pairs


@dataclass(frozen=True)
class ScenarioResult:
    scenario: Scenario
    modes: dict
    dc_sweep: tuple = ()  # (D_c, auc) pairs, RSS mode, re-optimized attack
    r_sweep: tuple = ()  # (r, auc) pairs, RSS mode, re-optimized attack


def run_scenario(
    scenario: Scenario,
    outdir: str | Path | None = None,
    mc_thresholds=MC_LOG_THRESHOLDS,
) -> ScenarioResult:
    """Full pipeline for one scenario: attack, analytic ROC, MC validation."""
    geometry = scenario.geometry
    model = scenario.shadowing()
    mode_results = {}
    seed_counter = 0
    for mode in scenario.modes:
        strategy = resolve_attack(scenario, mode, model)
        spec = detector_spec(mode, geometry, model, strategy)
        thresholds = (
            scenario.thresholds
            if scenario.thresholds is not None
            else default_threshold_grid(spec.separation)
        )
        curve = roc_sweep(spec, thresholds)
        records = []
        for lam in mc_thresholds:
            spec_t = detector_spec(mode, geometry, model, strategy, log_threshold=lam)
            rates = analytic_rates(spec_t)
            for hyp, analytic in (("h0", rates.alpha), ("h1", rates.beta)):
                plan = TrialPlan(
                    n_trials=scenario.mc_trials,
                    seed=scenario.mc_seed * 100_003 + seed_counter,
                    hypothesis=hyp,
                    strategy=strategy if hyp == "h1" else None,
                )
                seed_counter += 1
                emp = estimate_rate(plan, spec_t, geometry, model)
                records.append(
                    {
                        "scenario": scenario.name,
                        "mode": mode,
                        "ln_lambda": lam,
                        "hypothesis": hyp,
                        "n": emp.n_trials,
                        "rate": emp.rate,
                        "stderr": emp.stderr,
                        "analytic": analytic,
                        "sigma": agreement_sigma(emp, analytic),
                    }
                )
        alt_rocs = []
        for loc in scenario.alt_locations:
            alt = resolve_attack(
                replace(scenario, attack=AttackPolicy("fixed-location", tuple(loc))),
                mode,
                model,
            )
            alt_spec = detector_spec(mode, geometry, model, alt)
            alt_rocs.append((tuple(loc), roc_sweep(alt_spec, curve.thresholds)))
        mode_results[mode] = ModeResult(
            mode=mode,
            strategy=strategy,
            roc=curve,
            mc_records=tuple(records),
            alt_rocs=tuple(alt_rocs),
        )

    dc_sweep = ()
    if scenario.dc_values is not None:
        dc_sweep = tuple(
            (dc, optimal_auc(scenario, "rss", correlation_distance=dc)[0])
            for dc in scenario.dc_values
        )
    r_sweep = ()
    if scenario.r_values is not None:
        r_sweep = tuple(
            (r, optimal_auc(scenario, "rss", min_distance=r)[0])
            for r in scenario.r_values
        )

    result = ScenarioResult(
        scenario=scenario, modes=mode_results, dc_sweep=dc_sweep, r_sweep=r_sweep
    )
    if outdir is not None:
        _write_result(result, Path(outdir))
    return result


def _write_result(result: ScenarioResult, outdir: Path) -> None:
    base = outdir / result.scenario.name
    base.mkdir(parents=True, exist_ok=True)
    for mode, mr in result.modes.items():
        (base / f"{mode}_roc.csv").write_text(roc_to_csv(mr.roc))
    with (base / "mc.jsonl").open("w") as fh:
        for mode in result.modes.values():
            for rec in mode.mc_records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    attack = {
        mode: {
            "true_location": list(mr.strategy.true_location),
            "power_boost_db": mr.strategy.power_boost_db,
            "kl_nats": mr.strategy.kl_nats,
            "power_boost_relevant": mr.strategy.power_boost_relevant,
        }
        for mode, mr in result.modes.items()
    }
    (base / "attack.json").write_text(json.dumps(attack, sort_keys=True, indent=2) + "\n")
    if result.dc_sweep or result.r_sweep:
        lines = ["parameter,value,auc"]
        for dc, auc in result.dc_sweep:
            lines.append(f"correlation_distance,{dc:.12g},{auc:.12g}")
        for r, auc in result.r_sweep:
            lines.append(f"min_distance,{r:.12g},{auc:.12g}")
        (base / "sweep.csv").write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    discrepancy: float
    tolerance: float


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple
    trials: int
    seed: int

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> str:
        payload = {
            "trials": self.trials,
            "seed": self.seed,
            "all_passed": self.all_passed,
            "checks": [
                {
                    "name": c.name,
                    "status": "pass" if c.passed else "fail",
                    "discrepancy": c.discrepancy,
                    "tolerance": c.tolerance,
                }
                for c in self.checks
            ],
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _random_geometry(rng: np.random.Generator):
    """Random deployment in the 500 x 20 m box, with a feasible attacker."""
    while True:
        n = int(rng.integers(3, 6))
        bs = np.column_stack(
            [rng.uniform(-250.0, 250.0, n), rng.uniform(-10.0, 10.0, n)]
        )
        d = np.linalg.norm(bs[:, None, :] - bs[None, :, :], axis=-1)
        np.fill_diagonal(d, np.inf)
        xc = np.asarray(_CLAIMED)
        if d.min() > 1.0 and np.linalg.norm(bs - xc, axis=-1).min() > 1.0:
            break
    geometry = NetworkGeometry(
        bs_positions=bs,
        claimed_location=xc,
        ref_power_db=_REF_POWER_DB,
        ref_distance_m=_REF_DISTANCE_M,
        path_loss_exponent=_PATH_LOSS_EXPONENT,
    )
    r = 100.0
    theta = rng.uniform(0.0, 2.0 * np.pi)
    rho = rng.uniform(r, 3.0 * r)
    x_t = xc + rho * np.array([np.cos(theta), np.sin(theta)])
    sigma = float(rng.uniform(3.0, 10.0))
    dc = float(rng.uniform(0.0, 200.0))
    return geometry, x_t, sigma, dc, r


def verify_theorems(trials: int = 100, seed: int = 1) -> VerificationReport:
    """Stress-test the analytic identities on random geometries.

    Each check aggregates its worst-case discrepancy across all trials.
    """
    if trials < 1:
        raise ScenarioError("trials must be at least 1")
    rng = np.random.default_rng(seed)

    kl_identity = 0.0
    dominance_margin = np.inf
    rate_identity = 0.0
    optimizer_gap = 0.0
    optimizer_tol = 0.0
    convexity_violation = 0.0
    dinv_err = 0.0
    closed_form_err = 0.0

    for _ in range(trials):
        geometry, x_t, sigma, dc, r = _random_geometry(rng)
        model = build_covariance(geometry, sigma, dc)
        u = mean_vector(geometry, geometry.claimed_location)
        v = mean_vector(geometry, x_t)
        boost = optimal_power_boost(u, v, model.covariance)

        # Boost-minimized RSS KL equals the DRSS KL for every geometry.
        lhs = kl_rss_minimized(x_t, geometry, model)
        rhs = kl_drss(x_t, geometry, model)
        kl_identity = max(kl_identity, abs(lhs - rhs) / max(abs(rhs), 1e-300))

        # With a suboptimal boost, the RSS separation strictly exceeds DRSS.
        strat = AttackStrategy(tuple(x_t), boost, lhs)
        drss_s = detector_spec("drss", geometry, model, strat).separation
        for db in (1.0, 3.0, 10.0):
            for sign in (1.0, -1.0):
                perturbed = AttackStrategy(tuple(x_t), boost + sign * db, 0.0)
                rss_s = detector_spec("rss", geometry, model, perturbed).separation
                dominance_margin = min(dominance_margin, rss_s - drss_s)

        # Matched-boost RSS and DRSS operating points coincide.
        for lam in MC_LOG_THRESHOLDS:
            pr = analytic_rates(detector_spec("rss", geometry, model, strat, lam))
            pd = analytic_rates(detector_spec("drss", geometry, model, strat, lam))
            rate_identity = max(
                rate_identity, abs(pr.alpha - pd.alpha), abs(pr.beta - pd.beta)
            )

        # Both location searches land in the same refined cell.
        region = default_search_region(geometry, r)
        step = max(region[1] - region[0], region[3] - region[2]) / 25.0
        cfg = SearchConfig(min_distance=r, region=region, coarse_grid_step=step)
        best_rss = optimize_true_location("rss", cfg, geometry, model)
        best_drss = optimize_true_location("drss", cfg, geometry, model)
        optimizer_gap = max(
            optimizer_gap,
            math.dist(best_rss.true_location, best_drss.true_location),
        )
        optimizer_tol = max(optimizer_tol, math.sqrt(2.0) * refined_grid_cell(cfg))

        # KL is convex in the boost and minimized at the closed form.
        p_grid = boost + np.linspace(-5.0, 5.0, 21)
        phi = np.array([kl_rss(p, x_t, geometry, model) for p in p_grid])
        second = np.diff(phi, 2)
        convexity_violation = max(convexity_violation, float(-(second.min())))
        convexity_violation = max(convexity_violation, float(lhs - phi.min()))

        # Uncorrelated special case: explicit inverse of the differenced
        # covariance, and the summation closed form of the minimized KL.
        n = geometry.n_stations
        white = build_covariance(geometry, 1.0, 0.0)
        d_mat = build_d_matrix(white.covariance)
        dinv_err = max(
            dinv_err,
            float(
                np.abs(
                    np.linalg.inv(d_mat) - (np.eye(n - 1) - np.ones((n - 1, n - 1)) / n)
                ).max()
            ),
        )
        g = v - u
        expected = 0.5 * (np.sum(g**2) - np.sum(g) ** 2 / n)
        got = kl_rss_minimized(x_t, geometry, white)
        closed_form_err = max(
            closed_form_err, abs(got - expected) / max(abs(expected), 1e-300)
        )

    checks = (
        CheckResult("kl-identity-rss-drss", kl_identity < 1e-9, kl_identity, 1e-9),
        CheckResult(
            "suboptimal-boost-dominance",
            dominance_margin > 0.0,
            float(dominance_margin),
            0.0,
        ),
        CheckResult("rate-identity-rss-drss", rate_identity < 1e-9, rate_identity, 1e-9),
        CheckResult(
            "location-optimizer-coincidence",
            optimizer_gap <= optimizer_tol,
            optimizer_gap,
            optimizer_tol,
        ),
        CheckResult(
            "boost-convexity", convexity_violation <= 1e-9, convexity_violation, 1e-9
        ),
        CheckResult("uncorrelated-d-inverse", dinv_err < 1e-9, dinv_err, 1e-9),
        CheckResult(
            "uncorrelated-closed-form-kl", closed_form_err < 1e-9, closed_form_err, 1e-9
        ),
    )
    return VerificationReport(checks=checks, trials=trials, seed=seed)
