import json
import math

import numpy as np
import pytest

from lvsim.experiments import (
    AttackPolicy,
    Scenario,
    ScenarioError,
    builtin_scenario,
    builtin_scenarios,
    run_scenario,
    verify_theorems,
)

from conftest import CLAIMED


class TestRegistry:
    def test_six_scenarios(self):
        names = [s.name for s in builtin_scenarios()]
        assert names == ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6"]

    def test_fig1_geometry(self):
        s = builtin_scenario("fig1")
        assert s.geometry.n_stations == 3
        np.testing.assert_array_equal(
            s.geometry.bs_positions, [[-250.0, 10.0], [0.0, -10.0], [250.0, 10.0]]
        )
        assert (s.sigma_db, s.correlation_distance, s.min_distance) == (7.5, 50.0, 500.0)

    def test_fig2_parameters(self):
        s = builtin_scenario("fig2")
        assert s.geometry.n_stations == 4
        assert (s.sigma_db, s.min_distance) == (5.0, 100.0)

    def test_shared_deployment_constants(self):
        for s in builtin_scenarios():
            np.testing.assert_array_equal(s.geometry.claimed_location, CLAIMED)
            assert s.geometry.path_loss_exponent == 3.0
            assert s.geometry.ref_power_db == -10.0
            assert s.geometry.ref_distance_m == 1.0

    def test_unknown_name_raises(self):
        with pytest.raises(ScenarioError):
            builtin_scenario("fig9")

    def test_fixed_attack_inside_disc_rejected(self):
        base = builtin_scenario("fig3")
        with pytest.raises(ScenarioError):
            Scenario(
                name="bad",
                geometry=base.geometry,
                sigma_db=5.0,
                correlation_distance=50.0,
                min_distance=100.0,
                attack=AttackPolicy("fixed-location", (100.0, 5.0)),
            )


@pytest.fixture(scope="module")
def fig3_result():
    scenario = builtin_scenario("fig3")
    return run_scenario(scenario)


class TestRunScenario:
    def test_fig3_modes_identical(self, fig3_result):
        rss = fig3_result.modes["rss"].roc
        drss = fig3_result.modes["drss"].roc
        for a, b in zip(rss.points, drss.points):
            assert a.alpha == pytest.approx(b.alpha, abs=1e-9)
            assert a.beta == pytest.approx(b.beta, abs=1e-9)

    def test_fig3_mc_within_gate(self, fig3_result):
        for mr in fig3_result.modes.values():
            for rec in mr.mc_records:
                assert rec["sigma"] <= 3.89, rec

    def test_fig1_alt_locations_dominate(self):
        from scipy.stats import norm

        result = run_scenario(builtin_scenario("fig1"), mc_thresholds=())
        opt = result.modes["rss"].roc
        for loc, alt in result.modes["rss"].alt_rocs:
            assert alt.auc > opt.auc
            assert alt.separation > opt.separation
            # pointwise in ROC space: beta at matched alpha is a monotone
            # function of the separation, beta = Q(Q^-1(alpha) - sqrt(s))
            for alpha in (0.01, 0.1, 0.5, 0.9):
                z = norm.isf(alpha)
                beta_opt = norm.sf(z - np.sqrt(opt.separation))
                beta_alt = norm.sf(z - np.sqrt(alt.separation))
                assert beta_alt > beta_opt

    def test_fig6_r_sweep_increasing(self):
        result = run_scenario(builtin_scenario("fig6"), mc_thresholds=())
        aucs = [auc for _, auc in result.r_sweep]
        assert aucs == sorted(aucs)
        assert len(set(aucs)) == len(aucs)

    def test_output_files(self, tmp_path):
        scenario = builtin_scenario("fig3")
        run_scenario(scenario, outdir=tmp_path, mc_thresholds=(0.0,))
        base = tmp_path / "fig3"
        assert (base / "rss_roc.csv").exists()
        assert (base / "drss_roc.csv").exists()
        records = [json.loads(ln) for ln in (base / "mc.jsonl").read_text().splitlines()]
        assert {r["mode"] for r in records} == {"rss", "drss"}
        attack = json.loads((base / "attack.json").read_text())
        assert set(attack) == {"rss", "drss"}
        assert math.dist(attack["rss"]["true_location"], CLAIMED) >= 100.0 - 1e-9


class TestVerifyTheorems:
    def test_all_checks_pass(self):
        report = verify_theorems(trials=20, seed=5)
        assert report.all_passed
        names = [c.name for c in report.checks]
        assert len(names) == len(set(names))

    def test_deterministic(self):
        a = verify_theorems(trials=5, seed=9)
        b = verify_theorems(trials=5, seed=9)
        assert a == b

    def test_report_serializes(self):
        report = verify_theorems(trials=3, seed=2)
        payload = json.loads(report.to_json())
        assert payload["all_passed"] is True
        assert all(c["status"] == "pass" for c in payload["checks"])

    def test_invalid_trials(self):
        with pytest.raises(ScenarioError):
            verify_theorems(trials=0, seed=1)
