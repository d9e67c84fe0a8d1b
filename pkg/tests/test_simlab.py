"""Scenario DGPs, ground truths, the study harness, and table formatting."""

import warnings

import numpy as np
import pytest

from panel_causal import (
    DEFAULT_SUITE,
    ExtremeWeightsWarning,
    InvalidArgumentError,
    ReplicateFailureWarning,
    SCENARIO_IDS,
    Scenario,
    SuiteEntry,
    estimate_did,
    generate_scenario,
    parse_table,
    render_table,
    run_study,
    scenario_specs,
    term_label,
    true_effects,
)


class TestScenario:
    def test_id_is_normalized_and_checked(self):
        assert Scenario("hom", 100).id == "HOM"
        with pytest.raises(InvalidArgumentError):
            Scenario("LONDON", 100)

    def test_needs_two_units(self):
        Scenario("HOM", 2)
        with pytest.raises(InvalidArgumentError):
            Scenario("HOM", 1)

    def test_param_overrides_merge_over_defaults(self):
        sc = Scenario("HOM", 50, dgp_params={"treat": 20.0})
        assert sc.dgp_params["treat"] == 20.0
        assert sc.dgp_params["trend"] == 3.0

    def test_unknown_param_rejected(self):
        with pytest.raises(InvalidArgumentError):
            Scenario("HOM", 50, dgp_params={"effect": 1.0})


class TestTrueEffects:
    def test_homogeneous_truths_are_analytic(self):
        for sid in ("HOM", "HOM_TI"):
            te = true_effects(sid)
            assert te.ate == 15.0
            assert te.att == 15.0
            assert te.att_mc_se == 0.0

    def test_heterogeneous_truths(self):
        te = true_effects("HET")
        assert te.ate == 35.0
        assert te.att == pytest.approx(35.3905358503353, abs=1e-9)
        assert 0.0 < te.att_mc_se < 0.01
        for sid in ("HET_TI", "RANDCOEF", "RANDCOEF_TI"):
            other = true_effects(sid)
            assert other.ate == te.ate
            assert other.att == te.att

    def test_modified_params_have_no_registered_truth(self):
        with pytest.raises(InvalidArgumentError):
            true_effects(Scenario("HOM", 100, dgp_params={"treat": 20.0}))


class TestScenarioSpecs:
    def test_keys_and_reduction(self):
        for sid in SCENARIO_IDS:
            specs = scenario_specs(sid)
            assert sorted(specs) == [
                "mixed_full", "mixed_reduced", "post_full",
                "post_reduced", "ps_full", "ps_reduced",
            ]
            full = [term_label(t) for t in specs["mixed_full"].outcome_terms]
            red = [term_label(t) for t in specs["mixed_reduced"].outcome_terms]
            assert not any("x2" in lab for lab in red)
            assert any("x2" in lab for lab in full)
            assert [term_label(t) for t in specs["ps_full"].ps_terms] == \
                ["1", "x1", "x2", "v"]
            assert [term_label(t) for t in specs["ps_reduced"].ps_terms] == \
                ["1", "x1", "v"]
            for key in ("post_full", "post_reduced"):
                labels = [term_label(t) for t in specs[key].outcome_terms]
                assert "time" not in labels

    def test_heterogeneous_specs_keep_the_interaction(self):
        specs = scenario_specs("HET")
        for key in ("mixed_full", "mixed_reduced", "post_full", "post_reduced"):
            labels = [term_label(t) for t in specs[key].outcome_terms]
            assert "x1:treat" in labels

    def test_unknown_id(self):
        with pytest.raises(InvalidArgumentError):
            scenario_specs("PARIS")


class TestGenerateScenario:
    def test_shape_and_labels(self):
        data = generate_scenario(Scenario("HOM", 150), seed=0)
        assert data.n == 150
        assert data.covariate_names == ("x1", "x2", "v")
        assert data.unit_ids[0] == "u0000000"
        assert set(np.unique(data.d1)) == {0, 1}
        assert data.x0.shape == data.x1.shape == (150, 3)

    def test_only_x1_varies_over_time(self):
        data = generate_scenario(Scenario("HOM", 300), seed=1)
        assert not np.array_equal(data.x0[:, 0], data.x1[:, 0])
        assert np.array_equal(data.x0[:, 1], data.x1[:, 1])
        assert np.array_equal(data.x0[:, 2], data.x1[:, 2])

    def test_seed_and_replicate_control_the_draw(self):
        sc = Scenario("HOM", 100)
        a = generate_scenario(sc, seed=5)
        b = generate_scenario(sc, seed=5)
        assert np.array_equal(a.y0, b.y0) and np.array_equal(a.y1, b.y1)
        c = generate_scenario(sc, seed=5, replicate=1)
        d = generate_scenario(sc, seed=6)
        assert not np.array_equal(a.y1, c.y1)
        assert not np.array_equal(a.y1, d.y1)

    def test_time_invariant_variant_moves_x2_to_post(self):
        a = generate_scenario(Scenario("HOM", 400), 12)
        b = generate_scenario(Scenario("HOM_TI", 400), 12)
        assert np.array_equal(a.y1, b.y1)
        assert np.array_equal(a.d1, b.d1)
        from panel_causal.simlab import default_params

        gap = a.y0 - b.y0
        x2 = a.x0[:, 1]
        coef = default_params("HOM")["x2"]
        assert np.max(np.abs(gap - coef * x2)) < 1e-12

    def test_random_coefficients_perturb_responses_only(self):
        h = generate_scenario(Scenario("HET", 200), 5)
        r = generate_scenario(Scenario("RANDCOEF", 200), 5)
        assert np.array_equal(h.d1, r.d1)
        assert not np.array_equal(h.y1, r.y1)


class TestRunStudy:
    DID_SUITE = (SuiteEntry("DID"),)

    def test_replicate_count_validated(self):
        with pytest.raises(InvalidArgumentError):
            run_study(Scenario("HOM", 50), self.DID_SUITE, R=1, seed=0)

    def test_duplicate_labels_rejected(self):
        suite = (SuiteEntry("DID", label="x"), SuiteEntry("IPW", ps_model="full", label="x"))
        with pytest.raises(InvalidArgumentError):
            run_study(Scenario("HOM", 50), suite, R=3, seed=0)

    def test_did_reports_att_only(self):
        res = run_study(Scenario("HOM", 60), self.DID_SUITE, R=3, seed=0)
        assert len(res.cells) == 1
        cell = res.cells[0]
        assert cell.label == "did"
        assert cell.estimand == "ATT"
        with pytest.raises(KeyError):
            res.cell("did", "ATE")

    def test_cells_match_a_manual_replication(self):
        sc = Scenario("HOM", 80)
        R, seed = 8, 2
        res = run_study(sc, self.DID_SUITE, R=R, seed=seed)
        vals = np.array([
            estimate_did(generate_scenario(sc, seed, replicate=r)).value
            for r in range(R)
        ])
        cell = res.cell("did", "ATT")
        truth = 15.0
        assert cell.r_used == R
        assert cell.bias100 == pytest.approx(100.0 * (vals.mean() - truth), abs=1e-10)
        assert cell.var == pytest.approx(vals.var(), abs=1e-10)
        assert cell.mse == pytest.approx(np.mean((vals - truth) ** 2), abs=1e-10)
        assert cell.mc_se_bias100 == pytest.approx(
            100.0 * vals.std(ddof=1) / np.sqrt(R), abs=1e-10
        )
        assert res.true_ate == 15.0 and res.true_att == 15.0

    def test_threads_do_not_change_values(self):
        suite = (SuiteEntry("DID"), SuiteEntry("IPW", ps_model="full"))
        sc = Scenario("HOM", 60)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            a = run_study(sc, suite, R=6, seed=3)
            b = run_study(sc, suite, R=6, seed=3, threads=4)
        assert a == b

    def test_default_suite_labels(self):
        assert [e.label for e in DEFAULT_SUITE] == [
            "or-full", "or-reduced", "glmm-full", "glmm-reduced",
            "ipw-full", "ipw-reduced", "ipwdid-full", "ipwdid-reduced",
            "dr-full-full", "dr-full-reduced", "dr-reduced-full",
            "dr-reduced-reduced",
        ]

    def test_suite_entry_validation(self):
        with pytest.raises(InvalidArgumentError):
            SuiteEntry("IPW")                      # ps choice missing
        with pytest.raises(InvalidArgumentError):
            SuiteEntry("DID", outcome_model="full")
        with pytest.raises(InvalidArgumentError):
            SuiteEntry("GLMM", outcome_model="all")

    def test_augmentation_repairs_wrong_outcome_model(self):
        # The reduced outcome model alone is badly biased (this run: +19.0
        # on the x100 scale); augmenting it with dummies from a correct
        # treatment model pulls the bias back under 8 (this run: -3.1).
        suite = (
            SuiteEntry("GLMM", outcome_model="reduced"),
            SuiteEntry("DRGLMM", outcome_model="reduced", ps_model="full"),
        )
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = run_study(Scenario("HOM", 1000), suite, R=50, seed=12)
        wrong = res.cell("glmm-reduced", "ATE").bias100
        repaired = res.cell("dr-reduced-full", "ATE").bias100
        assert wrong > 10.0
        assert abs(repaired) < 8.0
        assert abs(repaired) < abs(wrong)

    def test_replicate_failures_warn_and_shrink_r_used(self):
        # At n=30 a resampled replicate occasionally separates; this seed
        # loses exactly one of fifty.
        suite = (SuiteEntry("IPW", ps_model="full"),)
        with pytest.warns(ReplicateFailureWarning):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ExtremeWeightsWarning)
                res = run_study(Scenario("HOM", 30), suite, R=50, seed=2)
        cell = res.cell("ipw-full", "ATE")
        assert cell.r_used == 49
        assert np.isfinite(cell.bias100)


class TestTables:
    @staticmethod
    def _small_result(seed=0):
        suite = (SuiteEntry("DID"), SuiteEntry("IPWDID", ps_model="full"))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return run_study(Scenario("HOM", 60), suite, R=4, seed=seed)

    def test_csv_round_trip_is_exact(self):
        res = self._small_result()
        back = parse_table(render_table(res, fmt="csv"))
        assert len(back) == 1
        assert back[0] == res

    def test_csv_round_trip_of_several_results(self):
        a, b = self._small_result(0), self._small_result(1)
        back = parse_table(render_table([a, b], fmt="csv"))
        assert back == [a, b]

    def test_text_table_shape(self):
        res = self._small_result()
        text = render_table(res, estimand="ATT")
        lines = text.strip().split("\n")
        assert lines[0].startswith("scenario HOM")
        assert "truth 15.000000" in lines[0]
        assert any(line.startswith("did") for line in lines)
        assert any(line.startswith("ipwdid-full") for line in lines)

    def test_text_table_requires_shared_suites(self):
        res = self._small_result()
        other = run_study(Scenario("HOM", 60), (SuiteEntry("DID"),), R=4, seed=0)
        with pytest.raises(InvalidArgumentError):
            render_table([res, other])

    def test_render_validation(self):
        with pytest.raises(InvalidArgumentError):
            render_table([])
        with pytest.raises(InvalidArgumentError):
            render_table(self._small_result(), fmt="json")

    def test_parse_rejects_foreign_text(self):
        with pytest.raises(InvalidArgumentError):
            parse_table("")
        with pytest.raises(InvalidArgumentError):
            parse_table("a,b,c\n1,2,3\n")
