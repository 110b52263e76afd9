"""Random-network selection experiments: samplers, config, aggregation."""

import numpy as np
import pytest

from emprank import (
    ParamModule,
    Perturbation,
    ScenarioConfig,
    is_stable,
    pattern_label,
    ratio_stats,
    realize,
    run_scenario,
)
from emprank import montecarlo
from emprank.montecarlo import (
    FIR_BUTTERWORTH,
    sample_fir_butterworth,
    sample_first_order,
    sample_second_order,
)


class FixedCutoff:
    """Minimal rng stand-in handing the Butterworth sampler one cutoff."""

    def __init__(self, value):
        self.value = value

    def uniform(self, lo, hi):
        assert lo == 0.1 and hi == 0.4
        return self.value


class TestButterworthSampler:
    def test_frozen_taps_at_quarter_cutoff(self):
        m = sample_fir_butterworth(FixedCutoff(0.25))
        assert m.family == "fir"
        assert len(m.theta) == 11
        np.testing.assert_allclose(
            m.theta[:4],
            [0.2928932188134524, 0.5857864376269049, 0.2426406871192852, -0.1005050633883346],
            rtol=1e-10,
        )

    def test_truncation_keeps_last_significant_tap(self):
        m = sample_fir_butterworth(FixedCutoff(0.25))
        assert abs(m.theta[-1]) >= 1e-4

    def test_random_draws_stable_with_leading_weight(self, rng):
        for _ in range(50):
            m = sample_fir_butterworth(rng)
            assert is_stable(realize(m))
            assert len(m.theta) >= 3
            assert abs(m.theta[0]) > 1e-2


class TestParametricSamplers:
    def test_first_order_ranges_and_mean(self, rng):
        a = np.empty(20000)
        b = np.empty(20000)
        for i in range(a.size):
            a[i], b[i] = sample_first_order(rng).theta
        assert a.min() >= 0.1 and a.max() <= 0.9
        assert b.min() >= 0.5 and b.max() <= 2.0
        assert np.mean(a) == pytest.approx(0.5, abs=0.01)

    def test_second_order_draws(self, rng):
        for _ in range(400):
            m = sample_second_order(rng)
            t = m.theta
            assert t[0] == 1.0
            assert -3.0 <= -t[1] <= 3.0
            assert 0.0 <= t[3] < 1.0
            assert -2.0 < t[2] <= 0.0
            assert is_stable(realize(m))


class TestScenarioConfig:
    def good(self, **kw):
        base = dict(n=4, family="first_order", runs=10)
        base.update(kw)
        return ScenarioConfig(**base)

    def test_validation(self):
        with pytest.raises(ValueError, match="3 nodes"):
            self.good(n=2)
        with pytest.raises(ValueError, match="family"):
            self.good(family="arma")
        with pytest.raises(ValueError, match="runs"):
            self.good(runs=0)
        with pytest.raises(ValueError, match="variance_mode"):
            self.good(variance_mode="mixed")
        with pytest.raises(ValueError, match="criterion"):
            self.good(criterion="a")
        with pytest.raises(ValueError, match="module"):
            self.good(perturbation=Perturbation(module=4))

    def test_round_trip(self):
        cfg = self.good(
            identical=True,
            variance_mode="random",
            master_seed=7,
            perturbation=Perturbation(module=2, param=1, factor=10.0),
        )
        assert ScenarioConfig.from_dict(cfg.to_dict()) == cfg

    def test_round_trip_without_perturbation(self):
        cfg = self.good()
        d = cfg.to_dict()
        assert "perturbation" not in d
        assert ScenarioConfig.from_dict(d) == cfg

    def test_unknown_field_rejected(self):
        d = self.good().to_dict()
        d["scale"] = 2
        with pytest.raises(ValueError, match="unknown"):
            ScenarioConfig.from_dict(d)


class TestModuleDraws:
    def test_identical_flag_repeats_one_draw(self):
        cfg = ScenarioConfig(n=5, family="first_order", runs=1, identical=True)
        mods = montecarlo._draw_modules(cfg, np.random.default_rng(3))
        assert len(set(mods)) == 1

    def test_perturbation_scales_target(self):
        cfg = ScenarioConfig(
            n=4,
            family="first_order",
            runs=1,
            identical=True,
            perturbation=Perturbation(module=2, param=1, factor=10.0),
        )
        mods = montecarlo._draw_modules(cfg, np.random.default_rng(3))
        assert mods[0] == mods[2]
        assert mods[1].theta[0] == mods[0].theta[0]
        assert mods[1].theta[1] == pytest.approx(10.0 * mods[0].theta[1])

    def test_perturbation_param_out_of_range(self):
        cfg = ScenarioConfig(
            n=3,
            family="first_order",
            runs=2,
            perturbation=Perturbation(module=1, param=5),
        )
        with pytest.raises(ValueError, match="parameter"):
            run_scenario(cfg)


class TestRunScenario:
    def test_identical_equal_picks_balanced_always(self):
        cfg = ScenarioConfig(
            n=4, family="first_order", runs=40, identical=True, master_seed=11
        )
        report = run_scenario(cfg)
        assert report.best_index == 1
        assert pattern_label(report.patterns[1]) == "B=1,2;C=3,4"
        assert report.counts[1] == 40
        assert report.percentages.sum() == pytest.approx(100.0)
        assert report.n_rejected_runs == 0

    def test_ratio_ordering(self):
        cfg = ScenarioConfig(
            n=4, family="first_order", runs=30, variance_mode="random", master_seed=5
        )
        report = run_scenario(cfg)
        assert np.all(report.runner_up_ratios >= 1.0 - 1e-12)
        assert np.all(report.worst_ratios >= report.runner_up_ratios - 1e-12)
        stats = ratio_stats(report)
        assert stats.median_worst >= stats.median_runner_up >= 1.0

    def test_deterministic_and_worker_invariant(self):
        cfg = ScenarioConfig(
            n=4, family="first_order", runs=24, variance_mode="random", master_seed=9
        )
        a = run_scenario(cfg)
        b = run_scenario(cfg)
        c = run_scenario(cfg, workers=2)
        np.testing.assert_array_equal(a.counts, b.counts)
        np.testing.assert_array_equal(a.counts, c.counts)
        np.testing.assert_array_equal(a.runner_up_ratios, c.runner_up_ratios)

    def test_master_seed_changes_draws(self):
        mk = lambda seed: ScenarioConfig(
            n=4, family="first_order", runs=20, variance_mode="random", master_seed=seed
        )
        r1 = run_scenario(mk(1))
        r2 = run_scenario(mk(2))
        assert not np.array_equal(r1.runner_up_ratios, r2.runner_up_ratios)

    def test_rejected_runs_accounted(self, monkeypatch):
        monkeypatch.setitem(
            montecarlo._SAMPLERS,
            "first_order",
            lambda rng: ParamModule("first_order", (1.5, 1.0)),
        )
        cfg = ScenarioConfig(n=3, family="first_order", runs=6, master_seed=0)
        report = run_scenario(cfg)
        assert report.n_rejected_runs == 6
        assert report.n_informative_runs == 0
        assert report.counts.sum() == 0
        assert ratio_stats(report) == ratio_stats(report)
        assert ratio_stats(report).median_runner_up is None

    def test_report_dict(self):
        cfg = ScenarioConfig(n=3, family="first_order", runs=8, master_seed=2)
        d = run_scenario(cfg).to_dict()
        assert d["patterns"] == ["B=1;C=2,3", "B=1,2;C=3"]
        assert sum(d["counts"]) == d["n_informative_runs"] == 8
        assert sum(d["percentages"]) == pytest.approx(100.0)
        assert d["config"]["family"] == "first_order"
        assert d["median_worst_ratio"] >= d["median_runner_up_ratio"]


class TestButterworthScenario:
    def test_small_identical_equal_run(self):
        cfg = ScenarioConfig(
            n=4, family=FIR_BUTTERWORTH, runs=10, identical=True, master_seed=4
        )
        report = run_scenario(cfg)
        assert report.counts[1] == 10
