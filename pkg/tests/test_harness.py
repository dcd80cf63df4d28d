"""Monte Carlo driver and benchmark loop tests.

The distributional claims here are statistical, so the assertions leave
Monte Carlo slack; seeds are fixed and every bound has at least six
standard deviations of room at the chosen trial counts.
"""

import math
import random

import pytest

from statsketch.estimators import compute_k
from statsketch.harness import (
    BenchmarkTask,
    Distribution,
    MetricsReport,
    SeedMetrics,
    TrialConfig,
    ValidationReport,
    accuracy_spec,
    benchmark_suite,
    evaluate_program,
    mc_validate_lower_bound,
    mc_validate_sketch,
    mc_validate_threshold,
    mc_validate_verifier,
    record_valuation,
    run_benchmark,
    shift_scenario,
    wilson_interval,
)
from statsketch.listdsl import (
    IMAGE,
    App,
    HoleAssignment,
    ImageRecord,
    Input,
    IntLit,
    ListT,
    Map,
    PredictorConfig,
    Prediction,
    Slice,
    TaskDataConfig,
    comp,
    make_task_data,
    permissive_fill,
    print_program,
)
from statsketch.sketch_ir import Valuation
from statsketch.sketcher import build_eps_samples
from statsketch.synthesizer import synthesize_partial_sketch
from statsketch.verifier import MonitorConfig, MonitorState, monitor_record


class TestDistribution:
    def test_uniform_cdf(self):
        d = Distribution.uniform(0.0, 1.0)
        assert d.cdf(0.25) == pytest.approx(0.25)
        assert d.cdf(-0.5) == 0.0
        assert d.cdf(1.5) == 1.0

    def test_uniform_cdf_shifted(self):
        d = Distribution.uniform(2.0, 6.0)
        assert d.cdf(3.0) == pytest.approx(0.25)

    def test_normal_cdf(self):
        d = Distribution.normal(0.0, 1.0)
        assert d.cdf(0.0) == pytest.approx(0.5)
        # Phi(1) from standard tables.
        assert d.cdf(1.0) == pytest.approx(0.8413447460685429, abs=1e-9)
        assert d.cdf(-1.0) == pytest.approx(1.0 - 0.8413447460685429, abs=1e-9)

    def test_exponential_cdf(self):
        d = Distribution.exponential(2.0)
        assert d.cdf(-1.0) == 0.0
        assert d.cdf(0.0) == 0.0
        assert d.cdf(0.5) == pytest.approx(1.0 - math.exp(-1.0))

    def test_bernoulli_cdf_steps(self):
        d = Distribution.bernoulli(0.3)
        assert d.cdf(-0.1) == 0.0
        assert d.cdf(0.0) == pytest.approx(0.7)
        assert d.cdf(0.999) == pytest.approx(0.7)
        assert d.cdf(1.0) == 1.0

    def test_cdf_infinite_sentinels(self):
        for d in (
            Distribution.uniform(),
            Distribution.normal(),
            Distribution.exponential(),
            Distribution.bernoulli(0.5),
        ):
            assert d.cdf(math.inf) == 1.0
            assert d.cdf(-math.inf) == 0.0

    def test_cdf_nan_rejected(self):
        with pytest.raises(ValueError):
            Distribution.uniform().cdf(math.nan)

    def test_samples_respect_support(self):
        rng = random.Random(0)
        u = Distribution.uniform(2.0, 3.0)
        assert all(2.0 <= u.sample(rng) <= 3.0 for _ in range(500))
        e = Distribution.exponential(1.0)
        assert all(e.sample(rng) >= 0.0 for _ in range(500))
        b = Distribution.bernoulli(0.4)
        assert set(b.sample(rng) for _ in range(200)) <= {0.0, 1.0}

    def test_samples_match_cdf(self):
        # Empirical mass below a point tracks the closed form.
        rng = random.Random(7)
        for d, x in (
            (Distribution.uniform(0.0, 1.0), 0.3),
            (Distribution.normal(1.0, 2.0), 0.0),
            (Distribution.exponential(0.5), 1.0),
        ):
            hits = sum(1 for _ in range(4000) if d.sample(rng) <= x)
            assert hits / 4000 == pytest.approx(d.cdf(x), abs=0.03)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            Distribution("triangular", (0.0, 1.0))
        with pytest.raises(ValueError):
            Distribution("uniform", (1.0,))
        with pytest.raises(ValueError):
            Distribution.uniform(1.0, 1.0)
        with pytest.raises(ValueError):
            Distribution.normal(0.0, 0.0)
        with pytest.raises(ValueError):
            Distribution.exponential(-1.0)
        with pytest.raises(ValueError):
            Distribution.bernoulli(1.5)
        with pytest.raises(ValueError):
            Distribution("normal", (0.0, math.inf))


class TestTrialConfig:
    def test_accepts_reasonable_settings(self):
        cfg = TrialConfig(Distribution.uniform(), 100, 200, 0.1, 0.05)
        assert cfg.seed == 0

    def test_rejects_thin_experiments(self):
        with pytest.raises(ValueError):
            TrialConfig(Distribution.uniform(), 100, 99, 0.1, 0.05)
        with pytest.raises(ValueError):
            TrialConfig(Distribution.uniform(), 0, 200, 0.1, 0.05)
        with pytest.raises(ValueError):
            TrialConfig(Distribution.uniform(), 100, 200, 0.0, 0.05)
        with pytest.raises(ValueError):
            TrialConfig(Distribution.uniform(), 100, 200, 0.1, 1.0)


class TestValidationReport:
    def test_slack_is_three_binomial_sigmas(self):
        r = ValidationReport("x", 0.04, 0.05, 2000, 0.9)
        assert r.slack == pytest.approx(3.0 * math.sqrt(0.05 * 0.95 / 2000))
        assert r.bound == pytest.approx(0.05 + r.slack)

    def test_passed_boundary(self):
        r = ValidationReport("x", 0.05, 0.05, 2000, 0.9)
        assert r.passed
        tight = ValidationReport("x", 0.2, 0.05, 2000, 0.9)
        assert not tight.passed


class TestThresholdValidation:
    def test_uniform_failure_rate_near_delta(self):
        cfg = TrialConfig(Distribution.uniform(), 500, 2000, 0.1, 0.05, seed=11)
        r = mc_validate_threshold(cfg)
        assert r.name == "threshold-coverage"
        assert r.fraction <= r.bound
        assert r.mean_statistic >= 1.0 - cfg.epsilon

    def test_normal_and_exponential(self):
        for dist in (Distribution.normal(0.0, 1.0), Distribution.exponential(1.0)):
            cfg = TrialConfig(dist, 500, 800, 0.1, 0.05, seed=12)
            r = mc_validate_threshold(cfg)
            assert r.fraction <= r.bound

    def test_coverage_tracks_order_statistic_law(self):
        # For U(0,1) the fitted threshold sits halfway between the
        # (n-k)-th and (n-k+1)-th ascending order statistics, whose
        # means are (n-k)/(n+1) and (n-k+1)/(n+1).
        n, eps, delta = 40, 0.5, 0.25
        k = compute_k(n, eps, delta)
        assert k is not None
        expected = (2 * (n - k) + 1) / (2 * (n + 1))
        cfg = TrialConfig(Distribution.uniform(), n, 2000, eps, delta, seed=13)
        r = mc_validate_threshold(cfg)
        assert r.mean_statistic == pytest.approx(expected, abs=0.01)

    def test_needs_continuous_family(self):
        cfg = TrialConfig(Distribution.bernoulli(0.5), 100, 200, 0.1, 0.05)
        with pytest.raises(ValueError):
            mc_validate_threshold(cfg)

    def test_deterministic_given_seed(self):
        cfg = TrialConfig(Distribution.normal(), 50, 200, 0.2, 0.1, seed=3)
        assert mc_validate_threshold(cfg) == mc_validate_threshold(cfg)


class TestLowerBoundValidation:
    def test_violation_rate_near_delta(self):
        for mu in (0.5, 0.9, 0.99):
            cfg = TrialConfig(
                Distribution.bernoulli(mu), 400, 1000, 0.1, 0.05, seed=21
            )
            r = mc_validate_lower_bound(cfg)
            assert r.name == "mean-lower-bound"
            assert r.fraction <= r.bound

    def test_constant_stream_never_violates(self):
        cfg = TrialConfig(Distribution.bernoulli(1.0), 400, 200, 0.1, 0.05)
        r = mc_validate_lower_bound(cfg)
        assert r.fraction == 0.0

    def test_mean_bound_matches_hoeffding_gap(self):
        n, delta, mu = 400, 0.05, 0.9
        cfg = TrialConfig(Distribution.bernoulli(mu), n, 1000, 0.1, delta, seed=22)
        r = mc_validate_lower_bound(cfg)
        expected = mu - math.sqrt(math.log(1.0 / delta) / (2.0 * n))
        assert r.mean_statistic == pytest.approx(expected, abs=0.005)

    def test_needs_bernoulli(self):
        cfg = TrialConfig(Distribution.uniform(), 100, 200, 0.1, 0.05)
        with pytest.raises(ValueError):
            mc_validate_lower_bound(cfg)


class TestVerifierValidation:
    def test_false_accept_rate_below_delta(self):
        eps = 0.1
        cfg = TrialConfig(
            Distribution.bernoulli(1.0 - 2.0 * eps), 400, 1000, eps, 0.05, seed=31
        )
        r = mc_validate_verifier(cfg)
        assert r.name == "indicator-acceptance"
        assert r.fraction <= r.bound
        assert r.mean_statistic == pytest.approx(0.8, abs=0.01)

    def test_boundary_mean_still_valid(self):
        # Exactly at 1 - eps the violation count is Binomial(n, eps),
        # so acceptance is the same tail the mistake budget caps.
        eps = 0.1
        cfg = TrialConfig(
            Distribution.bernoulli(1.0 - eps), 400, 1000, eps, 0.05, seed=32
        )
        r = mc_validate_verifier(cfg)
        assert r.fraction <= r.bound

    def test_power_near_one_above_target(self):
        eps = 0.1
        cfg = TrialConfig(
            Distribution.bernoulli(1.0 - eps / 2.0), 400, 1000, eps, 0.05, seed=33
        )
        r = mc_validate_verifier(cfg)
        assert r.fraction >= 0.9


class TestSketchValidation:
    def test_joint_soundness(self):
        cfg = TrialConfig(Distribution.uniform(), 500, 500, 0.1, 0.05, seed=41)
        r = mc_validate_sketch(cfg)
        assert r.name == "sketch-soundness"
        assert r.fraction <= r.bound
        assert r.mean_statistic >= 1.0 - cfg.epsilon

    def test_per_spec_budgets(self):
        cfg = TrialConfig(Distribution.uniform(), 300, 200, 0.1, 0.05, seed=42)
        r = mc_validate_sketch(cfg, spec_eps=(0.05, 0.1, 0.2))
        assert r.fraction <= r.bound

    def test_eps_count_must_match(self):
        cfg = TrialConfig(Distribution.uniform(), 300, 200, 0.1, 0.05)
        with pytest.raises(ValueError):
            mc_validate_sketch(cfg, spec_eps=(0.05, 0.1))

    def test_rejects_bernoulli_scores(self):
        cfg = TrialConfig(Distribution.uniform(), 300, 200, 0.1, 0.05)
        with pytest.raises(ValueError):
            mc_validate_sketch(cfg, dists=(Distribution.bernoulli(0.5),))

    def test_deterministic_given_seed(self):
        cfg = TrialConfig(Distribution.uniform(), 200, 100, 0.1, 0.05, seed=43)
        assert mc_validate_sketch(cfg) == mc_validate_sketch(cfg)


class TestWilsonInterval:
    def test_textbook_values(self):
        lo, hi = wilson_interval(5, 100)
        assert lo == pytest.approx(0.0215, abs=5e-4)
        assert hi == pytest.approx(0.1118, abs=5e-4)
        lo0, hi0 = wilson_interval(0, 10)
        assert lo0 == 0.0
        assert hi0 == pytest.approx(0.2775, abs=5e-4)

    def test_symmetric_at_half(self):
        lo, hi = wilson_interval(50, 100)
        assert lo + hi == pytest.approx(1.0)

    def test_contains_point_estimate(self):
        for count, total in ((0, 7), (3, 9), (9, 9), (17, 400)):
            lo, hi = wilson_interval(count, total)
            assert 0.0 <= lo <= count / total <= hi <= 1.0

    def test_empty_is_vacuous(self):
        assert wilson_interval(0, 0) == (0.0, 1.0)


class TestMetricsReport:
    def test_rates(self):
        r = MetricsReport(total=200, bots=30, failures=6)
        assert r.bot_rate == pytest.approx(0.15)
        assert r.failure_rate == pytest.approx(0.03)
        lo, hi = r.failure_interval
        assert lo <= 0.03 <= hi

    def test_disjoint_counts_enforced(self):
        with pytest.raises(ValueError):
            MetricsReport(total=10, bots=6, failures=5)
        with pytest.raises(ValueError):
            MetricsReport(total=10, bots=-1, failures=0)
        with pytest.raises(ValueError):
            SeedMetrics(seed=0, total=3, bots=2, failures=2)

    def test_per_seed_rows_must_sum(self):
        rows = (SeedMetrics(0, 50, 5, 1), SeedMetrics(1, 50, 7, 0))
        r = MetricsReport(total=100, bots=12, failures=1, per_seed=rows)
        assert r.worst_failure_rate == pytest.approx(1 / 50)
        with pytest.raises(ValueError):
            MetricsReport(total=100, bots=12, failures=2, per_seed=rows)

    def test_worst_rate_falls_back_to_pooled(self):
        r = MetricsReport(total=100, bots=0, failures=4)
        assert r.worst_failure_rate == pytest.approx(0.04)

    def test_empty_report(self):
        r = MetricsReport(total=0, bots=0, failures=0)
        assert r.bot_rate == 0.0
        assert r.failure_rate == 0.0
        assert r.failure_interval == (0.0, 1.0)


def _scalar_predict_program():
    """predict_float applied to a lone image input."""
    return App(comp("predict_float"), Input(0)), (IMAGE,)


class TestEvaluateProgram:
    def test_perfect_predictor_never_fails(self):
        p, sig = _scalar_predict_program()
        cfg = TaskDataConfig(
            scalars=1,
            lists=0,
            predictor=PredictorConfig(accuracy=1.0, noise=0.0),
        )
        data = make_task_data(cfg, 60, seed=1)
        r = evaluate_program(p, sig, permissive_fill(p), data, 0.0)
        assert (r.total, r.bots, r.failures) == (60, 0, 0)

    def test_all_abstain(self):
        p, sig = _scalar_predict_program()
        cfg = TaskDataConfig(scalars=1, lists=0)
        data = make_task_data(cfg, 40, seed=2)
        fill = HoleAssignment(thresholds={"f1": math.inf})
        r = evaluate_program(p, sig, fill, data, 1.0)
        assert (r.bots, r.failures) == (40, 0)

    def test_failures_match_hand_count(self):
        # Committed everywhere; a record fails exactly when the
        # prediction strays farther than the tolerance from the truth.
        p, sig = _scalar_predict_program()
        cfg = TaskDataConfig(
            scalars=1,
            lists=0,
            predictor=PredictorConfig(accuracy=0.7),
        )
        data = make_task_data(cfg, 300, seed=3)
        tol = 1.0
        expected = sum(
            1
            for (img,) in data
            if abs(img.record.pred.value - img.record.truth_float) > tol
        )
        r = evaluate_program(p, sig, permissive_fill(p), data, tol)
        assert r.failures == expected
        assert expected > 0

    def test_length_mismatch_is_infinitely_wrong(self):
        # Slice bound comes from a digit prediction, so a wrong digit
        # changes the output length; huge tolerance, only mismatches fail.
        p = Slice(
            Map(comp("predict_float"), Input(1)),
            IntLit(0),
            App(comp("predict_int"), Input(0)),
        )
        sig = (IMAGE, ListT(IMAGE))
        cfg = TaskDataConfig(
            scalars=1,
            lists=1,
            list_lengths=(3,),
            predictor=PredictorConfig(accuracy=0.6),
        )
        data = make_task_data(cfg, 200, seed=4)
        expected = 0
        for scalar, lst in data:
            rec = scalar.record
            guessed = min(max(int(round(rec.pred.value)), 0), len(lst))
            actual = min(max(rec.truth_int, 0), len(lst))
            if guessed != actual:
                expected += 1
        r = evaluate_program(p, sig, permissive_fill(p), data, 1e9)
        assert r.failures == expected
        assert expected > 0

    def test_seed_tagging(self):
        p, sig = _scalar_predict_program()
        cfg = TaskDataConfig(scalars=1, lists=0)
        data = make_task_data(cfg, 25, seed=5)
        r = evaluate_program(p, sig, permissive_fill(p), data, 6.0, seed=9)
        assert len(r.per_seed) == 1
        row = r.per_seed[0]
        assert (row.seed, row.total) == (9, 25)
        assert (row.bots, row.failures) == (r.bots, r.failures)

    def test_input_validation(self):
        p, sig = _scalar_predict_program()
        with pytest.raises(ValueError):
            evaluate_program(p, sig, permissive_fill(p), [], 1.0)
        cfg = TaskDataConfig(scalars=1, lists=0)
        data = make_task_data(cfg, 5, seed=6)
        with pytest.raises(ValueError):
            evaluate_program(p, sig, permissive_fill(p), data, -1.0)


class TestShiftScenario:
    def test_paired_lengths_and_types(self):
        before, after = shift_scenario(
            PredictorConfig(accuracy=0.99), PredictorConfig(accuracy=0.8), 50, 1
        )
        assert len(before) == len(after) == 50
        assert all(isinstance(r, ImageRecord) for r in before + after)

    def test_base_half_ignores_the_shift(self):
        base = PredictorConfig(accuracy=0.99)
        b1, _ = shift_scenario(base, PredictorConfig(accuracy=0.8), 80, 7)
        b2, _ = shift_scenario(base, PredictorConfig(accuracy=0.5), 80, 7)
        assert b1 == b2

    def test_halves_draw_from_distinct_streams(self):
        cfg = PredictorConfig(accuracy=0.99)
        before, after = shift_scenario(cfg, cfg, 80, 7)
        assert before != after

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            shift_scenario(PredictorConfig(), PredictorConfig(), 0, 1)


def _record(value: float, conf: float, truth: int) -> ImageRecord:
    return ImageRecord(
        id=0,
        truth_int=truth,
        truth_float=float(truth),
        truth_flipped=False,
        pred=Prediction(value=value, conf=conf),
        flip_pred=False,
        flip_conf=1.0,
    )


class TestMonitorGlue:
    def test_record_valuation_bits(self):
        v = record_valuation(_record(3.4, 0.9, 3))
        assert v.inputs == {"conf": 0.9}
        assert v.ground_truth == {"wrong": False}
        assert record_valuation(_record(4.6, 0.2, 3)).ground_truth["wrong"]

    def test_record_valuation_needs_truth(self):
        rec = ImageRecord(
            id=0,
            truth_int=None,
            truth_float=2.0,
            truth_flipped=False,
            pred=Prediction(value=2.0, conf=0.5),
            flip_pred=False,
            flip_conf=1.0,
        )
        with pytest.raises(ValueError):
            record_valuation(rec)

    def test_accuracy_spec_bit_is_correctness(self):
        spec = accuracy_spec(0.05)
        right = record_valuation(_record(3.1, 0.9, 3))
        woops = record_valuation(_record(7.0, 0.9, 3))
        assert build_eps_samples(spec, [right, woops]) == [1, 0]

    def test_drift_flips_the_verdict(self):
        before, after = shift_scenario(
            PredictorConfig(accuracy=0.99), PredictorConfig(accuracy=0.8), 600, 5
        )
        spec = accuracy_spec(0.05)
        cfg = MonitorConfig(refresh_every=100, min_window=500, max_age=500, delta=0.05)
        state = MonitorState.fresh(cfg)
        verdicts = []
        for rec in before + after:
            state, v = monitor_record(state, cfg, record_valuation(rec), spec, None)
            if v is not None:
                verdicts.append(v)
        assert verdicts[0].accepted
        assert not verdicts[-1].accepted
        # The acceptance threshold for a 500-record window.
        assert compute_k(500, 0.05, 0.05) == 16


class TestBenchmarkSuite:
    def test_shape(self):
        suite = benchmark_suite()
        assert [b.task.name for b in suite] == [
            "sum",
            "max",
            "conditional-sum",
            "prefix-max",
            "conditional-count",
        ]
        for b in suite:
            assert b.task.epsilon == 0.05
            assert b.task.delta == 0.05
            assert b.task.tolerance == 6.0
            assert b.task.length_cap == 3
            assert b.data.lists == 1
            assert b.data.scalars == len(b.task.input_types) - 1

    def test_examples_pin_the_intended_pipelines(self):
        expected = {
            "sum": "(fold + (map predict_float input1) 0)",
            "max": "(fold max (map predict_float input1) 0)",
            "conditional-sum": (
                "(fold + (filter (cond-≤ (predict_int input1)) "
                "(map predict_float input2)) 0)"
            ),
            "prefix-max": (
                "(fold max (slice (map predict_float input2) 0 "
                "(predict_int input1)) 0)"
            ),
            "conditional-count": (
                "(length (filter (cond-≤ (predict_int input1)) "
                "(map predict_float input2)))"
            ),
        }
        for bench in benchmark_suite():
            p = synthesize_partial_sketch(bench.task)
            assert print_program(p) == expected[bench.task.name]

    def test_run_benchmark_pools_seeds(self):
        bench = benchmark_suite()[0]  # sum: cheapest signature
        r = run_benchmark(bench, seeds=(0, 1), train_n=600, eval_n=300)
        assert r.total == 600
        assert [row.seed for row in r.per_seed] == [0, 1]
        assert r.failures == sum(row.failures for row in r.per_seed)
        assert r.bots == sum(row.bots for row in r.per_seed)

    def test_run_benchmark_deterministic(self):
        bench = benchmark_suite()[1]
        a = run_benchmark(bench, seeds=(3,), train_n=400, eval_n=200)
        b = run_benchmark(bench, seeds=(3,), train_n=400, eval_n=200)
        assert a == b

    def test_run_benchmark_needs_seeds(self):
        with pytest.raises(ValueError):
            run_benchmark(benchmark_suite()[0], seeds=())
