"""Monte Carlo validation drivers and the benchmark loop.

The estimators advertise failure probabilities.  This module measures
them: each mc_validate_* operation redraws calibration data many times
from a distribution whose CDF is available in closed form, so the true
coverage of a fitted threshold is computed exactly rather than estimated
from a second sample.  Observed failure fractions are compared against
the nominal rate plus three binomial standard deviations, which keeps
the checks stable across seeds while still catching real miscalibration.

The second half of the module runs calibrated list programs against
fresh draws from the synthetic predictor (evaluate_program,
benchmark_suite, run_benchmark) and supplies the glue for monitoring a
prediction stream for accuracy drift (shift_scenario, record_valuation,
accuracy_spec).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Any, Optional, Sequence

from .estimators import (
    EstimatorConfig,
    lower_bound_estimate,
    threshold_estimate,
    verify_indicator,
)
from .listdsl import (
    FLOAT,
    IMAGE,
    INT,
    HoleAssignment,
    ImageRecord,
    ImageVal,
    LengthMismatch,
    ListT,
    PredictorConfig,
    Program,
    TaskDataConfig,
    DslType,
    dsl_output_error,
    example_image,
    is_bot,
    make_evaluator,
    make_task_data,
    synth_predictor,
)
from .sketch_ir import (
    MODE_COND,
    MODE_IMPL,
    Apply,
    Constant,
    GroundTruthVar,
    Hole,
    InputVar,
    SpecExpr,
    Valuation,
)
from .sketcher import SketchJob, sketch
from .synthesizer import TaskSpec, synthesize, synthesize_partial_sketch

__all__ = [
    "BenchmarkTask",
    "Distribution",
    "EVAL_SEED_OFFSET",
    "MetricsReport",
    "SHIFT_SEED_OFFSET",
    "SeedMetrics",
    "TrialConfig",
    "ValidationReport",
    "accuracy_spec",
    "benchmark_suite",
    "evaluate_program",
    "mc_validate_lower_bound",
    "mc_validate_sketch",
    "mc_validate_threshold",
    "mc_validate_verifier",
    "record_valuation",
    "run_benchmark",
    "shift_scenario",
    "wilson_interval",
]


# ---------------------------------------------------------------------------
# Score distributions

_CONTINUOUS = ("uniform", "normal", "exponential")
_FAMILIES = _CONTINUOUS + ("bernoulli",)
_ARITY = {"uniform": 2, "normal": 2, "exponential": 1, "bernoulli": 1}


@dataclass(frozen=True)
class Distribution:
    """A sampling family with a closed-form CDF.

    uniform(a, b), normal(mu, sigma), exponential(rate) and
    bernoulli(mu).  The closed form is what turns a Monte Carlo trial
    into an exact check: the true mass at or below a fitted threshold is
    evaluated, never re-estimated from a second sample.
    """

    family: str
    params: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        object.__setattr__(
            self, "params", tuple(float(v) for v in self.params)
        )
        if len(self.params) != _ARITY[self.family]:
            raise ValueError(
                f"{self.family} takes {_ARITY[self.family]} parameter(s), "
                f"got {len(self.params)}"
            )
        if any(not math.isfinite(v) for v in self.params):
            raise ValueError("distribution parameters must be finite")
        if self.family == "uniform" and self.params[0] >= self.params[1]:
            raise ValueError("uniform needs a < b")
        if self.family == "normal" and self.params[1] <= 0.0:
            raise ValueError("normal needs sigma > 0")
        if self.family == "exponential" and self.params[0] <= 0.0:
            raise ValueError("exponential needs rate > 0")
        if self.family == "bernoulli" and not 0.0 <= self.params[0] <= 1.0:
            raise ValueError("bernoulli needs mu in [0, 1]")

    @classmethod
    def uniform(cls, a: float = 0.0, b: float = 1.0) -> "Distribution":
        return cls("uniform", (a, b))

    @classmethod
    def normal(cls, mu: float = 0.0, sigma: float = 1.0) -> "Distribution":
        return cls("normal", (mu, sigma))

    @classmethod
    def exponential(cls, rate: float = 1.0) -> "Distribution":
        return cls("exponential", (rate,))

    @classmethod
    def bernoulli(cls, mu: float) -> "Distribution":
        return cls("bernoulli", (mu,))

    def sample(self, rng: random.Random) -> float:
        f = self.family
        if f == "uniform":
            a, b = self.params
            return rng.uniform(a, b)
        if f == "normal":
            mu, sigma = self.params
            return rng.gauss(mu, sigma)
        if f == "exponential":
            return rng.expovariate(self.params[0])
        return 1.0 if rng.random() < self.params[0] else 0.0

    def cdf(self, x: float) -> float:
        """P(Z <= x).  Accepts the infinite sentinels thresholds use."""
        if math.isnan(x):
            raise ValueError("cdf of NaN is undefined")
        if x == math.inf:
            return 1.0
        if x == -math.inf:
            return 0.0
        f = self.family
        if f == "uniform":
            a, b = self.params
            if x <= a:
                return 0.0
            if x >= b:
                return 1.0
            return (x - a) / (b - a)
        if f == "normal":
            mu, sigma = self.params
            return 0.5 * (1.0 + math.erf((x - mu) / (sigma * math.sqrt(2.0))))
        if f == "exponential":
            if x < 0.0:
                return 0.0
            return 1.0 - math.exp(-self.params[0] * x)
        mu = self.params[0]
        if x < 0.0:
            return 0.0
        return 1.0 - mu if x < 1.0 else 1.0


# ---------------------------------------------------------------------------
# Trial plumbing


@dataclass(frozen=True)
class TrialConfig:
    """One Monte Carlo experiment: `trials` independent calibration sets
    of size n, with the guarantee parameters held fixed throughout."""

    dist: Distribution
    n: int
    trials: int
    epsilon: float
    delta: float
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if self.trials < 100:
            raise ValueError(
                "fewer than 100 trials makes the slack meaningless, "
                f"got {self.trials}"
            )
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")


@dataclass(frozen=True)
class ValidationReport:
    """Observed failure fraction next to the advertised rate.

    slack is three binomial standard deviations of the nominal rate over
    this many trials, so `passed` tolerates ordinary Monte Carlo noise
    and flags little else.  mean_statistic carries the per-operation
    average (coverage, lower bound, or sample mean) for display.
    """

    name: str
    fraction: float
    nominal: float
    trials: int
    mean_statistic: float

    @property
    def slack(self) -> float:
        return 3.0 * math.sqrt(self.nominal * (1.0 - self.nominal) / self.trials)

    @property
    def bound(self) -> float:
        return self.nominal + self.slack

    @property
    def passed(self) -> bool:
        return self.fraction <= self.bound


def _trial_seeds(cfg: TrialConfig) -> list[int]:
    """Independent per-trial streams split off the experiment seed."""
    root = random.Random(cfg.seed)
    return [root.getrandbits(64) for _ in range(cfg.trials)]


def _bernoulli_mean(cfg: TrialConfig) -> float:
    if cfg.dist.family != "bernoulli":
        raise ValueError("this validation draws indicator bits; "
                         "use a bernoulli distribution")
    return cfg.dist.params[0]


# ---------------------------------------------------------------------------
# Estimator validations


def mc_validate_threshold(cfg: TrialConfig) -> ValidationReport:
    """How often a fitted threshold misses its coverage target.

    Each trial draws a fresh calibration set, fits a threshold at
    (epsilon, delta), and reads the true mass at or below it straight
    off the CDF.  The trial fails when that mass lands under
    1 - epsilon; the failure fraction should stay near delta.
    """
    if cfg.dist.family not in _CONTINUOUS:
        raise ValueError("threshold validation needs a continuous family")
    est = EstimatorConfig(epsilon=cfg.epsilon, delta=cfg.delta)
    failures = 0
    coverage_sum = 0.0
    for s in _trial_seeds(cfg):
        rng = random.Random(s)
        scores = [cfg.dist.sample(rng) for _ in range(cfg.n)]
        coverage = cfg.dist.cdf(threshold_estimate(scores, est))
        coverage_sum += coverage
        if coverage < 1.0 - cfg.epsilon:
            failures += 1
    return ValidationReport(
        name="threshold-coverage",
        fraction=failures / cfg.trials,
        nominal=cfg.delta,
        trials=cfg.trials,
        mean_statistic=coverage_sum / cfg.trials,
    )


def mc_validate_lower_bound(cfg: TrialConfig) -> ValidationReport:
    """How often the one-sided mean bound overshoots the true mean."""
    mu = _bernoulli_mean(cfg)
    failures = 0
    nu_sum = 0.0
    for s in _trial_seeds(cfg):
        rng = random.Random(s)
        bits = [cfg.dist.sample(rng) for _ in range(cfg.n)]
        nu = lower_bound_estimate(bits, cfg.delta)
        nu_sum += nu
        if nu > mu:
            failures += 1
    return ValidationReport(
        name="mean-lower-bound",
        fraction=failures / cfg.trials,
        nominal=cfg.delta,
        trials=cfg.trials,
        mean_statistic=nu_sum / cfg.trials,
    )


def mc_validate_verifier(cfg: TrialConfig) -> ValidationReport:
    """Acceptance rate of the indicator check at the configured mean.

    Read the fraction two ways.  With mean at most 1 - 2*epsilon every
    acceptance is a false accept, so it should stay near delta.  With
    mean well above 1 - epsilon the fraction is statistical power and
    should approach one.  mean_statistic averages the sample means.
    """
    mu = _bernoulli_mean(cfg)
    accepts = 0
    ones = 0
    for s in _trial_seeds(cfg):
        rng = random.Random(s)
        bits = [cfg.dist.sample(rng) for _ in range(cfg.n)]
        ones += sum(1 for b in bits if b > 0.0)
        if verify_indicator(bits, cfg.epsilon, cfg.delta):
            accepts += 1
    return ValidationReport(
        name="indicator-acceptance",
        fraction=accepts / cfg.trials,
        nominal=cfg.delta,
        trials=cfg.trials,
        mean_statistic=ones / (cfg.trials * cfg.n),
    )


_SKETCH_DISTS = (
    Distribution.uniform(0.0, 1.0),
    Distribution.normal(0.0, 1.0),
    Distribution.exponential(1.0),
)


def mc_validate_sketch(
    cfg: TrialConfig,
    dists: Optional[Sequence[Distribution]] = None,
    spec_eps: Optional[Sequence[float]] = None,
) -> ValidationReport:
    """Soundness of a whole multi-threshold calibration pass.

    Builds a conjunction of scored checks with open thresholds, one per
    score distribution, and calibrates them together on a shared
    dataset, splitting delta across the holes.  A trial fails when any
    fitted threshold's true coverage misses 1 - eps for its own check,
    which is exactly the event the union-bound split is meant to keep
    below delta.  mean_statistic averages the worst per-trial coverage.
    """
    ds = tuple(dists) if dists is not None else _SKETCH_DISTS
    if not ds:
        raise ValueError("need at least one score distribution")
    for d in ds:
        if d.family not in _CONTINUOUS:
            raise ValueError("sketch validation needs continuous families")
    eps = (
        tuple(float(e) for e in spec_eps)
        if spec_eps is not None
        else (cfg.epsilon,) * len(ds)
    )
    if len(eps) != len(ds):
        raise ValueError("one eps per distribution")
    program = Apply(
        "all",
        tuple(
            SpecExpr(
                score=InputVar(f"z{i}"),
                threshold=Hole(f"t{i}"),
                spec=Constant(True),
                eps=e,
                mode=MODE_COND,
            )
            for i, e in enumerate(eps)
        ),
    )
    failures = 0
    worst_sum = 0.0
    for s in _trial_seeds(cfg):
        rng = random.Random(s)
        data = [
            Valuation(inputs={f"z{i}": d.sample(rng) for i, d in enumerate(ds)})
            for _ in range(cfg.n)
        ]
        result = sketch(SketchJob(program=program, data=data, delta=cfg.delta))
        by_hole = {f.hole_id: f.value for f in result.fills}
        coverages = [d.cdf(by_hole[f"t{i}"]) for i, d in enumerate(ds)]
        worst_sum += min(coverages)
        if any(c < 1.0 - e for c, e in zip(coverages, eps)):
            failures += 1
    return ValidationReport(
        name="sketch-soundness",
        fraction=failures / cfg.trials,
        nominal=cfg.delta,
        trials=cfg.trials,
        mean_statistic=worst_sum / cfg.trials,
    )


# ---------------------------------------------------------------------------
# Held-out metrics


def wilson_interval(count: int, total: int, z: float = 1.96) -> tuple[float, float]:
    """Score interval for a binomial proportion; (0, 1) when empty."""
    if total <= 0:
        return (0.0, 1.0)
    p = count / total
    zz = z * z
    denom = 1.0 + zz / total
    center = (p + zz / (2.0 * total)) / denom
    half = z * math.sqrt(p * (1.0 - p) / total + zz / (4.0 * total * total))
    half /= denom
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass(frozen=True)
class SeedMetrics:
    """Counts for a single seed's held-out run."""

    seed: int
    total: int
    bots: int
    failures: int

    def __post_init__(self) -> None:
        if self.total < 0 or self.bots < 0 or self.failures < 0:
            raise ValueError("counts must be nonnegative")
        if self.bots + self.failures > self.total:
            raise ValueError("abstentions and failures are disjoint "
                             "and cannot exceed the record count")

    @property
    def bot_rate(self) -> float:
        return self.bots / self.total if self.total else 0.0

    @property
    def failure_rate(self) -> float:
        return self.failures / self.total if self.total else 0.0


@dataclass(frozen=True)
class MetricsReport:
    """Held-out behavior of a calibrated program.

    A failure is a committed output farther than the tolerance from the
    exact-semantics reference; abstentions are counted separately and
    are never failures.  Rates use the full record count as the
    denominator, matching the unconditional guarantee.
    """

    total: int
    bots: int
    failures: int
    per_seed: tuple[SeedMetrics, ...] = ()

    def __post_init__(self) -> None:
        if self.total < 0 or self.bots < 0 or self.failures < 0:
            raise ValueError("counts must be nonnegative")
        if self.bots + self.failures > self.total:
            raise ValueError("abstentions and failures are disjoint "
                             "and cannot exceed the record count")
        if self.per_seed:
            sums = (
                sum(r.total for r in self.per_seed),
                sum(r.bots for r in self.per_seed),
                sum(r.failures for r in self.per_seed),
            )
            if sums != (self.total, self.bots, self.failures):
                raise ValueError("per-seed rows do not add up to the totals")

    @property
    def bot_rate(self) -> float:
        return self.bots / self.total if self.total else 0.0

    @property
    def failure_rate(self) -> float:
        return self.failures / self.total if self.total else 0.0

    @property
    def bot_interval(self) -> tuple[float, float]:
        return wilson_interval(self.bots, self.total)

    @property
    def failure_interval(self) -> tuple[float, float]:
        return wilson_interval(self.failures, self.total)

    @property
    def worst_failure_rate(self) -> float:
        """Largest per-seed failure rate, or the pooled rate when the
        report has no per-seed rows."""
        if not self.per_seed:
            return self.failure_rate
        return max(r.failure_rate for r in self.per_seed)


def evaluate_program(
    p: Program,
    sig: tuple[DslType, ...],
    fill: HoleAssignment,
    data: Sequence[Sequence[Any]],
    tolerance: float,
    seed: Optional[int] = None,
) -> MetricsReport:
    """Run calibrated and exact semantics side by side over a dataset.

    A record counts as a failure when the calibrated program commits
    and its output sits more than `tolerance` from the exact reference;
    committed lists of the wrong length are infinitely wrong.  Passing
    a seed tags the counts so reports from several seeds can be pooled.
    """
    if not data:
        raise ValueError("cannot evaluate on no data")
    if math.isnan(tolerance) or tolerance < 0.0:
        raise ValueError(f"tolerance must be nonnegative, got {tolerance}")
    run = make_evaluator(p, sig, "test", fill)
    ref = make_evaluator(p, sig, "train")
    bots = 0
    failures = 0
    for inputs in data:
        out = run(inputs)
        if is_bot(out):
            bots += 1
            continue
        try:
            err = dsl_output_error(out, ref(inputs))
        except LengthMismatch:
            err = math.inf
        if err > tolerance:
            failures += 1
    per_seed = ()
    if seed is not None:
        per_seed = (SeedMetrics(seed, len(data), bots, failures),)
    return MetricsReport(len(data), bots, failures, per_seed)


# ---------------------------------------------------------------------------
# Drift scenarios and stream monitoring glue

# Held-out draws sit this far from the training stream in seed space.
EVAL_SEED_OFFSET = 7919
# The post-shift half of a scenario draws from this offset, so the
# pre-shift half of two scenarios with equal base configs is identical.
SHIFT_SEED_OFFSET = 104729


def shift_scenario(
    base: PredictorConfig,
    shifted: PredictorConfig,
    n: int,
    seed: int,
) -> tuple[list[ImageRecord], list[ImageRecord]]:
    """Paired record streams around a predictor change.

    Both halves have n records.  The first is drawn from `base` at the
    given seed verbatim; the second from `shifted` at a fixed offset.
    Concatenate them to simulate the change arriving mid-stream.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    before = synth_predictor(base, n, seed)
    after = synth_predictor(shifted, n, seed + SHIFT_SEED_OFFSET)
    return before, after


def record_valuation(rec: ImageRecord) -> Valuation:
    """Bind one prediction to the names the accuracy check reads.

    Wrongness is judged against the integer truth by rounding, so this
    suits digit-style predictors."""
    if rec.truth_int is None:
        raise ValueError("record carries no integer truth")
    wrong = int(round(rec.pred.value)) != rec.truth_int
    return Valuation(
        inputs={"conf": rec.pred.conf},
        ground_truth={"wrong": wrong},
    )


def accuracy_spec(eps: float) -> SpecExpr:
    """A check that holds on a record exactly when the prediction is right.

    Encoded as: a wrong prediction must have confidence at or below
    zero.  Confidences are positive, so the satisfaction bit reduces to
    correctness itself and verifying the check asks whether accuracy is
    at least 1 - eps.
    """
    return SpecExpr(
        score=InputVar("conf"),
        threshold=0.0,
        spec=GroundTruthVar("wrong"),
        eps=eps,
        mode=MODE_IMPL,
    )


# ---------------------------------------------------------------------------
# Benchmarks


@dataclass(frozen=True)
class BenchmarkTask:
    """A synthesis task plus the generator its data comes from."""

    task: TaskSpec
    data: TaskDataConfig


def _scalar(v: int) -> ImageVal:
    return example_image(truth_int=v)


def _floats(*vs: float) -> tuple[ImageVal, ...]:
    return tuple(example_image(truth_float=v, ident=i) for i, v in enumerate(vs))


def benchmark_suite() -> tuple[BenchmarkTask, ...]:
    """The five list-pipeline tasks the evaluation loop ships with.

    io examples are chosen so the intended pipeline is the unique
    minimal-depth program reproducing them.  conditional-sum carries a
    third example because two leave a shallower arithmetic coincidence
    alive; the others pin their pipelines with two.
    """
    shared = dict(epsilon=0.05, tolerance=6.0, delta=0.05, length_cap=3)
    images = ListT(IMAGE)
    one_list = TaskDataConfig(scalars=0, lists=1, list_lengths=(1, 2, 3))
    guarded = TaskDataConfig(scalars=1, lists=1, list_lengths=(1, 2, 3))
    return (
        BenchmarkTask(
            TaskSpec(
                name="sum",
                input_types=(images,),
                output_type=FLOAT,
                io_examples=(
                    ((_floats(1.5, 2.5),), 4.0),
                    ((_floats(1.0, 2.0, 3.0),), 6.0),
                ),
                **shared,
            ),
            one_list,
        ),
        BenchmarkTask(
            TaskSpec(
                name="max",
                input_types=(images,),
                output_type=FLOAT,
                io_examples=(
                    ((_floats(1.5, 2.5),), 2.5),
                    ((_floats(3.0, 1.0, 2.0),), 3.0),
                ),
                **shared,
            ),
            one_list,
        ),
        BenchmarkTask(
            TaskSpec(
                name="conditional-sum",
                input_types=(IMAGE, images),
                output_type=FLOAT,
                io_examples=(
                    ((_scalar(2), _floats(1.0, 2.0, 3.0)), 5.0),
                    ((_scalar(3), _floats(2.0, 4.0, 2.0)), 4.0),
                    ((_scalar(5), _floats(6.0, 1.0, 7.0)), 13.0),
                ),
                **shared,
            ),
            guarded,
        ),
        BenchmarkTask(
            TaskSpec(
                name="prefix-max",
                input_types=(IMAGE, images),
                output_type=FLOAT,
                io_examples=(
                    ((_scalar(2), _floats(3.0, 1.0, 4.0)), 3.0),
                    ((_scalar(1), _floats(2.0, 5.0, 2.0)), 2.0),
                ),
                **shared,
            ),
            guarded,
        ),
        BenchmarkTask(
            TaskSpec(
                name="conditional-count",
                input_types=(IMAGE, images),
                output_type=INT,
                io_examples=(
                    ((_scalar(2), _floats(1.0, 2.0, 3.0)), 2),
                    ((_scalar(3), _floats(2.0, 4.0, 2.0)), 1),
                ),
                **shared,
            ),
            guarded,
        ),
    )


def run_benchmark(
    bench: BenchmarkTask,
    seeds: Sequence[int],
    *,
    train_n: int = 5000,
    eval_n: int = 5000,
    depth_limit: int = 6,
    no_search: bool = False,
    k_zero: bool = False,
    levels: Optional[tuple[int, ...]] = None,
) -> MetricsReport:
    """Synthesize per seed, then measure on a fresh held-out draw.

    The enumerated pipeline depends only on the io examples, so it is
    found once and reused across seeds; calibration and evaluation data
    are redrawn per seed from streams a fixed offset apart.
    """
    if not seeds:
        raise ValueError("need at least one seed")
    partial = synthesize_partial_sketch(bench.task, depth_limit=depth_limit)
    sig = tuple(bench.task.input_types)
    rows = []
    for seed in seeds:
        train = make_task_data(bench.data, train_n, seed)
        res = synthesize(
            bench.task,
            train,
            depth_limit=depth_limit,
            seed=seed,
            levels=levels,
            no_search=no_search,
            k_zero=k_zero,
            partial=partial,
        )
        held_out = make_task_data(bench.data, eval_n, seed + EVAL_SEED_OFFSET)
        report = evaluate_program(
            res.program, sig, res.fill, held_out, bench.task.tolerance, seed=seed
        )
        rows.append(report.per_seed[0])
    return MetricsReport(
        total=sum(r.total for r in rows),
        bots=sum(r.bots for r in rows),
        failures=sum(r.failures for r in rows),
        per_seed=tuple(rows),
    )
