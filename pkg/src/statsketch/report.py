"""Rendering for validation and evaluation results.

One result, four surfaces: a JSON document for machines, a plain-text
table for terminals, CSV for spreadsheets, and a matplotlib figure
saved next to the delimited output.  Everything here is presentation;
the numbers are computed elsewhere and pass through unchanged.
"""

from __future__ import annotations

import csv
import math
from typing import Sequence, Union

from .harness import MetricsReport, ValidationReport
from .synthesizer import SynthesisResult

__all__ = [
    "SCHEMA_METRICS",
    "SCHEMA_SYNTHESIS",
    "SCHEMA_VALIDATION",
    "metrics_table",
    "metrics_to_json",
    "save_metrics_figure",
    "save_validation_figure",
    "synthesis_to_json",
    "validation_table",
    "validation_to_json",
    "write_metrics_csv",
    "write_validation_csv",
]

SCHEMA_VALIDATION = "statsketch/validation-v1"
SCHEMA_METRICS = "statsketch/metrics-v1"
SCHEMA_SYNTHESIS = "statsketch/synthesis-v1"


def _num(v: float) -> Union[float, str]:
    """JSON-safe number: infinities become strings, finite pass through."""
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


# ---------------------------------------------------------------------------
# Validation reports


def validation_to_json(reports: Sequence[ValidationReport]) -> dict:
    return {
        "schema": SCHEMA_VALIDATION,
        "reports": [
            {
                "name": r.name,
                "fraction": r.fraction,
                "nominal": r.nominal,
                "slack": r.slack,
                "bound": r.bound,
                "trials": r.trials,
                "mean_statistic": r.mean_statistic,
                "passed": r.passed,
            }
            for r in reports
        ],
    }


def validation_table(reports: Sequence[ValidationReport]) -> str:
    """Fixed-width table, one validation per row."""
    header = f"{'check':<24} {'observed':>9} {'bound':>9} {'trials':>7} {'mean':>9}  verdict"
    lines = [header, "-" * len(header)]
    for r in reports:
        lines.append(
            f"{r.name:<24} {r.fraction:>9.4f} {r.bound:>9.4f} "
            f"{r.trials:>7d} {r.mean_statistic:>9.4f}  "
            + ("pass" if r.passed else "FAIL")
        )
    return "\n".join(lines)


def write_validation_csv(reports: Sequence[ValidationReport], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fp:
        w = csv.writer(fp)
        w.writerow(
            ["name", "fraction", "nominal", "slack", "bound",
             "trials", "mean_statistic", "passed"]
        )
        for r in reports:
            w.writerow(
                [r.name, r.fraction, r.nominal, r.slack, r.bound,
                 r.trials, r.mean_statistic, r.passed]
            )


def save_validation_figure(reports: Sequence[ValidationReport], path: str) -> None:
    """Observed failure fractions against their nominal-plus-slack bounds."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = [r.name for r in reports]
    xs = range(len(reports))
    fig, ax = plt.subplots(figsize=(max(4.0, 1.6 * len(reports)), 3.2))
    ax.bar(xs, [r.fraction for r in reports], width=0.55, color="#4878a8",
           label="observed")
    ax.plot(xs, [r.bound for r in reports], "v", color="#b04030",
            markersize=8, linestyle="none", label="bound")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("failure fraction")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


# ---------------------------------------------------------------------------
# Held-out metrics


def metrics_to_json(report: MetricsReport) -> dict:
    fail_lo, fail_hi = report.failure_interval
    bot_lo, bot_hi = report.bot_interval
    return {
        "schema": SCHEMA_METRICS,
        "total": report.total,
        "bots": report.bots,
        "failures": report.failures,
        "bot_rate": report.bot_rate,
        "failure_rate": report.failure_rate,
        "bot_interval": [bot_lo, bot_hi],
        "failure_interval": [fail_lo, fail_hi],
        "per_seed": [
            {
                "seed": row.seed,
                "total": row.total,
                "bots": row.bots,
                "failures": row.failures,
                "bot_rate": row.bot_rate,
                "failure_rate": row.failure_rate,
            }
            for row in report.per_seed
        ],
    }


def metrics_table(report: MetricsReport) -> str:
    header = f"{'scope':<10} {'total':>7} {'abstain':>8} {'fail':>6} {'abstain%':>9} {'fail%':>8}"
    lines = [header, "-" * len(header)]
    for row in report.per_seed:
        lines.append(
            f"{'seed ' + str(row.seed):<10} {row.total:>7d} {row.bots:>8d} "
            f"{row.failures:>6d} {100 * row.bot_rate:>8.2f}% {100 * row.failure_rate:>7.3f}%"
        )
    lo, hi = report.failure_interval
    lines.append(
        f"{'pooled':<10} {report.total:>7d} {report.bots:>8d} "
        f"{report.failures:>6d} {100 * report.bot_rate:>8.2f}% {100 * report.failure_rate:>7.3f}%"
    )
    lines.append(f"failure rate 95% interval: [{lo:.4f}, {hi:.4f}]")
    return "\n".join(lines)


def write_metrics_csv(report: MetricsReport, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fp:
        w = csv.writer(fp)
        w.writerow(
            ["scope", "seed", "total", "bots", "failures",
             "bot_rate", "failure_rate"]
        )
        for row in report.per_seed:
            w.writerow(
                ["seed", row.seed, row.total, row.bots, row.failures,
                 row.bot_rate, row.failure_rate]
            )
        w.writerow(
            ["pooled", "", report.total, report.bots, report.failures,
             report.bot_rate, report.failure_rate]
        )


def save_metrics_figure(report: MetricsReport, path: str) -> None:
    """Per-seed abstention and failure rates with the pooled levels."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    width = max(4.0, 0.9 * max(len(report.per_seed), 2) + 2.5)
    fig, ax = plt.subplots(figsize=(width, 3.2))
    if report.per_seed:
        xs = range(len(report.per_seed))
        labels = [str(r.seed) for r in report.per_seed]
        ax.bar([x - 0.18 for x in xs], [r.bot_rate for r in report.per_seed],
               width=0.36, color="#888888", label="abstain")
        ax.bar([x + 0.18 for x in xs], [r.failure_rate for r in report.per_seed],
               width=0.36, color="#b04030", label="fail")
        ax.set_xticks(list(xs))
        ax.set_xticklabels(labels, fontsize=8)
        ax.set_xlabel("seed")
    else:
        ax.bar([0, 1], [report.bot_rate, report.failure_rate],
               color=["#888888", "#b04030"])
        ax.set_xticks([0, 1])
        ax.set_xticklabels(["abstain", "fail"])
    ax.axhline(report.failure_rate, color="#b04030", linewidth=0.8,
               linestyle="--", alpha=0.7)
    ax.set_ylabel("rate")
    if report.per_seed:
        ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


# ---------------------------------------------------------------------------
# Synthesis results


def synthesis_to_json(res: SynthesisResult) -> dict:
    return {
        "schema": SCHEMA_SYNTHESIS,
        "program": res.text,
        "thresholds": {k: _num(v) for k, v in sorted(res.fill.thresholds.items())},
        "eps": {k: res.eps[k] for k in sorted(res.eps)},
        "errs": {k: _num(res.errs[k]) for k in sorted(res.errs)},
        "commit_score": res.commit_score,
        "length_cap": res.length_cap,
        "searched": res.searched,
        "specs": res.report.core.m,
        "delta": res.report.core.delta,
        "conservative": res.report.core.conservative,
    }
