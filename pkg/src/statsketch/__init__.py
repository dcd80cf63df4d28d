"""Calibrate, verify, and monitor probabilistic program holes with PAC guarantees."""
from __future__ import annotations

from statsketch.estimators import (
    EstimatorConfig,
    binom_tail_log,
    compute_k,
    empirical_loss,
    lower_bound_estimate,
    threshold_estimate,
    verify_indicator,
)
from statsketch.sketch_ir import SpecExpr, Valuation, expr_from_json, expr_to_json
from statsketch.sketcher import SketchJob, SketchResult, sketch
from statsketch.synthesizer import SynthesisResult, TaskSpec, synthesize
from statsketch.verifier import (
    MonitorConfig,
    MonitorState,
    VerifyJob,
    VerifyResult,
    monitor_record,
    verify,
)

__version__ = "0.1.0"

__all__ = [
    "EstimatorConfig",
    "MonitorConfig",
    "MonitorState",
    "SketchJob",
    "SketchResult",
    "SpecExpr",
    "SynthesisResult",
    "TaskSpec",
    "Valuation",
    "VerifyJob",
    "VerifyResult",
    "binom_tail_log",
    "compute_k",
    "empirical_loss",
    "expr_from_json",
    "expr_to_json",
    "lower_bound_estimate",
    "monitor_record",
    "sketch",
    "synthesize",
    "threshold_estimate",
    "verify",
    "verify_indicator",
    "__version__",
]
