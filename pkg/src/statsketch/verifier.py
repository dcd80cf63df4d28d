"""Verification of completed programs, one-shot and on a sliding window.

Acceptance is one-sided.  Rejecting is always safe; accepting asserts
every spec's satisfaction rate is at least 1 - eps, and that assertion is
wrong with probability at most delta (split across the m specs).

The monitor re-runs verification on a sliding window as data streams in.
Each refresh spends the same delta; there is no correction for checking
repeatedly, so over a long stream the chance of at least one wrong
acceptance grows with the number of refreshes.  Treat verdicts as a
drift alarm, not as a simultaneous guarantee over all time.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from statsketch.estimators import compute_k, verify_indicator
from statsketch.sketch_ir import (
    ComponentRegistry,
    Expr,
    Path,
    SpecExpr,
    Valuation,
    collect_specs,
)
from statsketch.sketcher import build_eps_samples

__all__ = [
    "VerifyJob",
    "SpecCheck",
    "VerifyResult",
    "verify",
    "passert_check",
    "MonitorConfig",
    "MonitorState",
    "Verdict",
    "monitor_record",
]


@dataclass(frozen=True)
class VerifyJob:
    program: Expr
    data: Sequence[Valuation]
    delta: float
    registry: ComponentRegistry | None = None

    def __post_init__(self) -> None:
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")


@dataclass(frozen=True)
class SpecCheck:
    path: Path
    mode: str
    eps: float
    n: int
    failures: int
    k: Optional[int]
    passed: bool
    trivial: bool = False  # eps == 1 specs hold by definition


@dataclass(frozen=True)
class VerifyResult:
    accepted: bool
    checks: tuple[SpecCheck, ...]
    m: int
    delta: float


def _check_spec(
    spec: SpecExpr,
    path: Path,
    data: Sequence[Valuation],
    delta_share: float,
    registry: ComponentRegistry | None,
) -> SpecCheck:
    if spec.holed:
        raise ValueError(f"cannot verify a spec with an open hole at {path}")
    if spec.eps >= 1.0:
        return SpecCheck(path, spec.mode, spec.eps, 0, 0, None, True, trivial=True)
    bits = build_eps_samples(spec, data, registry)
    failures = sum(1 for b in bits if not b)
    k = compute_k(len(bits), spec.eps, delta_share)
    passed = verify_indicator(bits, spec.eps, delta_share)
    return SpecCheck(path, spec.mode, spec.eps, len(bits), failures, k, passed)


def verify(job: VerifyJob) -> VerifyResult:
    """Check every spec of a completed program at delta / m."""
    specs = collect_specs(job.program)
    if not specs:
        raise ValueError("program has no specs to verify")
    m = len(specs)
    checks = tuple(
        _check_spec(spec, path, job.data, job.delta / m, job.registry)
        for path, spec in specs
    )
    return VerifyResult(
        accepted=all(c.passed for c in checks), checks=checks, m=m, delta=job.delta
    )


def passert_check(
    spec: SpecExpr,
    data: Sequence[Valuation],
    delta: float,
    registry: ComponentRegistry | None = None,
) -> VerifyResult:
    """Single-assertion check: the whole delta goes to one spec."""
    if not isinstance(spec, SpecExpr):
        raise ValueError("passert_check expects a bare spec")
    return verify(VerifyJob(spec, data, delta, registry))


# --- sliding-window monitor -------------------------------------------------


@dataclass(frozen=True)
class MonitorConfig:
    """Refresh every K examples once N are buffered; evict after T arrivals."""

    refresh_every: int
    min_window: int
    max_age: int
    delta: float

    def __post_init__(self) -> None:
        if self.refresh_every < 1:
            raise ValueError("refresh_every must be >= 1")
        if self.min_window < 1:
            raise ValueError("min_window must be >= 1")
        if self.max_age < self.min_window:
            raise ValueError("max_age must be >= min_window")
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")


@dataclass
class MonitorState:
    """Single-writer stream state; create one per monitored stream."""

    window: deque = field(default_factory=deque)
    arrivals: int = 0
    since_verdict: int = 0

    @classmethod
    def fresh(cls, cfg: MonitorConfig) -> "MonitorState":
        return cls(window=deque(maxlen=cfg.max_age))


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    arrival: int  # logical time: index of the example that triggered this
    window: int
    result: VerifyResult


def monitor_record(
    state: MonitorState,
    cfg: MonitorConfig,
    example: Valuation,
    program: Expr,
    registry: ComponentRegistry | None = None,
) -> tuple[MonitorState, Optional[Verdict]]:
    """Feed one example; maybe re-verify the window.

    Examples older than max_age arrivals fall out of the window.  A verdict
    fires when at least min_window examples are buffered and refresh_every
    examples arrived since the last verdict.
    """
    if state.window.maxlen != cfg.max_age:
        raise ValueError("state was created for a different max_age")
    state.window.append(example)
    state.arrivals += 1
    state.since_verdict += 1
    if len(state.window) >= cfg.min_window and state.since_verdict >= cfg.refresh_every:
        result = verify(VerifyJob(program, list(state.window), cfg.delta, registry))
        state.since_verdict = 0
        return state, Verdict(
            accepted=result.accepted,
            arrival=state.arrivals,
            window=len(state.window),
            result=result,
        )
    return state, None
