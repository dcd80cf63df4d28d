"""Fill every hole of a full sketch from calibration data.

Holes are processed bottom up so that by the time a spec's score is
evaluated under test semantics, any spec nested inside it is already
concrete.  The failure budget delta is split evenly across the m holed
specs; specs sharing a hole id are filled once from their pooled samples,
which still spends at most delta in total.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from statsketch.estimators import (
    EstimatorConfig,
    compute_k,
    lower_bound_estimate,
    threshold_estimate,
)
from statsketch.sketch_ir import (
    ComponentRegistry,
    Expr,
    Hole,
    MODE_COND,
    Path,
    SpecExpr,
    Valuation,
    collect_specs,
    eval_test,
    eval_train,
    fill_spec,
    get_node,
    is_full_sketch,
)

__all__ = [
    "SketchJob",
    "HoleFill",
    "SketchResult",
    "build_threshold_samples",
    "build_eps_samples",
    "sketch",
]


@dataclass(frozen=True)
class SketchJob:
    program: Expr
    data: Sequence[Valuation]
    delta: float
    registry: ComponentRegistry | None = None
    gamma: Callable[[Sequence[float], int], float] | None = None
    k_zero: bool = False

    def __post_init__(self) -> None:
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")


@dataclass(frozen=True)
class HoleFill:
    """Record of one fill decision (one hole group)."""

    kind: str  # "threshold" | "eps"
    hole_id: str | None
    paths: tuple[Path, ...]
    value: float
    n: int
    delta_share: float
    eps: float | None = None  # eps of the calibrated check, for threshold fills
    k: int | None = None
    nu: float | None = None  # Hoeffding lower bound, for eps fills
    conservative: bool = False


@dataclass(frozen=True)
class SketchResult:
    program: Expr
    fills: tuple[HoleFill, ...]
    m: int
    delta: float

    @property
    def conservative(self) -> bool:
        return any(f.conservative for f in self.fills)


def _score_of(spec: SpecExpr, val: Valuation, registry) -> float:
    try:
        z = eval_test(spec.score, val, registry)
    except ValueError as exc:
        raise ValueError(
            "score evaluation hit an unfilled hole; shared hole groups must not "
            "interleave with specs nested in their scores"
        ) from exc
    if isinstance(z, bool) or not isinstance(z, (int, float)) or math.isnan(z):
        raise ValueError(f"score must be a real number, got {z!r}")
    return float(z)


def build_threshold_samples(
    spec: SpecExpr, data: Sequence[Valuation], registry: ComponentRegistry | None = None
) -> list[float]:
    """Calibration scores for a threshold hole.

    Conditional mode keeps scores where the annotation holds.  Implication
    mode keeps one entry per example, with -inf standing in for the
    vacuously satisfied ones, so the sample size reflects all of the data.
    """
    samples: list[float] = []
    for val in data:
        z_star = eval_train(spec, val, registry)
        if spec.mode == MODE_COND:
            if z_star:
                samples.append(_score_of(spec, val, registry))
        else:
            samples.append(_score_of(spec, val, registry) if z_star else -math.inf)
    return samples


def build_eps_samples(
    spec: SpecExpr, data: Sequence[Valuation], registry: ComponentRegistry | None = None
) -> list[int]:
    """Satisfaction bits for an eps hole; the threshold must be concrete."""
    bits: list[int] = []
    for val in data:
        z_star = eval_train(spec, val, registry)
        if spec.mode == MODE_COND:
            if z_star:
                bits.append(eval_test(spec, val, registry))
        else:
            bits.append(1 if not z_star else eval_test(spec, val, registry))
    return bits


def _group_key(path: Path, spec: SpecExpr) -> tuple:
    slot = spec.threshold if isinstance(spec.threshold, Hole) else spec.eps
    kind = "threshold" if isinstance(spec.threshold, Hole) else "eps"
    if slot.id is None:
        return (kind, None, path)
    return (kind, slot.id)


def sketch(job: SketchJob) -> SketchResult:
    """Complete a full sketch, filling each hole group at delta / m."""
    program = job.program
    specs = collect_specs(program)
    m = len(specs)
    if m == 0:
        return SketchResult(program=program, fills=(), m=0, delta=job.delta)
    if not is_full_sketch(program):
        raise ValueError("sketch requires a full sketch: every spec must carry a hole")
    delta_share = job.delta / m

    # Group shared holes, keyed so a group fills at its last member's
    # position in the bottom-up order.
    order: dict[tuple, int] = {}
    members: dict[tuple, list[Path]] = {}
    for pos, (path, spec) in enumerate(specs):
        key = _group_key(path, spec)
        order[key] = pos
        members.setdefault(key, []).append(path)

    fills: list[HoleFill] = []
    current = program
    for key in sorted(members, key=lambda k: order[k]):
        paths = members[key]
        kind = key[0]
        group = [_node_at(current, p) for p in paths]
        eps_values = {s.eps for s in group} if kind == "threshold" else set()
        modes = {s.mode for s in group}
        if kind == "threshold" and len(eps_values) > 1:
            raise ValueError(f"shared hole {key[1]!r} mixes eps budgets {eps_values}")
        if len(modes) > 1:
            raise ValueError(f"shared hole {key[1]!r} mixes modes {modes}")

        if kind == "threshold":
            eps = group[0].eps
            if not (0.0 < eps < 1.0):
                raise ValueError(f"threshold spec with eps={eps} cannot be calibrated")
            samples: list[float] = []
            for s in group:
                samples.extend(build_threshold_samples(s, job.data, job.registry))
            cfg = EstimatorConfig(
                epsilon=eps, delta=delta_share, gamma=job.gamma, k_zero=job.k_zero
            )
            value = threshold_estimate(samples, cfg)
            k = compute_k(len(samples), eps, delta_share)
            if job.k_zero and k is not None:
                k = 0
            fills.append(
                HoleFill(
                    kind="threshold",
                    hole_id=key[1] if len(key) == 2 else None,
                    paths=tuple(paths),
                    value=value,
                    n=len(samples),
                    delta_share=delta_share,
                    eps=eps,
                    k=k,
                    conservative=value == math.inf,
                )
            )
        else:
            bits: list[int] = []
            for s in group:
                bits.extend(build_eps_samples(s, job.data, job.registry))
            if bits:
                nu = lower_bound_estimate(bits, delta_share)
            else:
                nu = 0.0
            value = 1.0 - nu
            fills.append(
                HoleFill(
                    kind="eps",
                    hole_id=key[1] if len(key) == 2 else None,
                    paths=tuple(paths),
                    value=value,
                    n=len(bits),
                    delta_share=delta_share,
                    nu=nu,
                    conservative=value >= 1.0,
                )
            )
        for p in paths:
            current = fill_spec(current, p, fills[-1].value)

    return SketchResult(program=current, fills=tuple(fills), m=m, delta=job.delta)


def _node_at(current: Expr, path: Path) -> SpecExpr:
    node = get_node(current, path)
    if not isinstance(node, SpecExpr):
        raise ValueError(f"no spec at {path}")
    return node
