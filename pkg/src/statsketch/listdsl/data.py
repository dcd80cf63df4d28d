"""Synthetic predictor models and dataset generation.

Each ImageRecord stands in for one image run through a digit model and an
orientation detector.  The main knobs: accuracy p (a correct prediction
lands within `noise` of the truth, a wrong one is off by several units),
and two Beta distributions for confidence, the correct one concentrated
higher so that confidence thresholds carry signal.

Everything is deterministic given the seed.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import IO, Iterable, Optional, Sequence

from .values import ImageRecord, ImageVal, Prediction, record_from_json, record_to_json

__all__ = [
    "PredictorConfig",
    "synth_predictor",
    "records_to_jsonl",
    "records_from_jsonl",
    "example_image",
    "image_input",
    "list_input",
    "TaskDataConfig",
    "make_task_data",
    "value_to_json",
    "value_from_json",
    "examples_to_jsonl",
    "examples_from_jsonl",
]


@dataclass(frozen=True)
class PredictorConfig:
    """Knobs for the synthetic model.

    accuracy        chance a prediction rounds to the truth
    noise           half-width of the value jitter on correct predictions
    wrong_offset    (lo, hi) magnitude of the miss on wrong predictions
    conf_correct    Beta(a, b) for confidence when correct
    conf_wrong      Beta(a, b) for confidence when wrong
    digits          truths drawn uniformly from 0 .. digits-1
    flip_rate       fraction of images stored wrong side up
    flip_accuracy   orientation detector accuracy
    fast_accuracy   when set, also attach a second, cheaper prediction
    """

    accuracy: float = 0.99
    noise: float = 0.4
    wrong_offset: tuple[float, float] = (2.5, 6.0)
    conf_correct: tuple[float, float] = (8.0, 2.0)
    conf_wrong: tuple[float, float] = (2.0, 5.0)
    digits: int = 10
    flip_rate: float = 0.0
    flip_accuracy: float = 0.98
    fast_accuracy: Optional[float] = None

    def __post_init__(self) -> None:
        for name in ("accuracy", "flip_rate", "flip_accuracy"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.fast_accuracy is not None and not 0.0 <= self.fast_accuracy <= 1.0:
            raise ValueError("fast_accuracy must be in [0, 1]")
        if not 0.0 <= self.noise <= 0.49:
            raise ValueError("noise must stay below 0.5 so correct stays correct")
        lo, hi = self.wrong_offset
        if not 0.5 < lo <= hi:
            raise ValueError("wrong_offset must exceed 0.5 so wrong stays wrong")
        if self.digits < 1:
            raise ValueError("digits must be positive")


def _draw_prediction(
    rng: random.Random, cfg: PredictorConfig, truth: int, accuracy: float
) -> Prediction:
    correct = rng.random() < accuracy
    if correct:
        value = truth + rng.uniform(-cfg.noise, cfg.noise)
        a, b = cfg.conf_correct
    else:
        off = rng.uniform(*cfg.wrong_offset)
        value = truth + off if rng.random() < 0.5 else truth - off
        a, b = cfg.conf_wrong
    return Prediction(value, rng.betavariate(a, b))


def synth_predictor(cfg: PredictorConfig, n: int, seed: int) -> list[ImageRecord]:
    """n records drawn from the configured model."""
    rng = random.Random(seed)
    return [_one_record(rng, cfg, i) for i in range(n)]


def records_to_jsonl(records: Iterable[ImageRecord], fp: IO[str]) -> None:
    for rec in records:
        fp.write(json.dumps(record_to_json(rec), sort_keys=True))
        fp.write("\n")


def records_from_jsonl(fp: IO[str]) -> list[ImageRecord]:
    out = []
    for line in fp:
        line = line.strip()
        if line:
            out.append(record_from_json(json.loads(line)))
    return out


# ---------------------------------------------------------------------------
# Task datasets: valuations whose image inputs wrap fresh records

def image_input(rec: ImageRecord) -> ImageVal:
    """An image presented the way it is stored."""
    return ImageVal(rec, upright=not rec.truth_flipped)


def example_image(
    truth_int: Optional[int] = None,
    truth_float: Optional[float] = None,
    ident: int = 0,
) -> ImageVal:
    """An upright image carrying only ground truth, for io examples.

    Example matching runs under exact semantics, which never reads the
    predictor fields, so those are placeholders echoing the truth.
    """
    v = truth_float if truth_float is not None else float(truth_int or 0)
    rec = ImageRecord(
        id=ident,
        truth_int=truth_int,
        truth_float=truth_float,
        truth_flipped=False,
        pred=Prediction(value=v, conf=1.0),
        flip_pred=False,
        flip_conf=1.0,
    )
    return ImageVal(rec, upright=True)


def list_input(recs: Sequence[ImageRecord]) -> tuple[ImageVal, ...]:
    return tuple(image_input(r) for r in recs)


@dataclass(frozen=True)
class TaskDataConfig:
    """Shape of generated task inputs.

    Each valuation gets `scalars` standalone images followed by `lists`
    image lists with lengths drawn from list_lengths.  Scalar truths come
    from scalar_digits so guard comparisons see useful splits.
    """

    scalars: int = 0
    lists: int = 1
    list_lengths: tuple[int, ...] = (1, 2, 3)
    predictor: PredictorConfig = PredictorConfig()
    scalar_digits: Optional[int] = None


def make_task_data(cfg: TaskDataConfig, n: int, seed: int) -> list[tuple]:
    """n valuations; every image inside is a fresh record."""
    rng = random.Random(seed)
    pcfg = cfg.predictor
    if cfg.scalar_digits is not None:
        scalar_pcfg = PredictorConfig(
            **{**pcfg.__dict__, "digits": cfg.scalar_digits}
        )
    else:
        scalar_pcfg = pcfg
    out = []
    counter = 0
    for _ in range(n):
        inputs: list = []
        for _ in range(cfg.scalars):
            rec = _one_record(rng, scalar_pcfg, counter)
            counter += 1
            inputs.append(image_input(rec))
        for _ in range(cfg.lists):
            length = cfg.list_lengths[rng.randrange(len(cfg.list_lengths))]
            recs = []
            for _ in range(length):
                recs.append(_one_record(rng, pcfg, counter))
                counter += 1
            inputs.append(list_input(recs))
        out.append(tuple(inputs))
    return out


def _one_record(rng: random.Random, cfg: PredictorConfig, rid: int) -> ImageRecord:
    truth = rng.randrange(cfg.digits)
    pred = _draw_prediction(rng, cfg, truth, cfg.accuracy)
    flipped = rng.random() < cfg.flip_rate
    flip_correct = rng.random() < cfg.flip_accuracy
    flip_pred = flipped if flip_correct else not flipped
    a, b = cfg.conf_correct if flip_correct else cfg.conf_wrong
    flip_conf = rng.betavariate(a, b)
    fast = None
    if cfg.fast_accuracy is not None:
        fast = _draw_prediction(rng, cfg, truth, cfg.fast_accuracy)
    return ImageRecord(
        id=rid,
        truth_int=truth,
        truth_float=float(truth),
        truth_flipped=flipped,
        pred=pred,
        flip_pred=flip_pred,
        flip_conf=flip_conf,
        pred_fast=fast,
    )


# ---------------------------------------------------------------------------
# Valuation serialization (inputs only; outputs live in task files)

def value_to_json(v) -> dict:
    if isinstance(v, ImageVal):
        return {
            "kind": "image",
            "record": record_to_json(v.record),
            "upright": v.upright,
        }
    if isinstance(v, tuple):
        return {"kind": "list", "items": [value_to_json(x) for x in v]}
    if isinstance(v, bool):
        return {"kind": "bool", "value": v}
    if isinstance(v, int):
        return {"kind": "int", "value": v}
    if isinstance(v, float):
        return {"kind": "float", "value": v}
    raise TypeError(f"cannot serialize input value {v!r}")


def value_from_json(obj: dict):
    kind = obj["kind"]
    if kind == "image":
        rec = record_from_json(obj["record"])
        if "upright" in obj:
            return ImageVal(rec, upright=obj["upright"])
        return image_input(rec)
    if kind == "list":
        return tuple(value_from_json(x) for x in obj["items"])
    if kind in ("bool", "int", "float"):
        return obj["value"]
    raise ValueError(f"unknown value kind {kind!r}")


def examples_to_jsonl(data: Iterable[tuple], fp: IO[str]) -> None:
    for inputs in data:
        row = {"inputs": [value_to_json(v) for v in inputs]}
        fp.write(json.dumps(row, sort_keys=True))
        fp.write("\n")


def examples_from_jsonl(fp: IO[str]) -> list[tuple]:
    out = []
    for line in fp:
        line = line.strip()
        if line:
            row = json.loads(line)
            out.append(tuple(value_from_json(v) for v in row["inputs"]))
    return out
