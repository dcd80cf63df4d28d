"""Runtime values for the list language, plus the image record format.

An image is a record of predictor outputs and ground truth for one
underlying picture; nothing here touches pixels.  The abstain value Bot
absorbs through every operation, including list construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

__all__ = [
    "Bot",
    "BOT",
    "is_bot",
    "Prediction",
    "ImageRecord",
    "ImageVal",
    "record_to_json",
    "record_from_json",
]


class Bot:
    """The abstain value.  There is exactly one of these."""

    _instance: "Bot | None" = None

    def __new__(cls) -> "Bot":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "∅"


BOT = Bot()


def is_bot(v: Any) -> bool:
    return v is BOT


@dataclass(frozen=True)
class Prediction:
    value: float
    conf: float


@dataclass(frozen=True)
class ImageRecord:
    """Predictor outputs and ground truth for one image.

    pred holds the main model's output on the upright image.  flip_pred
    and flip_conf come from the orientation detector.  pred_fast is the
    cheaper model's output when one is configured.
    """

    id: int
    truth_int: Optional[int]
    truth_float: Optional[float]
    truth_flipped: bool
    pred: Prediction
    flip_pred: bool
    flip_conf: float
    pred_fast: Optional[Prediction] = None

    def __post_init__(self) -> None:
        if self.truth_int is None and self.truth_float is None:
            raise ValueError("a record needs at least one ground-truth value")


@dataclass(frozen=True)
class ImageVal:
    """An image as seen by the program: a record plus its presentation.

    upright is False while the picture is still displayed wrong side up;
    predictors fed a non-upright image return corrupted values.
    """

    record: ImageRecord
    upright: bool = True


def record_to_json(rec: ImageRecord) -> dict[str, Any]:
    out: dict[str, Any] = {
        "id": rec.id,
        "truth_int": rec.truth_int,
        "truth_float": rec.truth_float,
        "truth_flipped": rec.truth_flipped,
        "pred": {"value": rec.pred.value, "conf": rec.pred.conf},
        "flip_pred": {"value": rec.flip_pred, "conf": rec.flip_conf},
    }
    if rec.pred_fast is not None:
        out["pred_fast"] = {"value": rec.pred_fast.value, "conf": rec.pred_fast.conf}
    return out


def record_from_json(obj: dict[str, Any]) -> ImageRecord:
    fast = obj.get("pred_fast")
    return ImageRecord(
        id=obj["id"],
        truth_int=obj.get("truth_int"),
        truth_float=obj.get("truth_float"),
        truth_flipped=obj.get("truth_flipped", False),
        pred=Prediction(obj["pred"]["value"], obj["pred"]["conf"]),
        flip_pred=obj["flip_pred"]["value"],
        flip_conf=obj["flip_pred"]["conf"],
        pred_fast=Prediction(fast["value"], fast["conf"]) if fast else None,
    )
