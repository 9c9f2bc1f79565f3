"""Second-stage species classification of a frozen snapshot.

Two interchangeable stand-ins for a trained vision model: an oracle that
returns the dominant visible species with configurable accuracy (lower at
night if configured), and a feature-based classifier that thresholds the
largest warm blob's area, aspect ratio and temperature excess. A task
consumes exactly one snapshot; nothing here ever re-samples the world.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .thermal import DetectorConfig, hot_pixel_mask

LABELS = (
    "hedgehog",
    "hedgehog_with_cubs",
    "snake",
    "wounded_animal",
    "other_warm",
    "none",
)

KIND_TO_LABEL = {
    "hedgehog": "hedgehog",
    "hedgehog_family": "hedgehog_with_cubs",
    "snake": "snake",
    "wounded_animal": "wounded_animal",
    "bonfire": "other_warm",
    "garden_light": "other_warm",
    "generic_warm": "other_warm",
}

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


@dataclass(eq=False, frozen=True)
class Snapshot:
    """One still image taken at trigger time, never refreshed afterwards."""

    thermal: np.ndarray
    visible_truth: Optional[tuple[tuple[str, float], ...]]  # (kind, in-view fraction)
    taken_at_tick: int


@dataclass(frozen=True)
class ClassificationResult:
    label: str
    confidence: float

    def __post_init__(self) -> None:
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class BlobBand:
    """Accept a blob as `label` when all three features fall in range."""

    label: str
    area_min: int
    area_max: int
    aspect_min: float
    aspect_max: float
    excess_min_c: float


DEFAULT_BANDS: tuple[BlobBand, ...] = (
    BlobBand("snake", 4, 60, 3.0, math.inf, 5.0),
    BlobBand("snake", 4, 60, 0.0, 1 / 3.0, 5.0),
    BlobBand("hedgehog", 8, 40, 0.5, 2.0, 8.0),
    BlobBand("hedgehog_with_cubs", 41, 200, 1 / 3.0, 3.0, 8.0),
)


@dataclass(frozen=True)
class ClassifierSpec:
    """Which stand-in to run and its parameters.

    kind "oracle": returns the true dominant species with probability
    `accuracy` (`night_accuracy` during night slots), otherwise a seeded
    draw from the remaining labels. kind "blob_feature": thresholds the
    warm-blob features through `bands`, falling back to other_warm.

    init_latency_ticks models the slow model start-up: a spawned task only
    delivers its result that many ticks after the trigger.
    """

    kind: str = "oracle"
    accuracy: float = 1.0
    night_accuracy: Optional[float] = None
    night_slots: Optional[tuple[int, int]] = None  # inclusive, may wrap midnight
    confusion_seed: int = 0
    bands: tuple[BlobBand, ...] = DEFAULT_BANDS
    init_latency_ticks: int = 90

    def __post_init__(self) -> None:
        if self.kind not in ("oracle", "blob_feature"):
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        if not (0.0 <= self.accuracy <= 1.0):
            raise ValueError(f"accuracy must be in [0, 1], got {self.accuracy}")
        if self.night_accuracy is not None and not (0.0 <= self.night_accuracy <= 1.0):
            raise ValueError(
                f"night_accuracy must be in [0, 1], got {self.night_accuracy}"
            )
        if self.init_latency_ticks < 0:
            raise ValueError(
                f"init_latency_ticks must be >= 0, got {self.init_latency_ticks}"
            )


def _is_night(spec: ClassifierSpec, slot: Optional[int]) -> bool:
    if slot is None or spec.night_slots is None:
        return False
    start, end = spec.night_slots
    if start <= end:
        return start <= slot <= end
    return slot >= start or slot <= end


def dominant_visible_kind(
    visible_truth: Optional[tuple[tuple[str, float], ...]],
) -> Optional[str]:
    """Entity kind with the largest in-view fraction, None if nothing shows.

    The pipeline builds visible_truth pre-sorted by (fraction desc, id), so
    a stable max keeps ties deterministic.
    """
    if not visible_truth:
        return None
    best_kind, best_frac = None, 0.0
    for kind, frac in visible_truth:
        if frac > best_frac:
            best_kind, best_frac = kind, frac
    return best_kind


def blob_features(
    frame: np.ndarray, config: DetectorConfig
) -> tuple[int, float, float]:
    """(area, aspect, mean excess) of the largest 4-connected hot component.

    Aspect is bounding-box width over height; excess is relative to the
    frame median. Raises on frames with no hot pixels.
    """
    mask = hot_pixel_mask(frame, config)
    if not mask.any():
        raise ValueError("no hot pixels: blob features are undefined")
    labeled, count = ndimage.label(mask, structure=_FOUR_CONNECTED)
    sizes = np.bincount(labeled.ravel())[1:]
    best = int(np.argmax(sizes)) + 1  # ties resolve to the first-labeled blob
    component = labeled == best
    rows, cols = np.nonzero(component)
    area = int(component.sum())
    aspect = (cols.max() - cols.min() + 1) / (rows.max() - rows.min() + 1)
    excess = float(frame[component].mean() - np.median(frame))
    return area, float(aspect), excess


def classify(
    spec: ClassifierSpec,
    snapshot: Snapshot,
    rng: np.random.Generator,
    slot: Optional[int] = None,
    detector: DetectorConfig = DetectorConfig(),
) -> ClassificationResult:
    """Classify one snapshot; deterministic given (spec, snapshot, rng state)."""
    if snapshot.thermal is None:
        raise ValueError("snapshot has no thermal frame")
    if spec.kind == "oracle":
        accuracy = spec.accuracy
        if _is_night(spec, slot) and spec.night_accuracy is not None:
            accuracy = spec.night_accuracy
        kind = dominant_visible_kind(snapshot.visible_truth)
        truth = KIND_TO_LABEL[kind] if kind is not None else "none"
        if rng.random() < accuracy:
            return ClassificationResult(truth, accuracy)
        alternatives = [label for label in LABELS if label != truth]
        return ClassificationResult(
            alternatives[int(rng.integers(len(alternatives)))], accuracy
        )
    mask = hot_pixel_mask(snapshot.thermal, detector)
    if not mask.any():
        return ClassificationResult("none", 0.0)
    area, aspect, excess = blob_features(snapshot.thermal, detector)
    for band in spec.bands:
        if (band.area_min <= area <= band.area_max
                and band.aspect_min <= aspect <= band.aspect_max
                and excess >= band.excess_min_c):
            return ClassificationResult(band.label, 0.9)
    return ClassificationResult("other_warm", 0.5)
