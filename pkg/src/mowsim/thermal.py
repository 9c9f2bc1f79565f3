"""Warm-object detection over low-resolution thermal frames.

A frame is a 24x32 grid of temperatures in degrees Celsius. A pixel counts
as "hot" when it is warmer than a cardinal neighbour (one or two steps
away) by strictly more than a configured margin. Detection additionally
requires a minimum number of hot pixels in the same frame, so that a
single dead or stuck sensor cell can never assert a detection on its own.

Across frames the detector tracks an anchor: the first (row-major) hot
pixel. If the anchor cools off, the detector drops it and re-anchors on
the next frame that flags anything.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

ROWS = 24
COLS = 32

# Cardinal neighbours at distance one and two (row, col deltas).
NEIGHBOR_OFFSETS: tuple[tuple[int, int], ...] = (
    (0, -1), (0, 1), (0, -2), (0, 2),
    (-1, 0), (1, 0), (-2, 0), (2, 0),
)


def as_frame(values) -> np.ndarray:
    """Validate raw values and shape them into a 24x32 float frame."""
    frame = np.asarray(values, dtype=float)
    if frame.size != ROWS * COLS:
        raise ValueError(f"expected {ROWS * COLS} values, got {frame.size}")
    frame = frame.reshape(ROWS, COLS)
    if not np.isfinite(frame).all():
        raise ValueError("frame contains non-finite values")
    return frame


@dataclass(frozen=True)
class DetectorConfig:
    """Thresholds for hot-pixel flagging and frame-level detection."""

    delta_c: float = 5.0
    min_hot_pixels: int = 4

    def __post_init__(self) -> None:
        if self.delta_c <= 0:
            raise ValueError(f"delta_c must be > 0, got {self.delta_c}")
        if self.min_hot_pixels < 1:
            raise ValueError(
                f"min_hot_pixels must be >= 1, got {self.min_hot_pixels}"
            )


@dataclass(frozen=True)
class DetectorState:
    """Cross-frame detector memory: the anchor pixel and the latched flag."""

    anchor: Optional[tuple[int, int]] = None
    detected: bool = False


def hot_pixel_mask(frame: np.ndarray, config: DetectorConfig) -> np.ndarray:
    """Boolean mask of pixels hotter than some neighbour by more than delta_c.

    The comparison is strictly one-sided: only the warmer pixel of a pair is
    flagged, never the cooler one, so a warm blob does not grow a flagged
    cold ring around itself. Out-of-bounds neighbours are skipped.
    """
    n_rows, n_cols = frame.shape
    hot = np.zeros((n_rows, n_cols), dtype=bool)
    for dr, dc in NEIGHBOR_OFFSETS:
        r0, r1 = max(0, -dr), n_rows - max(0, dr)
        c0, c1 = max(0, -dc), n_cols - max(0, dc)
        here = frame[r0:r1, c0:c1]
        there = frame[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
        hot[r0:r1, c0:c1] |= (here - there) > config.delta_c
    return hot


def hot_pixels(frame: np.ndarray, config: DetectorConfig) -> set[tuple[int, int]]:
    """Set of (row, col) coordinates flagged by `hot_pixel_mask`."""
    mask = hot_pixel_mask(frame, config)
    return {(int(r), int(c)) for r, c in np.argwhere(mask)}


def update_detector_from_mask(
    state: DetectorState, mask: np.ndarray, config: DetectorConfig
) -> tuple[DetectorState, bool]:
    """Advance the detector using a precomputed hot-pixel mask.

    Rules, in order: a set anchor that is no longer flagged is dropped; an
    unset anchor re-anchors on the row-major first flagged pixel; detection
    asserts only when the flagged count reaches min_hot_pixels and the
    anchor itself is flagged.
    """
    anchor = state.anchor
    if anchor is not None and not mask[anchor]:
        anchor = None
    count = int(mask.sum())
    if anchor is None and count > 0:
        flat = int(np.argmax(mask))
        anchor = (flat // mask.shape[1], flat % mask.shape[1])
    detected = count >= config.min_hot_pixels and anchor is not None and bool(mask[anchor])
    return DetectorState(anchor=anchor, detected=detected), detected


def update_detector(
    state: DetectorState, frame: np.ndarray, config: DetectorConfig
) -> tuple[DetectorState, bool]:
    """Advance the detector by one frame; returns (new state, detected)."""
    return update_detector_from_mask(state, hot_pixel_mask(frame, config), config)


def detection_bit(state: DetectorState) -> int:
    """The 0/1 value written to the detection flag channel."""
    return 1 if state.detected else 0
