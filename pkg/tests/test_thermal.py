import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mowsim.thermal import (
    COLS,
    ROWS,
    DetectorConfig,
    DetectorState,
    as_frame,
    detection_bit,
    hot_pixel_mask,
    hot_pixels,
    update_detector,
)
from oracles import brute_detector_step, brute_hot_pixels

CFG = DetectorConfig()


def uniform_frame(value=20.0):
    return np.full((ROWS, COLS), float(value))


frames = arrays(
    dtype=np.float64,
    shape=(ROWS, COLS),
    elements=st.floats(min_value=-20.0, max_value=60.0, allow_nan=False),
)


class TestHotPixels:
    def test_uniform_frame_flags_nothing(self):
        assert hot_pixels(uniform_frame(), CFG) == set()

    def test_single_warm_pixel_flags_only_itself(self):
        frame = uniform_frame(20.0)
        frame[5, 5] = 34.0
        assert hot_pixels(frame, CFG) == {(5, 5)}

    def test_excess_at_threshold_is_not_flagged(self):
        frame = uniform_frame(20.0)
        frame[5, 5] = 24.0  # 4 degrees above ambient, below the 5 degree margin
        assert hot_pixels(frame, CFG) == set()
        frame[5, 5] = 25.0  # exactly 5 degrees: strict comparison stays quiet
        assert hot_pixels(frame, CFG) == set()
        frame[5, 5] = 25.1
        assert hot_pixels(frame, CFG) == {(5, 5)}

    def test_corner_pixels_skip_out_of_bounds_neighbours(self):
        frame = uniform_frame(20.0)
        frame[0, 0] = 30.0
        assert (0, 0) in hot_pixels(frame, CFG)

    def test_matches_brute_force_on_random_frames(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            frame = rng.uniform(0.0, 40.0, (ROWS, COLS))
            assert hot_pixels(frame, CFG) == brute_hot_pixels(frame.tolist(), CFG.delta_c)

    @given(frames)
    @settings(max_examples=60, deadline=None)
    def test_offset_invariance(self, frame):
        base = hot_pixels(frame, CFG)
        assert hot_pixels(frame + 13.25, CFG) == base
        assert hot_pixels(frame - 40.5, CFG) == base

    @given(frames)
    @settings(max_examples=60, deadline=None)
    def test_horizontal_mirror_mirrors_the_flagged_set(self, frame):
        mirrored = hot_pixels(frame[:, ::-1].copy(), CFG)
        expected = {(r, COLS - 1 - c) for r, c in hot_pixels(frame, CFG)}
        assert mirrored == expected


class TestDetectorUpdate:
    def test_fresh_state_on_empty_frame(self):
        state, detected = update_detector(DetectorState(), uniform_frame(), CFG)
        assert not detected
        assert state.anchor is None
        assert detection_bit(state) == 0

    def test_enough_flags_detects_and_anchors_row_major_first(self):
        frame = uniform_frame(20.0)
        pix = [(3, 10), (3, 11), (7, 2), (9, 30), (12, 12), (20, 5)]
        for r, c in pix:
            frame[r, c] = 40.0
        state, detected = update_detector(DetectorState(), frame, CFG)
        assert detected
        assert state.anchor == (3, 10)
        assert detection_bit(state) == 1

    def test_below_count_threshold_sets_anchor_but_not_detected(self):
        frame = uniform_frame(20.0)
        frame[5, 5] = 34.0
        state, detected = update_detector(DetectorState(), frame, CFG)
        assert not detected
        assert state.anchor == (5, 5)

    def test_cooled_anchor_resets_then_reanchors(self):
        frame_a = uniform_frame(20.0)
        frame_a[5, 5] = 34.0
        state, _ = update_detector(DetectorState(), frame_a, CFG)
        assert state.anchor == (5, 5)

        frame_b = uniform_frame(20.0)
        for r, c in [(8, 8), (8, 9), (10, 3), (15, 20), (22, 1)]:
            frame_b[r, c] = 40.0
        state, detected = update_detector(state, frame_b, CFG)
        assert state.anchor == (8, 8)
        assert detected

    def test_anchor_cleared_when_everything_cools(self):
        frame = uniform_frame(20.0)
        frame[5, 5] = 34.0
        state, _ = update_detector(DetectorState(), frame, CFG)
        state, detected = update_detector(state, uniform_frame(20.0), CFG)
        assert state.anchor is None
        assert not detected

    def test_random_sequences_match_rule_oracle(self):
        rng = np.random.default_rng(21)
        state = DetectorState()
        anchor = None
        for _ in range(200):
            frame = rng.uniform(15.0, 32.0, (ROWS, COLS))
            flagged = brute_hot_pixels(frame.tolist(), CFG.delta_c)
            anchor, expected = brute_detector_step(anchor, flagged, CFG.min_hot_pixels)
            state, detected = update_detector(state, frame, CFG)
            assert detected == expected
            assert state.anchor == anchor

    @given(frames, st.integers(min_value=1, max_value=20))
    @settings(max_examples=40, deadline=None)
    def test_raising_min_hot_pixels_never_enables_detection(self, frame, threshold):
        lo = DetectorConfig(min_hot_pixels=threshold)
        hi = DetectorConfig(min_hot_pixels=threshold + 3)
        _, detected_lo = update_detector(DetectorState(), frame, lo)
        _, detected_hi = update_detector(DetectorState(), frame, hi)
        assert not (detected_hi and not detected_lo)

    def test_single_stuck_pixel_never_detects(self):
        # Frames whose only anomaly is one stuck-hot cell stay below the
        # four-pixel count, whatever the ambient does.
        rng = np.random.default_rng(3)
        state = DetectorState()
        for _ in range(100):
            frame = uniform_frame(rng.uniform(-5.0, 30.0))
            frame[int(rng.integers(ROWS)), int(rng.integers(COLS))] = 99.0
            state, detected = update_detector(state, frame, CFG)
            assert not detected


class TestFrameValidation:
    def test_as_frame_accepts_flat_768(self):
        frame = as_frame([20.0] * 768)
        assert frame.shape == (ROWS, COLS)

    def test_as_frame_rejects_wrong_size(self):
        with pytest.raises(ValueError, match="768"):
            as_frame([20.0] * 767)

    def test_as_frame_rejects_non_finite(self):
        values = [20.0] * 768
        values[5] = float("nan")
        with pytest.raises(ValueError, match="finite"):
            as_frame(values)

    def test_config_rejects_bad_values(self):
        with pytest.raises(ValueError):
            DetectorConfig(delta_c=0.0)
        with pytest.raises(ValueError):
            DetectorConfig(min_hot_pixels=0)

    def test_mask_and_set_agree(self):
        rng = np.random.default_rng(11)
        frame = rng.uniform(0.0, 40.0, (ROWS, COLS))
        mask = hot_pixel_mask(frame, CFG)
        assert {(int(r), int(c)) for r, c in np.argwhere(mask)} == hot_pixels(frame, CFG)
