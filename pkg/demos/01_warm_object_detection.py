#!/usr/bin/env python3
"""Walk the warm-object detector through a synthetic approach sequence.

A warm blob grows in a 24x32 frame, one pixel per step, the way a
hedgehog creeping into view would. The detector flags pixels that are
more than 5 C hotter than a cardinal neighbour, and only asserts a
detection once four of them show up at once, so a lone stuck sensor
cell can never stop the mower on its own.
"""

import numpy as np

from mowsim import DetectorConfig, DetectorState, detection_bit, update_detector
from mowsim.thermal import COLS, ROWS, hot_pixel_mask

config = DetectorConfig()  # delta_c=5.0, min_hot_pixels=4
AMBIENT = 20.0
BODY = 34.0

print("=== a hedgehog-sized blob creeping into view ===")
blob = [(11, 15), (11, 16), (12, 15), (12, 16), (13, 15), (13, 16)]
state = DetectorState()
for step in range(len(blob) + 1):
    frame = np.full((ROWS, COLS), AMBIENT)
    for r, c in blob[:step]:
        frame[r, c] = BODY
    state, detected = update_detector(state, frame, config)
    count = int(hot_pixel_mask(frame, config).sum())
    print(f"frame {step}: {count} hot pixels, anchor={state.anchor}, "
          f"flag bit={detection_bit(state)}")

print()
print("=== one stuck-hot pixel is not a warm object ===")
state = DetectorState()
for step in range(3):
    frame = np.full((ROWS, COLS), AMBIENT + 3.0 * step)  # drifting ambient
    frame[2, 30] = 99.0  # broken cell, always saturated
    state, detected = update_detector(state, frame, config)
    count = int(hot_pixel_mask(frame, config).sum())
    print(f"frame {step}: {count} hot pixel(s), detected={detected}")

print()
print("=== the anchor resets when the original pixel cools ===")
state = DetectorState()
warm = np.full((ROWS, COLS), AMBIENT)
warm[5, 5] = BODY
state, _ = update_detector(state, warm, config)
print(f"warm pixel at (5, 5): anchor={state.anchor}")

moved = np.full((ROWS, COLS), AMBIENT)
for r, c in [(9, 9), (9, 10), (10, 9), (10, 10)]:
    moved[r, c] = BODY
state, detected = update_detector(state, moved, config)
print(f"blob moved to (9..10, 9..10): anchor={state.anchor}, detected={detected}")

cold = np.full((ROWS, COLS), AMBIENT)
state, detected = update_detector(state, cold, config)
print(f"everything cooled: anchor={state.anchor}, detected={detected}")

print()
print("=== a 1 C hedgehog against a 33 C evening is a documented blind spot ===")
dusk = np.full((ROWS, COLS), 33.0)
dusk[12, 16] = 34.0
state, detected = update_detector(DetectorState(), dusk, config)
print(f"contrast 1 C: detected={detected} (the threshold needs > 5 C)")
