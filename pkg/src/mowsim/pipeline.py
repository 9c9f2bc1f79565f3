"""Per-tick orchestration of the whole mowing simulation.

Stage order inside one tick, fixed:

  1. advance entities
  2. render the thermal frame from the mower's pose
  3. update the warm-object detector
  4. publish the detection bit (in-memory channel, plus the flag file
     when file mode is on)
  5. classification task lifecycle: spawn on a rising detection edge,
     cancel on a falling edge (cancellation beats same-tick completion),
     deliver the result once the latency has elapsed, and queue the
     resume signal when the channel is clear
  6. apply the queued vehicle events in order (restart, detected,
     classified, cleared)
  7. drive the patrol program and mark mowed cells
  8. append one trace record

Two scheduling modes exist. Virtual mode runs everything inline and
counts the classifier latency in ticks. Real-task mode runs the classify
call on a worker thread that reports through a completion queue drained
at stage 5; delivery is still gated on the ready tick, so both modes
yield identical traces for identical seeds.
"""

from __future__ import annotations

import math
import os
import queue
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .classifier import ClassificationResult, Snapshot, classify
from .scenario import ScenarioBundle
from .thermal import (
    DetectorState,
    detection_bit,
    hot_pixel_mask,
    hot_pixels,
    update_detector_from_mask,
)
from .vehicle import (
    MowerStatus,
    PatrolLeg,
    PatrolProgram,
    VehicleEvent,
    VehicleState,
    plan_patrol,
    drive_tick,
    transition,
)
from .world import (
    ANIMAL_KINDS,
    Pose,
    WorldState,
    build_world,
    coverage_fraction,
    dead_pixel_grid,
    estimate_extent,
    ground_ranges,
    mark_swath,
    sample_thermal,
    slot_of_tick,
    step_entities,
)

EVENT_FOR_LABEL = {
    "hedgehog": VehicleEvent.CLASSIFIED_HEDGEHOG,
    "hedgehog_with_cubs": VehicleEvent.CLASSIFIED_FAMILY,
    "snake": VehicleEvent.CLASSIFIED_SNAKE,
    "wounded_animal": VehicleEvent.CLASSIFIED_WOUNDED,
    "other_warm": VehicleEvent.CLASSIFIED_OTHER,
    "none": VehicleEvent.CLASSIFIED_OTHER,
}

Rect = tuple[float, float, float, float]  # (min_x, min_y, max_x, max_y)


@dataclass
class TaskHandle:
    """One classification task; at most one is non-terminal at any tick."""

    task_id: int
    started_tick: int
    ready_tick: int
    snapshot: Snapshot
    snapshot_pose: Pose
    state: str = "pending"  # pending | completed | cancelled
    result: Optional[ClassificationResult] = None
    ended_tick: Optional[int] = None


@dataclass
class SimReport:
    ticks_run: int
    encounters: int
    stops: int
    false_stops: int
    coverage_fraction: float
    halted_manual: bool
    shutdown: bool
    trace_ref: Optional[str] = None

    def to_json_obj(self) -> dict:
        return {
            "ticks_run": self.ticks_run,
            "encounters": self.encounters,
            "stops": self.stops,
            "false_stops": self.false_stops,
            "coverage_fraction": self.coverage_fraction,
            "halted_manual": self.halted_manual,
            "shutdown": self.shutdown,
            "trace_ref": self.trace_ref,
        }


class ProtectedZoneRegistry:
    """Temporarily excluded lawn rectangles with expiry ticks."""

    def __init__(self) -> None:
        self._zones: list[tuple[Rect, int]] = []

    def register(self, rect: Rect, expires_at_tick: int) -> None:
        self._zones.append((rect, expires_at_tick))

    def prune(self, tick: int) -> None:
        self._zones = [(r, t) for r, t in self._zones if t > tick]

    def active(self, tick: int) -> list[Rect]:
        return [r for r, t in self._zones if t > tick]

    def __len__(self) -> int:
        return len(self._zones)


def write_flag_file(path, bit: int) -> None:
    """Atomically publish the detection bit as exactly "0\\n" or "1\\n"."""
    if bit not in (0, 1):
        raise ValueError(f"flag bit must be 0 or 1, got {bit!r}")
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".flag-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(b"1\n" if bit else b"0\n")
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def read_flag_file(path) -> int:
    """Read the detection bit back; anything but "0\\n"/"1\\n" is an error."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data == b"0\n":
        return 0
    if data == b"1\n":
        return 1
    raise ValueError(f"malformed flag file content {data!r}")


def _split_rect(rect: Rect, hole: Rect) -> list[Rect]:
    """Axis-aligned pieces of rect not covered by hole (guillotine cut)."""
    rx0, ry0, rx1, ry1 = rect
    hx0, hy0, hx1, hy1 = hole
    if hx1 <= rx0 or hx0 >= rx1 or hy1 <= ry0 or hy0 >= ry1:
        return [rect]
    pieces = []
    if hx0 > rx0:
        pieces.append((rx0, ry0, hx0, ry1))
    if hx1 < rx1:
        pieces.append((hx1, ry0, rx1, ry1))
    x0, x1 = max(rx0, hx0), min(rx1, hx1)
    if hy0 > ry0:
        pieces.append((x0, ry0, x1, hy0))
    if hy1 < ry1:
        pieces.append((x0, hy1, x1, ry1))
    return pieces


def free_rectangles(lawn: Rect, holes: list[Rect]) -> list[Rect]:
    """Rectangles of the lawn untouched by any hole."""
    rects = [lawn]
    for hole in holes:
        rects = [piece for rect in rects for piece in _split_rect(rect, hole)]
    return rects


def plan_patrol_avoiding(
    lawn: Rect,
    holes: list[Rect],
    pose: Pose,
    speed: float,
    margin: float,
) -> Optional[PatrolProgram]:
    """Rectangular circuit anchored at the current pose that avoids holes.

    Picks the largest hole-free rectangle containing the pose and lays a
    four-leg loop from the pose toward that rectangle's far corner. Returns
    None when no room is left (caller keeps the previous program).
    """
    candidates = [
        r for r in free_rectangles(lawn, holes)
        if r[0] <= pose.x <= r[2] and r[1] <= pose.y <= r[3]
    ]
    if not candidates:
        return None
    rect = max(candidates, key=lambda r: (r[2] - r[0]) * (r[3] - r[1]))
    x0, y0, x1, y1 = (
        rect[0] + margin, rect[1] + margin, rect[2] - margin, rect[3] - margin
    )
    if x1 <= x0 or y1 <= y0:
        return None
    sx = 1 if (x1 - pose.x) >= (pose.x - x0) else -1
    sy = 1 if (y1 - pose.y) >= (pose.y - y0) else -1
    width = (x1 - pose.x) if sx > 0 else (pose.x - x0)
    height = (y1 - pose.y) if sy > 0 else (pose.y - y0)
    ticks_w = int(width / speed)
    ticks_h = int(height / speed)
    if ticks_w < 1 or ticks_h < 1:
        return None
    start_heading = 0.0 if sx > 0 else math.pi
    # A left turn from +x goes to +y, from -x to -y; flip when that does
    # not match the wanted cross direction.
    left_gives = sx
    turn = math.pi / 2 if sy == left_gives else -math.pi / 2
    legs = (
        PatrolLeg(ticks_w, turn),
        PatrolLeg(ticks_h, turn),
        PatrolLeg(ticks_w, turn),
        PatrolLeg(ticks_h, turn),
    )
    return PatrolProgram(legs=legs, speed_m_per_tick=speed, start_heading=start_heading)


def simulate_program(program: PatrolProgram, start: Pose, ticks: int) -> list[Pose]:
    """Pose sequence of an uninterrupted forward run (audit helper)."""
    state = VehicleState(pose=start, status=MowerStatus.FORWARD)
    poses = [start]
    for _ in range(ticks):
        state = drive_tick(state, program)
        poses.append(state.pose)
    return poses


class Simulation:
    """Owns the full per-tick loop and all cross-module state."""

    def __init__(
        self,
        bundle: ScenarioBundle,
        seed: Optional[int] = None,
        flag_path=None,
        mode: str = "virtual",
        restart_ticks=(),
    ):
        if mode not in ("virtual", "real-task"):
            raise ValueError(f"unknown mode {mode!r}")
        self.bundle = bundle
        self.scenario = bundle.scenario
        self.seed = bundle.scenario.seed if seed is None else seed
        self.flag_path = flag_path
        self.mode = mode
        self.restart_ticks = frozenset(int(t) for t in restart_ticks)

        self.world: WorldState = build_world(self.scenario)
        self.program = self._initial_program()
        self.vehicle = VehicleState(
            pose=self.scenario.mower_start, status=MowerStatus.FORWARD
        )
        self.detector = DetectorState()
        self.zones = ProtectedZoneRegistry()
        self.task: Optional[TaskHandle] = None
        self.trace: list[dict] = []
        self.flag_bit = 0

        self._prev_bit = 0
        self._next_task_id = 1
        self.last_frame: Optional[np.ndarray] = None
        self._dead_grid = dead_pixel_grid(self.scenario)
        self._noise_rng = np.random.default_rng([self.seed, 0])
        self._notifications: list[dict] = []

        self.encounters = 0
        self.stops = 0
        self.false_stops = 0

        self._executor: Optional[ThreadPoolExecutor] = None
        self._completions: "queue.Queue[tuple[int, object]]" = queue.Queue()
        self._done: dict[int, object] = {}
        if mode == "real-task":
            self._executor = ThreadPoolExecutor(max_workers=1)

    # -- setup helpers --

    def _initial_program(self) -> PatrolProgram:
        sc = self.scenario
        speed = self.bundle.mower.speed_m_per_tick
        leg_ticks = self.bundle.mower.leg_ticks
        if leg_ticks is None:
            span = sc.lawn_width_m - sc.mower_start.x - 0.5
            leg_ticks = max(1, int(span / speed))
        return plan_patrol(
            (sc.lawn_width_m, sc.lawn_height_m), speed, leg_ticks, sc.mower_start
        )

    def _task_rng(self, task_id: int) -> np.random.Generator:
        return np.random.default_rng(
            [self.seed, self.bundle.classifier.confusion_seed, 7, task_id]
        )

    # -- task lifecycle --

    def _visible_truth(self) -> tuple[tuple[str, float], ...]:
        """Ground-truth (kind, in-view fraction) per entity, best first.

        Visibility is evaluated at nine sample points of each disc: inside
        the horizontal field of view and nearer than the farthest visible
        ground range (unbounded for a level camera).
        """
        cam = self.scenario.camera
        pose = self.vehicle.pose
        ranges = ground_ranges(cam)
        far = float(np.max(ranges))
        half_h = cam.hfov_rad / 2
        entries = []
        ring = [
            (0.0, 0.0), (1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0),
            (0.707, 0.707), (0.707, -0.707), (-0.707, 0.707), (-0.707, -0.707),
        ]
        for i, ent in enumerate(self.scenario.entities):
            if not self.world.present[i]:
                continue
            cx, cy = self.world.positions[i]
            visible = 0
            for ux, uy in ring:
                px = cx + ux * ent.radius_m
                py = cy + uy * ent.radius_m
                dx, dy = px - pose.x, py - pose.y
                dist = math.hypot(dx, dy)
                if dist > far:
                    continue
                off = (math.atan2(dy, dx) - pose.heading) % (2 * math.pi)
                if off > math.pi:
                    off -= 2 * math.pi
                if abs(off) <= half_h:
                    visible += 1
            if visible:
                entries.append((ent.id, ent.kind, visible / len(ring)))
        entries.sort(key=lambda e: (-e[2], e[0]))
        return tuple((kind, frac) for _, kind, frac in entries)

    def spawn_classification(self, snapshot: Snapshot) -> TaskHandle:
        if self.task is not None and self.task.state == "pending":
            raise RuntimeError("a classification task is already live")
        handle = TaskHandle(
            task_id=self._next_task_id,
            started_tick=self.world.tick,
            ready_tick=self.world.tick + self.bundle.classifier.init_latency_ticks,
            snapshot=snapshot,
            snapshot_pose=self.vehicle.pose,
        )
        self._next_task_id += 1
        self.task = handle
        if self._executor is not None:
            spec = self.bundle.classifier
            detector = self.bundle.detector
            rng = self._task_rng(handle.task_id)
            slot = slot_of_tick(self.scenario, snapshot.taken_at_tick)
            task_id = handle.task_id
            out = self._completions

            def _worker() -> None:
                try:
                    out.put((task_id, classify(spec, snapshot, rng, slot, detector)))
                except BaseException as exc:  # surface worker faults at delivery
                    out.put((task_id, exc))

            self._executor.submit(_worker)
        return handle

    def cancel_classification(self, handle: TaskHandle) -> None:
        if handle.state == "pending":
            handle.state = "cancelled"
            handle.ended_tick = self.world.tick

    def _drain_completions(self) -> None:
        """Pull finished worker results; drop any for non-pending tasks."""
        while True:
            try:
                task_id, payload = self._completions.get_nowait()
            except queue.Empty:
                break
            self._done[task_id] = payload
        live = (self.task.task_id
                if self.task is not None and self.task.state == "pending" else None)
        self._done = {k: v for k, v in self._done.items() if k == live}

    def _deliver_result(self, handle: TaskHandle) -> ClassificationResult:
        if self._executor is None:
            result = classify(
                self.bundle.classifier,
                handle.snapshot,
                self._task_rng(handle.task_id),
                slot_of_tick(self.scenario, handle.snapshot.taken_at_tick),
                self.bundle.detector,
            )
        else:
            # the ready tick gates delivery; wait for the worker if it has
            # not reported yet so both modes stay tick-deterministic
            while handle.task_id not in self._done:
                task_id, payload = self._completions.get()
                self._done[task_id] = payload
            payload = self._done.pop(handle.task_id)
            if isinstance(payload, BaseException):
                raise payload
            result = payload
        handle.state = "completed"
        handle.result = result
        handle.ended_tick = self.world.tick
        return result

    # -- policy side effects --

    def _estimated_target(self, handle: TaskHandle):
        flagged = hot_pixels(handle.snapshot.thermal, self.bundle.detector)
        if flagged:
            extent = estimate_extent(flagged, self.scenario.camera, handle.snapshot_pose)
            if extent is not None:
                return extent
        return None

    def _zone_rect_for(self, handle: TaskHandle) -> Rect:
        margin = self.bundle.sim.protect.margin_m
        extent = self._estimated_target(handle)
        if extent is not None:
            x0, y0, x1, y1 = extent.footprint
            rect = (x0 - margin, y0 - margin, x1 + margin, y1 + margin)
        else:
            # Indeterminate extent (level camera): protect a default square
            # ahead of the mower instead.
            half = self.bundle.sim.protect.fallback_half_size_m
            pose = handle.snapshot_pose
            ahead = 1.0 + half
            cx = pose.x + ahead * math.cos(pose.heading)
            cy = pose.y + ahead * math.sin(pose.heading)
            rect = (cx - half, cy - half, cx + half, cy + half)
        sc = self.scenario
        return (
            max(0.0, rect[0]), max(0.0, rect[1]),
            min(sc.lawn_width_m, rect[2]), min(sc.lawn_height_m, rect[3]),
        )

    def _protect_expiry(self) -> int:
        ticks = self.bundle.sim.protect.expiry_ticks
        if ticks is None:
            sc = self.scenario
            ticks = max(1, int(sc.schedule.seconds_per_day / sc.tick_seconds))
        return self.world.tick + ticks

    def _replan_around_zones(self) -> None:
        sc = self.scenario
        program = plan_patrol_avoiding(
            (0.0, 0.0, sc.lawn_width_m, sc.lawn_height_m),
            self.zones.active(self.world.tick),
            self.vehicle.pose,
            self.bundle.mower.speed_m_per_tick,
            self.bundle.sim.protect.margin_m,
        )
        if program is not None:
            self.program = program
            self.vehicle = replace(self.vehicle, leg_index=0, leg_elapsed=0)

    def apply_policy(self, result: ClassificationResult, handle: TaskHandle) -> VehicleEvent:
        """Map a completed classification onto an event plus side effects."""
        if result.label == "hedgehog_with_cubs":
            self.zones.register(self._zone_rect_for(handle), self._protect_expiry())
            self._replan_around_zones()
        elif result.label == "wounded_animal":
            extent = self._estimated_target(handle)
            if extent is not None:
                fx0, fy0, fx1, fy1 = extent.footprint
                position = [(fx0 + fx1) / 2, (fy0 + fy1) / 2]
            else:
                pose = handle.snapshot_pose
                position = [
                    pose.x + math.cos(pose.heading),
                    pose.y + math.sin(pose.heading),
                ]
            self._notifications.append(
                {"tick": self.world.tick, "position": position}
            )
        return EVENT_FOR_LABEL[result.label]

    # -- metrics --

    def _animal_within(self, radius: float) -> bool:
        pose = self.vehicle.pose
        for i, ent in enumerate(self.scenario.entities):
            if ent.kind not in ANIMAL_KINDS or not self.world.present[i]:
                continue
            ex, ey = self.world.positions[i]
            if math.hypot(ex - pose.x, ey - pose.y) <= radius + ent.radius_m:
                return True
        return False

    def _overlapping_animal(self) -> bool:
        return self._animal_within(self.scenario.mower_radius_m)

    # -- the tick itself --

    def tick(self) -> dict:
        sc = self.scenario

        # 1. entities
        self.world = step_entities(self.world, sc)
        t = self.world.tick

        # 2. thermal frame
        rng = self._noise_rng if sc.noise_sigma_c > 0 else None
        frame = sample_thermal(self.world, sc, self.vehicle.pose, self._dead_grid, rng)
        self.last_frame = frame

        # 3. detector
        mask = hot_pixel_mask(frame, self.bundle.detector)
        self.detector, _ = update_detector_from_mask(
            self.detector, mask, self.bundle.detector
        )
        bit = detection_bit(self.detector)
        flagged_count = int(mask.sum())

        # 4. publish the bit
        self.flag_bit = bit
        if self.flag_path is not None:
            write_flag_file(self.flag_path, bit)

        # 5. task lifecycle and event queueing
        if self._executor is not None:
            self._drain_completions()
        notifications_before = len(self._notifications)
        events: list[VehicleEvent] = []
        if t in self.restart_ticks:
            events.append(VehicleEvent.MANUAL_RESTART)
        rising = bit == 1 and self._prev_bit == 0
        falling = bit == 0 and self._prev_bit == 1
        if rising:
            events.append(VehicleEvent.WARM_DETECTED)
            if self.task is None or self.task.state != "pending":
                snapshot = Snapshot(
                    thermal=frame.copy(),
                    visible_truth=self._visible_truth(),
                    taken_at_tick=t,
                )
                self.spawn_classification(snapshot)
        pending = self.task is not None and self.task.state == "pending"
        if falling and pending:
            self.cancel_classification(self.task)
            pending = False
        if pending and t >= self.task.ready_tick:
            result = self._deliver_result(self.task)
            events.append(self.apply_policy(result, self.task))
            pending = False
        if (bit == 0 and not pending
                and self.vehicle.status is MowerStatus.STOPPED
                and not self.vehicle.halted_manual
                and not self.vehicle.shutdown):
            events.append(VehicleEvent.WARM_CLEARED)

        # 6. vehicle transitions
        status_before = self.vehicle.status
        for event in events:
            self.vehicle = transition(self.vehicle, event)

        # 7. motion and coverage
        pose_before = self.vehicle.pose
        self.vehicle = drive_tick(self.vehicle, self.program)
        if self.vehicle.status is MowerStatus.FORWARD and self.vehicle.blade_on:
            self.world = mark_swath(self.world, sc, pose_before, self.vehicle.pose)
        self.zones.prune(t)

        # metrics
        if (status_before is MowerStatus.FORWARD
                and self.vehicle.status is MowerStatus.STOPPED):
            self.stops += 1
            if not self._animal_within(self.bundle.sim.interaction_range_m):
                self.false_stops += 1
        if self.vehicle.blade_on and self._overlapping_animal():
            self.encounters += 1
        self._prev_bit = bit

        # 8. trace record
        if self.task is None:
            task_state = None
        elif self.task.state == "pending":
            task_state = "pending"
        elif self.task.ended_tick == t:
            task_state = self.task.state  # show the terminal state once
        else:
            task_state = None
        record = {
            "tick": t,
            "pose": {
                "x": self.vehicle.pose.x,
                "y": self.vehicle.pose.y,
                "heading": self.vehicle.pose.heading,
            },
            "status": int(self.vehicle.status),
            "detection": bit,
            "flagged_count": flagged_count,
            "events": [event.value for event in events],
            "task_state": task_state,
            "notifications": self._notifications[notifications_before:],
        }
        self.trace.append(record)
        return record

    def run_ticks(self, ticks: int) -> None:
        for _ in range(ticks):
            self.tick()

    def report(self, trace_ref: Optional[str] = None) -> SimReport:
        return SimReport(
            ticks_run=self.world.tick,
            encounters=self.encounters,
            stops=self.stops,
            false_stops=self.false_stops,
            coverage_fraction=coverage_fraction(self.world),
            halted_manual=self.vehicle.halted_manual,
            shutdown=self.vehicle.shutdown,
            trace_ref=trace_ref,
        )

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True, cancel_futures=True)
            self._executor = None

    def __enter__(self) -> "Simulation":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def run(
    bundle: ScenarioBundle,
    ticks: int,
    seed: Optional[int] = None,
    flag_path=None,
    mode: str = "virtual",
    restart_ticks=(),
    trace_ref: Optional[str] = None,
) -> SimReport:
    """Build a world from the bundle and execute exactly `ticks` ticks."""
    with Simulation(
        bundle, seed=seed, flag_path=flag_path, mode=mode, restart_ticks=restart_ticks
    ) as sim:
        sim.run_ticks(ticks)
        return sim.report(trace_ref=trace_ref)
