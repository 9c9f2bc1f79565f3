"""Simulated lawn, warm entities, and the camera's view of them.

Entities are uniform-temperature columns standing on a disc footprint in
the ground plane. A pixel ray is defined by its depression angle below
horizontal (camera pitch plus the per-row offset) and its bearing (mower
heading plus the per-column offset). Rays pointing at or above horizontal
sweep an unbounded ground trace and therefore see warm columns at any
range; rays pointing below horizontal terminate where they meet the
ground, so they only see what stands inside their ground footprint. The
pixel at (rows//2, cols//2) lies exactly on the optical axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .thermal import COLS, ROWS

ANIMAL_KINDS = frozenset({"hedgehog", "hedgehog_family", "snake", "wounded_animal"})
ENTITY_KINDS = ANIMAL_KINDS | {"bonfire", "garden_light", "generic_warm"}

# Scenario-authoring defaults: active hedgehogs run warm; hibernating ones
# cool down far enough that a 5 C contrast detector cannot see them.
HEDGEHOG_BODY_TEMP_C = 34.0
WINTER_HEDGEHOG_BODY_TEMP_C = 8.0


@dataclass(frozen=True)
class Pose:
    """Planar pose: position in meters, heading in radians CCW from +x."""

    x: float
    y: float
    heading: float = 0.0


@dataclass(frozen=True)
class Stationary:
    pass


@dataclass(frozen=True)
class Waypoints:
    """Scripted motion: (x, y, arrival_tick) anchors, linearly interpolated."""

    points: tuple[tuple[float, float, int], ...]


@dataclass(frozen=True)
class AppearanceWindow:
    """Entity exists only while the current time slot is inside the window.

    Slots are inclusive on both ends; `daily` windows recur every simulated
    day, otherwise the window applies to day zero only.
    """

    zone: int
    start_slot: int
    end_slot: int
    daily: bool = True


Motion = Union[Stationary, Waypoints, AppearanceWindow]


@dataclass(frozen=True)
class Entity:
    id: str
    kind: str
    position_m: tuple[float, float]
    radius_m: float
    surface_temp_c: float
    motion: Motion = field(default_factory=Stationary)


@dataclass(frozen=True)
class CameraModel:
    """Thermal camera mounting and field of view.

    pitch_rad 0 points level with the ground (no distance information);
    pitch_rad > 0 tilts the optical axis toward the ground ahead.
    """

    mount_height_m: float = 1.0
    pitch_rad: float = 0.0
    hfov_rad: float = math.radians(55.0)
    vfov_rad: float = math.radians(35.0)
    rows: int = ROWS
    cols: int = COLS


@dataclass(frozen=True)
class ScheduleConfig:
    """Discretisation of the day into slots and of the lawn into zones."""

    slots_per_day: int = 24
    seconds_per_day: float = 86400.0
    n_zones: int = 4


@dataclass(frozen=True)
class Scenario:
    lawn_width_m: float
    lawn_height_m: float
    cell_size_m: float = 0.5
    ambient_c: float = 20.0
    entities: tuple[Entity, ...] = ()
    camera: CameraModel = CameraModel()
    mower_start: Pose = Pose(0.5, 0.5, 0.0)
    tick_seconds: float = 1.0
    seed: int = 0
    schedule: ScheduleConfig = ScheduleConfig()
    mower_radius_m: float = 0.25
    noise_sigma_c: float = 0.5
    dead_pixels: tuple[tuple[int, int, float], ...] = ()


@dataclass(eq=False)
class WorldState:
    """Per-tick world snapshot: entity placement and mowed-cell coverage."""

    tick: int
    positions: np.ndarray  # (N, 2) meters
    present: np.ndarray    # (N,) bool
    coverage: np.ndarray   # (ny, nx) bool, row y / col x


def validate_scenario(scenario: Scenario) -> None:
    """Raise ValueError on any violated scenario invariant."""
    if scenario.lawn_width_m <= 0 or scenario.lawn_height_m <= 0:
        raise ValueError(
            f"lawn dimensions must be positive, got "
            f"{scenario.lawn_width_m} x {scenario.lawn_height_m}"
        )
    if scenario.cell_size_m <= 0:
        raise ValueError(f"cell_size_m must be positive, got {scenario.cell_size_m}")
    for extent, name in (
        (scenario.lawn_width_m, "lawn_width_m"),
        (scenario.lawn_height_m, "lawn_height_m"),
    ):
        cells = extent / scenario.cell_size_m
        if abs(cells - round(cells)) > 1e-6 * max(1.0, cells):
            raise ValueError(
                f"cell_size_m {scenario.cell_size_m} does not divide {name} {extent}"
            )
    if scenario.tick_seconds <= 0:
        raise ValueError(f"tick_seconds must be positive, got {scenario.tick_seconds}")
    cam = scenario.camera
    if cam.mount_height_m <= 0:
        raise ValueError(f"mount_height_m must be positive, got {cam.mount_height_m}")
    if not (0 <= cam.pitch_rad < math.pi / 2):
        raise ValueError(f"pitch_rad must be in [0, pi/2), got {cam.pitch_rad}")
    for fov, name in ((cam.hfov_rad, "hfov_rad"), (cam.vfov_rad, "vfov_rad")):
        if not (0 < fov < math.pi):
            raise ValueError(f"{name} must be in (0, pi), got {fov}")
    sched = scenario.schedule
    if sched.slots_per_day < 1 or sched.seconds_per_day <= 0 or sched.n_zones < 1:
        raise ValueError("schedule config must have positive slots, seconds and zones")
    if not (0 <= scenario.mower_start.x <= scenario.lawn_width_m
            and 0 <= scenario.mower_start.y <= scenario.lawn_height_m):
        raise ValueError(
            f"mower_start {scenario.mower_start.x, scenario.mower_start.y} "
            f"outside lawn bounds"
        )
    if scenario.mower_radius_m <= 0:
        raise ValueError(f"mower_radius_m must be positive, got {scenario.mower_radius_m}")
    if scenario.noise_sigma_c < 0:
        raise ValueError(f"noise_sigma_c must be >= 0, got {scenario.noise_sigma_c}")
    for row, col, _ in scenario.dead_pixels:
        if not (0 <= row < cam.rows and 0 <= col < cam.cols):
            raise ValueError(f"dead pixel ({row}, {col}) outside the sensor grid")
    seen_ids = set()
    for ent in scenario.entities:
        if ent.id in seen_ids:
            raise ValueError(f"duplicate entity id {ent.id!r}")
        seen_ids.add(ent.id)
        if ent.kind not in ENTITY_KINDS:
            raise ValueError(f"unknown entity kind {ent.kind!r}")
        if ent.radius_m <= 0:
            raise ValueError(f"entity {ent.id!r} radius_m must be positive, got {ent.radius_m}")
        x, y = ent.position_m
        if not (0 <= x <= scenario.lawn_width_m and 0 <= y <= scenario.lawn_height_m):
            raise ValueError(f"entity {ent.id!r} at ({x}, {y}) is outside the lawn")
        if isinstance(ent.motion, Waypoints):
            pts = ent.motion.points
            if not pts:
                raise ValueError(f"entity {ent.id!r} has an empty waypoint script")
            ticks = [p[2] for p in pts]
            if any(b <= a for a, b in zip(ticks, ticks[1:])):
                raise ValueError(f"entity {ent.id!r} waypoint ticks must strictly increase")
            for wx, wy, _ in pts:
                if not (0 <= wx <= scenario.lawn_width_m and 0 <= wy <= scenario.lawn_height_m):
                    raise ValueError(f"entity {ent.id!r} waypoint ({wx}, {wy}) outside the lawn")
        elif isinstance(ent.motion, AppearanceWindow):
            win = ent.motion
            if not (0 <= win.start_slot < win.end_slot < sched.slots_per_day):
                raise ValueError(
                    f"entity {ent.id!r} appearance window "
                    f"[{win.start_slot}, {win.end_slot}] invalid for "
                    f"{sched.slots_per_day} slots per day"
                )


def grid_shape(scenario: Scenario) -> tuple[int, int]:
    """Coverage grid shape (ny, nx) implied by lawn size and cell size."""
    nx = int(round(scenario.lawn_width_m / scenario.cell_size_m))
    ny = int(round(scenario.lawn_height_m / scenario.cell_size_m))
    return ny, nx


def slot_of_tick(scenario: Scenario, tick: int) -> int:
    """Time-of-day slot index for a tick, wrapping at day boundaries."""
    sched = scenario.schedule
    slot_seconds = sched.seconds_per_day / sched.slots_per_day
    return int(tick * scenario.tick_seconds // slot_seconds) % sched.slots_per_day


def _absolute_slot(scenario: Scenario, tick: int) -> int:
    sched = scenario.schedule
    slot_seconds = sched.seconds_per_day / sched.slots_per_day
    return int(tick * scenario.tick_seconds // slot_seconds)


def entity_position(entity: Entity, tick: int) -> tuple[float, float]:
    """Scripted position of an entity at a tick (pure function of the script)."""
    motion = entity.motion
    if not isinstance(motion, Waypoints):
        return entity.position_m
    pts = motion.points
    if tick <= pts[0][2]:
        return pts[0][0], pts[0][1]
    for (x0, y0, t0), (x1, y1, t1) in zip(pts, pts[1:]):
        if tick <= t1:
            frac = (tick - t0) / (t1 - t0)
            return x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)
    return pts[-1][0], pts[-1][1]


def entity_present(entity: Entity, scenario: Scenario, tick: int) -> bool:
    """Whether the entity exists in the world at the given tick."""
    motion = entity.motion
    if not isinstance(motion, AppearanceWindow):
        return True
    if motion.daily:
        slot = slot_of_tick(scenario, tick)
    else:
        slot = _absolute_slot(scenario, tick)
    return motion.start_slot <= slot <= motion.end_slot


def _placement(scenario: Scenario, tick: int) -> tuple[np.ndarray, np.ndarray]:
    n = len(scenario.entities)
    positions = np.zeros((n, 2), dtype=float)
    present = np.zeros(n, dtype=bool)
    for i, ent in enumerate(scenario.entities):
        positions[i] = entity_position(ent, tick)
        present[i] = entity_present(ent, scenario, tick)
    return positions, present


def build_world(scenario: Scenario) -> WorldState:
    """Initial world state at tick 0; rejects invalid scenarios."""
    validate_scenario(scenario)
    positions, present = _placement(scenario, 0)
    return WorldState(
        tick=0,
        positions=positions,
        present=present,
        coverage=np.zeros(grid_shape(scenario), dtype=bool),
    )


def step_entities(world: WorldState, scenario: Scenario) -> WorldState:
    """Advance the world by one tick; coverage is carried over unchanged."""
    tick = world.tick + 1
    positions, present = _placement(scenario, tick)
    return WorldState(
        tick=tick,
        positions=positions,
        present=present,
        coverage=world.coverage.copy(),
    )


# --- camera geometry ---

def _row_depressions(camera: CameraModel) -> np.ndarray:
    """Per-row depression angle below horizontal (positive looks down)."""
    rows = np.arange(camera.rows)
    return camera.pitch_rad + (rows - camera.rows // 2) * (camera.vfov_rad / camera.rows)


def _col_offsets(camera: CameraModel) -> np.ndarray:
    """Per-column bearing offset; subtracted from heading (CCW convention)."""
    cols = np.arange(camera.cols)
    return (cols - camera.cols // 2) * (camera.hfov_rad / camera.cols)


def ground_ranges(camera: CameraModel) -> np.ndarray:
    """Horizontal distance at which each row's ray meets the ground.

    Rows looking at or above horizontal get +inf: their trace never ends.
    """
    phi = _row_depressions(camera)
    with np.errstate(divide="ignore"):
        ranges = camera.mount_height_m / np.tan(phi)
    return np.where(phi > 0, ranges, np.inf)


def project_pixel_to_ground(
    camera: CameraModel, pixel: tuple[int, int], mower_pose: Pose
) -> Optional[np.ndarray]:
    """World-frame ground point seen by a pixel, or None if its ray never
    meets the ground (level or upward ray)."""
    row, col = pixel
    if not (0 <= row < camera.rows and 0 <= col < camera.cols):
        raise ValueError(f"pixel {pixel} outside {camera.rows}x{camera.cols} frame")
    phi = camera.pitch_rad + (row - camera.rows // 2) * (camera.vfov_rad / camera.rows)
    if phi <= 0:
        return None
    forward = camera.mount_height_m / math.tan(phi)
    bearing = mower_pose.heading - (col - camera.cols // 2) * (camera.hfov_rad / camera.cols)
    return np.array(
        [mower_pose.x + forward * math.cos(bearing),
         mower_pose.y + forward * math.sin(bearing)]
    )


def sample_thermal(
    world: WorldState,
    scenario: Scenario,
    mower_pose: Pose,
    dead_pixel_mask: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Render one thermal frame from the mower's pose.

    Each pixel reports the surface temperature of the nearest entity column
    crossed by its ground trace, else ambient. Dead pixels then overwrite
    their cells with the stuck value, and Gaussian noise (scenario sigma)
    is added last when an rng is supplied.
    """
    cam = scenario.camera
    frame = np.full((cam.rows, cam.cols), float(scenario.ambient_c))
    max_range = ground_ranges(cam)[:, None]  # (rows, 1)
    bearings = mower_pose.heading - _col_offsets(cam)  # (cols,)
    dirs = np.stack([np.cos(bearings), np.sin(bearings)], axis=1)  # (cols, 2)
    origin = np.array([mower_pose.x, mower_pose.y])
    nearest = np.full((cam.rows, cam.cols), np.inf)
    for i, ent in enumerate(scenario.entities):
        if not world.present[i]:
            continue
        oc = world.positions[i] - origin
        r2 = ent.radius_m * ent.radius_m
        dist2 = float(oc @ oc)
        proj = dirs @ oc  # (cols,)
        perp2 = dist2 - proj * proj
        crossed = perp2 <= r2
        root = np.sqrt(np.maximum(r2 - perp2, 0.0))
        entry = np.where(dist2 <= r2, 0.0, proj - root)  # first contact distance
        valid = crossed & (entry >= 0.0)
        hit = valid[None, :] & (entry[None, :] <= max_range)
        closer = hit & (np.broadcast_to(entry, frame.shape) < nearest)
        frame[closer] = ent.surface_temp_c
        nearest = np.where(closer, np.broadcast_to(entry, frame.shape), nearest)
    if dead_pixel_mask is not None:
        stuck = np.isfinite(dead_pixel_mask)
        frame[stuck] = dead_pixel_mask[stuck]
    if rng is not None and scenario.noise_sigma_c > 0:
        frame = frame + rng.normal(0.0, scenario.noise_sigma_c, frame.shape)
    return frame


def dead_pixel_grid(scenario: Scenario) -> Optional[np.ndarray]:
    """Stuck-value grid for `sample_thermal` (NaN marks live pixels)."""
    if not scenario.dead_pixels:
        return None
    grid = np.full((scenario.camera.rows, scenario.camera.cols), np.nan)
    for row, col, stuck_c in scenario.dead_pixels:
        grid[row, col] = stuck_c
    return grid


@dataclass(frozen=True)
class ExtentEstimate:
    """Ground-plane extent of a flagged region: bounding box and closest range."""

    footprint: tuple[float, float, float, float]  # (min_x, min_y, max_x, max_y)
    nearest_distance_m: float


def estimate_extent(
    flagged: set[tuple[int, int]], camera: CameraModel, mower_pose: Pose
) -> Optional[ExtentEstimate]:
    """Project flagged pixels onto the ground and bound them.

    Returns None when any flagged ray fails to meet the ground: with a
    level camera the size and distance of a warm object are indeterminate.
    """
    if not flagged:
        raise ValueError("flagged pixel set is empty")
    points = []
    for pixel in flagged:
        point = project_pixel_to_ground(camera, pixel, mower_pose)
        if point is None:
            return None
        points.append(point)
    pts = np.array(points)
    dists = np.hypot(pts[:, 0] - mower_pose.x, pts[:, 1] - mower_pose.y)
    return ExtentEstimate(
        footprint=(
            float(pts[:, 0].min()), float(pts[:, 1].min()),
            float(pts[:, 0].max()), float(pts[:, 1].max()),
        ),
        nearest_distance_m=float(dists.min()),
    )


def mark_swath(
    world: WorldState, scenario: Scenario, start: Pose, end: Pose
) -> WorldState:
    """Mark coverage cells traversed by the mower center between two poses."""
    coverage = world.coverage.copy()
    ny, nx = coverage.shape
    length = math.hypot(end.x - start.x, end.y - start.y)
    steps = max(1, int(math.ceil(length / (scenario.cell_size_m / 2))))
    for k in range(steps + 1):
        frac = k / steps
        x = start.x + frac * (end.x - start.x)
        y = start.y + frac * (end.y - start.y)
        ix = int(x / scenario.cell_size_m)
        iy = int(y / scenario.cell_size_m)
        if 0 <= ix < nx and 0 <= iy < ny:
            coverage[iy, ix] = True
    return replace(world, coverage=coverage)


def coverage_fraction(world: WorldState) -> float:
    return float(world.coverage.mean()) if world.coverage.size else 0.0
