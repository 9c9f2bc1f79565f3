"""Scenario file ingestion and emission.

One JSON document configures everything: lawn geometry, entities, camera,
detector thresholds, classifier stand-in, mower kinematics and the
scheduling grid. The schema is strict: unknown keys are rejected with
their full path, and every range violation names the field and the
offending value. parse(serialize(bundle)) reproduces the bundle exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Optional

from .classifier import DEFAULT_BANDS, BlobBand, ClassifierSpec
from .thermal import DetectorConfig
from .world import (
    ENTITY_KINDS,
    AppearanceWindow,
    CameraModel,
    Entity,
    Pose,
    Scenario,
    ScheduleConfig,
    Stationary,
    Waypoints,
    validate_scenario,
)


class ScenarioError(ValueError):
    """Schema or range violation, with the JSON path that caused it."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


_MISSING = object()


class _Node:
    """A dict being consumed key by key; leftovers are schema violations."""

    def __init__(self, obj: Any, path: str):
        if not isinstance(obj, dict):
            raise ScenarioError(path, f"expected an object, got {type(obj).__name__}")
        self._obj = dict(obj)
        self.path = path

    def take(self, key: str, default: Any = _MISSING) -> Any:
        if key in self._obj:
            return self._obj.pop(key)
        if default is _MISSING:
            raise ScenarioError(f"{self.path}.{key}", "required field is missing")
        return default

    def child(self, key: str) -> Optional["_Node"]:
        raw = self.take(key, None)
        if raw is None:
            return None
        return _Node(raw, f"{self.path}.{key}")

    def number(
        self,
        key: str,
        default: Any = _MISSING,
        minimum: Optional[float] = None,
        exclusive_minimum: Optional[float] = None,
        maximum: Optional[float] = None,
        exclusive_maximum: Optional[float] = None,
    ) -> float:
        raw = self.take(key, default)
        path = f"{self.path}.{key}"
        if not isinstance(raw, (int, float)) or isinstance(raw, bool):
            raise ScenarioError(path, f"expected a number, got {raw!r}")
        value = float(raw)
        if not math.isfinite(value):
            raise ScenarioError(path, f"expected a finite number, got {raw!r}")
        if minimum is not None and value < minimum:
            raise ScenarioError(path, f"must be >= {minimum}, got {raw!r}")
        if exclusive_minimum is not None and value <= exclusive_minimum:
            raise ScenarioError(path, f"must be > {exclusive_minimum}, got {raw!r}")
        if maximum is not None and value > maximum:
            raise ScenarioError(path, f"must be <= {maximum}, got {raw!r}")
        if exclusive_maximum is not None and value >= exclusive_maximum:
            raise ScenarioError(path, f"must be < {exclusive_maximum}, got {raw!r}")
        return value

    def integer(
        self,
        key: str,
        default: Any = _MISSING,
        minimum: Optional[int] = None,
    ) -> int:
        raw = self.take(key, default)
        path = f"{self.path}.{key}"
        if not isinstance(raw, int) or isinstance(raw, bool):
            raise ScenarioError(path, f"expected an integer, got {raw!r}")
        if minimum is not None and raw < minimum:
            raise ScenarioError(path, f"must be >= {minimum}, got {raw!r}")
        return raw

    def string(self, key: str, default: Any = _MISSING, choices=None) -> str:
        raw = self.take(key, default)
        path = f"{self.path}.{key}"
        if not isinstance(raw, str):
            raise ScenarioError(path, f"expected a string, got {raw!r}")
        if choices is not None and raw not in choices:
            raise ScenarioError(path, f"must be one of {sorted(choices)}, got {raw!r}")
        return raw

    def boolean(self, key: str, default: Any = _MISSING) -> bool:
        raw = self.take(key, default)
        if not isinstance(raw, bool):
            raise ScenarioError(f"{self.path}.{key}", f"expected a boolean, got {raw!r}")
        return raw

    def array(self, key: str, default: Any = _MISSING) -> list:
        raw = self.take(key, default)
        if not isinstance(raw, list):
            raise ScenarioError(f"{self.path}.{key}", f"expected an array, got {raw!r}")
        return raw

    def finish(self) -> None:
        if self._obj:
            key = sorted(self._obj)[0]
            raise ScenarioError(f"{self.path}.{key}", "unknown field")


@dataclass(frozen=True)
class MowerConfig:
    speed_m_per_tick: float = 0.1
    leg_ticks: Optional[int] = None  # None: fit the longest leg to the lawn


@dataclass(frozen=True)
class ProtectConfig:
    """Protected-zone bookkeeping after a hedgehog-family classification."""

    expiry_ticks: Optional[int] = None  # None: one simulated day of ticks
    fallback_half_size_m: float = 1.0   # zone size when extent is indeterminate
    margin_m: float = 0.5               # clearance kept around zones when replanning


@dataclass(frozen=True)
class SimConfig:
    interaction_range_m: float = 3.0
    protect: ProtectConfig = ProtectConfig()


@dataclass(frozen=True)
class ScenarioBundle:
    scenario: Scenario
    detector: DetectorConfig
    classifier: ClassifierSpec
    mower: MowerConfig
    sim: SimConfig


def _parse_pose(node: _Node) -> Pose:
    pose = Pose(
        x=node.number("x"),
        y=node.number("y"),
        heading=node.number("heading_rad", 0.0),
    )
    node.finish()
    return pose


def _parse_motion(node: Optional[_Node], path: str):
    if node is None:
        return Stationary()
    kind = node.string("type", choices=("stationary", "waypoints", "appearance_window"))
    if kind == "stationary":
        node.finish()
        return Stationary()
    if kind == "waypoints":
        raw_points = node.array("points")
        points = []
        for i, raw in enumerate(raw_points):
            p = f"{node.path}.points[{i}]"
            if (not isinstance(raw, list) or len(raw) != 3
                    or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                               for v in raw)):
                raise ScenarioError(p, f"expected [x, y, arrival_tick], got {raw!r}")
            if int(raw[2]) != raw[2]:
                raise ScenarioError(p, f"arrival_tick must be an integer, got {raw[2]!r}")
            points.append((float(raw[0]), float(raw[1]), int(raw[2])))
        node.finish()
        return Waypoints(points=tuple(points))
    window = AppearanceWindow(
        zone=node.integer("zone", minimum=0),
        start_slot=node.integer("start_slot", minimum=0),
        end_slot=node.integer("end_slot", minimum=0),
        daily=node.boolean("daily", True),
    )
    node.finish()
    return window


def _parse_entity(raw: Any, path: str) -> Entity:
    node = _Node(raw, path)
    xy = node.array("position_m")
    if len(xy) != 2 or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in xy
    ):
        raise ScenarioError(f"{path}.position_m", f"expected [x, y], got {xy!r}")
    entity = Entity(
        id=node.string("id"),
        kind=node.string("kind", choices=ENTITY_KINDS),
        position_m=(float(xy[0]), float(xy[1])),
        radius_m=node.number("radius_m", exclusive_minimum=0.0),
        surface_temp_c=node.number("surface_temp_c"),
        motion=_parse_motion(node.child("motion"), path),
    )
    node.finish()
    return entity


def _parse_band(raw: Any, path: str) -> BlobBand:
    node = _Node(raw, path)
    # aspect_max may be Infinity (open-ended elongation), so bypass the
    # finite-number check used everywhere else.
    aspect_max = node.take("aspect_max")
    if not isinstance(aspect_max, (int, float)) or isinstance(aspect_max, bool):
        raise ScenarioError(f"{path}.aspect_max", f"expected a number, got {aspect_max!r}")
    band = BlobBand(
        label=node.string("label"),
        area_min=node.integer("area_min", minimum=1),
        area_max=node.integer("area_max", minimum=1),
        aspect_min=node.number("aspect_min", minimum=0.0),
        aspect_max=float(aspect_max),
        excess_min_c=node.number("excess_min_c"),
    )
    node.finish()
    return band


def _parse_classifier(node: Optional[_Node]) -> ClassifierSpec:
    if node is None:
        return ClassifierSpec()
    kind = node.string("kind", "oracle", choices=("oracle", "blob_feature"))
    night = node.take("night_slots", None)
    night_slots = None
    if night is not None:
        if (not isinstance(night, list) or len(night) != 2
                or not all(isinstance(v, int) and not isinstance(v, bool) for v in night)):
            raise ScenarioError(f"{node.path}.night_slots",
                                f"expected [start_slot, end_slot], got {night!r}")
        night_slots = (night[0], night[1])
    bands_raw = node.take("bands", None)
    bands = DEFAULT_BANDS
    if bands_raw is not None:
        if not isinstance(bands_raw, list):
            raise ScenarioError(f"{node.path}.bands", f"expected an array, got {bands_raw!r}")
        bands = tuple(
            _parse_band(raw, f"{node.path}.bands[{i}]") for i, raw in enumerate(bands_raw)
        )
    night_accuracy = node.take("night_accuracy", None)
    if night_accuracy is not None and (
        not isinstance(night_accuracy, (int, float)) or isinstance(night_accuracy, bool)
    ):
        raise ScenarioError(f"{node.path}.night_accuracy",
                            f"expected a number, got {night_accuracy!r}")
    spec = ClassifierSpec(
        kind=kind,
        accuracy=node.number("accuracy", 1.0, minimum=0.0, maximum=1.0),
        night_accuracy=float(night_accuracy) if night_accuracy is not None else None,
        night_slots=night_slots,
        confusion_seed=node.integer("confusion_seed", 0),
        bands=bands,
        init_latency_ticks=node.integer("init_latency_ticks", 90, minimum=0),
    )
    node.finish()
    return spec


def parse_scenario(text: str) -> ScenarioBundle:
    """Parse and fully validate a scenario document."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("$", f"invalid JSON: {exc}") from exc
    root = _Node(raw, "$")

    lawn = root.child("lawn")
    if lawn is None:
        raise ScenarioError("$.lawn", "required field is missing")
    lawn_width = lawn.number("width_m", exclusive_minimum=0.0)
    lawn_height = lawn.number("height_m", exclusive_minimum=0.0)
    cell_size = lawn.number("cell_size_m", 0.5, exclusive_minimum=0.0)
    lawn.finish()

    camera_node = root.child("camera")
    defaults = CameraModel()
    if camera_node is None:
        camera = defaults
    else:
        camera = CameraModel(
            mount_height_m=camera_node.number(
                "mount_height_m", defaults.mount_height_m, exclusive_minimum=0.0
            ),
            pitch_rad=camera_node.number(
                "pitch_rad", defaults.pitch_rad, minimum=0.0,
                exclusive_maximum=math.pi / 2,
            ),
            hfov_rad=camera_node.number(
                "hfov_rad", defaults.hfov_rad,
                exclusive_minimum=0.0, exclusive_maximum=math.pi,
            ),
            vfov_rad=camera_node.number(
                "vfov_rad", defaults.vfov_rad,
                exclusive_minimum=0.0, exclusive_maximum=math.pi,
            ),
        )
        camera_node.finish()

    mower_node = root.child("mower")
    mower_radius = 0.25
    mower_start = Pose(0.5, 0.5, 0.0)
    mower_cfg = MowerConfig()
    if mower_node is not None:
        start_node = mower_node.child("start")
        if start_node is not None:
            mower_start = _parse_pose(start_node)
        mower_radius = mower_node.number("radius_m", 0.25, exclusive_minimum=0.0)
        leg_ticks = mower_node.take("leg_ticks", None)
        if leg_ticks is not None and (not isinstance(leg_ticks, int) or leg_ticks < 1
                                      or isinstance(leg_ticks, bool)):
            raise ScenarioError(f"{mower_node.path}.leg_ticks",
                                f"expected a positive integer, got {leg_ticks!r}")
        mower_cfg = MowerConfig(
            speed_m_per_tick=mower_node.number(
                "speed_m_per_tick", 0.1, exclusive_minimum=0.0
            ),
            leg_ticks=leg_ticks,
        )
        mower_node.finish()

    schedule_node = root.child("schedule")
    schedule = ScheduleConfig()
    if schedule_node is not None:
        schedule = ScheduleConfig(
            slots_per_day=schedule_node.integer("slots_per_day", 24, minimum=1),
            seconds_per_day=schedule_node.number(
                "seconds_per_day", 86400.0, exclusive_minimum=0.0
            ),
            n_zones=schedule_node.integer("n_zones", 4, minimum=1),
        )
        schedule_node.finish()

    entities_raw = root.array("entities", [])
    entities = tuple(
        _parse_entity(raw, f"$.entities[{i}]") for i, raw in enumerate(entities_raw)
    )

    dead_raw = root.array("dead_pixels", [])
    dead_pixels = []
    for i, raw in enumerate(dead_raw):
        node = _Node(raw, f"$.dead_pixels[{i}]")
        dead_pixels.append(
            (node.integer("row", minimum=0), node.integer("col", minimum=0),
             node.number("stuck_c"))
        )
        node.finish()

    detector_node = root.child("detector")
    detector = DetectorConfig()
    if detector_node is not None:
        try:
            detector = DetectorConfig(
                delta_c=detector_node.number("delta_c", 5.0, exclusive_minimum=0.0),
                min_hot_pixels=detector_node.integer("min_hot_pixels", 4, minimum=1),
            )
        except ValueError as exc:
            raise ScenarioError(detector_node.path, str(exc)) from exc
        detector_node.finish()

    classifier = _parse_classifier(root.child("classifier"))

    sim_node = root.child("sim")
    sim = SimConfig()
    if sim_node is not None:
        protect_node = sim_node.child("protect")
        protect = ProtectConfig()
        if protect_node is not None:
            expiry = protect_node.take("expiry_ticks", None)
            if expiry is not None and (not isinstance(expiry, int) or expiry < 1
                                       or isinstance(expiry, bool)):
                raise ScenarioError(f"{protect_node.path}.expiry_ticks",
                                    f"expected a positive integer, got {expiry!r}")
            protect = ProtectConfig(
                expiry_ticks=expiry,
                fallback_half_size_m=protect_node.number(
                    "fallback_half_size_m", 1.0, exclusive_minimum=0.0
                ),
                margin_m=protect_node.number("margin_m", 0.5, minimum=0.0),
            )
            protect_node.finish()
        sim = SimConfig(
            interaction_range_m=sim_node.number(
                "interaction_range_m", 3.0, exclusive_minimum=0.0
            ),
            protect=protect,
        )
        sim_node.finish()

    scenario = Scenario(
        lawn_width_m=lawn_width,
        lawn_height_m=lawn_height,
        cell_size_m=cell_size,
        ambient_c=root.number("ambient_c", 20.0),
        entities=entities,
        camera=camera,
        mower_start=mower_start,
        tick_seconds=root.number("tick_seconds", 1.0, exclusive_minimum=0.0),
        seed=root.integer("seed", 0, minimum=0),
        schedule=schedule,
        mower_radius_m=mower_radius,
        noise_sigma_c=root.number("noise_sigma_c", 0.5, minimum=0.0),
        dead_pixels=tuple(dead_pixels),
    )
    root.finish()
    try:
        validate_scenario(scenario)
    except ValueError as exc:
        raise ScenarioError("$", str(exc)) from exc
    return ScenarioBundle(
        scenario=scenario,
        detector=detector,
        classifier=classifier,
        mower=mower_cfg,
        sim=sim,
    )


def _motion_to_obj(motion) -> dict:
    if isinstance(motion, Waypoints):
        return {"type": "waypoints", "points": [list(p) for p in motion.points]}
    if isinstance(motion, AppearanceWindow):
        return {
            "type": "appearance_window",
            "zone": motion.zone,
            "start_slot": motion.start_slot,
            "end_slot": motion.end_slot,
            "daily": motion.daily,
        }
    return {"type": "stationary"}


def serialize_scenario(bundle: ScenarioBundle) -> str:
    """Emit a document that parse_scenario() maps back to the same bundle."""
    sc = bundle.scenario
    obj = {
        "lawn": {
            "width_m": sc.lawn_width_m,
            "height_m": sc.lawn_height_m,
            "cell_size_m": sc.cell_size_m,
        },
        "ambient_c": sc.ambient_c,
        "tick_seconds": sc.tick_seconds,
        "seed": sc.seed,
        "noise_sigma_c": sc.noise_sigma_c,
        "camera": {
            "mount_height_m": sc.camera.mount_height_m,
            "pitch_rad": sc.camera.pitch_rad,
            "hfov_rad": sc.camera.hfov_rad,
            "vfov_rad": sc.camera.vfov_rad,
        },
        "mower": {
            "start": {
                "x": sc.mower_start.x,
                "y": sc.mower_start.y,
                "heading_rad": sc.mower_start.heading,
            },
            "radius_m": sc.mower_radius_m,
            "speed_m_per_tick": bundle.mower.speed_m_per_tick,
            **({"leg_ticks": bundle.mower.leg_ticks}
               if bundle.mower.leg_ticks is not None else {}),
        },
        "schedule": {
            "slots_per_day": sc.schedule.slots_per_day,
            "seconds_per_day": sc.schedule.seconds_per_day,
            "n_zones": sc.schedule.n_zones,
        },
        "entities": [
            {
                "id": ent.id,
                "kind": ent.kind,
                "position_m": list(ent.position_m),
                "radius_m": ent.radius_m,
                "surface_temp_c": ent.surface_temp_c,
                "motion": _motion_to_obj(ent.motion),
            }
            for ent in sc.entities
        ],
        "dead_pixels": [
            {"row": row, "col": col, "stuck_c": stuck}
            for row, col, stuck in sc.dead_pixels
        ],
        "detector": {
            "delta_c": bundle.detector.delta_c,
            "min_hot_pixels": bundle.detector.min_hot_pixels,
        },
        "classifier": {
            "kind": bundle.classifier.kind,
            "accuracy": bundle.classifier.accuracy,
            **({"night_accuracy": bundle.classifier.night_accuracy}
               if bundle.classifier.night_accuracy is not None else {}),
            **({"night_slots": list(bundle.classifier.night_slots)}
               if bundle.classifier.night_slots is not None else {}),
            "confusion_seed": bundle.classifier.confusion_seed,
            "init_latency_ticks": bundle.classifier.init_latency_ticks,
            **({"bands": [
                {
                    "label": band.label,
                    "area_min": band.area_min,
                    "area_max": band.area_max,
                    "aspect_min": band.aspect_min,
                    "aspect_max": band.aspect_max,
                    "excess_min_c": band.excess_min_c,
                }
                for band in bundle.classifier.bands
            ]} if bundle.classifier.bands != DEFAULT_BANDS else {}),
        },
        "sim": {
            "interaction_range_m": bundle.sim.interaction_range_m,
            "protect": {
                **({"expiry_ticks": bundle.sim.protect.expiry_ticks}
                   if bundle.sim.protect.expiry_ticks is not None else {}),
                "fallback_half_size_m": bundle.sim.protect.fallback_half_size_m,
                "margin_m": bundle.sim.protect.margin_m,
            },
        },
    }
    return json.dumps(obj, indent=2, sort_keys=True)


def load_scenario(path) -> ScenarioBundle:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())
