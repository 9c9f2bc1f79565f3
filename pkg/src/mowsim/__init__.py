"""Deterministic simulator of a thermal-sensing, animal-protecting mower.

A 24x32 thermal detector gates a species classifier; the classifier's
label drives a stop/halt/shutdown state machine with per-species
protection policies; a tabular Q-learning scheduler learns mowing
timetables that avoid animals' habitual appearance windows.
"""

from .classifier import (
    ClassificationResult,
    ClassifierSpec,
    Snapshot,
    blob_features,
    classify,
)
from .pipeline import (
    ProtectedZoneRegistry,
    SimReport,
    Simulation,
    TaskHandle,
    read_flag_file,
    run,
    write_flag_file,
)
from .scenario import (
    MowerConfig,
    ProtectConfig,
    ScenarioBundle,
    ScenarioError,
    SimConfig,
    load_scenario,
    parse_scenario,
    serialize_scenario,
)
from .scheduler import (
    Hyperparams,
    QTable,
    evaluate_policy,
    q_update,
    reward,
    select_action,
    train,
)
from .thermal import (
    DetectorConfig,
    DetectorState,
    detection_bit,
    hot_pixel_mask,
    hot_pixels,
    update_detector,
)
from .vehicle import (
    MowerStatus,
    PatrolProgram,
    VehicleEvent,
    VehicleState,
    drive_tick,
    manual_restart,
    plan_patrol,
    transition,
)
from .world import (
    AppearanceWindow,
    CameraModel,
    Entity,
    ExtentEstimate,
    Pose,
    Scenario,
    ScheduleConfig,
    Stationary,
    Waypoints,
    WorldState,
    build_world,
    estimate_extent,
    project_pixel_to_ground,
    sample_thermal,
    step_entities,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
