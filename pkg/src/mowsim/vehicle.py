"""Mower motion and behavior state machine.

Status 0 is stopped, status 1 is forward; reverse exists in the enum but
no transition ever enters it. Two latches dominate everything else: the
manual-restart halt (set after a hedgehog or wounded-animal call) and the
full shutdown (set after a snake call, blade off). Only a manual restart
clears them, and even then the mower stays stopped until the detection
channel reports clear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum, IntEnum
from typing import Optional

from .world import Pose

TWO_PI = 2 * math.pi


class MowerStatus(IntEnum):
    STOPPED = 0
    FORWARD = 1
    REVERSE = 2  # never entered; kept for wire compatibility


class VehicleEvent(Enum):
    WARM_DETECTED = "warm_detected"
    WARM_CLEARED = "warm_cleared"
    CLASSIFIED_HEDGEHOG = "classified_hedgehog"
    CLASSIFIED_FAMILY = "classified_family"
    CLASSIFIED_SNAKE = "classified_snake"
    CLASSIFIED_WOUNDED = "classified_wounded"
    CLASSIFIED_OTHER = "classified_other"
    MANUAL_RESTART = "manual_restart"


@dataclass(frozen=True)
class PatrolLeg:
    duration_ticks: int
    turn_after_rad: float


@dataclass(frozen=True)
class PatrolProgram:
    """Timed legs with a turn at the end of each; wraps around forever.

    start_heading is applied on the first tick of leg 0, so a replanned
    circuit can realign the mower without moving it while stopped.
    """

    legs: tuple[PatrolLeg, ...]
    speed_m_per_tick: float
    start_heading: float = 0.0

    @property
    def cycle_ticks(self) -> int:
        return sum(leg.duration_ticks for leg in self.legs)


@dataclass(frozen=True)
class VehicleState:
    pose: Pose
    status: MowerStatus = MowerStatus.STOPPED
    leg_index: int = 0
    leg_elapsed: int = 0
    halted_manual: bool = False
    shutdown: bool = False
    blade_on: bool = True


def wrap_angle(angle: float) -> float:
    """Normalize to [0, 2*pi)."""
    return angle % TWO_PI


def angle_difference(a: float, b: float) -> float:
    """Smallest absolute difference between two angles."""
    d = (a - b) % TWO_PI
    return min(d, TWO_PI - d)


def plan_patrol(
    lawn: tuple[float, float],
    speed: float,
    leg_ticks: int,
    start: Optional[Pose] = None,
) -> PatrolProgram:
    """Closed rectangular circuit with four 90-degree left turns.

    The first leg runs leg_ticks along the start heading (+x); the cross
    legs are scaled by the lawn aspect ratio so a non-square lawn gets
    alternating long and short legs. Executing the full cycle returns the
    mower exactly to its start pose.
    """
    width, height = lawn
    if speed <= 0:
        raise ValueError(f"speed must be positive, got {speed}")
    if leg_ticks < 1:
        raise ValueError(f"leg_ticks must be >= 1, got {leg_ticks}")
    if start is None:
        start = Pose(0.5, 0.5, 0.0)
    long_span = leg_ticks * speed
    if start.x + long_span > width + 1e-9:
        raise ValueError(
            f"leg length {long_span:.3f} m does not fit a {width:.3f} m lawn "
            f"from start x {start.x:.3f}"
        )
    cross_ticks = max(1, round(leg_ticks * height / width))
    cross_span = cross_ticks * speed
    if start.y + cross_span > height + 1e-9:
        raise ValueError(
            f"cross leg {cross_span:.3f} m does not fit a {height:.3f} m lawn "
            f"from start y {start.y:.3f}"
        )
    quarter = math.pi / 2
    legs = (
        PatrolLeg(leg_ticks, quarter),
        PatrolLeg(cross_ticks, quarter),
        PatrolLeg(leg_ticks, quarter),
        PatrolLeg(cross_ticks, quarter),
    )
    return PatrolProgram(legs=legs, speed_m_per_tick=speed, start_heading=start.heading)


def transition(state: VehicleState, event: VehicleEvent) -> VehicleState:
    """Total, deterministic event application; unknown pairs are identity."""
    if event is VehicleEvent.MANUAL_RESTART:
        if state.halted_manual or state.shutdown:
            return replace(
                state,
                halted_manual=False,
                shutdown=False,
                blade_on=True,
                status=MowerStatus.STOPPED,
            )
        return state
    if event is VehicleEvent.WARM_DETECTED:
        if state.status is MowerStatus.FORWARD:
            return replace(state, status=MowerStatus.STOPPED)
        return state
    if event is VehicleEvent.WARM_CLEARED:
        if (state.status is MowerStatus.STOPPED
                and not state.halted_manual and not state.shutdown):
            return replace(state, status=MowerStatus.FORWARD)
        return state
    if state.status is not MowerStatus.STOPPED:
        return state
    if event is VehicleEvent.CLASSIFIED_HEDGEHOG:
        return replace(state, halted_manual=True)
    if event is VehicleEvent.CLASSIFIED_SNAKE:
        return replace(state, shutdown=True, blade_on=False)
    if event is VehicleEvent.CLASSIFIED_WOUNDED:
        return replace(state, halted_manual=True)
    # CLASSIFIED_FAMILY and CLASSIFIED_OTHER keep the mower stopped; the
    # pipeline resumes it with WARM_CLEARED once the detection drops.
    return state


def manual_restart(state: VehicleState) -> VehicleState:
    return transition(state, VehicleEvent.MANUAL_RESTART)


def drive_tick(state: VehicleState, program: PatrolProgram) -> VehicleState:
    """Advance one tick of patrol motion; a non-forward mower never moves."""
    if state.status is not MowerStatus.FORWARD:
        return state
    heading = state.pose.heading
    if state.leg_index == 0 and state.leg_elapsed == 0:
        heading = wrap_angle(program.start_heading)
    x = state.pose.x + program.speed_m_per_tick * math.cos(heading)
    y = state.pose.y + program.speed_m_per_tick * math.sin(heading)
    leg = program.legs[state.leg_index]
    elapsed = state.leg_elapsed + 1
    index = state.leg_index
    if elapsed >= leg.duration_ticks:
        heading = wrap_angle(heading + leg.turn_after_rad)
        index = (index + 1) % len(program.legs)
        elapsed = 0
    return replace(state, pose=Pose(x, y, heading), leg_index=index, leg_elapsed=elapsed)
