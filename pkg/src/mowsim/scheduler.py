"""Tabular Q-learning for animal-aware mowing timetables.

State is the time-of-day slot; actions are "mow zone z" for each zone plus
a trailing idle action. Mowing a zone during an animal's appearance window
earns a large penalty, mowing a zone for the first time that day earns a
small reward, and everything else is neutral. With enough episodes the
greedy policy stops scheduling the dangerous (zone, slot) combinations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .world import ANIMAL_KINDS, AppearanceWindow, Scenario


@dataclass(frozen=True)
class Hyperparams:
    alpha: float = 0.5
    gamma: float = 0.9
    epsilon: float = 0.1
    epsilon_final: Optional[float] = None  # linear decay target; None keeps epsilon fixed
    episodes: int = 1000
    r_danger: float = -10.0
    r_cover: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not (0.0 <= self.gamma < 1.0):
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        for eps in (self.epsilon, self.epsilon_final):
            if eps is not None and not (0.0 <= eps <= 1.0):
                raise ValueError(f"epsilon values must be in [0, 1], got {eps}")
        if self.episodes < 0:
            raise ValueError(f"episodes must be >= 0, got {self.episodes}")


@dataclass
class QTable:
    """Dense (slot, action) value table, zero-initialised."""

    values: np.ndarray

    @classmethod
    def zeros(cls, n_slots: int, n_actions: int) -> "QTable":
        return cls(values=np.zeros((n_slots, n_actions)))

    def copy(self) -> "QTable":
        return QTable(values=self.values.copy())

    @property
    def n_slots(self) -> int:
        return self.values.shape[0]

    @property
    def n_actions(self) -> int:
        return self.values.shape[1]

    def to_json_obj(self) -> dict:
        entries = [
            {"state": int(s), "action": int(a), "value": float(self.values[s, a])}
            for s in range(self.n_slots)
            for a in range(self.n_actions)
        ]
        return {
            "slots_per_day": self.n_slots,
            "n_actions": self.n_actions,
            "entries": entries,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "QTable":
        table = cls.zeros(int(obj["slots_per_day"]), int(obj["n_actions"]))
        for entry in obj["entries"]:
            table.values[int(entry["state"]), int(entry["action"])] = float(
                entry["value"]
            )
        return table


def n_actions(scenario: Scenario) -> int:
    return scenario.schedule.n_zones + 1


def idle_action(scenario: Scenario) -> int:
    return scenario.schedule.n_zones


def action_zone(action: int, scenario: Scenario) -> Optional[int]:
    """Zone mowed by the action, or None for idle."""
    return action if action < scenario.schedule.n_zones else None


def danger_windows(scenario: Scenario) -> tuple[tuple[int, int, int], ...]:
    """(zone, start_slot, end_slot) for every animal with a daily routine."""
    windows = []
    for ent in scenario.entities:
        if ent.kind in ANIMAL_KINDS and isinstance(ent.motion, AppearanceWindow):
            windows.append((ent.motion.zone, ent.motion.start_slot, ent.motion.end_slot))
    return tuple(windows)


def is_dangerous(scenario: Scenario, zone: int, slot: int) -> bool:
    return any(
        z == zone and start <= slot <= end
        for z, start, end in danger_windows(scenario)
    )


def reward(
    action: int,
    slot: int,
    scenario: Scenario,
    covered_zones: frozenset[int] | set[int],
    h: Hyperparams,
) -> float:
    """Reward for one scheduling decision.

    Mowing inside an appearance window is penalised regardless of coverage;
    a first safe mow of a zone that day earns r_cover; re-mows and idling
    are neutral.
    """
    zone = action_zone(action, scenario)
    if zone is None:
        return 0.0
    if is_dangerous(scenario, zone, slot):
        return h.r_danger
    if zone in covered_zones:
        return 0.0
    return h.r_cover


def q_update(
    q: QTable, s: int, a: int, r: float, s_next: int, h: Hyperparams
) -> QTable:
    """One Q-learning backup; returns a new table with exactly one cell changed."""
    updated = q.copy()
    best_next = float(updated.values[s_next].max())
    updated.values[s, a] += h.alpha * (r + h.gamma * best_next - updated.values[s, a])
    return updated


def select_action(
    q: QTable, s: int, epsilon: float, rng: np.random.Generator
) -> int:
    """Epsilon-greedy pick; greedy ties resolve to the smallest action index."""
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(q.n_actions))
    return int(np.argmax(q.values[s]))


def _epsilon_at(h: Hyperparams, episode: int) -> float:
    if h.epsilon_final is None or h.episodes <= 1:
        return h.epsilon
    frac = episode / (h.episodes - 1)
    return h.epsilon + (h.epsilon_final - h.epsilon) * frac


def train(scenario: Scenario, h: Hyperparams, seed: int) -> QTable:
    """Run `episodes` simulated days of epsilon-greedy scheduling."""
    rng = np.random.default_rng(seed)
    slots = scenario.schedule.slots_per_day
    q = QTable.zeros(slots, n_actions(scenario))
    for episode in range(h.episodes):
        epsilon = _epsilon_at(h, episode)
        covered: set[int] = set()
        for slot in range(slots):
            a = select_action(q, slot, epsilon, rng)
            r = reward(a, slot, scenario, covered, h)
            zone = action_zone(a, scenario)
            if zone is not None:
                covered.add(zone)
            q = q_update(q, slot, a, r, (slot + 1) % slots, h)
    return q


def evaluate_policy(
    q: QTable, scenario: Scenario, days: int, seed: int = 0
) -> dict[str, float]:
    """Greedy-policy rates: dangerous mows per day, distinct safe zones per day.

    The greedy policy is deterministic (ties break to the lowest action
    index), so the seed only matters to stochastic variants and is kept
    for interface symmetry with train().
    """
    del seed
    if days <= 0:
        return {"encounter_rate": 0.0, "coverage_rate": 0.0}
    slots = scenario.schedule.slots_per_day
    encounters = 0
    covered_total = 0
    for _ in range(days):
        safe_covered: set[int] = set()
        for slot in range(slots):
            a = int(np.argmax(q.values[slot]))
            zone = action_zone(a, scenario)
            if zone is None:
                continue
            if is_dangerous(scenario, zone, slot):
                encounters += 1
            else:
                safe_covered.add(zone)
        covered_total += len(safe_covered)
    return {
        "encounter_rate": encounters / days,
        "coverage_rate": covered_total / days,
    }


def random_policy_rates(
    scenario: Scenario, days: int, seed: int = 0
) -> dict[str, float]:
    """Uniform-random baseline over the same action set, for comparison."""
    rng = np.random.default_rng(seed)
    slots = scenario.schedule.slots_per_day
    actions = n_actions(scenario)
    encounters = 0
    covered_total = 0
    for _ in range(days):
        safe_covered: set[int] = set()
        for slot in range(slots):
            a = int(rng.integers(actions))
            zone = action_zone(a, scenario)
            if zone is None:
                continue
            if is_dangerous(scenario, zone, slot):
                encounters += 1
            else:
                safe_covered.add(zone)
        covered_total += len(safe_covered)
    return {
        "encounter_rate": encounters / days,
        "coverage_rate": covered_total / days,
    }
