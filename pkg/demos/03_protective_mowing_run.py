#!/usr/bin/env python3
"""One full protective mowing run, tick by tick.

The mower patrols a rectangular circuit. A stationary hedgehog sits on
the first leg. The thermal detector fires as the mower closes in, the
mower stops, the (slow) classifier confirms the species a minute and a
half later, and the halt latch keeps everything frozen until a human
presses restart. Because the hedgehog never leaves, the mower stays
put even after the restart.
"""

import json
from pathlib import Path

from mowsim import Simulation
from mowsim.scenario import load_scenario

SCENARIO = Path(__file__).parent / "scenarios" / "hedgehog_on_path.json"

bundle = load_scenario(SCENARIO)
restart_tick = 1300
sim = Simulation(bundle, restart_ticks=[restart_tick])

STATUS = {0: "stopped", 1: "forward"}
for _ in range(1400):
    record = sim.tick()
    if record["events"]:
        pose = record["pose"]
        print(f"tick {record['tick']:4d}  x={pose['x']:.2f} m  "
              f"status={STATUS[record['status']]:<8s} events={record['events']}")

print()
report = sim.report()
print("run summary:", json.dumps(report.to_json_obj(), indent=2, sort_keys=True))
print()
print(f"hedgehog sits at x=5.0 m; the mower stopped at x={sim.vehicle.pose.x:.2f} m")
print(f"blade overlaps with the animal (encounters): {report.encounters}")
print(f"after the scripted restart the halt latch is "
      f"{'still set' if sim.vehicle.halted_manual else 'cleared'}, but the mower "
      f"{'moved' if sim.vehicle.status == 1 else 'stays stopped: the hedgehog is still there'}")
