import json
import math
import threading

import numpy as np
import pytest

from mowsim.classifier import Snapshot
from mowsim.pipeline import (
    ProtectedZoneRegistry,
    Simulation,
    free_rectangles,
    plan_patrol_avoiding,
    read_flag_file,
    run,
    simulate_program,
    write_flag_file,
)
from mowsim.scenario import parse_scenario
from mowsim.vehicle import MowerStatus
from mowsim.world import Pose

DOWN = math.radians(45.0)


def make_doc(**overrides):
    doc = {
        "lawn": {"width_m": 10.0, "height_m": 8.0},
        "ambient_c": 20.0,
        "noise_sigma_c": 0.0,
        "seed": 42,
        "camera": {"mount_height_m": 1.0, "pitch_rad": DOWN,
                   "hfov_rad": math.radians(55.0), "vfov_rad": math.radians(35.0)},
        "mower": {"start": {"x": 0.5, "y": 1.0, "heading_rad": 0.0},
                  "speed_m_per_tick": 0.1, "leg_ticks": 80},
        "entities": [],
        "classifier": {"kind": "oracle", "accuracy": 1.0, "init_latency_ticks": 90},
    }
    doc.update(overrides)
    return doc


def bundle_for(**overrides):
    return parse_scenario(json.dumps(make_doc(**overrides)))


def hedgehog_entity(x=5.0, y=1.0, **extra):
    ent = {"id": "h1", "kind": "hedgehog", "position_m": [x, y], "radius_m": 0.15,
           "surface_temp_c": 34.0, "motion": {"type": "stationary"}}
    ent.update(extra)
    return ent


def trace_text(sim):
    return "\n".join(json.dumps(r, sort_keys=True) for r in sim.trace)


class TestEmptyScene:
    def test_thousand_ticks_no_events_growing_coverage(self):
        sim = Simulation(bundle_for())
        coverage = []
        for _ in range(1000):
            rec = sim.tick()
            assert rec["events"] == []
            assert rec["detection"] == 0
            coverage.append(sim.world.coverage.sum())
        assert sim.vehicle.status is MowerStatus.FORWARD
        assert all(b >= a for a, b in zip(coverage, coverage[1:]))
        assert coverage[-1] > coverage[0]
        report = sim.report()
        assert report.stops == 0 and report.encounters == 0
        assert report.coverage_fraction > 0
        # the patrol loop closed: after each full cycle the mower is home
        cycle = sim.program.cycle_ticks
        home = sim.trace[cycle - 1]["pose"]
        assert math.hypot(home["x"] - 0.5, home["y"] - 1.0) < 1e-6

    def test_trace_length_matches_ticks(self):
        sim = Simulation(bundle_for())
        sim.run_ticks(137)
        assert len(sim.trace) == 137
        assert [r["tick"] for r in sim.trace] == list(range(1, 138))


class TestHedgehogHalt:
    def test_event_sequence_and_latch(self):
        sim = Simulation(bundle_for(entities=[hedgehog_entity()]))
        sim.run_ticks(400)
        events = [(r["tick"], e) for r in sim.trace for e in r["events"]]
        assert [e for _, e in events] == ["warm_detected", "classified_hedgehog"]
        detect_tick = events[0][0]
        classify_tick = events[1][0]
        assert classify_tick == detect_tick + 90  # init latency in ticks
        assert sim.vehicle.halted_manual
        assert sim.vehicle.status is MowerStatus.STOPPED
        assert sim.report().encounters == 0
        # stopped well short of the hedgehog
        assert sim.vehicle.pose.x < 5.0 - 0.4

    def test_halt_survives_detection_loss_until_restart(self):
        # the hedgehog wanders off after classification; the latch must hold
        ent = hedgehog_entity()
        ent["motion"] = {"type": "waypoints",
                         "points": [[5.0, 1.0, 0], [5.0, 1.0, 150], [5.0, 7.0, 200]]}
        sim = Simulation(bundle_for(entities=[ent]), restart_ticks=[320])
        sim.run_ticks(340)
        statuses = {r["tick"]: r["status"] for r in sim.trace}
        assert statuses[300] == 0
        halted = [r for r in sim.trace if 250 <= r["tick"] < 320]
        assert all(r["status"] == 0 for r in halted)
        assert not sim.vehicle.halted_manual
        # detection is clear after the restart, so the mower resumed
        assert sim.trace[-1]["status"] == 1

    def test_slow_walking_hedgehog_is_still_caught(self):
        # slower than one footprint-crossing per frame: the detector must
        # see it and the mower must stop before contact
        ent = hedgehog_entity()
        ent["motion"] = {"type": "waypoints",
                         "points": [[6.0, 1.0, 0], [3.5, 1.0, 50], [3.5, 1.0, 2000]]}
        sim = Simulation(bundle_for(entities=[ent]))
        sim.run_ticks(300)
        names = [e for r in sim.trace for e in r["events"]]
        assert "warm_detected" in names
        assert "classified_hedgehog" in names
        assert sim.vehicle.halted_manual
        assert sim.report().encounters == 0

    def test_restart_while_hedgehog_present_stays_stopped(self):
        sim = Simulation(bundle_for(entities=[hedgehog_entity()]), restart_ticks=[200])
        sim.run_ticks(300)
        assert not sim.vehicle.halted_manual  # latch cleared by the restart
        assert sim.vehicle.status is MowerStatus.STOPPED  # but still detecting
        assert sim.report().encounters == 0


class TestCancellation:
    def cancelling_sim(self):
        # the hedgehog bolts out of view well before the 90-tick latency
        ent = hedgehog_entity(x=3.0)
        ent["radius_m"] = 0.2
        ent["motion"] = {"type": "waypoints",
                         "points": [[3.0, 1.0, 0], [3.0, 1.0, 30], [3.0, 7.5, 45]]}
        return Simulation(bundle_for(entities=[ent]))

    def test_task_cancelled_and_forward_resumes(self):
        sim = self.cancelling_sim()
        sim.run_ticks(200)
        assert sim.task is not None
        assert sim.task.state == "cancelled"
        assert sim.task.result is None
        names = [e for r in sim.trace for e in r["events"]]
        assert "warm_detected" in names
        assert "warm_cleared" in names
        assert not any(n.startswith("classified") for n in names)
        # forward again within the falling-edge tick, moving on the next
        fall = next(r["tick"] for r in sim.trace if "warm_cleared" in r["events"])
        assert sim.trace[fall - 1]["status"] == 1  # records are 1-indexed by tick
        x_at = sim.trace[fall - 1]["pose"]["x"]
        x_next = sim.trace[fall]["pose"]["x"]
        assert x_next > x_at

    def test_cancelled_before_ready_tick(self):
        sim = self.cancelling_sim()
        sim.run_ticks(200)
        assert sim.task.ended_tick < sim.task.ready_tick

    @pytest.mark.parametrize("latency,outcome", [(7, "completed"), (8, "cancelled")])
    def test_falling_edge_at_ready_tick_cancellation_wins(self, latency, outcome):
        # hedgehog present for absolute slots 0..8 (one tick each), gone at 9;
        # a task spawned at tick 1 with latency 8 is ready at exactly the
        # falling-edge tick, and the cancellation must win that tie
        ent = hedgehog_entity(x=1.8)
        ent["radius_m"] = 0.2
        ent["motion"] = {"type": "appearance_window", "zone": 0,
                         "start_slot": 0, "end_slot": 8, "daily": False}
        sim = Simulation(bundle_for(
            entities=[ent],
            schedule={"slots_per_day": 10, "seconds_per_day": 10.0},
            classifier={"kind": "oracle", "accuracy": 1.0,
                        "init_latency_ticks": latency},
        ))
        sim.run_ticks(30)
        assert sim.task.started_tick == 1
        assert sim.task.state == outcome
        names = [e for r in sim.trace for e in r["events"]]
        if outcome == "cancelled":
            assert sim.task.ready_tick == sim.task.ended_tick == 9
            assert not any(n.startswith("classified") for n in names)
        else:
            assert "classified_hedgehog" in names


class TestTaskContracts:
    def snapshot(self, sim):
        return Snapshot(thermal=np.full((24, 32), 20.0), visible_truth=(),
                        taken_at_tick=sim.world.tick)

    def test_spawn_sets_ready_tick_from_latency(self):
        sim = Simulation(bundle_for())
        sim.run_ticks(10)
        handle = sim.spawn_classification(self.snapshot(sim))
        assert handle.started_tick == 10
        assert handle.ready_tick == 100

    def test_double_spawn_is_rejected(self):
        sim = Simulation(bundle_for())
        sim.tick()
        sim.spawn_classification(self.snapshot(sim))
        with pytest.raises(RuntimeError, match="already live"):
            sim.spawn_classification(self.snapshot(sim))

    def test_cancel_is_terminal_and_idempotent(self):
        sim = Simulation(bundle_for())
        sim.tick()
        handle = sim.spawn_classification(self.snapshot(sim))
        sim.cancel_classification(handle)
        assert handle.state == "cancelled"
        sim.cancel_classification(handle)  # no-op
        assert handle.state == "cancelled"
        assert handle.result is None

    def test_task_ids_are_monotone(self):
        # a crawling mower in front of a periodically appearing hedgehog:
        # every appearance is a fresh rising edge and a fresh task
        ent = hedgehog_entity(x=2.2)
        ent["radius_m"] = 0.2
        ent["motion"] = {"type": "appearance_window", "zone": 0,
                         "start_slot": 0, "end_slot": 1, "daily": True}
        sim = Simulation(bundle_for(
            entities=[ent],
            schedule={"slots_per_day": 10, "seconds_per_day": 50.0},
            mower={"start": {"x": 0.5, "y": 1.0, "heading_rad": 0.0},
                   "speed_m_per_tick": 0.01, "leg_ticks": 150},
            classifier={"kind": "oracle", "accuracy": 1.0, "init_latency_ticks": 500},
        ))
        ids = set()
        for _ in range(120):
            sim.tick()
            if sim.task is not None:
                ids.add(sim.task.task_id)
        assert len(ids) >= 3
        assert sorted(ids) == list(range(1, len(ids) + 1))

    def test_snapshot_is_frozen_at_spawn(self):
        sim = Simulation(bundle_for(entities=[hedgehog_entity()]))
        sim.run_ticks(120)
        assert sim.task is not None
        snap = sim.task.snapshot
        frozen = snap.thermal.copy()
        sim.run_ticks(50)
        assert np.array_equal(sim.task.snapshot.thermal, frozen)
        assert snap.taken_at_tick == sim.task.started_tick


class TestFlagFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "flag.txt"
        write_flag_file(path, 1)
        assert path.read_bytes() == b"1\n"
        assert read_flag_file(path) == 1
        write_flag_file(path, 0)
        assert read_flag_file(path) == 0

    def test_malformed_content_rejected(self, tmp_path):
        path = tmp_path / "flag.txt"
        path.write_text("2\n")
        with pytest.raises(ValueError, match="malformed"):
            read_flag_file(path)
        path.write_text("1")
        with pytest.raises(ValueError, match="malformed"):
            read_flag_file(path)

    def test_missing_file_raises_io_error(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_flag_file(tmp_path / "nope.txt")

    def test_bad_bit_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="bit"):
            write_flag_file(tmp_path / "flag.txt", 2)

    def test_concurrent_reads_never_see_partial_writes(self, tmp_path):
        path = tmp_path / "flag.txt"
        write_flag_file(path, 0)
        stop = threading.Event()
        seen_bad = []

        def reader():
            while not stop.is_set():
                try:
                    read_flag_file(path)
                except ValueError as exc:
                    seen_bad.append(exc)

        thread = threading.Thread(target=reader)
        thread.start()
        for i in range(2000):
            write_flag_file(path, i % 2)
        stop.set()
        thread.join()
        assert seen_bad == []

    def test_file_mode_tracks_detector_bit(self, tmp_path):
        path = tmp_path / "flag.txt"
        ent = hedgehog_entity(x=3.0)
        ent["radius_m"] = 0.2
        ent["motion"] = {"type": "waypoints",
                         "points": [[3.0, 1.0, 0], [3.0, 1.0, 30], [3.0, 7.5, 60]]}
        sim = Simulation(bundle_for(entities=[ent]), flag_path=path)
        bits = set()
        for _ in range(120):
            rec = sim.tick()
            assert read_flag_file(path) == rec["detection"]
            bits.add(rec["detection"])
        assert bits == {0, 1}  # both states actually exercised


class TestPolicy:
    def family_sim(self):
        doc = make_doc(
            lawn={"width_m": 12.0, "height_m": 8.0},
            schedule={"slots_per_day": 24, "seconds_per_day": 240.0},
            mower={"start": {"x": 1.0, "y": 1.0, "heading_rad": 0.0},
                   "speed_m_per_tick": 0.1, "leg_ticks": 100},
            entities=[{
                "id": "fam", "kind": "hedgehog_family", "position_m": [3.5, 1.0],
                "radius_m": 0.4, "surface_temp_c": 34.0,
                "motion": {"type": "appearance_window", "zone": 0,
                            "start_slot": 0, "end_slot": 3, "daily": False},
            }],
            classifier={"kind": "oracle", "accuracy": 1.0, "init_latency_ticks": 20},
        )
        return Simulation(parse_scenario(json.dumps(doc)))

    def test_family_registers_zone_and_replans_around_it(self):
        sim = self.family_sim()
        sim.run_ticks(60)
        names = [e for r in sim.trace for e in r["events"]]
        assert "classified_family" in names
        assert "warm_cleared" in names  # resumed once the family left
        zones = sim.zones.active(sim.world.tick)
        assert len(zones) == 1
        zone = zones[0]
        assert zone[0] <= 3.5 <= zone[2]  # the family's spot is inside
        assert not sim.vehicle.halted_manual
        # audit the replanned circuit: never inside the protected zone
        poses = simulate_program(sim.program, sim.vehicle.pose, sim.program.cycle_ticks)
        for pose in poses:
            inside = zone[0] < pose.x < zone[2] and zone[1] < pose.y < zone[3]
            assert not inside, (pose, zone)

    def test_zone_expires(self):
        sim = self.family_sim()
        sim.run_ticks(60)
        assert len(sim.zones.active(sim.world.tick)) == 1
        sim.run_ticks(300)  # expiry is one compressed day (240 ticks)
        assert sim.zones.active(sim.world.tick) == []

    def test_wounded_animal_notification(self):
        ent = {"id": "w1", "kind": "wounded_animal", "position_m": [5.0, 1.0],
               "radius_m": 0.2, "surface_temp_c": 34.0, "motion": {"type": "stationary"}}
        sim = Simulation(bundle_for(
            entities=[ent],
            classifier={"kind": "oracle", "accuracy": 1.0, "init_latency_ticks": 30},
        ))
        sim.run_ticks(120)
        notes = [n for r in sim.trace for n in r["notifications"]]
        assert len(notes) == 1
        note = notes[0]
        assert note["position"][0] == pytest.approx(5.0, abs=0.5)
        assert note["position"][1] == pytest.approx(1.0, abs=0.5)
        assert sim.vehicle.halted_manual

    def test_snake_shutdown_blocks_everything_but_restart(self):
        ent = {"id": "s1", "kind": "snake", "position_m": [5.0, 1.0],
               "radius_m": 0.2, "surface_temp_c": 34.0, "motion": {"type": "stationary"}}
        sim = Simulation(bundle_for(
            entities=[ent],
            classifier={"kind": "oracle", "accuracy": 1.0, "init_latency_ticks": 30},
        ))
        sim.run_ticks(200)
        assert sim.vehicle.shutdown
        assert not sim.vehicle.blade_on
        assert sim.report().encounters == 0

    def test_restart_after_shutdown_reenables_the_blade_on_resume(self):
        # the snake slithers away after the shutdown; a later restart clears
        # the latch and the mower drives again with the blade back on
        ent = {"id": "s1", "kind": "snake", "position_m": [5.0, 1.0],
               "radius_m": 0.2, "surface_temp_c": 34.0,
               "motion": {"type": "waypoints",
                           "points": [[5.0, 1.0, 0], [5.0, 1.0, 80], [5.0, 7.5, 95]]}}
        sim = Simulation(bundle_for(
            entities=[ent],
            classifier={"kind": "oracle", "accuracy": 1.0, "init_latency_ticks": 30},
        ), restart_ticks=[150])
        sim.run_ticks(200)
        names = [e for r in sim.trace for e in r["events"]]
        assert "classified_snake" in names
        assert "manual_restart" in names
        assert not sim.vehicle.shutdown
        assert sim.vehicle.blade_on
        assert sim.vehicle.status is MowerStatus.FORWARD


class TestDeterminism:
    def test_identical_runs_produce_identical_traces(self):
        b = bundle_for(entities=[hedgehog_entity()])
        s1 = Simulation(b)
        s1.run_ticks(200)
        s2 = Simulation(b)
        s2.run_ticks(200)
        assert trace_text(s1) == trace_text(s2)

    def test_virtual_and_real_task_modes_agree(self):
        b = bundle_for(
            entities=[hedgehog_entity()],
            classifier={"kind": "oracle", "accuracy": 1.0, "init_latency_ticks": 40},
        )
        with Simulation(b, mode="virtual") as virtual:
            virtual.run_ticks(200)
        with Simulation(b, mode="real-task") as real:
            real.run_ticks(200)
        assert trace_text(virtual) == trace_text(real)

    def test_noise_is_seeded(self):
        b = bundle_for(noise_sigma_c=0.4)
        s1 = Simulation(b, seed=5)
        s1.run_ticks(50)
        s2 = Simulation(b, seed=5)
        s2.run_ticks(50)
        s3 = Simulation(b, seed=6)
        s3.run_ticks(50)
        assert trace_text(s1) == trace_text(s2)
        assert np.array_equal(s1.last_frame, s2.last_frame)
        assert not np.array_equal(s1.last_frame, s3.last_frame)


class TestReplanGeometry:
    def test_free_rectangles_split_around_hole(self):
        lawn = (0.0, 0.0, 10.0, 10.0)
        pieces = free_rectangles(lawn, [(4.0, 4.0, 6.0, 6.0)])
        assert len(pieces) == 4
        total = sum((x1 - x0) * (y1 - y0) for x0, y0, x1, y1 in pieces)
        assert total == pytest.approx(100.0 - 4.0)

    def test_plan_avoiding_keeps_out_of_holes(self):
        lawn = (0.0, 0.0, 10.0, 10.0)
        hole = (4.0, 0.0, 6.0, 5.0)
        pose = Pose(2.0, 1.0, 0.0)
        program = plan_patrol_avoiding(lawn, [hole], pose, 0.1, 0.3)
        assert program is not None
        for p in simulate_program(program, pose, program.cycle_ticks):
            assert not (hole[0] < p.x < hole[2] and hole[1] < p.y < hole[3])

    def test_plan_avoiding_gives_up_when_boxed_in(self):
        lawn = (0.0, 0.0, 10.0, 10.0)
        assert plan_patrol_avoiding(lawn, [lawn], Pose(5, 5, 0), 0.1, 0.3) is None

    def test_registry_prunes_expired_zones(self):
        reg = ProtectedZoneRegistry()
        reg.register((0, 0, 1, 1), expires_at_tick=10)
        reg.register((2, 2, 3, 3), expires_at_tick=20)
        assert len(reg.active(5)) == 2
        reg.prune(15)
        assert len(reg) == 1
        assert reg.active(15) == [(2, 2, 3, 3)]


class TestRunHelper:
    def test_run_returns_report(self):
        report = run(bundle_for(), 100)
        assert report.ticks_run == 100
        assert report.stops == 0

    def test_seed_override(self):
        b = bundle_for(noise_sigma_c=0.4)
        r1 = run(b, 50, seed=1)
        r2 = run(b, 50, seed=1)
        assert r1.to_json_obj() == r2.to_json_obj()
