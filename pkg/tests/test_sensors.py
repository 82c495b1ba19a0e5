"""Sensor sampling and state-change notification semantics."""

from __future__ import annotations

from dataclasses import replace

import pytest

from sentrysim.assets import demo_floorplan_path
from sentrysim.geometry import Vec3
from sentrysim.vdevices.sensors import (
    SensorBank,
    SensorSpec,
    diff_readings,
    read_sensor,
)
from sentrysim.world import apply_action, initial_state, load_floorplan, step
from sentrysim.world.scenario import FireEmitter, ScenarioScript
from sentrysim.world.state import FireSource

PLAN = load_floorplan(demo_floorplan_path())
SCRIPT = ScenarioScript(
    name="sensors", seed=1, dt=0.1, duration=60.0,
    fire_emitters=(FireEmitter(actor_id="0", location=Vec3(5.0, 8.0, 0.0), growth_rate=0.05),),
)

SPECS = (
    SensorSpec(sensor_id="smoke-1", kind="smoke_fire", room_id="oproom"),
    SensorSpec(sensor_id="temp-1", kind="temperature", room_id="oproom", temp_thresholds=(45.0,)),
    SensorSpec(sensor_id="door-1", kind="door_access", door_id="door-1"),
    SensorSpec(sensor_id="power-1", kind="power"),
)


class TestReadSensor:
    def test_smoke_false_below_threshold(self):
        state = initial_state(PLAN, SCRIPT)
        state = replace(state, fires=(FireSource(Vec3(5, 8, 0), "oproom", intensity=0.1),))
        reading = read_sensor(SPECS[0], state, PLAN)
        assert reading.value is False

    def test_smoke_flips_on_first_tick_at_threshold(self):
        """Step the linear growth model to the predicted crossing tick."""
        state = initial_state(PLAN, SCRIPT)
        state = apply_action(state, PLAN, SCRIPT, "0", "fire", "startFire")
        crossing_tick = None
        for _ in range(SCRIPT.total_ticks()):
            state = step(state, PLAN, SCRIPT)
            if read_sensor(SPECS[0], state, PLAN).value:
                crossing_tick = state.tick
                break
        assert crossing_tick is not None
        # Linear model: intensity(k ticks) = k * 0.05 * 0.1 >= 0.15 -> k = 30.
        assert crossing_tick == 30

    def test_temperature_tracks_affine_model(self):
        state = initial_state(PLAN, SCRIPT)
        state = replace(state, fires=(FireSource(Vec3(5, 8, 0), "oproom", intensity=0.5),))
        state = step(state, PLAN, SCRIPT)
        reading = read_sensor(SPECS[1], state, PLAN)
        # base 21 C + 40 C x intensity (0.5 + one tick of growth).
        assert reading.value == pytest.approx(21.0 + 40.0 * state.fires[0].intensity)

    def test_door_reports_mode(self):
        state = initial_state(PLAN, SCRIPT)
        assert read_sensor(SPECS[2], state, PLAN).value == "locked"
        state = apply_action(state, PLAN, SCRIPT, "door-1", "door", "open")
        assert read_sensor(SPECS[2], state, PLAN).value == "open"

    def test_power_mirrors_world(self):
        state = initial_state(PLAN, SCRIPT)
        assert read_sensor(SPECS[3], state, PLAN).value is True
        state = apply_action(state, PLAN, SCRIPT, "power", "power", "cut")
        assert read_sensor(SPECS[3], state, PLAN).value is False

    def test_flood_follows_schedule(self):
        spec = SensorSpec(
            sensor_id="flood-1", kind="flood", room_id="oproom",
            flood_schedule=((2.0, True), (5.0, False)),
        )
        state = initial_state(PLAN, SCRIPT)
        assert read_sensor(spec, state, PLAN).value is False
        state = replace(state, tick=25)  # clock 2.5
        assert read_sensor(spec, state, PLAN).value is True
        state = replace(state, tick=60)  # clock 6.0
        assert read_sensor(spec, state, PLAN).value is False


class TestDiffReadings:
    def _readings(self, bank: SensorBank, state):
        return bank.read_all(state, PLAN)

    def test_identical_readings_no_changes(self):
        bank = SensorBank(SPECS)
        state = initial_state(PLAN, SCRIPT)
        readings = self._readings(bank, state)
        assert diff_readings(readings, readings) == []

    def test_boolean_flip_reported(self):
        bank = SensorBank(SPECS)
        state = initial_state(PLAN, SCRIPT)
        before = self._readings(bank, state)
        after = self._readings(bank, apply_action(state, PLAN, SCRIPT, "power", "power", "cut"))
        changes = diff_readings(before, after)
        assert changes == [("power-1", "power", True, False)]

    def test_temperature_reported_only_on_threshold_crossing(self):
        bank = SensorBank(SPECS)
        state = initial_state(PLAN, SCRIPT)
        base = self._readings(bank, state)

        warm = replace(state, room_temperatures={**state.room_temperatures, "oproom": 31.0})
        assert diff_readings(base, self._readings(bank, warm), {"temp-1": (45.0,)}) == []

        hot = replace(state, room_temperatures={**state.room_temperatures, "oproom": 46.0})
        changes = diff_readings(base, self._readings(bank, hot), {"temp-1": (45.0,)})
        assert changes == [("temp-1", "temperature", 21.0, 46.0)]

    def test_mismatched_sensor_sets_rejected(self):
        bank = SensorBank(SPECS)
        state = initial_state(PLAN, SCRIPT)
        readings = self._readings(bank, state)
        with pytest.raises(ValueError):
            diff_readings(readings, {"other": readings["power-1"]})


class TestSensorBank:
    def test_first_scan_is_silent_baseline(self):
        bank = SensorBank(SPECS)
        state = initial_state(PLAN, SCRIPT)
        assert bank.scan(state, PLAN) == []

    def test_sequences_gapless_per_sensor(self):
        bank = SensorBank(SPECS)
        state = initial_state(PLAN, SCRIPT)
        bank.scan(state, PLAN)
        notes = []
        for k in range(1, 41):
            if k % 4 == 0:
                verb = "cut" if state.power_on else "restore"
                state = apply_action(state, PLAN, SCRIPT, "power", "power", verb)
            state = step(state, PLAN, SCRIPT)
            notes += bank.scan(state, PLAN)
        power_seqs = [n.seq for n in notes if n.sensor_id == "power-1"]
        assert power_seqs == list(range(1, len(power_seqs) + 1))
        assert len(power_seqs) == 10

    def test_access_pulse_per_grant_with_credential(self):
        bank = SensorBank(SPECS)
        state = initial_state(PLAN, SCRIPT)
        bank.scan(state, PLAN)
        state = apply_action(state, PLAN, SCRIPT, "door-1", "door", "grant:badge-9")
        state = step(state, PLAN, SCRIPT)
        notes = bank.scan(state, PLAN)
        access = [n for n in notes if n.sensor_id == "door-1/access"]
        mode = [n for n in notes if n.sensor_id == "door-1"]
        assert len(access) == 1
        assert access[0].old_value is None
        assert access[0].new_value == "badge-9"
        assert len(mode) == 1
        assert (mode[0].old_value, mode[0].new_value) == ("locked", "open")

    def test_snapshot_burst_covers_every_sensor(self):
        bank = SensorBank(SPECS)
        state = initial_state(PLAN, SCRIPT)
        bank.scan(state, PLAN)
        burst = bank.snapshot_notifications()
        assert [n.sensor_id for n in burst] == sorted(s.sensor_id for s in SPECS)
        assert all(n.snapshot for n in burst)

    def test_duplicate_sensor_ids_rejected(self):
        with pytest.raises(ValueError):
            SensorBank((SPECS[0], SPECS[0]))
