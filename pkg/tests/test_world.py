"""Floorplan loading, the stepper's laws, actions, and determinism."""

from __future__ import annotations

from dataclasses import replace

import pytest

from sentrysim.geometry import Vec3
from sentrysim.world import (
    BadActionValueError,
    FloorPlanError,
    ScenarioError,
    UnknownActionError,
    UnknownActorError,
    apply_action,
    ground_truth_visible,
    initial_state,
    load_floorplan,
    load_scenario,
    parse_floorplan,
    room_of,
    step,
)
from sentrysim.world.scenario import FireEmitter, ScenarioScript, TimedAction, parse_scenario
from sentrysim.world.state import DOOR_CLOSED, DOOR_OPEN, Agent, FireSource
from sentrysim.assets import demo_floorplan_path, scenario_path


MINIMAL_PLAN = {
    "schema_version": 1,
    "rooms": [{"id": "lab", "rect": [0, 0, 10, 8], "base_temperature": 21.0}],
    "doors": [
        {"id": "d1", "segment": [[4, 0], [6, 0]], "connects": ["lab", "outside"], "hold_open_seconds": 5.0}
    ],
    "zones": [{"id": "z1", "room": "lab", "rect": [1, 1, 3, 3], "purpose": "restricted"}],
}


def minimal_script(**overrides) -> ScenarioScript:
    fields = dict(name="t", seed=1, dt=0.1, duration=10.0, actions=(), fire_emitters=())
    fields.update(overrides)
    return ScenarioScript(**fields)


class TestFloorPlan:
    def test_minimal_plan_loads(self):
        plan = parse_floorplan(MINIMAL_PLAN)
        assert len(plan.rooms) == 1
        assert len(plan.doors) == 1
        assert len(plan.zones) == 1

    def test_two_rooms_share_door_wall(self):
        plan = load_floorplan(demo_floorplan_path())
        door = plan.door("door-1")
        assert set(door.connects) == {"corridor", "oproom"}

    def test_zone_outside_room_rejected(self):
        bad = {**MINIMAL_PLAN, "zones": [{"id": "z-far", "room": "lab", "rect": [8, 6, 12, 9]}]}
        with pytest.raises(FloorPlanError, match="z-far"):
            parse_floorplan(bad)

    def test_overlapping_rooms_rejected(self):
        bad = {
            **MINIMAL_PLAN,
            "rooms": MINIMAL_PLAN["rooms"] + [{"id": "annex", "rect": [5, 0, 15, 8]}],
            "zones": [],
        }
        with pytest.raises(FloorPlanError, match="lab.*annex|annex.*lab"):
            parse_floorplan(bad)

    def test_detached_door_rejected(self):
        bad = {
            **MINIMAL_PLAN,
            "doors": [{"id": "d-float", "segment": [[4, 3], [6, 3]], "connects": ["lab", "outside"]}],
        }
        with pytest.raises(FloorPlanError, match="d-float"):
            parse_floorplan(bad)

    def test_bad_schema_version(self):
        with pytest.raises(FloorPlanError, match="schema_version"):
            parse_floorplan({**MINIMAL_PLAN, "schema_version": 99})


class TestRoomOf:
    def test_centroid(self):
        plan = parse_floorplan(MINIMAL_PLAN)
        assert room_of(plan, Vec3(5.0, 4.0, 0.0)) == "lab"

    def test_shared_edge_belongs_to_min_side_room(self):
        plan = load_floorplan(demo_floorplan_path())
        # y=4 is corridor's max edge and oproom's min edge: oproom wins.
        assert room_of(plan, Vec3(5.0, 4.0, 0.0)) == "oproom"
        assert room_of(plan, Vec3(5.0, 3.999999, 0.0)) == "corridor"

    def test_far_away_is_outside(self):
        plan = parse_floorplan(MINIMAL_PLAN)
        assert room_of(plan, Vec3(1000.0, 0.0, 0.0)) is None


class TestStep:
    def test_straight_line_kinematics(self):
        plan = parse_floorplan(MINIMAL_PLAN)
        script = minimal_script()
        state = initial_state(plan, script)
        agent = Agent(
            agent_id="a", agent_class="person", position=Vec3(0.5, 0.5, 0.0),
            speed=1.5, waypoints=(Vec3(9.5, 0.5, 0.0),),
        )
        state = replace(state, agents=(agent,))
        nxt = step(state, plan, script)
        assert nxt.agents[0].position.x == pytest.approx(0.5 + 1.5 * 0.1)
        assert nxt.agents[0].position.y == 0.5
        assert nxt.clock == pytest.approx(0.1)

    def test_waypoint_popped_within_tolerance(self):
        plan = parse_floorplan(MINIMAL_PLAN)
        script = minimal_script()
        state = initial_state(plan, script)
        agent = Agent(
            agent_id="a", agent_class="person", position=Vec3(1.0, 1.0, 0.0),
            speed=1.0, waypoints=(Vec3(1.095, 1.0, 0.0), Vec3(5.0, 1.0, 0.0)),
        )
        state = replace(state, agents=(agent,))
        nxt = step(state, plan, script)
        # 0.1 m budget covers the first waypoint within the 1 cm tolerance.
        assert nxt.agents[0].waypoints == (Vec3(5.0, 1.0, 0.0),)

    def test_fire_growth_and_temperature(self):
        plan = parse_floorplan(MINIMAL_PLAN)
        script = minimal_script(dt=2.0)
        state = initial_state(plan, script)
        fire = FireSource(location=Vec3(5, 4, 0), room_id="lab", intensity=0.2, growth_rate=0.05)
        state = replace(state, fires=(fire,))
        nxt = step(state, plan, script)
        assert nxt.fires[0].intensity == pytest.approx(0.3)
        assert nxt.room_temperatures["lab"] == pytest.approx(21.0 + 40.0 * 0.3)

    def test_fire_intensity_capped_at_one(self):
        plan = parse_floorplan(MINIMAL_PLAN)
        script = minimal_script(dt=2.0)
        state = initial_state(plan, script)
        fire = FireSource(location=Vec3(5, 4, 0), room_id="lab", intensity=0.99, growth_rate=0.5)
        state = replace(state, fires=(fire,))
        nxt = step(state, plan, script)
        assert nxt.fires[0].intensity == 1.0

    def test_door_closes_after_hold(self):
        plan = parse_floorplan(MINIMAL_PLAN)
        script = minimal_script()
        state = initial_state(plan, script)
        state = apply_action(state, plan, script, "d1", "door", "open")
        assert state.door("d1").mode == DOOR_OPEN
        for _ in range(49):
            state = step(state, plan, script)
            assert state.door("d1").mode == DOOR_OPEN
        state = step(state, plan, script)  # clock reaches 5.0 = hold
        assert state.door("d1").mode == DOOR_CLOSED
        assert state.door("d1").opened_at is None

    def test_script_actions_applied_once_in_order(self):
        plan = parse_floorplan(MINIMAL_PLAN)
        script = minimal_script(
            actions=(
                TimedAction(0.25, "x", "agent", "spawn:person,2,2"),
                TimedAction(0.25, "x", "agent", "walkTo:3,3"),
            )
        )
        state = initial_state(plan, script)
        state = step(state, plan, script)
        state = step(state, plan, script)
        state = step(state, plan, script)
        assert state.agent("x") is not None
        assert state.agent("x").waypoints == (Vec3(3.0, 3.0, 0.0),)

    def test_step_is_pure(self):
        plan = parse_floorplan(MINIMAL_PLAN)
        script = minimal_script()
        state = initial_state(plan, script)
        agent = Agent(
            agent_id="a", agent_class="person", position=Vec3(1, 1, 0),
            waypoints=(Vec3(5, 5, 0),),
        )
        state = replace(state, agents=(agent,))
        before = repr(state)
        first = step(state, plan, script)
        second = step(state, plan, script)
        assert repr(state) == before
        assert first == second

    def test_determinism_across_runs(self):
        plan = load_floorplan(demo_floorplan_path())
        script = load_scenario(scenario_path("tailgating"))

        def trace():
            state = initial_state(plan, script)
            states = [state]
            for _ in range(script.total_ticks()):
                state = step(state, plan, script)
                states.append(state)
            return states

        a, b = trace(), trace()
        assert a == b  # bit-identical sequences, dataclass equality is exact


class TestApplyAction:
    @pytest.fixture
    def world(self):
        plan = parse_floorplan(MINIMAL_PLAN)
        script = minimal_script(
            fire_emitters=(FireEmitter(actor_id="0", location=Vec3(5.0, 4.0, 0.0), growth_rate=0.05),)
        )
        return plan, script, initial_state(plan, script)

    def test_start_fire_at_emitter_location(self, world):
        plan, script, state = world
        nxt = apply_action(state, plan, script, "0", "fire", "startFire")
        assert len(nxt.fires) == 1
        assert nxt.fires[0].location == Vec3(5.0, 4.0, 0.0)
        assert nxt.fires[0].intensity == 0.0
        assert nxt.fires[0].room_id == "lab"

    def test_door_open_sets_opened_at(self, world):
        plan, script, state = world
        nxt = apply_action(state, plan, script, "d1", "door", "open")
        assert nxt.door("d1").mode == DOOR_OPEN
        assert nxt.door("d1").opened_at == state.clock

    def test_grant_increments_and_opens(self, world):
        plan, script, state = world
        nxt = apply_action(state, plan, script, "d1", "door", "grant:badge-7")
        door = nxt.door("d1")
        assert door.mode == DOOR_OPEN
        assert door.granted_credentials_pending == 1
        assert door.last_credential == "badge-7"

    def test_unknown_actor(self, world):
        plan, script, state = world
        with pytest.raises(UnknownActorError, match="99"):
            apply_action(state, plan, script, "99", "fire", "startFire")

    def test_unknown_action_name(self, world):
        plan, script, state = world
        with pytest.raises(UnknownActionError, match="teleport"):
            apply_action(state, plan, script, "0", "teleport", "now")

    def test_unparsable_value(self, world):
        plan, script, state = world
        state = apply_action(state, plan, script, "a", "agent", "spawn:person,2,2")
        with pytest.raises(BadActionValueError, match="banana"):
            apply_action(state, plan, script, "a", "agent", "walkTo:banana,2")

    def test_walk_target_outside_building_rejected(self, world):
        plan, script, state = world
        state = apply_action(state, plan, script, "a", "agent", "spawn:person,2,2")
        with pytest.raises(BadActionValueError, match="outside"):
            apply_action(state, plan, script, "a", "agent", "walkTo:50,50")

    def test_power_cut_and_restore(self, world):
        plan, script, state = world
        cut = apply_action(state, plan, script, "power", "power", "cut")
        assert cut.power_on is False
        restored = apply_action(cut, plan, script, "power", "power", "restore")
        assert restored.power_on is True


class TestScenario:
    def test_actions_must_be_inside_duration(self):
        with pytest.raises(ScenarioError):
            minimal_script(actions=(TimedAction(99.0, "a", "power", "cut"),), duration=10.0)

    def test_unsorted_actions_are_sorted_on_parse(self):
        script = parse_scenario(
            {
                "schema_version": 1,
                "name": "x",
                "duration": 5.0,
                "actions": [
                    {"time": 2.0, "actor": "power", "name": "power", "value": "cut"},
                    {"time": 1.0, "actor": "power", "name": "power", "value": "restore"},
                ],
            }
        )
        assert [a.time for a in script.actions] == [1.0, 2.0]


class TestContainment:
    @pytest.mark.parametrize("name", ["tailgating", "crowding", "loitering", "corridor_walk"])
    def test_agents_never_leave_building(self, name):
        from sentrysim.world.floorplan import point_in_building

        plan = load_floorplan(demo_floorplan_path())
        script = load_scenario(scenario_path(name))
        state = initial_state(plan, script)
        for _ in range(script.total_ticks()):
            state = step(state, plan, script)
            for agent in state.agents:
                assert point_in_building(plan, agent.position.x, agent.position.y), (
                    f"{agent.agent_id} escaped at t={state.clock:.1f}: {agent.position}"
                )


class TestGroundTruthVisible:
    def test_visibility_list_and_frustum(self, room_camera):
        plan = load_floorplan(demo_floorplan_path())
        script = minimal_script()
        state = initial_state(plan, script)
        in_view = Agent(agent_id="v", agent_class="person", position=Vec3(5.0, 7.0, 0.0))
        behind = Agent(agent_id="b", agent_class="person", position=Vec3(5.0, 11.9, 0.0))
        other_room = Agent(agent_id="o", agent_class="person", position=Vec3(5.0, 2.0, 0.0))
        state = replace(state, agents=(in_view, behind, other_room))
        visible = ground_truth_visible(plan, state, room_camera)
        assert [v[0] for v in visible] == ["v"]
