# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.
from dataclasses import replace
import math
import unittest

from bakebot import plant
from bakebot.controller import QUIET, ActuatorCommand
from bakebot.drive_logic import HBridgeInput, StepDirection
from bakebot.errors import InvalidTimestep, InvariantViolation, OverVoltageError, PickFailed
from bakebot.plant import (DROPPED, IN_FURNACE, IN_GRIPPER, BakeState, BacklashModel, Location,
                           PickFailure, StationId)
from bakebot.test import mocks

TABLE = Location.at(StationId.TABLE)
FORWARD = HBridgeInput(1, 0)


def held(world, tray_id='tray1'):
    """``world`` with the gripper energized and holding ``tray_id``"""

    trays = dict(world.trays)
    trays[tray_id] = replace(trays[tray_id], location=IN_GRIPPER)
    return replace(world, trays=trays,
                   gripper=replace(world.gripper, coil_volts=12.0, holding=tray_id))


def baking(world, tray_id='tray1', elapsed=0.0):
    """``world`` with ``tray_id`` sitting in the furnace"""

    trays = dict(world.trays)
    trays[tray_id] = replace(trays[tray_id], location=IN_FURNACE, bake=BakeState.BAKING,
                             elapsed=elapsed)
    return replace(world, trays=trays, furnace=replace(world.furnace, occupant=tray_id))


def tick(world, command=QUIET, dt=0.1, times=1):
    for _ in range(times):
        world = plant.plant_tick(world, command, dt)
    return world


class TestSplitMix64(unittest.TestCase):
    def test_reference_vectors(self):
        state = 1234567
        outputs = []
        for _ in range(5):
            state, value = plant.splitmix64(state)
            outputs.append(value)
        self.assertEqual(outputs, [6457827717110365317, 3203168211198807973,
                                   9817491932198370423, 4593380528125082431,
                                   16408922859458223821])
        self.assertEqual(plant.splitmix64(0)[1], 0xE220A8397B1DCDAF)

    def test_unit_float_range(self):
        self.assertEqual(plant.unit_float(0), 0.0)
        self.assertLess(plant.unit_float((1 << 64) - 1), 1.0)


class TestBacklash(unittest.TestCase):
    def test_disabled_draws_nothing(self):
        self.assertEqual(plant.apply_backlash(90, 42, BacklashModel()), (0.0, 42))

    def test_seeded_draw(self):
        # first draw from seed 0 is ~0.883, past the +offset band
        offset, state = plant.apply_backlash(90, 0, BacklashModel(enabled=True))
        self.assertEqual(offset, -5.0)
        self.assertNotEqual(state, 0)

    def test_success_rate(self):
        model = BacklashModel(enabled=True, probability=0.7, offset_degrees=5.0)
        state = 0
        offsets = []
        for _ in range(10000):
            offset, state = plant.apply_backlash(90, state, model)
            offsets.append(offset)
        self.assertAlmostEqual(offsets.count(0.0) / 10000.0, 0.7, delta=0.01)
        self.assertEqual(set(offsets), set([0.0, 5.0, -5.0]))


class TestGripper(unittest.TestCase):
    def setUp(self):
        # at the table, arm over it
        self.world = mocks.make_world(arm_angle=90)

    def test_pick_at_table(self):
        world = plant.gripper_energize(self.world)
        self.assertEqual(world.gripper.holding, 'tray1')
        self.assertEqual(world.gripper.coil_volts, 12.0)
        self.assertEqual(world.trays['tray1'].location, IN_GRIPPER)
        self.assertEqual(world.events[-1].kind, 'Pick')
        self.assertTrue(world.events[-1].payload['ok'])
        plant.check_invariants(world)

    def test_payload_limit_is_inclusive(self):
        for mass, ok in ((199, True), (200, True), (201, False)):
            world = mocks.make_world({'trays.tray1.mass_g': mass}, arm_angle=90)
            if ok:
                self.assertEqual(plant.gripper_energize(world).gripper.holding, 'tray1')
            else:
                with self.assertRaises(PickFailed) as cm:
                    plant.gripper_energize(world)
                self.assertEqual(cm.exception.reason, PickFailure.OVERLOAD)
                self.assertEqual(cm.exception.tray_id, 'tray1')
                self.assertEqual(cm.exception.world.gripper.coil_volts, 12.0)
                self.assertIsNone(cm.exception.world.gripper.holding)

    def test_nothing_there(self):
        for world in (mocks.move_base(self.world, 500.0), replace(self.world, arm_angle=180)):
            with self.assertRaises(PickFailed) as cm:
                plant.gripper_energize(world)
            self.assertEqual(cm.exception.reason, PickFailure.NOTHING_THERE)
            self.assertEqual(cm.exception.world.events[-1].payload['ok'], False)

    def test_still_baking(self):
        world = baking(mocks.move_base(replace(self.world, arm_angle=270), 1000.0))
        with self.assertRaises(PickFailed) as cm:
            plant.gripper_energize(world)
        self.assertEqual(cm.exception.reason, PickFailure.STILL_BAKING)

    def test_backlash_slack_blocks_pick(self):
        with self.assertRaises(PickFailed):
            plant.gripper_energize(replace(self.world, arm_offset=5.0))
        world = plant.gripper_energize(replace(self.world, arm_offset=-2.0))
        self.assertEqual(world.gripper.holding, 'tray1')

    def test_release_into_furnace(self):
        world = held(mocks.move_base(replace(self.world, arm_angle=270), 1000.0))
        world = plant.gripper_release(world)
        self.assertEqual(world.trays['tray1'].location, IN_FURNACE)
        self.assertEqual(world.trays['tray1'].bake, BakeState.BAKING)
        self.assertEqual(world.furnace.occupant, 'tray1')
        self.assertEqual(world.gripper.coil_volts, 0.0)
        self.assertEqual(world.events[-1].payload, {'tray': 'tray1', 'destination': 'furnace'})
        plant.check_invariants(world)

    def test_release_on_table(self):
        world = plant.gripper_release(held(self.world))
        self.assertEqual(world.trays['tray1'].location, TABLE)
        self.assertEqual(world.events[-1].payload['destination'], 'table')

    def test_release_elsewhere_drops(self):
        world = plant.gripper_release(held(mocks.move_base(self.world, 400.0)))
        self.assertEqual(world.trays['tray1'].location, DROPPED)
        self.assertEqual([e.kind for e in world.events], ['DroppedTray', 'Release'])
        self.assertTrue(plant.sense(world).tray_dropped)

    def test_release_into_occupied_furnace_drops(self):
        world = mocks.make_world({'trays.tray2.mass_g': 100}, arm_angle=270)
        world = held(baking(mocks.move_base(world, 1000.0), 'tray2'), 'tray1')
        world = plant.gripper_release(world)
        self.assertEqual(world.trays['tray1'].location, DROPPED)
        self.assertEqual(world.furnace.occupant, 'tray2')


class TestPlantTick(unittest.TestCase):
    def setUp(self):
        self.world = mocks.make_world()

    def test_clock_and_quiet_tick(self):
        world = tick(self.world, times=3)
        self.assertAlmostEqual(world.clock, 0.3)
        self.assertEqual(world.base.position, 0.0)
        self.assertEqual(world.ledger.electrical_joules, 0.0)

    def test_invalid_timestep(self):
        self.assertRaises(InvalidTimestep, plant.plant_tick, self.world, QUIET, 0)

    def test_over_voltage(self):
        tick(self.world, ActuatorCommand(gripper_volts=15.0))
        with self.assertRaises(OverVoltageError) as cm:
            tick(self.world, ActuatorCommand(gripper_volts=15.5))
        self.assertEqual(cm.exception.line, 'gripper')
        world = replace(self.world, config=replace(self.world.config, logic_high_volts=24.0))
        self.assertRaises(OverVoltageError, tick, world, ActuatorCommand(hbridge=FORWARD))
        tick(world)

    def test_drive_and_energy(self):
        world = tick(self.world, ActuatorCommand(hbridge=FORWARD), times=10)
        self.assertAlmostEqual(world.base.position, 100.0)
        self.assertAlmostEqual(world.ledger.base_motor, 0.1 * 0.05 / 0.775)
        plant.check_invariants(world, self.world)

    def test_track_end_stop(self):
        world = mocks.make_world({'track.end_mm': 1005}, base=plant.BaseState(1000.0))
        world = tick(world, ActuatorCommand(hbridge=FORWARD))
        self.assertEqual(world.base.position, 1005.0)
        self.assertEqual(world.base.motor.velocity, 0.0)

    def test_step_rate_limited(self):
        step = ActuatorCommand(step_request=StepDirection.CLOCKWISE)
        world = tick(self.world, step, times=5)
        self.assertEqual(world.arm_angle, 90)
        self.assertEqual(world.ledger.stepper, 5.0)
        world = tick(world, step)
        self.assertEqual(world.arm_angle, 180)
        self.assertEqual(world.events[0].kind, 'Step')
        self.assertEqual(world.events[0].payload['angle'], 180)
        self.assertEqual((world.events[0].payload['x'], world.events[0].payload['y']), (1, 1))

    def test_stall_under_heavy_load(self):
        world = held(mocks.make_world({'robot.arm_length_mm': 10000}, arm_angle=90))
        world = tick(world, ActuatorCommand(step_request=StepDirection.CLOCKWISE,
                                            gripper_volts=12.0))
        self.assertEqual(world.arm_angle, 90)
        self.assertEqual(world.ledger.stepper, 0.0)

    def test_bake(self):
        world = baking(self.world)
        world = tick(world, times=299)
        self.assertFalse(world.furnace.done_signal)
        world = tick(world)
        self.assertEqual(world.trays['tray1'].bake, BakeState.BAKED)
        self.assertTrue(world.furnace.done_signal)
        self.assertEqual(world.events[0].kind, 'BakeDone')
        world = tick(world)
        self.assertEqual(world.events, ())
        self.assertAlmostEqual(world.trays['tray1'].elapsed, 30.0)

    def test_coil_energy(self):
        world = tick(mocks.make_world(arm_angle=90), ActuatorCommand(gripper_volts=12.0))
        self.assertEqual(world.gripper.holding, 'tray1')
        self.assertAlmostEqual(world.ledger.gripper_coil, 0.6)
        world = tick(world)
        self.assertEqual(world.trays['tray1'].location, TABLE)
        self.assertAlmostEqual(world.ledger.gripper_coil, 0.6)

    def test_failed_pick_keeps_coil_energized(self):
        world = tick(self.world, ActuatorCommand(gripper_volts=12.0))
        self.assertEqual(world.gripper.coil_volts, 12.0)
        self.assertIsNone(world.gripper.holding)
        self.assertEqual(world.events[0].payload['reason'], 'NothingThere')


class TestSense(unittest.TestCase):
    def test_frame(self):
        world = mocks.make_world(arm_angle=90, arm_offset=5.0)
        frame = plant.sense(mocks.move_base(world, 4.0))
        self.assertTrue(frame.at_station[StationId.TABLE])
        self.assertFalse(frame.at_station[StationId.FURNACE_PORT])
        self.assertEqual((frame.arm_angle, frame.arm_offset), (90, 5.0))
        self.assertTrue(frame.start)
        self.assertEqual(frame.station_offset, {StationId.TABLE: -4.0,
                                                StationId.FURNACE_PORT: 996.0})
        self.assertEqual(frame.base_velocity, 0.0)
        self.assertFalse(plant.sense(mocks.move_base(world, 6.0)).at_station[StationId.TABLE])

    def test_velocity_is_reported(self):
        world = tick(mocks.make_world({'motors.base.time_constant': 0.5}),
                     ActuatorCommand(hbridge=FORWARD))
        self.assertAlmostEqual(plant.sense(world).base_velocity, 100.0 * (1 - math.exp(-0.2)))

    def test_gripper_reaches_wherever_the_base_is_at_station(self):
        world = mocks.move_base(mocks.make_world(arm_angle=90), 5.0 + 1e-7)
        self.assertTrue(plant.sense(world).at_station[StationId.TABLE])
        self.assertEqual(plant.gripper_energize(world).gripper.holding, 'tray1')

    def test_start_delay(self):
        world = mocks.make_world({'start_delay': 1.0})
        self.assertFalse(plant.sense(world).start)
        self.assertTrue(plant.sense(tick(world, times=10)).start)


class TestInvariants(unittest.TestCase):
    def setUp(self):
        self.world = mocks.make_world()

    def test_clean_world(self):
        plant.check_invariants(self.world)
        plant.check_invariants(tick(self.world), self.world)

    def test_hold_without_coil(self):
        world = held(self.world)
        world = replace(world, gripper=replace(world.gripper, coil_volts=0.0))
        self.assertRaises(InvariantViolation, plant.check_invariants, world)

    def test_baking_outside_furnace(self):
        trays = {'tray1': replace(self.world.trays['tray1'], bake=BakeState.BAKING)}
        self.assertRaises(InvariantViolation, plant.check_invariants,
                          replace(self.world, trays=trays))

    def test_ledger_and_clock_monotone(self):
        later = tick(self.world, ActuatorCommand(hbridge=FORWARD))
        self.assertRaises(InvariantViolation, plant.check_invariants, self.world, later)

    def test_off_track(self):
        self.assertRaises(InvariantViolation, plant.check_invariants,
                          mocks.move_base(self.world, 6000.0))
