# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.
import os
import shutil
import tempfile
import unittest

from bakebot import scenario
from bakebot.errors import ConfigError
from bakebot.scenario import (derive_watchdog_ticks, load_scenario, load_scenario_file,
                              with_overrides)
from bakebot.test import mocks


class TestLoadScenario(unittest.TestCase):
    def assertConfigError(self, text, field, reason=None):
        with self.assertRaises(ConfigError) as cm:
            load_scenario(text)
        self.assertEqual(cm.exception.field, field)
        if reason is not None:
            self.assertEqual(cm.exception.reason, reason)

    def test_empty_document_is_all_defaults(self):
        s = load_scenario('')
        self.assertEqual(s.dt, 0.1)
        self.assertEqual(s.max_ticks, 20000)
        self.assertEqual(s.bake_duration, 30.0)
        self.assertEqual(s.stations.table.position_mm, 0.0)
        self.assertEqual(s.stations.table.arm_angle, 90)
        self.assertEqual(s.stations.furnace_port.position_mm, 1000.0)
        self.assertEqual(s.stations.furnace_port.arm_angle, 270)
        self.assertEqual(list(s.trays), ['tray1'])
        self.assertEqual(s.trays['tray1'].mass_g, 150.0)
        self.assertEqual(s.trays['tray1'].location, 'table')
        self.assertEqual(s.motors.base.time_constant, 0.5)
        self.assertEqual(s.motors.stepper.max_step_rate, 2.0)
        self.assertEqual(s.gripper.payload_limit_g, 200.0)
        self.assertEqual((s.robot.length_in, s.robot.height_in, s.robot.width_in),
                         (21.0, 17.0, 10.0))
        self.assertFalse(s.backlash.enabled)
        self.assertIsNone(s.controller.watchdog_ticks)

    def test_overrides_and_comments(self):
        s = load_scenario('# a comment\n\nbake_duration = 30  # seconds\n'
                          'stations.furnace_port.position_mm = 2500\n'
                          'backlash.enabled = true\nbacklash.seed = 18446744073709551615\n')
        self.assertEqual(s.bake_duration, 30.0)
        self.assertEqual(s.stations.furnace_port.position_mm, 2500.0)
        self.assertEqual(s.stations.furnace_port.arm_angle, 270)
        self.assertTrue(s.backlash.enabled)
        self.assertEqual(s.backlash.seed, 2 ** 64 - 1)

    def test_trays_replace_the_default(self):
        s = load_scenario('trays.a.mass_g = 50\ntrays.b.mass_g = 60\ntrays.b.location = furnace\n')
        self.assertEqual(sorted(s.trays), ['a', 'b'])
        self.assertEqual(s.trays['b'].location, 'furnace')

    def test_dt_must_be_positive(self):
        self.assertConfigError('dt = 0', 'dt', 'must be positive')
        self.assertConfigError('dt = -0.1', 'dt', 'must be positive')
        self.assertConfigError('max_ticks = 0', 'max_ticks', 'must be positive')

    def test_unknown_keys(self):
        self.assertConfigError('colour = red', 'colour', 'unknown key')
        self.assertConfigError('trays.tray1.colour = red', 'trays.tray1.colour', 'unknown key')
        self.assertConfigError('stations.oven.position_mm = 3', 'stations.oven', 'unknown key')

    def test_malformed_documents(self):
        self.assertConfigError('dt 0.1', 'line 1', 'expected key = value')
        self.assertConfigError('dt = 0.1\ndt = 0.2', 'dt', 'duplicate key')
        self.assertConfigError('\n\nstations..x = 1', 'line 3')
        self.assertConfigError('dt = 0.1\ndt.x = 1', 'dt.x')
        self.assertConfigError('dt = fast', 'dt')

    def test_field_constraints(self):
        self.assertConfigError('stations.table.arm_angle = 45', 'stations.table.arm_angle')
        self.assertConfigError('backlash.seed = 18446744073709551616', 'backlash.seed')
        self.assertConfigError('backlash.probability = 1.5', 'backlash.probability')
        self.assertConfigError('trays.tray1.location = shelf', 'trays.tray1.location')
        self.assertConfigError('motors.base.efficiency = 0', 'motors.base.efficiency')

    def test_cross_field_constraints(self):
        self.assertConfigError('furnace.port_opening_in = 10', 'furnace.port_opening_in')
        self.assertConfigError('stations.furnace_port.position_mm = 6000',
                               'stations.furnace_port.position_mm', 'must lie on the track')
        self.assertConfigError('track.start_mm = 100\ntrack.end_mm = 0', 'track.end_mm')
        self.assertConfigError('trays.a.mass_g = 1\ntrays.a.location = furnace\n'
                               'trays.b.mass_g = 1\ntrays.b.location = furnace', 'trays.b.location')

    def test_buffer_limit(self):
        self.assertConfigError('gripper.coil_volts = 16', 'gripper.coil_volts')
        self.assertConfigError('logic.high_volts = 15.5', 'logic.high_volts')
        self.assertConfigError('gripper.coil_volts = inf', 'gripper.coil_volts')
        load_scenario('gripper.coil_volts = 15')

    def test_station_window_covers_one_tick_of_travel(self):
        # 150 mm/s at 0.1 s covers 15 mm a tick, wider than a +-5 mm window
        self.assertConfigError('motors.base.target_speed = 150\n'
                               'stations.furnace_port.position_mm = 1012',
                               'stations.table.tolerance_mm')
        self.assertConfigError('dt = 0.5', 'stations.table.tolerance_mm')
        load_scenario('motors.base.target_speed = 150\nstations.table.tolerance_mm = 7.6\n'
                      'stations.furnace_port.tolerance_mm = 7.6\ngripper.capture_radius_mm = 8')

    def test_capture_radius_covers_station_window(self):
        self.assertConfigError('stations.furnace_port.tolerance_mm = 8',
                               'gripper.capture_radius_mm')


class TestScenarioFiles(unittest.TestCase):
    def setUp(self):
        self.tmpdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmpdir)

    def test_default_scenario(self):
        s = load_scenario_file(scenario.DEFAULT_SCENARIO_PATH)
        self.assertEqual(s.motors.base.time_constant, 0.0)
        self.assertEqual(s.dt, 0.1)
        self.assertEqual(s.trays['tray1'].mass_g, 150.0)

    def test_missing_file(self):
        with self.assertRaises(ConfigError) as cm:
            load_scenario_file(os.path.join(self.tmpdir, 'nope.scenario'))
        self.assertEqual(cm.exception.field, 'scenario')

    def test_round_trip_through_file(self):
        path = os.path.join(self.tmpdir, 'heavy.scenario')
        with open(path, 'w') as f:
            f.write(mocks.scenario_text({'trays.tray1.mass_g': 201}))
        self.assertEqual(load_scenario_file(path).trays['tray1'].mass_g, 201.0)


class TestDerivedValues(unittest.TestCase):
    def test_default_watchdog(self):
        s = mocks.make_scenario()
        self.assertEqual(derive_watchdog_ticks(s), 3000)
        self.assertEqual(s.watchdog_ticks(), 3000)

    def test_travel_dominates(self):
        s = mocks.make_scenario({'stations.furnace_port.position_mm': 5000, 'bake_duration': 1})
        self.assertEqual(derive_watchdog_ticks(s), 5000)

    def test_explicit_watchdog(self):
        self.assertEqual(mocks.make_scenario({'controller.watchdog_ticks': 40}).watchdog_ticks(),
                         40)

    def test_overrides(self):
        s = mocks.make_scenario()
        self.assertIs(with_overrides(s), s)
        changed = with_overrides(s, seed=7, max_ticks=50)
        self.assertEqual((changed.backlash.seed, changed.max_ticks), (7, 50))
        self.assertEqual(s.max_ticks, 20000)
        self.assertRaises(ConfigError, with_overrides, s, seed=-1)
        self.assertRaises(ConfigError, with_overrides, s, max_ticks=0)
