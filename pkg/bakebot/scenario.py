# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

"""

    Scenario files

A scenario is flat UTF-8 text, one ``key = value`` per line, ``#`` starts a comment and
dotted keys nest::

    dt = 0.1
    bake_duration = 30
    stations.table.position_mm = 0
    trays.tray1.mass_g = 150

Omitted keys take their defaults; unknown keys are errors.  Parsed documents are
validated by the pydantic models below and every problem surfaces as a
:class:`~bakebot.errors.ConfigError` naming the dotted field.

"""
from typing import Annotated, Dict, Literal, Optional
import copy
import io
import logging
import math
import os

from pydantic import AfterValidator, BaseModel, ConfigDict, Field, ValidationError

from bakebot.drive_logic import STEP_ANGLES, check_buffer_voltage
from bakebot.errors import ConfigError, InvalidVoltage

#
# Constants/Globals
#
logger = logging.getLogger('bakebot')

DEFAULT_SCENARIO_PATH = os.path.join(os.path.dirname(__file__), 'scenarios', 'default.scenario')

_STATION_DEFAULTS = {
    'table': {'position_mm': 0.0, 'arm_angle': 90},
    'furnace_port': {'position_mm': 1000.0, 'arm_angle': 270},
}
_TRAY_DEFAULTS = {
    'tray1': {'mass_g': 150.0, 'location': 'table'},
}


#
# Field validators
#
def _positive(value):
    if not value > 0:
        raise ValueError('must be positive')
    return value


def _non_negative(value):
    if value < 0:
        raise ValueError('must be >= 0')
    return value


def _fraction(value):
    if not 0 < value <= 1:
        raise ValueError('must be in (0, 1]')
    return value


def _probability(value):
    if not 0 <= value <= 1:
        raise ValueError('must be in [0, 1]')
    return value


def _step_angle(value):
    if value not in STEP_ANGLES:
        raise ValueError('must be one of 0, 90, 180, 270')
    return value


Positive = Annotated[float, AfterValidator(_positive)]
PositiveInt = Annotated[int, AfterValidator(_positive)]
NonNegative = Annotated[float, AfterValidator(_non_negative)]
StepAngle = Annotated[int, AfterValidator(_step_angle)]


#
# Models
#
class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)


class StationConfig(_Section):
    position_mm: float
    arm_angle: StepAngle
    tolerance_mm: NonNegative = 5.0
    angle_tolerance: NonNegative = 2.0


class StationsConfig(_Section):
    table: StationConfig
    furnace_port: StationConfig


class TrayConfig(_Section):
    mass_g: Positive
    location: Literal['table', 'furnace'] = 'table'


class BaseMotorConfig(_Section):
    target_speed: Positive = 100.0
    time_constant: NonNegative = 0.5
    efficiency: Annotated[float, AfterValidator(_fraction)] = 0.775
    drag_constant: NonNegative = 0.05


class StepperConfig(_Section):
    max_step_rate: Positive = 2.0
    rated_power: Positive = 10.0
    holding_torque: Positive = 5.0


class MotorsConfig(_Section):
    base: BaseMotorConfig = Field(default_factory=BaseMotorConfig)
    stepper: StepperConfig = Field(default_factory=StepperConfig)


class GripperConfig(_Section):
    coil_volts: Positive = 12.0
    coil_resistance: Positive = 24.0
    payload_limit_g: Positive = 200.0
    capture_radius_mm: NonNegative = 5.0


class LogicConfig(_Section):
    high_volts: Positive = 5.0


class BacklashConfig(_Section):
    enabled: bool = False
    seed: Annotated[int, Field(ge=0, lt=2 ** 64)] = 0
    probability: Annotated[float, AfterValidator(_probability)] = 0.7
    offset_degrees: NonNegative = 5.0


class RobotConfig(_Section):
    length_in: Positive = 21.0
    height_in: Positive = 17.0
    width_in: Positive = 10.0
    initial_position_mm: float = 0.0
    initial_arm_angle: StepAngle = 0
    arm_length_mm: Positive = 150.0


class TrackConfig(_Section):
    start_mm: float = -500.0
    end_mm: float = 5500.0


class FurnaceConfig(_Section):
    port_opening_in: Positive = 12.0


class ControllerSection(_Section):
    watchdog_ticks: Optional[PositiveInt] = None


class Scenario(_Section):
    """A validated scenario; every field has a default"""

    dt: Positive = 0.1
    max_ticks: PositiveInt = 20000
    bake_duration: Positive = 30.0
    start_delay: NonNegative = 0.0
    stations: StationsConfig
    trays: Dict[str, TrayConfig]
    motors: MotorsConfig = Field(default_factory=MotorsConfig)
    gripper: GripperConfig = Field(default_factory=GripperConfig)
    logic: LogicConfig = Field(default_factory=LogicConfig)
    backlash: BacklashConfig = Field(default_factory=BacklashConfig)
    robot: RobotConfig = Field(default_factory=RobotConfig)
    track: TrackConfig = Field(default_factory=TrackConfig)
    furnace: FurnaceConfig = Field(default_factory=FurnaceConfig)
    controller: ControllerSection = Field(default_factory=ControllerSection)

    def watchdog_ticks(self):
        """Configured watchdog, or :func:`derive_watchdog_ticks` when unset"""

        if self.controller.watchdog_ticks is not None:
            return self.controller.watchdog_ticks
        return derive_watchdog_ticks(self)


#
# Parsing
#
def parse_document(text):
    """Parse scenario text into a nested dict of raw string values

    :raises ConfigError: malformed line, duplicate key or a key used both as a value
        and as a section
    """

    tree = {}
    seen = set()
    for lineno, raw in enumerate(io.StringIO(text), 1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError('line %d' % lineno, 'expected key = value')
        key, value = [part.strip() for part in line.split('=', 1)]
        parts = key.split('.')
        if not all(parts):
            raise ConfigError('line %d' % lineno, 'malformed key %r' % key)
        if key in seen:
            raise ConfigError(key, 'duplicate key')
        seen.add(key)

        node = tree
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(key, 'conflicts with a value set earlier')
        if isinstance(node.get(parts[-1]), dict):
            raise ConfigError(key, 'conflicts with a section set earlier')
        node[parts[-1]] = value
    return tree


def _merge(defaults, overrides):
    merged = copy.deepcopy(defaults)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _config_error(ex):
    """Translate the first pydantic error into a ConfigError"""

    err = ex.errors()[0]
    field = '.'.join(str(part) for part in err['loc']) or 'scenario'
    if err['type'] == 'extra_forbidden':
        reason = 'unknown key'
    elif err['type'] == 'missing':
        reason = 'required'
    elif err['type'] == 'value_error' and 'error' in err.get('ctx', {}):
        reason = str(err['ctx']['error'])
    else:
        reason = err['msg']
    return ConfigError(field, reason)


def _check_scenario(scenario):
    """Cross-field invariants pydantic field validators cannot see"""

    track = scenario.track
    if not track.start_mm < track.end_mm:
        raise ConfigError('track.end_mm', 'must exceed track.start_mm')
    for name in ('table', 'furnace_port'):
        station = getattr(scenario.stations, name)
        if not track.start_mm <= station.position_mm <= track.end_mm:
            raise ConfigError('stations.%s.position_mm' % name, 'must lie on the track')
    stride = scenario.motors.base.target_speed * scenario.dt
    for name in ('table', 'furnace_port'):
        tolerance = getattr(scenario.stations, name).tolerance_mm
        if stride > 2 * tolerance:
            raise ConfigError('stations.%s.tolerance_mm' % name,
                              'must be at least target_speed * dt / 2 (%g mm)' % (stride / 2))
        if scenario.gripper.capture_radius_mm < tolerance:
            raise ConfigError('gripper.capture_radius_mm',
                              'must cover stations.%s.tolerance_mm' % name)
    if not track.start_mm <= scenario.robot.initial_position_mm <= track.end_mm:
        raise ConfigError('robot.initial_position_mm', 'must lie on the track')
    if not scenario.furnace.port_opening_in > scenario.robot.width_in:
        raise ConfigError('furnace.port_opening_in', 'must exceed robot width')
    for name, volts in (('gripper.coil_volts', scenario.gripper.coil_volts),
                        ('logic.high_volts', scenario.logic.high_volts)):
        try:
            violation = check_buffer_voltage(volts)
        except InvalidVoltage as ex:
            raise ConfigError(name, str(ex))
        if violation is not None:
            raise ConfigError(name, 'exceeds the %.0f V buffer input limit' % violation.limit)
    in_furnace = sorted(tray_id for tray_id, tray in scenario.trays.items()
                        if tray.location == 'furnace')
    if len(in_furnace) > 1:
        raise ConfigError('trays.%s.location' % in_furnace[1], 'furnace holds one tray')


def load_scenario(text):
    """Parse and validate a scenario document

    :param text: scenario file contents
    :rtype: :class:`Scenario`
    :raises ConfigError: anything wrong with the document
    """

    tree = parse_document(text)
    tree['stations'] = _merge(_STATION_DEFAULTS, tree.get('stations', {}))
    if 'trays' not in tree:
        tree['trays'] = copy.deepcopy(_TRAY_DEFAULTS)
    try:
        scenario = Scenario.model_validate(tree)
    except ValidationError as ex:
        raise _config_error(ex)
    _check_scenario(scenario)
    return scenario


def load_scenario_file(path):
    """Read and load a scenario from ``path``

    :raises ConfigError: the file cannot be read or is invalid
    """

    try:
        with io.open(path, encoding='utf-8') as f:
            text = f.read()
    except (IOError, OSError) as ex:
        raise ConfigError('scenario', 'cannot read %s: %s' % (path, ex))
    scenario = load_scenario(text)
    logger.info('Loaded scenario %s (dt=%s s, %d trays)', path, scenario.dt, len(scenario.trays))
    return scenario


def with_overrides(scenario, seed=None, max_ticks=None):
    """Apply CLI overrides to a loaded scenario"""

    update = {}
    if max_ticks is not None:
        if not max_ticks > 0:
            raise ConfigError('max_ticks', 'must be positive')
        update['max_ticks'] = max_ticks
    if seed is not None:
        if not 0 <= seed < 2 ** 64:
            raise ConfigError('backlash.seed', 'must be an unsigned 64-bit integer')
        update['backlash'] = scenario.backlash.model_copy(update={'seed': seed})
    return scenario.model_copy(update=update) if update else scenario


def derive_watchdog_ticks(scenario):
    """Ten times the longest phase expected under the scenario's parameters

    The longest phase is the bake, the travel between the stations (plus one time
    constant to settle) or a two-step arm alignment, whichever is longest.
    """

    base = scenario.motors.base
    distance = abs(scenario.stations.furnace_port.position_mm - scenario.stations.table.position_mm)
    travel = distance / base.target_speed + base.time_constant
    align = 2.0 / scenario.motors.stepper.max_step_rate + scenario.dt
    longest = max(scenario.bake_duration, travel, align)
    return 10 * max(1, int(math.ceil(longest / scenario.dt - 1e-9)))
