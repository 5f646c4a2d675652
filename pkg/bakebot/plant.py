# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

"""

    The simulated world the controller drives

A three-wheel base on a single straight track, a one-joint arm turned by the stepper,
an electromagnetic gripper on the arm, a single-occupant furnace and the trays moving
between a table and the furnace.

A :class:`World` is a value: every operation here returns a new World and never
mutates its argument.  Things worth recording in a trace (picks, releases, steps,
finished bakes, dropped trays) are attached to the returned World as
:class:`PlantEvent` values in ``world.events``; :func:`plant_tick` clears them at the
start of every tick.

"""
from dataclasses import dataclass, field, replace
from enum import Enum
import logging

from bakebot.drive_logic import (STEP_ANGLES, LogicLevel, StepDirection, check_buffer_voltage,
                                 decode_hbridge)
from bakebot.errors import (InvalidTimestep, InvariantViolation, OverVoltageError, PickFailed,
                            RateLimited)
from bakebot.motors import (TIME_EPSILON, DcMotorModel, DcMotorState, EnergyLedger, StepperModel,
                            dc_tick, stepper_step, stepper_step_energy, torque_available)

#
# Constants/Globals
#
logger = logging.getLogger('bakebot')

GRAVITY = 9.81  # m/s^2
POSITION_EPSILON = 1e-6  # mm, positions are accumulated sums of displacements

_MASK64 = (1 << 64) - 1
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15


#
# Seeded randomness
#
def splitmix64(state):
    """One SplitMix64 draw

    :param state: 64-bit generator state
    :returns: ``(new_state, value)`` with ``value`` a 64-bit unsigned integer
    """

    state = (state + _SPLITMIX_GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def unit_float(value):
    """Map a 64-bit draw onto [0, 1) using its top 53 bits"""

    return (value >> 11) * (1.0 / (1 << 53))


#
# Domain Types
#
class StationId(Enum):
    TABLE = 'table'
    FURNACE_PORT = 'furnace_port'


class BakeState(Enum):
    UNBAKED = 'Unbaked'
    BAKING = 'Baking'
    BAKED = 'Baked'


class LocationKind(Enum):
    STATION = 'station'
    FURNACE = 'furnace'
    GRIPPER = 'gripper'
    DROPPED = 'dropped'


class PickFailure(Enum):
    OVERLOAD = 'Overload'
    NOTHING_THERE = 'NothingThere'
    STILL_BAKING = 'StillBaking'


@dataclass(frozen=True)
class Location(object):
    kind: LocationKind
    station: StationId = None

    def __str__(self):
        if self.kind is LocationKind.STATION:
            return self.station.value
        return self.kind.value

    @classmethod
    def at(cls, station_id):
        return cls(LocationKind.STATION, station_id)


IN_FURNACE = Location(LocationKind.FURNACE)
IN_GRIPPER = Location(LocationKind.GRIPPER)
DROPPED = Location(LocationKind.DROPPED)


@dataclass(frozen=True)
class Tray(object):
    """A metal biscuit tray

    ``elapsed`` is the time spent baking so far and only grows while the tray sits
    in the furnace.
    """

    id: str
    mass: float  # g
    location: Location
    bake: BakeState = BakeState.UNBAKED
    elapsed: float = 0.0


@dataclass(frozen=True)
class Station(object):
    id: StationId
    base_position: float  # mm
    arm_angle: int
    tolerance: float = 5.0  # mm
    angle_tolerance: float = 2.0  # degrees

    def __post_init__(self):
        if self.arm_angle not in STEP_ANGLES:
            raise ValueError('Station arm angle must be one of %s' % (STEP_ANGLES,))


@dataclass(frozen=True)
class BaseState(object):
    position: float = 0.0  # mm along the track
    motor: DcMotorState = DcMotorState()


@dataclass(frozen=True)
class GripperState(object):
    coil_volts: float = 0.0
    holding: str = None
    capture_radius: float = 5.0  # mm


@dataclass(frozen=True)
class FurnaceState(object):
    occupant: str = None
    bake_duration: float = 30.0  # s
    done_signal: bool = False


@dataclass(frozen=True)
class BacklashModel(object):
    """Gear slack drawn after every applied step; off unless ``enabled``"""

    enabled: bool = False
    probability: float = 0.7  # chance a positioning lands exactly
    offset_degrees: float = 5.0


@dataclass(frozen=True)
class PlantConfig(object):
    """Fixed physical parameters of one simulated robot"""

    dc_motor: DcMotorModel = DcMotorModel()
    stepper: StepperModel = StepperModel()
    coil_volts: float = 12.0
    coil_resistance: float = 24.0  # ohm
    payload_limit: float = 200.0  # g
    logic_high_volts: float = 5.0
    backlash: BacklashModel = BacklashModel()
    track_start: float = -500.0  # mm
    track_end: float = 5500.0  # mm
    arm_length: float = 150.0  # mm
    start_delay: float = 0.0  # s


@dataclass(frozen=True)
class PlantEvent(object):
    kind: str
    payload: dict


@dataclass(frozen=True)
class World(object):
    """Complete plant state

    ``arm_angle`` is the commanded step angle and always one of the four step angles;
    ``arm_offset`` is the gear slack the last step landed with.
    """

    base: BaseState
    arm_angle: int
    gripper: GripperState
    furnace: FurnaceState
    trays: dict
    stations: tuple
    ledger: EnergyLedger = EnergyLedger()
    clock: float = 0.0
    config: PlantConfig = PlantConfig()
    arm_offset: float = 0.0
    last_step_time: float = None
    rng_state: int = 0
    events: tuple = ()

    def station(self, station_id):
        for station in self.stations:
            if station.id is station_id:
                return station
        raise KeyError(station_id)

    def trays_at(self, location):
        return [self.trays[tray_id] for tray_id in sorted(self.trays)
                if self.trays[tray_id].location == location]


@dataclass(frozen=True)
class SensorFrame(object):
    """Everything the controller can observe on one tick

    ``station_offset`` maps each station to its signed distance from the base, mm
    (positive when the station is ahead); ``base_velocity`` is the wheel encoder
    reading, mm/s.
    """

    at_station: dict = field(default_factory=dict)
    station_offset: dict = field(default_factory=dict)
    base_velocity: float = 0.0
    arm_angle: int = 0
    arm_offset: float = 0.0
    holding: bool = False
    furnace_done: bool = False
    tray_dropped: bool = False
    start: bool = False
    clock: float = 0.0


#
# Helpers
#
def _emit(world, kind, payload):
    return replace(world, events=world.events + (PlantEvent(kind, payload),))


def _replace_tray(world, tray):
    trays = dict(world.trays)
    trays[tray.id] = tray
    return trays


def _angle_error(a, b):
    return abs((a - b + 180.0) % 360.0 - 180.0)


def _station_at_pose(world):
    """The station the end-effector is over, within capture radius and angle tolerance"""

    actual_angle = world.arm_angle + world.arm_offset
    for station in world.stations:
        reach = world.gripper.capture_radius + POSITION_EPSILON
        if abs(world.base.position - station.base_position) <= reach and \
                _angle_error(actual_angle, station.arm_angle) <= station.angle_tolerance:
            return station
    return None


def _furnace_done(furnace, trays):
    if furnace.occupant is None:
        return False
    return trays[furnace.occupant].elapsed + TIME_EPSILON >= furnace.bake_duration


def _load_torque(world):
    """Torque the held tray puts on the arm joint, N*m"""

    if world.gripper.holding is None:
        return 0.0
    mass_kg = world.trays[world.gripper.holding].mass / 1000.0
    return mass_kg * GRAVITY * world.config.arm_length / 1000.0


#
# Gripper
#
def gripper_energize(world, volts=None):
    """Energize the gripper coil and try to capture a tray at the current pose

    :param volts: coil voltage, defaults to the configured 12 V supply
    :returns: World holding the captured tray
    :raises PickFailed: nothing to capture, tray too heavy or still baking; the
        exception carries the World with the coil energized
    """

    volts = world.config.coil_volts if volts is None else volts
    world = replace(world, gripper=replace(world.gripper, coil_volts=volts))
    if world.gripper.holding is not None:
        return world

    station = _station_at_pose(world)
    tray = None
    if station is not None:
        if station.id is StationId.FURNACE_PORT and world.furnace.occupant is not None:
            tray = world.trays[world.furnace.occupant]
        else:
            candidates = world.trays_at(Location.at(station.id))
            tray = candidates[0] if candidates else None

    station_name = station.id.value if station is not None else None
    if tray is None:
        failure = PickFailure.NOTHING_THERE
    elif tray.mass > world.config.payload_limit:
        failure = PickFailure.OVERLOAD
    elif tray.bake is BakeState.BAKING:
        failure = PickFailure.STILL_BAKING
    else:
        failure = None

    if failure is not None:
        tray_id = tray.id if tray is not None else None
        logger.warning('Pick failed at %s: %s', station_name, failure.value)
        world = _emit(world, 'Pick', {'tray': tray_id, 'station': station_name, 'ok': False,
                                      'reason': failure.value})
        raise PickFailed(failure, world, tray_id)

    furnace = world.furnace
    if tray.location == IN_FURNACE:
        furnace = replace(furnace, occupant=None, done_signal=False)
    tray = replace(tray, location=IN_GRIPPER)
    world = replace(world,
                    trays=_replace_tray(world, tray),
                    furnace=furnace,
                    gripper=replace(world.gripper, holding=tray.id))
    logger.info('Picked %s at %s', tray.id, station_name)
    return _emit(world, 'Pick', {'tray': tray.id, 'station': station_name, 'ok': True})


def gripper_release(world):
    """De-energize the coil, setting down whatever the gripper holds

    Over the furnace port the tray goes into an empty furnace and starts baking; over
    the table it is set on the table.  Anywhere else (or into an occupied furnace) the
    tray is dropped and a ``DroppedTray`` event is recorded.

    :returns: World with the coil off and the gripper empty
    """

    holding = world.gripper.holding
    world = replace(world, gripper=replace(world.gripper, coil_volts=0.0, holding=None))
    if holding is None:
        return world

    tray = world.trays[holding]
    station = _station_at_pose(world)
    furnace = world.furnace
    if station is not None and station.id is StationId.FURNACE_PORT and furnace.occupant is None:
        bake = BakeState.BAKING if tray.bake is BakeState.UNBAKED else tray.bake
        tray = replace(tray, location=IN_FURNACE, bake=bake)
        world = replace(world, trays=_replace_tray(world, tray))
        furnace = replace(furnace, occupant=tray.id)
        world = replace(world, furnace=replace(furnace,
                                               done_signal=_furnace_done(furnace, world.trays)))
        destination = IN_FURNACE
    elif station is not None and station.id is StationId.TABLE:
        tray = replace(tray, location=Location.at(StationId.TABLE))
        world = replace(world, trays=_replace_tray(world, tray))
        destination = tray.location
    else:
        tray = replace(tray, location=DROPPED)
        world = replace(world, trays=_replace_tray(world, tray))
        logger.warning('Dropped %s at %.1f mm, arm %s', tray.id, world.base.position,
                       world.arm_angle)
        world = _emit(world, 'DroppedTray', {'tray': tray.id,
                                             'position_mm': world.base.position,
                                             'arm_angle': world.arm_angle})
        destination = DROPPED

    return _emit(world, 'Release', {'tray': tray.id, 'destination': str(destination)})


#
# Arm
#
def apply_backlash(requested_angle, rng_state, backlash):
    """Draw the gear slack for a positioning of the arm

    One SplitMix64 draw ``u`` per positioning: ``u < probability`` lands exactly,
    the upper half of the remaining range lands ``-offset_degrees`` and the lower
    half ``+offset_degrees``.  Disabled models always return zero and leave the
    generator untouched.

    :returns: ``(offset_degrees, new_rng_state)``
    """

    if not backlash.enabled:
        return 0.0, rng_state
    rng_state, value = splitmix64(rng_state)
    u = unit_float(value)
    if u < backlash.probability:
        return 0.0, rng_state
    miss = (1.0 - backlash.probability) / 2.0
    offset = backlash.offset_degrees
    if u >= backlash.probability + miss:
        offset = -offset
    logger.debug('Backlash at %s deg: %+.1f deg', requested_angle, offset)
    return offset, rng_state


def _step_arm(world, direction):
    stepper = world.config.stepper
    available = torque_available(stepper, stepper.step_omega)
    load = _load_torque(world)
    if load > available:
        logger.warning('Stepper stalled: load %.3f N*m exceeds %.3f N*m', load, available)
        return world

    try:
        new_angle, phase = stepper_step(world.arm_angle, direction, world.last_step_time,
                                        world.clock, stepper)
    except RateLimited:
        return world

    offset, rng_state = apply_backlash(new_angle, world.rng_state, world.config.backlash)
    world = replace(world,
                    arm_angle=new_angle,
                    arm_offset=offset,
                    rng_state=rng_state,
                    last_step_time=world.clock,
                    ledger=world.ledger.add('stepper', stepper_step_energy(stepper)))
    payload = {'direction': direction.value, 'angle': new_angle}
    payload.update(phase.to_dict())
    payload['offset'] = offset
    return _emit(world, 'Step', payload)


#
# Plant
#
def _check_logic_inputs(world, actuators):
    violation = check_buffer_voltage(actuators.gripper_volts)
    if violation is not None:
        logger.warning('Over-voltage on gripper line: %.3f V', violation.volts)
        raise OverVoltageError(violation, 'gripper')

    lines = [actuators.hbridge.a, actuators.hbridge.b]
    if any(level == LogicLevel.HIGH for level in lines) or actuators.step_request is not None:
        violation = check_buffer_voltage(world.config.logic_high_volts)
        if violation is not None:
            logger.warning('Over-voltage on logic lines: %.3f V', violation.volts)
            raise OverVoltageError(violation, 'logic')


def plant_tick(world, actuators, dt):
    """Advance the world by one fixed step under ``actuators``

    Order within a tick: base drive, arm step, furnace bake, gripper coil edge,
    coil energy, clock.

    :param actuators: :class:`~bakebot.controller.ActuatorCommand`
    :raises InvalidTimestep: ``dt`` <= 0
    :raises OverVoltageError: a logic input exceeds the buffer tolerance
    """

    if not dt > 0:
        raise InvalidTimestep('dt must be positive, got %r' % (dt,))
    _check_logic_inputs(world, actuators)
    world = replace(world, events=())
    config = world.config

    # base
    motor, displacement, energy = dc_tick(world.base.motor, config.dc_motor,
                                          decode_hbridge(actuators.hbridge), dt)
    position = world.base.position + displacement
    if position < config.track_start or position > config.track_end:
        position = min(max(position, config.track_start), config.track_end)
        motor = DcMotorState(0.0)
    world = replace(world, base=BaseState(position, motor),
                    ledger=world.ledger.add('base_motor', energy))

    # arm
    if actuators.step_request is not None:
        world = _step_arm(world, actuators.step_request)

    # furnace
    occupant = world.furnace.occupant
    if occupant is not None and world.trays[occupant].bake is BakeState.BAKING:
        tray = world.trays[occupant]
        tray = replace(tray, elapsed=tray.elapsed + dt)
        if tray.elapsed + TIME_EPSILON >= world.furnace.bake_duration:
            tray = replace(tray, bake=BakeState.BAKED)
            logger.info('%s baked after %.1f s', tray.id, tray.elapsed)
            world = _emit(world, 'BakeDone', {'tray': tray.id})
        world = replace(world, trays=_replace_tray(world, tray))
        world = replace(world, furnace=replace(world.furnace,
                                               done_signal=_furnace_done(world.furnace,
                                                                         world.trays)))

    # gripper
    volts = actuators.gripper_volts
    if volts > 0 and world.gripper.coil_volts == 0:
        try:
            world = gripper_energize(world, volts)
        except PickFailed as ex:
            world = ex.world
    elif volts == 0 and world.gripper.coil_volts > 0:
        world = gripper_release(world)
    elif volts != world.gripper.coil_volts:
        world = replace(world, gripper=replace(world.gripper, coil_volts=volts))

    coil = world.gripper.coil_volts
    if coil > 0:
        world = replace(world, ledger=world.ledger.add(
            'gripper_coil', coil * coil / config.coil_resistance * dt))

    return replace(world, clock=world.clock + dt)


#
# Sensing
#
def sense(world):
    """Project the world onto what the controller's sensors report

    :rtype: :class:`SensorFrame`
    """

    offsets = dict((station.id, station.base_position - world.base.position)
                   for station in world.stations)
    at_station = dict((station.id, abs(offsets[station.id]) <= station.tolerance + POSITION_EPSILON)
                      for station in world.stations)
    return SensorFrame(
        at_station=at_station,
        station_offset=offsets,
        base_velocity=world.base.motor.velocity,
        arm_angle=world.arm_angle,
        arm_offset=world.arm_offset,
        holding=world.gripper.holding is not None,
        furnace_done=world.furnace.done_signal,
        tray_dropped=any(tray.location == DROPPED for tray in world.trays.values()),
        start=world.clock + TIME_EPSILON >= world.config.start_delay,
        clock=world.clock,
    )


#
# Invariants
#
def check_invariants(world, previous=None):
    """Assert the plant invariants on ``world``

    :param previous: the World one tick earlier, enables the monotonicity checks
    :raises InvariantViolation: on the first broken invariant
    """

    def fail(message, *args):
        raise InvariantViolation(message % args)

    in_gripper = [t.id for t in world.trays.values() if t.location == IN_GRIPPER]
    in_furnace = [t.id for t in world.trays.values() if t.location == IN_FURNACE]
    if in_gripper != ([world.gripper.holding] if world.gripper.holding is not None else []):
        fail('Gripper holds %s but trays located in gripper are %s', world.gripper.holding,
             in_gripper)
    if in_furnace != ([world.furnace.occupant] if world.furnace.occupant is not None else []):
        fail('Furnace holds %s but trays located in furnace are %s', world.furnace.occupant,
             in_furnace)
    if world.gripper.holding is not None and not world.gripper.coil_volts > 0:
        fail('Gripper holds %s with the coil off', world.gripper.holding)
    for tray in world.trays.values():
        if tray.bake is BakeState.BAKING and tray.location != IN_FURNACE:
            fail('%s is baking outside the furnace', tray.id)
    if world.furnace.done_signal != _furnace_done(world.furnace, world.trays):
        fail('Furnace done signal is %s', world.furnace.done_signal)
    if world.arm_angle not in STEP_ANGLES:
        fail('Arm angle %r is not a step angle', world.arm_angle)
    if not world.config.track_start <= world.base.position <= world.config.track_end:
        fail('Base position %.3f mm is off the track', world.base.position)

    if previous is None:
        return
    if world.clock < previous.clock:
        fail('Clock went backwards: %r -> %r', previous.clock, world.clock)
    if set(world.trays) != set(previous.trays):
        fail('Tray set changed: %s -> %s', sorted(previous.trays), sorted(world.trays))
    order = [BakeState.UNBAKED, BakeState.BAKING, BakeState.BAKED]
    for tray_id, tray in world.trays.items():
        before = previous.trays[tray_id]
        if order.index(tray.bake) < order.index(before.bake) or tray.elapsed < before.elapsed:
            fail('%s bake regressed: %s -> %s', tray_id, before.bake.value, tray.bake.value)
        if tray.elapsed > before.elapsed and before.location != IN_FURNACE:
            fail('%s accumulated bake time outside the furnace', tray_id)
    for consumer in ('base_motor', 'stepper', 'gripper_coil'):
        if getattr(world.ledger, consumer) < getattr(previous.ledger, consumer):
            fail('Energy ledger for %s decreased', consumer)
    if world.ledger.electrical_joules < previous.ledger.electrical_joules:
        fail('Energy ledger total decreased')
