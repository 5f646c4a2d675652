# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

"""

    Firmware-style mission controller

Each tick the controller reads one :class:`~bakebot.plant.SensorFrame` and answers with
raw logic levels for the H-bridge, an optional stepper step and the gripper coil
voltage.  The mission is a single pass over one tray:

    Idle -> AlignArmToTable -> PickFromTable -> TransportToFurnace -> AlignArmToFurnace
    -> PlaceInFurnace -> WaitBake -> RetrieveFromFurnace -> TransportToTable
    -> AlignArmToTableReturn -> PlaceOnTable -> Done

Transport is closed-loop on where the base would come to rest if the drive stopped
now: the offset to the station minus the coast, ``base_velocity * time_constant``.
Under the first-order drive that rest offset moves by exactly ``target_speed * dt``
per driven tick and not at all while braking, so a station window at least that
wide is always hit; overshoot is answered by driving back.

Any phase that overstays the watchdog, and any dropped tray, ends in ``Fault``.
:func:`controller_tick` is total and never raises.

"""
from dataclasses import dataclass, field
from enum import Enum

from bakebot.drive_logic import (DriveCommand, HBridgeInput, StepDirection, decode_hbridge,
                                 encode_drive)
from bakebot.errors import InvariantViolation
from bakebot.plant import StationId


#
# Domain Types
#
class Phase(Enum):
    IDLE = 'Idle'
    ALIGN_ARM_TO_TABLE = 'AlignArmToTable'
    PICK_FROM_TABLE = 'PickFromTable'
    TRANSPORT_TO_FURNACE = 'TransportToFurnace'
    ALIGN_ARM_TO_FURNACE = 'AlignArmToFurnace'
    PLACE_IN_FURNACE = 'PlaceInFurnace'
    WAIT_BAKE = 'WaitBake'
    RETRIEVE_FROM_FURNACE = 'RetrieveFromFurnace'
    TRANSPORT_TO_TABLE = 'TransportToTable'
    ALIGN_ARM_TO_TABLE_RETURN = 'AlignArmToTableReturn'
    PLACE_ON_TABLE = 'PlaceOnTable'
    DONE = 'Done'
    FAULT = 'Fault'


class FaultReason(Enum):
    TIMEOUT = 'Timeout'
    PICK_FAILED = 'PickFailed'
    DROPPED_TRAY = 'DroppedTray'


MISSION_CHAIN = (
    Phase.IDLE,
    Phase.ALIGN_ARM_TO_TABLE,
    Phase.PICK_FROM_TABLE,
    Phase.TRANSPORT_TO_FURNACE,
    Phase.ALIGN_ARM_TO_FURNACE,
    Phase.PLACE_IN_FURNACE,
    Phase.WAIT_BAKE,
    Phase.RETRIEVE_FROM_FURNACE,
    Phase.TRANSPORT_TO_TABLE,
    Phase.ALIGN_ARM_TO_TABLE_RETURN,
    Phase.PLACE_ON_TABLE,
    Phase.DONE,
)

# phase -> which configured station it works at
_ALIGN = {
    Phase.ALIGN_ARM_TO_TABLE: 'pick_station',
    Phase.ALIGN_ARM_TO_FURNACE: 'place_station',
    Phase.ALIGN_ARM_TO_TABLE_RETURN: 'pick_station',
}
_TRANSPORT = {
    Phase.TRANSPORT_TO_FURNACE: 'place_station',
    Phase.TRANSPORT_TO_TABLE: 'pick_station',
}
_GRIP = frozenset([Phase.PICK_FROM_TABLE, Phase.RETRIEVE_FROM_FURNACE])
_PLACE = frozenset([Phase.PLACE_IN_FURNACE, Phase.PLACE_ON_TABLE])
_ENERGIZED = frozenset([
    Phase.PICK_FROM_TABLE,
    Phase.TRANSPORT_TO_FURNACE,
    Phase.ALIGN_ARM_TO_FURNACE,
    Phase.RETRIEVE_FROM_FURNACE,
    Phase.TRANSPORT_TO_TABLE,
    Phase.ALIGN_ARM_TO_TABLE_RETURN,
])
_TERMINAL = frozenset([Phase.DONE, Phase.FAULT])


@dataclass(frozen=True)
class MissionState(object):
    """Where the controller is in the mission and how long it has been there"""

    phase: Phase = Phase.IDLE
    ticks_in_phase: int = 0
    reason: FaultReason = None

    def __str__(self):
        if self.phase is Phase.FAULT:
            return 'Fault(%s)' % self.reason.value
        return self.phase.value

    @property
    def is_terminal(self):
        return self.phase in _TERMINAL


@dataclass(frozen=True)
class ActuatorCommand(object):
    """One tick of controller output, as levels on the wires"""

    hbridge: HBridgeInput = HBridgeInput(0, 0)
    step_request: StepDirection = None
    gripper_volts: float = 0.0

    def to_dict(self):
        return {
            'hbridge': self.hbridge.to_dict(),
            'step': self.step_request.value if self.step_request is not None else None,
            'gripper_volts': float(self.gripper_volts),
        }


QUIET = ActuatorCommand()


@dataclass(frozen=True)
class ControllerConfig(object):
    """What the firmware knows about its cell

    :param watchdog_ticks: ticks a phase may last before the mission faults
    :param station_angles: arm angle per station id
    :param angle_tolerance: largest arm slack, degrees, accepted as aligned
    :param station_tolerances: base position window per station id, mm
    :param base_time_constant: the base drive's velocity time constant, s
    """

    pick_station: StationId = StationId.TABLE
    place_station: StationId = StationId.FURNACE_PORT
    watchdog_ticks: int = 3000
    station_angles: dict = field(default_factory=lambda: {StationId.TABLE: 90,
                                                          StationId.FURNACE_PORT: 270})
    angle_tolerance: float = 2.0
    gripper_volts: float = 12.0
    station_tolerances: dict = field(default_factory=lambda: {StationId.TABLE: 5.0,
                                                              StationId.FURNACE_PORT: 5.0})
    base_time_constant: float = 0.0

    def __post_init__(self):
        if not self.watchdog_ticks > 0:
            raise ValueError('watchdog_ticks must be positive')
        if self.base_time_constant < 0:
            raise ValueError('base_time_constant must be >= 0')


#
# Helpers
#
def _successor(phase):
    return MISSION_CHAIN[MISSION_CHAIN.index(phase) + 1]


def _shortest_direction(current, target):
    diff = (target - current) % 360
    if diff == 270:
        return StepDirection.COUNTER_CLOCKWISE
    return StepDirection.CLOCKWISE


def _rest_offset(station, frame, config):
    """Signed distance to ``station`` once the base has coasted to a stop"""
    return frame.station_offset[station] - frame.base_velocity * config.base_time_constant


def _settles_at(station, frame, config):
    return abs(_rest_offset(station, frame, config)) <= config.station_tolerances[station]


def _phase_complete(phase, frame, config):
    if phase is Phase.IDLE:
        return frame.start
    if phase in _ALIGN:
        target = config.station_angles[getattr(config, _ALIGN[phase])]
        return frame.arm_angle == target and abs(frame.arm_offset) <= config.angle_tolerance
    if phase in _GRIP:
        return frame.holding
    if phase in _TRANSPORT:
        station = getattr(config, _TRANSPORT[phase])
        return frame.at_station[station] and _settles_at(station, frame, config)
    if phase in _PLACE:
        return not frame.holding
    if phase is Phase.WAIT_BAKE:
        return frame.furnace_done
    return False


def _command(phase, frame, config):
    volts = config.gripper_volts if phase in _ENERGIZED else 0.0
    drive = DriveCommand.STOP
    step = None

    if phase in _ALIGN:
        target = config.station_angles[getattr(config, _ALIGN[phase])]
        if frame.arm_angle != target:
            step = _shortest_direction(frame.arm_angle, target)
        elif abs(frame.arm_offset) > config.angle_tolerance:
            # step off and come back to re-seat the gears
            step = StepDirection.CLOCKWISE
    elif phase in _TRANSPORT:
        station = getattr(config, _TRANSPORT[phase])
        if not _settles_at(station, frame, config):
            ahead = _rest_offset(station, frame, config) > 0
            drive = DriveCommand.FORWARD if ahead else DriveCommand.REVERSE

    return ActuatorCommand(encode_drive(drive), step, volts)


#
# Controller
#
def controller_tick(state, frame, config):
    """Run the mission logic for one tick

    On a transition the command returned is already the new phase's command.

    :returns: ``(MissionState, ActuatorCommand)``
    """

    phase = state.phase
    if phase in _TERMINAL:
        return state, QUIET

    if phase is not Phase.IDLE and frame.tray_dropped:
        return MissionState(Phase.FAULT, 0, FaultReason.DROPPED_TRAY), QUIET

    if _phase_complete(phase, frame, config):
        new_phase = _successor(phase)
        return MissionState(new_phase), _command(new_phase, frame, config)

    ticks = state.ticks_in_phase + 1
    if phase is not Phase.IDLE and ticks > config.watchdog_ticks:
        reason = FaultReason.PICK_FAILED if phase in _GRIP else FaultReason.TIMEOUT
        return MissionState(Phase.FAULT, 0, reason), QUIET

    return MissionState(phase, ticks), _command(phase, frame, config)


def mission_trace(initial, frames, config):
    """Replay ``frames`` through the controller without a plant

    :returns: list of ``(MissionState, ActuatorCommand)``, one per frame
    """

    out = []
    state = initial
    for frame in frames:
        state, command = controller_tick(state, frame, config)
        out.append((state, command))
    return out


def check_interlock(command):
    """Validate an emitted command

    :raises InvariantViolation: the H-bridge sees (1,1), or the arm is asked to step
        while the base is driven
    """

    if (command.hbridge.a, command.hbridge.b) == (1, 1):
        raise InvariantViolation('H-bridge driven with (1,1)')
    driven = decode_hbridge(command.hbridge) is not DriveCommand.STOP
    if command.step_request is not None and driven:
        raise InvariantViolation('Step requested while the base is driven %s' % command.hbridge)
