# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

"""

    Logic-level codecs for the robot's two drive circuits

The base DC motor is driven through an H-bridge with two inputs (A, B) and the arm
stepper through a four-line full-step driver (X, X-bar, Y, Y-bar).  This module maps
between those wire patterns and the intent they carry, and guards the buffer IC inputs
that sit between controller and drivers.

Everything here is an immutable value or a pure function.

"""
from dataclasses import dataclass
from enum import Enum, IntEnum
import math

from bakebot.errors import InvalidPhase, InvalidVoltage, NotAStepAngle

#
# Constants/Globals
#
BUFFER_INPUT_LIMIT_VOLTS = 15.0
STEP_ANGLES = (0, 90, 180, 270)


#
# Domain Types
#
class LogicLevel(IntEnum):
    """A single digital line; ``LogicLevel(2)`` raises ValueError"""

    LOW = 0
    HIGH = 1


class DriveCommand(Enum):
    FORWARD = 'Forward'
    REVERSE = 'Reverse'
    STOP = 'Stop'


class StepDirection(Enum):
    """Clockwise walks the phase table in ascending row order (0 -> 90 -> 180 -> 270)"""

    CLOCKWISE = 'Clockwise'
    COUNTER_CLOCKWISE = 'CounterClockwise'

    def reverse(self):
        if self is StepDirection.CLOCKWISE:
            return StepDirection.COUNTER_CLOCKWISE
        return StepDirection.CLOCKWISE


@dataclass(frozen=True)
class HBridgeInput(object):
    """Logic levels on the H-bridge A and B terminals"""

    a: LogicLevel
    b: LogicLevel

    def __post_init__(self):
        object.__setattr__(self, 'a', LogicLevel(self.a))
        object.__setattr__(self, 'b', LogicLevel(self.b))

    def __str__(self):
        return '(%d,%d)' % (self.a, self.b)

    def to_dict(self):
        return {'a': int(self.a), 'b': int(self.b)}


@dataclass(frozen=True)
class StepperPhase(object):
    """Levels on the four stepper driver lines

    Both line pairs must be complementary; anything else raises
    :class:`~bakebot.errors.InvalidPhase`.
    """

    x: LogicLevel
    x_bar: LogicLevel
    y: LogicLevel
    y_bar: LogicLevel

    def __post_init__(self):
        for name in ('x', 'x_bar', 'y', 'y_bar'):
            object.__setattr__(self, name, LogicLevel(getattr(self, name)))
        if self.x == self.x_bar or self.y == self.y_bar:
            raise InvalidPhase('Lines are not complementary: %s' % (self.lines(),))

    def lines(self):
        return (int(self.x), int(self.x_bar), int(self.y), int(self.y_bar))

    def to_dict(self):
        return {'x': int(self.x), 'x_bar': int(self.x_bar),
                'y': int(self.y), 'y_bar': int(self.y_bar)}


@dataclass(frozen=True)
class OverVoltage(object):
    """Buffer guard violation: ``volts`` is above ``limit``"""

    volts: float
    limit: float = BUFFER_INPUT_LIMIT_VOLTS


# (a, b) -> command, all four rows
HBRIDGE_TRUTH_TABLE = (
    ((1, 0), DriveCommand.FORWARD),
    ((0, 1), DriveCommand.REVERSE),
    ((1, 1), DriveCommand.STOP),
    ((0, 0), DriveCommand.STOP),
)

# (x, x_bar, y, y_bar) -> step angle, in clockwise order
STEPPER_PHASE_TABLE = (
    ((0, 1, 0, 1), 0),
    ((1, 0, 0, 1), 90),
    ((1, 0, 1, 0), 180),
    ((0, 1, 1, 0), 270),
)

_DECODE = dict((lines, command) for lines, command in HBRIDGE_TRUTH_TABLE)
_ENCODE = {
    DriveCommand.FORWARD: (1, 0),
    DriveCommand.REVERSE: (0, 1),
    DriveCommand.STOP: (0, 0),  # (1,1) would short the bridge
}
_PHASE_BY_ANGLE = dict((angle, StepperPhase(*lines)) for lines, angle in STEPPER_PHASE_TABLE)
_ANGLE_BY_LINES = dict((lines, angle) for lines, angle in STEPPER_PHASE_TABLE)


#
# H-bridge
#
def decode_hbridge(hbridge_input):
    """Decode the H-bridge terminal levels into the drive intent

    Total over all four input pairs; Stop whenever a == b.

    :param hbridge_input: :class:`HBridgeInput`
    :rtype: :class:`DriveCommand`
    """

    return _DECODE[(int(hbridge_input.a), int(hbridge_input.b))]


def encode_drive(command):
    """Canonical H-bridge levels for a drive command

    Stop is always emitted as (0,0), never (1,1).

    :rtype: :class:`HBridgeInput`
    """

    return HBridgeInput(*_ENCODE[command])


#
# Stepper
#
def as_step_angle(angle):
    try:
        whole = int(angle)
    except (TypeError, ValueError):
        raise NotAStepAngle('Not a step angle: %r' % (angle,))
    if whole != angle or whole not in _PHASE_BY_ANGLE:
        raise NotAStepAngle('Not a step angle: %r' % (angle,))
    return whole


def phase_for_angle(angle):
    """Driver line levels that hold the rotor at ``angle``

    :param angle: degrees, one of 0, 90, 180, 270
    :rtype: :class:`StepperPhase`
    :raises NotAStepAngle: ``angle`` is not a table angle
    """

    return _PHASE_BY_ANGLE[as_step_angle(angle)]


def angle_for_phase(phase):
    """Inverse of :func:`phase_for_angle`

    :param phase: :class:`StepperPhase` or a raw ``(x, x_bar, y, y_bar)`` tuple read
        off the wire
    :returns: angle in degrees
    :raises InvalidPhase: the pattern is not a table row
    """

    lines = phase.lines() if isinstance(phase, StepperPhase) else tuple(int(l) for l in phase)
    try:
        return _ANGLE_BY_LINES[lines]
    except KeyError:
        raise InvalidPhase('Not a phase table row: %s' % (lines,))


def next_phase(current, direction):
    """Advance one row of the phase table, wrapping 270 -> 0 (or the reverse)

    :rtype: :class:`StepperPhase`
    """

    delta = 90 if direction is StepDirection.CLOCKWISE else -90
    return _PHASE_BY_ANGLE[(angle_for_phase(current) + delta) % 360]


#
# Buffer guard
#
def check_buffer_voltage(volts):
    """Check a logic input voltage against the buffer tolerance

    The limit is inclusive: exactly 15 V is accepted.

    :param volts: input voltage, finite and >= 0
    :returns: ``None`` when acceptable, else an :class:`OverVoltage` value
    :raises InvalidVoltage: ``volts`` is negative, NaN or infinite
    """

    if not math.isfinite(volts):
        raise InvalidVoltage('Voltage must be finite, got %r' % (volts,))
    if volts < 0:
        raise InvalidVoltage('Voltage must be >= 0, got %r' % (volts,))
    if volts > BUFFER_INPUT_LIMIT_VOLTS:
        return OverVoltage(float(volts))
    return None


#
# Self test
#
def self_test():
    """Exercise both codecs against their tables

    :returns: list of failure descriptions, empty when everything checks out
    """

    failures = []
    for lines, expected in HBRIDGE_TRUTH_TABLE:
        actual = decode_hbridge(HBridgeInput(*lines))
        if actual is not expected:
            failures.append('decode_hbridge%s = %s, expected %s' % (lines, actual.value,
                                                                   expected.value))
        if (lines[0] == lines[1]) != (actual is DriveCommand.STOP):
            failures.append('decode_hbridge%s breaks Stop <=> a == b' % (lines,))
    for command in DriveCommand:
        encoded = encode_drive(command)
        if decode_hbridge(encoded) is not command:
            failures.append('encode_drive(%s) does not round-trip' % command.value)
        if (encoded.a, encoded.b) == (1, 1):
            failures.append('encode_drive(%s) emits (1,1)' % command.value)
    for lines, angle in STEPPER_PHASE_TABLE:
        if phase_for_angle(angle).lines() != lines:
            failures.append('phase_for_angle(%d) = %s, expected %s' % (
                angle, phase_for_angle(angle).lines(), lines))
        if angle_for_phase(lines) != angle:
            failures.append('angle_for_phase%s != %d' % (lines, angle))
    for _, angle in STEPPER_PHASE_TABLE:
        start = phase_for_angle(angle)
        phase = start
        for _ in range(4):
            phase = next_phase(phase, StepDirection.CLOCKWISE)
        if phase != start:
            failures.append('four clockwise steps from %d are not the identity' % angle)
        back = next_phase(next_phase(start, StepDirection.CLOCKWISE),
                          StepDirection.COUNTER_CLOCKWISE)
        if back != start:
            failures.append('clockwise then counter-clockwise from %d is not the identity' % angle)
    return failures


def format_tables():
    """Render both logic tables as plain text"""

    out = ['H-bridge', '  A  B  FUNCTION']
    for (a, b), command in HBRIDGE_TRUTH_TABLE:
        out.append('  %d  %d  %s' % (a, b, decode_hbridge(HBridgeInput(a, b)).value))
    out.append('')
    out.append('Stepper driver')
    out.append('  X  X-bar  Y  Y-bar  ANGLE')
    for _, angle in STEPPER_PHASE_TABLE:
        x, x_bar, y, y_bar = phase_for_angle(angle).lines()
        out.append('  %d  %d      %d  %d      %d' % (x, x_bar, y, y_bar, angle))
    return '\n'.join(out)
