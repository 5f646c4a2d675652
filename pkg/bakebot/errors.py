# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

"""Exceptions raised by the bakebot library"""


class BakebotException(Exception):
    """Base class for all exception types raised from this lib"""


class NotAStepAngle(BakebotException):
    """Angle is not one of the four full-step angles (0, 90, 180, 270)

    Possible sources:
        :func:`~bakebot.drive_logic.phase_for_angle`
        :func:`~bakebot.motors.stepper_step`
    """


class InvalidPhase(BakebotException):
    """Stepper line pattern is not a row of the phase table

    Possible sources:
        :class:`~bakebot.drive_logic.StepperPhase`
        :func:`~bakebot.drive_logic.angle_for_phase`
    """


class InvalidVoltage(BakebotException):
    """A voltage was negative or not a finite number

    Possible sources:
        :func:`~bakebot.drive_logic.check_buffer_voltage`
    """


class OverVoltageError(BakebotException):
    """A logic input exceeded what the buffer ICs tolerate

    Possible sources:
        :func:`~bakebot.plant.plant_tick`
    """

    def __init__(self, violation, line):
        BakebotException.__init__(self, '%s: %.3f V exceeds %.1f V' % (line, violation.volts,
                                                                      violation.limit))
        self.violation = violation
        self.line = line


class InvalidTimestep(BakebotException):
    """Timestep was zero or negative

    Possible sources:
        :func:`~bakebot.motors.dc_tick`
        :func:`~bakebot.plant.plant_tick`
    """


class NegativeSpeed(BakebotException):
    """Angular speed was negative

    Possible sources:
        :func:`~bakebot.motors.torque_available`
    """


class RateLimited(BakebotException):
    """The stepper step interval has not elapsed yet; retry next tick

    Possible sources:
        :func:`~bakebot.motors.stepper_step`
    """


class PickFailed(BakebotException):
    """The gripper energized but did not capture a tray

    The coil is energized regardless, ``world`` holds the resulting World and
    ``reason`` one of :class:`~bakebot.plant.PickFailure`.

    Possible sources:
        :func:`~bakebot.plant.gripper_energize`
    """

    def __init__(self, reason, world, tray_id=None):
        BakebotException.__init__(self, 'Pick failed: %s' % reason.value)
        self.reason = reason
        self.world = world
        self.tray_id = tray_id


class ConfigError(BakebotException):
    """A scenario document is malformed or violates a scenario invariant

    Possible sources:
        :func:`~bakebot.scenario.load_scenario`
    """

    def __init__(self, field, reason):
        BakebotException.__init__(self, '%s: %s' % (field, reason))
        self.field = field
        self.reason = reason


class InvariantViolation(BakebotException):
    """A plant or controller invariant was broken during a checked run

    Possible sources:
        :func:`~bakebot.plant.check_invariants`
        :func:`~bakebot.controller.check_interlock`
        :func:`~bakebot.core.run` with check_invariants=True
    """


class ReactorNotRunning(BakebotException):
    """In order to use the SimulationDriver a reactor must be started"""


class TraceFormatError(BakebotException):
    """A trace file line is not a valid trace event

    Possible sources:
        :func:`~bakebot.trace.read_trace`
        :func:`~bakebot.trace.parse_event`
    """
