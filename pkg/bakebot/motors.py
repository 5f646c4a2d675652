# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

"""

    Time-domain actuator models

The base is a geared brushed DC drive modelled as a first-order velocity response;
the arm is a full-step stepper (90 degrees per step) whose available torque follows
the constant-power relation, capped by holding torque.  All functions are pure
state transitions.

"""
from dataclasses import dataclass, replace
import math

from bakebot.drive_logic import DriveCommand, StepDirection, phase_for_angle, as_step_angle
from bakebot.errors import InvalidTimestep, NegativeSpeed, RateLimited, BakebotException

#
# Constants/Globals
#
STEP_ANGLE = 90
TIME_EPSILON = 1e-9  # clocks are accumulated sums of dt

CONSUMERS = ('base_motor', 'stepper', 'gripper_coil')


#
# Domain Types
#
@dataclass(frozen=True)
class DcMotorModel(object):
    """Geared DC base drive

    :param target_speed: ground speed at full drive, mm/s
    :param time_constant: first-order velocity time constant, s (0 is instantaneous)
    :param efficiency: electrical to mechanical, in (0, 1]
    :param drag_constant: rolling drag used as the mechanical work proxy, N
    """

    target_speed: float = 100.0
    time_constant: float = 0.5
    efficiency: float = 0.775
    drag_constant: float = 0.05

    def __post_init__(self):
        if not self.target_speed > 0:
            raise ValueError('target_speed must be positive')
        if self.time_constant < 0:
            raise ValueError('time_constant must be >= 0')
        if not 0 < self.efficiency <= 1:
            raise ValueError('efficiency must be in (0, 1]')
        if self.drag_constant < 0:
            raise ValueError('drag_constant must be >= 0')


@dataclass(frozen=True)
class DcMotorState(object):
    velocity: float = 0.0  # mm/s, positive is forward


@dataclass(frozen=True)
class StepperModel(object):
    """Full-step arm stepper

    :param max_step_rate: steps/s
    :param rated_power: W
    :param holding_torque: N*m
    """

    max_step_rate: float = 2.0
    rated_power: float = 10.0
    holding_torque: float = 5.0
    step_angle: int = STEP_ANGLE

    def __post_init__(self):
        if self.step_angle != STEP_ANGLE:
            raise ValueError('step_angle is fixed at %d' % STEP_ANGLE)
        if not self.max_step_rate > 0:
            raise ValueError('max_step_rate must be positive')
        if not self.rated_power > 0:
            raise ValueError('rated_power must be positive')
        if not self.holding_torque > 0:
            raise ValueError('holding_torque must be positive')

    @property
    def step_period(self):
        return 1.0 / self.max_step_rate

    @property
    def step_omega(self):
        """Shaft speed when stepping at the maximum rate, rad/s"""
        return self.max_step_rate * math.radians(self.step_angle)


@dataclass(frozen=True)
class EnergyLedger(object):
    """Electrical energy drawn per consumer, joules"""

    base_motor: float = 0.0
    stepper: float = 0.0
    gripper_coil: float = 0.0

    @property
    def electrical_joules(self):
        return self.base_motor + self.stepper + self.gripper_coil

    def add(self, consumer, joules):
        """Return a new ledger with ``joules`` booked against ``consumer``"""

        if consumer not in CONSUMERS:
            raise BakebotException('Unknown energy consumer: %s' % consumer)
        if joules < 0:
            raise BakebotException('Energy must be >= 0, got %r' % joules)
        if joules == 0:
            return self
        return replace(self, **{consumer: getattr(self, consumer) + joules})

    def to_dict(self):
        return {
            'total_j': self.electrical_joules,
            'base_motor_j': self.base_motor,
            'stepper_j': self.stepper,
            'gripper_coil_j': self.gripper_coil,
        }


#
# DC drive
#
def _target_velocity(model, command):
    if command is DriveCommand.FORWARD:
        return model.target_speed
    elif command is DriveCommand.REVERSE:
        return -model.target_speed
    return 0.0


def dc_tick(state, model, command, dt):
    """Advance the base drive by ``dt`` using the exact first-order solution

    :returns: ``(new_state, displacement_mm, energy_j)``
    :raises InvalidTimestep: ``dt`` <= 0
    """

    if not dt > 0:
        raise InvalidTimestep('dt must be positive, got %r' % (dt,))

    target = _target_velocity(model, command)
    v = state.velocity
    tau = model.time_constant
    if tau == 0:
        new_v = target
        displacement = target * dt
    else:
        decay = math.exp(-dt / tau)
        new_v = target + (v - target) * decay
        displacement = target * dt + (v - target) * tau * (1.0 - decay)

    # mm -> m for the drag work
    energy = abs(displacement) / 1000.0 * model.drag_constant / model.efficiency
    return DcMotorState(new_v), displacement, energy


#
# Stepper
#
def torque_available(model, omega):
    """Constant-power torque curve, capped by holding torque

    :param omega: shaft speed, rad/s
    :returns: N*m
    :raises NegativeSpeed: ``omega`` < 0
    """

    if omega < 0:
        raise NegativeSpeed('omega must be >= 0, got %r' % (omega,))
    if omega == 0:
        return model.holding_torque
    return min(model.rated_power / omega, model.holding_torque)


def stepper_step(current_angle, direction, last_step_time, now, model):
    """Take one full step if the step-rate interval has elapsed

    :param last_step_time: clock of the previous step, or ``None`` if the arm never
        stepped
    :returns: ``(new_angle, phase)``
    :raises NotAStepAngle: ``current_angle`` is not a step angle
    :raises RateLimited: called before ``1 / max_step_rate`` has elapsed
    """

    current = as_step_angle(current_angle)
    if last_step_time is not None and now - last_step_time + TIME_EPSILON < model.step_period:
        raise RateLimited('%.3f s since last step, need %.3f s' % (now - last_step_time,
                                                                   model.step_period))
    delta = model.step_angle if direction is StepDirection.CLOCKWISE else -model.step_angle
    new_angle = (current + delta) % 360
    return new_angle, phase_for_angle(new_angle)


def stepper_step_energy(model):
    """Electrical energy drawn by one applied step, joules"""

    return model.rated_power * model.step_period
