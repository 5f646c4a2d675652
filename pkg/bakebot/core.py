# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

"""

    Fixed-step simulation loop

:func:`run` wires the controller to the plant for one scenario::

    frame = sense(world)
    state, command = controller_tick(state, frame, config)
    world = plant_tick(world, command, dt)

and records what happened as :class:`~bakebot.trace.TraceEvent` values.  A run is
strictly sequential and bit-for-bit deterministic for a given scenario.

:class:`SimulationDriver` runs independent scenarios in parallel on a Twisted
reactor's thread pool for callers living outside the reactor thread.

"""
from dataclasses import dataclass
import logging

from twisted.internet import defer, threads

from bakebot import controller as ctl
from bakebot import plant
from bakebot.errors import ReactorNotRunning
from bakebot.motors import DcMotorModel, StepperModel
from bakebot.trace import EventKind, TraceEvent

#
# Constants/Globals
#
logger = logging.getLogger('bakebot')

ENERGY_SAMPLE_TICKS = 100

EXIT_DONE = 0
EXIT_FAULT = 1
EXIT_TICK_LIMIT = 2


#
# Helpers
#
def _unwrap_first_error(failure):
    failure.trap(defer.FirstError)
    return failure.value.subFailure


#
# Results
#
@dataclass(frozen=True)
class Outcome(object):
    """How a run ended: ``Done``, ``Fault`` (with a reason) or ``TickLimit``"""

    kind: str
    reason: ctl.FaultReason = None

    def __str__(self):
        if self.reason is not None:
            return '%s(%s)' % (self.kind, self.reason.value)
        return self.kind

    @property
    def exit_code(self):
        return {'Done': EXIT_DONE, 'Fault': EXIT_FAULT}.get(self.kind, EXIT_TICK_LIMIT)


DONE = Outcome('Done')
TICK_LIMIT = Outcome('TickLimit')


@dataclass(frozen=True)
class RunResult(object):
    """Everything a run produced

    ``frames[i]`` is what the controller saw on tick ``i`` and ``decisions[i]`` the
    ``(MissionState, ActuatorCommand)`` it answered with.
    """

    events: tuple
    outcome: Outcome
    world: plant.World
    frames: tuple
    decisions: tuple

    @property
    def ticks(self):
        return len(self.frames)

    def state_path(self):
        """MissionState path reconstructed from the StateChange events"""

        path = []
        for event in self.events:
            if event.kind is EventKind.STATE_CHANGE:
                if not path:
                    path.append(event.payload['old'])
                path.append(event.payload['new'])
        return path


#
# Scenario wiring
#
def build_world(scenario):
    """Initial :class:`~bakebot.plant.World` for a loaded scenario"""

    motors = scenario.motors
    config = plant.PlantConfig(
        dc_motor=DcMotorModel(motors.base.target_speed, motors.base.time_constant,
                              motors.base.efficiency, motors.base.drag_constant),
        stepper=StepperModel(motors.stepper.max_step_rate, motors.stepper.rated_power,
                             motors.stepper.holding_torque),
        coil_volts=scenario.gripper.coil_volts,
        coil_resistance=scenario.gripper.coil_resistance,
        payload_limit=scenario.gripper.payload_limit_g,
        logic_high_volts=scenario.logic.high_volts,
        backlash=plant.BacklashModel(scenario.backlash.enabled, scenario.backlash.probability,
                                     scenario.backlash.offset_degrees),
        track_start=scenario.track.start_mm,
        track_end=scenario.track.end_mm,
        arm_length=scenario.robot.arm_length_mm,
        start_delay=scenario.start_delay,
    )

    stations = []
    for station_id in plant.StationId:
        cfg = getattr(scenario.stations, station_id.value)
        stations.append(plant.Station(station_id, cfg.position_mm, cfg.arm_angle,
                                      cfg.tolerance_mm, cfg.angle_tolerance))

    trays = {}
    occupant = None
    for tray_id in sorted(scenario.trays):
        cfg = scenario.trays[tray_id]
        if cfg.location == 'furnace':
            trays[tray_id] = plant.Tray(tray_id, cfg.mass_g, plant.IN_FURNACE,
                                        plant.BakeState.BAKING)
            occupant = tray_id
        else:
            trays[tray_id] = plant.Tray(tray_id, cfg.mass_g,
                                        plant.Location.at(plant.StationId.TABLE))

    return plant.World(
        base=plant.BaseState(scenario.robot.initial_position_mm),
        arm_angle=scenario.robot.initial_arm_angle,
        gripper=plant.GripperState(capture_radius=scenario.gripper.capture_radius_mm),
        furnace=plant.FurnaceState(occupant=occupant, bake_duration=scenario.bake_duration),
        trays=trays,
        stations=tuple(stations),
        config=config,
        rng_state=scenario.backlash.seed,
    )


def controller_config(scenario):
    stations = scenario.stations
    return ctl.ControllerConfig(
        watchdog_ticks=scenario.watchdog_ticks(),
        station_angles={plant.StationId.TABLE: stations.table.arm_angle,
                        plant.StationId.FURNACE_PORT: stations.furnace_port.arm_angle},
        angle_tolerance=min(stations.table.angle_tolerance, stations.furnace_port.angle_tolerance),
        gripper_volts=scenario.gripper.coil_volts,
        station_tolerances={plant.StationId.TABLE: stations.table.tolerance_mm,
                            plant.StationId.FURNACE_PORT: stations.furnace_port.tolerance_mm},
        base_time_constant=scenario.motors.base.time_constant,
    )


#
# Simulation loop
#
def run(scenario, check_invariants=False):
    """Simulate one scenario until Done, Fault or ``max_ticks``

    Events of one tick are emitted in the order StateChange, Fault, Command (only
    when it differs from the previous tick's), plant events, EnergySample (every
    100th tick).  All carry the clock at the start of the tick.

    :param check_invariants: check the interlock and plant invariants after every
        tick
    :rtype: :class:`RunResult`
    :raises InvariantViolation: only with ``check_invariants``
    """

    world = build_world(scenario)
    config = controller_config(scenario)
    state = ctl.MissionState()
    events = []
    frames = []
    decisions = []
    last_command = None
    outcome = TICK_LIMIT

    logger.debug('Run: %d trays, dt=%s s, watchdog %d ticks', len(world.trays), scenario.dt,
                 config.watchdog_ticks)
    for tick in range(scenario.max_ticks):
        clock = world.clock

        def emit(kind, payload):
            events.append(TraceEvent(tick, clock, kind, payload))

        frame = plant.sense(world)
        new_state, command = ctl.controller_tick(state, frame, config)
        frames.append(frame)
        decisions.append((new_state, command))

        if new_state.phase is not state.phase:
            emit(EventKind.STATE_CHANGE, {'old': str(state), 'new': str(new_state)})
            logger.info('Tick %d (%.3f s): %s -> %s', tick, clock, state, new_state)
            if new_state.phase is ctl.Phase.FAULT:
                emit(EventKind.FAULT, {'reason': new_state.reason.value,
                                       'phase': state.phase.value})
                logger.warning('Mission fault in %s: %s', state.phase.value,
                               new_state.reason.value)
        if command != last_command:
            emit(EventKind.COMMAND, command.to_dict())
            last_command = command
        if check_invariants:
            ctl.check_interlock(command)

        previous = world
        world = plant.plant_tick(world, command, scenario.dt)
        for plant_event in world.events:
            emit(EventKind(plant_event.kind), plant_event.payload)
        if check_invariants:
            plant.check_invariants(world, previous)

        if tick % ENERGY_SAMPLE_TICKS == 0:
            emit(EventKind.ENERGY_SAMPLE, world.ledger.to_dict())

        state = new_state
        if state.phase is ctl.Phase.DONE:
            outcome = DONE
            break
        if state.phase is ctl.Phase.FAULT:
            outcome = Outcome('Fault', state.reason)
            break

    logger.info('Run finished after %d ticks (%.3f s): %s', len(frames), world.clock, outcome)
    return RunResult(tuple(events), outcome, world, tuple(frames), tuple(decisions))


#
# Parallel runs
#
class SimulationDriver(object):
    """Runs scenarios on a reactor's thread pool

    The reactor must already be running in another thread; runs share nothing, so
    results are identical to calling :func:`run` directly.
    """

    def __init__(self, reactor):
        self._reactor = reactor

    def _check_running(self):
        if not self._reactor.running:
            raise ReactorNotRunning('Twisted Reactor must be started (call .run())')

    def run(self, scenario, check_invariants=False):
        """Run one scenario and block for its :class:`RunResult`"""

        return self.run_many([scenario], check_invariants)[0]

    def run_many(self, scenarios, check_invariants=False):
        """Run scenarios in parallel and block until all finish

        :returns: list of :class:`RunResult` in the order given
        :raises ReactorNotRunning: the reactor has not been started
        """

        self._check_running()

        def start():
            pool = self._reactor.getThreadPool()
            deferreds = [threads.deferToThreadPool(self._reactor, pool, run, scenario,
                                                   check_invariants)
                         for scenario in scenarios]
            d = defer.gatherResults(deferreds, consumeErrors=True)
            d.addErrback(_unwrap_first_error)
            return d

        return threads.blockingCallFromThread(self._reactor, start)
