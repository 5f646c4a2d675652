# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

from contextlib import contextmanager
import logging
import sys
import threading
import time

import click
from twisted.internet.selectreactor import SelectReactor

from bakebot import core
from bakebot.drive_logic import format_tables, self_test
from bakebot.errors import ConfigError, TraceFormatError
from bakebot.scenario import DEFAULT_SCENARIO_PATH, load_scenario_file, with_overrides
from bakebot.trace import compare_traces, read_trace, write_trace

#
# Constants/Globals
#
logger = logging.getLogger('bakebot')

EXIT_CONFIG = 3
EXIT_DIVERGENCE = 4


#
# Helpers
#
class _EchoHandler(logging.Handler):
    """Log records to stderr through click so captured streams see them"""

    def emit(self, record):
        click.echo(self.format(record), err=True)


def configure_logging(debug):
    if not any(isinstance(h, _EchoHandler) for h in logger.handlers):
        handler = _EchoHandler()
        handler.setFormatter(logging.Formatter('%(levelname)s %(name)s: %(message)s'))
        logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if debug else logging.WARNING)


@contextmanager
def simulation_driver():
    """Run a reactor in a background thread and provide a simulation driver"""
    reactor = SelectReactor()
    t = threading.Thread(target=reactor.run, kwargs={'installSignalHandlers': 0})
    t.start()
    time.sleep(0.1)  # let reactor start
    try:
        yield core.SimulationDriver(reactor)
    finally:
        reactor.callFromThread(reactor.stop)
        t.join()


def load_or_exit(path, seed=None, max_ticks=None):
    try:
        return with_overrides(load_scenario_file(path), seed=seed, max_ticks=max_ticks)
    except ConfigError as ex:
        click.echo('Config error: %s' % ex, err=True)
        sys.exit(EXIT_CONFIG)


def report(name, result):
    click.echo('%s: %s after %d ticks (%.1f s), %.3f J' % (
        name, result.outcome, result.ticks, result.world.clock,
        result.world.ledger.electrical_joules))


@click.group()
@click.option('--debug/--no-debug', default=False, help="Show log debug on stderr")
def root(debug):
    """Command line interface for the bakebot simulator"""
    configure_logging(debug)


@root.command(name='run')
@click.option('--scenario', 'scenario_path', type=click.Path(dir_okay=False),
              default=DEFAULT_SCENARIO_PATH, help='Scenario file (default: built-in mission)')
@click.option('--trace-out', type=click.Path(dir_okay=False), default=None,
              help='Write the JSONL event trace here')
@click.option('--seed', type=int, default=None, help='Override backlash.seed')
@click.option('--max-ticks', type=int, default=None, help='Override max_ticks')
def run_scenario(scenario_path, trace_out, seed, max_ticks):
    """Simulate one scenario; exits 0 Done, 1 Fault, 2 TickLimit, 3 config error"""
    scenario = load_or_exit(scenario_path, seed, max_ticks)
    result = core.run(scenario)
    if trace_out is not None:
        write_trace(result.events, trace_out)
    report(scenario_path, result)
    sys.exit(result.outcome.exit_code)


@root.command(name='validate-tables')
def validate_tables():
    """Print the H-bridge and stepper tables and self-test both codecs"""
    click.echo(format_tables())
    failures = self_test()
    for failure in failures:
        click.echo('FAIL - %s' % failure)
    if failures:
        sys.exit(1)
    click.echo('OK')


@root.command()
@click.option('--actual', type=click.Path(exists=True, dir_okay=False), required=True)
@click.option('--golden', type=click.Path(exists=True, dir_okay=False), required=True)
def compare(actual, golden):
    """Compare a trace against a golden trace; exits 0 on match, 4 on divergence"""
    try:
        result = compare_traces(read_trace(actual), read_trace(golden))
    except TraceFormatError as ex:
        click.echo('Trace error: %s' % ex, err=True)
        sys.exit(EXIT_CONFIG)
    if not result:
        click.echo('First divergence at tick %d: %s' % (result.tick, result.field))
        sys.exit(EXIT_DIVERGENCE)
    click.echo('Match')


@root.command()
@click.argument('scenario_paths', nargs=-1, required=True, type=click.Path(dir_okay=False))
@click.option('--max-ticks', type=int, default=None, help='Override max_ticks')
@click.option('--check-invariants/--no-check-invariants', default=False,
              help='Check plant invariants and the interlock every tick')
def batch(scenario_paths, max_ticks, check_invariants):
    """Run scenarios in parallel; exits with the worst outcome code"""
    scenarios = [load_or_exit(path, max_ticks=max_ticks) for path in scenario_paths]
    with simulation_driver() as driver:
        results = driver.run_many(scenarios, check_invariants)
    for path, result in zip(scenario_paths, results):
        report(path, result)
    sys.exit(max(result.outcome.exit_code for result in results))


def run():
    root()


if __name__ == '__main__':
    run()
