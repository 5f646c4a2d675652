# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

from bakebot.core import SimulationDriver
from bakebot.scenario import DEFAULT_SCENARIO_PATH, load_scenario_file
from twisted.internet.selectreactor import SelectReactor
import threading
import time

# Start a simple Twisted SelectReactor
reactor = SelectReactor()
t = threading.Thread(target=reactor.run, kwargs={'installSignalHandlers': 0})
t.start()
time.sleep(0.1)  # let reactor start

# Start Driver
driver = SimulationDriver(reactor)

# Sweep the tray mass across the gripper's 200 g payload limit
base = load_scenario_file(DEFAULT_SCENARIO_PATH)
masses = [150, 199, 200, 201, 250]
scenarios = []
for mass in masses:
    trays = {'tray1': base.trays['tray1'].model_copy(update={'mass_g': float(mass)})}
    scenarios.append(base.model_copy(update={'trays': trays}))

# Runs happen in parallel on the reactor's thread pool
for mass, result in zip(masses, driver.run_many(scenarios)):
    print('%d g: %s' % (mass, result.outcome))

reactor.callFromThread(reactor.stop)
t.join()
