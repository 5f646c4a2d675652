# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

from bakebot.core import run
from bakebot.scenario import DEFAULT_SCENARIO_PATH, load_scenario_file
from bakebot.trace import EventKind

# Load the built-in mission: one 150 g tray, 30 s in the furnace
scenario = load_scenario_file(DEFAULT_SCENARIO_PATH)

# Simulate it to completion
result = run(scenario)
print('%s after %d ticks (%.1f s)' % (result.outcome, result.ticks, result.world.clock))

# Walk the mission phases as they happened
for event in result.events:
    if event.kind is EventKind.STATE_CHANGE:
        print('%8.1f s  %s -> %s' % (event.clock, event.payload['old'], event.payload['new']))

print('Energy drawn: %.3f J' % result.world.ledger.electrical_joules)
