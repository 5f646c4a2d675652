# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

"""

    Event traces

A trace is one JSON object per line::

    {"tick":0,"clock":0.000000,"kind":"StateChange","payload":{"new":"AlignArmToTable","old":"Idle"}}

Top-level keys always appear in the order tick, clock, kind, payload; payload keys
are sorted.  Every float is written with six decimals, rounded half-to-even, so two
runs of the same scenario produce byte-identical files.

"""
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from enum import Enum
import io
import json
import math

from bakebot.errors import TraceFormatError

#
# Constants/Globals
#
_SIX_PLACES = Decimal('0.000001')


class EventKind(Enum):
    STATE_CHANGE = 'StateChange'
    COMMAND = 'Command'
    PICK = 'Pick'
    RELEASE = 'Release'
    BAKE_DONE = 'BakeDone'
    DROPPED_TRAY = 'DroppedTray'
    FAULT = 'Fault'
    ENERGY_SAMPLE = 'EnergySample'
    STEP = 'Step'


@dataclass(frozen=True)
class TraceEvent(object):
    tick: int
    clock: float
    kind: EventKind
    payload: dict = field(default_factory=dict)

    def to_dict(self):
        return {'tick': self.tick, 'clock': self.clock, 'kind': self.kind.value,
                'payload': self.payload}

    def to_json(self):
        return '{"tick":%d,"clock":%s,"kind":%s,"payload":%s}' % (
            self.tick, format_float(self.clock), json.dumps(self.kind.value),
            _encode(self.payload))


@dataclass(frozen=True)
class Match(object):
    def __bool__(self):
        return True


@dataclass(frozen=True)
class FirstDivergence(object):
    """The earliest point two traces disagree; ``field`` is a dotted payload path,
    one of tick/clock/kind, or ``length``"""

    tick: int
    field: str

    def __bool__(self):
        return False


MATCH = Match()


#
# Encoding
#
def format_float(value):
    """Six decimals, round-half-even on the exact binary value; -0 prints as 0"""

    if not math.isfinite(value):
        raise ValueError('Cannot serialize non-finite float %r' % (value,))
    quantized = Decimal(value).quantize(_SIX_PLACES, rounding=ROUND_HALF_EVEN)
    if quantized == 0:
        quantized = abs(quantized)
    return '%s' % quantized


def _encode(value):
    if value is None:
        return 'null'
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, Enum):
        return json.dumps(value.value)
    if isinstance(value, int):
        return '%d' % value
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        return '{%s}' % ','.join('%s:%s' % (json.dumps(str(k)), _encode(value[k]))
                                 for k in sorted(value))
    if isinstance(value, (list, tuple)):
        return '[%s]' % ','.join(_encode(v) for v in value)
    raise TypeError('Cannot serialize %r' % (value,))


def dumps(events):
    """Render events as JSONL text, one trailing newline per event"""

    return ''.join(event.to_json() + '\n' for event in events)


def write_trace(events, path):
    with io.open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(dumps(events))


#
# Decoding
#
def parse_event(line):
    """Parse one trace line

    :raises TraceFormatError: not JSON, or not shaped like a trace event
    """

    try:
        raw = json.loads(line)
        return TraceEvent(int(raw['tick']), float(raw['clock']), EventKind(raw['kind']),
                          dict(raw['payload']))
    except (ValueError, KeyError, TypeError) as ex:
        raise TraceFormatError('Bad trace line %r: %s' % (line[:80], ex))


def loads(text):
    return [parse_event(line) for line in text.splitlines() if line.strip()]


def read_trace(path):
    with io.open(path, encoding='utf-8') as f:
        return loads(f.read())


#
# Comparison
#
def _flatten(payload, prefix=''):
    flat = {}
    for key, value in payload.items():
        name = prefix + str(key)
        if isinstance(value, dict):
            flat.update(_flatten(value, name + '.'))
        else:
            flat[name] = value
    return flat


def _canonical(value):
    """Compare values the way they would be written"""

    if isinstance(value, float):
        return format_float(value)
    return _encode(value)


def _first_difference(actual, golden):
    if actual.tick != golden.tick:
        return 'tick'
    if _canonical(actual.clock) != _canonical(golden.clock):
        return 'clock'
    if actual.kind is not golden.kind:
        return 'kind'
    mine = _flatten(actual.payload)
    theirs = _flatten(golden.payload)
    for name in sorted(set(mine) | set(theirs)):
        if name not in mine or name not in theirs:
            return name
        if _canonical(mine[name]) != _canonical(theirs[name]):
            return name
    return None


def compare_traces(actual, golden):
    """Field-by-field comparison of two event streams

    :returns: :data:`MATCH`, or the :class:`FirstDivergence`; when one stream is a
        prefix of the other the divergence is reported at the first extra event
        with field ``length``
    """

    for mine, theirs in zip(actual, golden):
        name = _first_difference(mine, theirs)
        if name is not None:
            return FirstDivergence(min(mine.tick, theirs.tick), name)
    if len(actual) != len(golden):
        shorter = min(len(actual), len(golden))
        longer = actual if len(actual) > len(golden) else golden
        return FirstDivergence(longer[shorter].tick, 'length')
    return MATCH
