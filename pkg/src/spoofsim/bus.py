"""Tick clock, node scheduler and latest-write-wins publish/subscribe bus.

Every topic is a single-slot mailbox.  A write replaces the slot iff its
ordering key ``(tick, writer_class, registration_order)`` is not lower than
the key of the payload already held, so within one tick an attacker write is
never displaced by a genuine one regardless of execution order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Optional

from .errors import ConfigurationError, UnknownTopicError

log = logging.getLogger(__name__)


class WriterClass(IntEnum):
    GENUINE = 0
    ATTACKER = 1


class Stage(IntEnum):
    """Execution order of nodes inside one tick."""

    SENSOR = 0
    ATTACKER = 1
    CONTROLLER = 2
    PHYSICS = 3


@dataclass
class SimClock:
    tick: int = 0
    tick_duration: float = 0.001

    def __post_init__(self):
        if self.tick < 0:
            raise ValueError("tick must be non-negative")
        if not self.tick_duration > 0:
            raise ValueError("tick_duration must be positive")

    @property
    def base_rate(self) -> float:
        return 1.0 / self.tick_duration

    @property
    def time(self) -> float:
        return self.tick * self.tick_duration


@dataclass(frozen=True)
class NodeSchedule:
    node_id: str
    rate_hz: float
    phase: int = 0
    writer_class: WriterClass = WriterClass.GENUINE

    def period(self, base_rate: float) -> int:
        if not self.rate_hz > 0:
            raise ConfigurationError(f"node {self.node_id}: rate must be positive")
        if self.rate_hz > base_rate + 1e-9:
            raise ConfigurationError(
                f"node {self.node_id}: rate {self.rate_hz} Hz exceeds base rate {base_rate} Hz"
            )
        return max(1, round(base_rate / self.rate_hz))

    def fires_at(self, tick: int, base_rate: float) -> bool:
        return tick % self.period(base_rate) == self.phase % self.period(base_rate)


@dataclass
class TopicMailbox:
    topic_name: str
    msg_type: type
    payload: Any = None
    writer_class: Optional[WriterClass] = None
    write_tick: Optional[int] = None
    writer_id: Optional[str] = None
    key: Optional[tuple[int, int, int]] = None
    writes: int = 0
    superseded: int = 0


class Node:
    """Base class for anything the scheduler activates."""

    schedule: NodeSchedule
    stage: Stage

    @property
    def node_id(self) -> str:
        return self.schedule.node_id

    def on_tick(self, sim: "SimCore", tick: int) -> None:
        raise NotImplementedError


@dataclass(frozen=True)
class Event:
    tick: int
    source: str
    kind: str
    data: dict = field(default_factory=dict)


@dataclass
class _Registration:
    node: Node
    order: int
    period: int


@dataclass
class SimCore:
    """Single-threaded deterministic scheduler plus the topic table."""

    clock: SimClock = field(default_factory=SimClock)
    record_history: bool = False
    history: list = field(default_factory=list)
    events: list[Event] = field(default_factory=list)

    def __post_init__(self):
        self._topics: dict[str, TopicMailbox] = {}
        self._regs: list[_Registration] = []
        self._by_id: dict[str, _Registration] = {}
        self._ordered: list[_Registration] = []

    # -- topics -----------------------------------------------------------

    def declare_topic(self, name: str, msg_type: type) -> TopicMailbox:
        if name in self._topics:
            if self._topics[name].msg_type is not msg_type:
                raise ConfigurationError(f"topic {name} redeclared with a different type")
            return self._topics[name]
        box = TopicMailbox(name, msg_type)
        self._topics[name] = box
        return box

    def mailbox(self, topic: str) -> TopicMailbox:
        try:
            return self._topics[topic]
        except KeyError:
            raise UnknownTopicError(topic) from None

    @property
    def topics(self) -> list[str]:
        return list(self._topics)

    def publish(self, node_id: str, topic: str, payload: Any) -> bool:
        """Write ``payload``; returns False if an earlier write this tick outranks it."""
        box = self.mailbox(topic)
        if not isinstance(payload, box.msg_type):
            raise ConfigurationError(
                f"{node_id} published {type(payload).__name__} on {topic}, "
                f"which carries {box.msg_type.__name__}"
            )
        reg = self._by_id.get(node_id)
        if reg is None:
            raise ConfigurationError(f"unregistered publisher {node_id}")
        wclass = reg.node.schedule.writer_class
        key = (self.clock.tick, int(wclass), reg.order)
        box.writes += 1
        if box.key is not None and key < box.key:
            box.superseded += 1
            return False
        box.payload = payload
        box.writer_class = wclass
        box.write_tick = self.clock.tick
        box.writer_id = node_id
        box.key = key
        if self.record_history:
            self.history.append((self.clock.tick, topic, node_id, int(wclass)))
        return True

    def sample_latest(self, topic: str) -> Any:
        return self.mailbox(topic).payload

    def emit(self, source: str, kind: str, /, **data) -> Event:
        ev = Event(self.clock.tick, source, kind, data)
        self.events.append(ev)
        log.debug("tick %d %s %s %s", ev.tick, source, kind, data)
        return ev

    # -- nodes ------------------------------------------------------------

    def add_node(self, node: Node) -> Node:
        sched = node.schedule
        if sched.node_id in self._by_id:
            raise ConfigurationError(f"duplicate node id {sched.node_id}")
        reg = _Registration(node, len(self._regs), sched.period(self.clock.base_rate))
        self._regs.append(reg)
        self._by_id[sched.node_id] = reg
        self._ordered = sorted(self._regs, key=lambda r: (int(r.node.stage), r.order))
        return node

    def node(self, node_id: str) -> Node:
        return self._by_id[node_id].node

    def advance_tick(self) -> list[str]:
        """Run every node due at the current tick, then move the clock on."""
        tick = self.clock.tick
        fired = []
        for reg in self._ordered:
            if tick % reg.period == reg.node.schedule.phase % reg.period:
                fired.append(reg.node.schedule.node_id)
                reg.node.on_tick(self, tick)
        self.clock.tick = tick + 1
        return fired
