"""Agent-based kernel: flat state charts driven by timeouts, messages and guards.

Agents share an :class:`~fitroom.event_core.EventCalendar` with the rest of the
model, so both paradigms live on one clock. A chart is a flat set of named
states (no hierarchy, no orthogonal regions) with three kinds of trigger:

* ``Timeout`` fires a fixed or per-agent duration after the state is entered;
  it is armed on entry and disarmed on exit.
* ``MessageTrigger`` fires when a message with a matching tag is delivered.
* ``Condition`` fires when its guard is true during :meth:`Population.notify_guards`.

Any transition may also carry a ``guard`` that must hold for it to be taken.
For timeouts the guard is checked once, when the state is entered.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

from .event_core import LATE, EventCalendar, Event, SchedulingInPast, SimTime

logger = logging.getLogger(__name__)

Guard = Callable[["AgentInstance"], bool]
Action = Callable[["AgentInstance"], None]

DEFAULT_GUARD_CAP = 10_000


class InvalidChart(ValueError):
    pass


class GuardCascadeOverflow(RuntimeError):
    pass


@dataclass(frozen=True)
class Timeout:
    duration: float | Callable[["AgentInstance"], float]

    def delay_for(self, agent: "AgentInstance") -> float:
        d = self.duration(agent) if callable(self.duration) else self.duration
        if d < 0:
            raise SchedulingInPast(f"negative timeout {d} for agent {agent.agent_id}")
        return d

    def describe(self) -> str:
        return "timeout"


@dataclass(frozen=True)
class MessageTrigger:
    tag: str

    def describe(self) -> str:
        return f"message:{self.tag}"


@dataclass(frozen=True)
class Condition:
    name: str
    guard: Guard

    def describe(self) -> str:
        return f"condition:{self.name}"


Trigger = Timeout | MessageTrigger | Condition


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    trigger: Trigger
    action: Action | None = None
    guard: Guard | None = None

    def enabled(self, agent: "AgentInstance") -> bool:
        return self.guard is None or self.guard(agent)


class StateChart:
    """Validated, indexed chart definition shared by many agents."""

    def __init__(self, name: str, states: Iterable[str], initial: str,
                 transitions: Iterable[Transition] = (),
                 entry_actions: dict[str, Action] | None = None,
                 final_states: Iterable[str] = ()) -> None:
        self.name = name
        self.states = tuple(states)
        self.initial = initial
        self.transitions = tuple(transitions)
        self.entry_actions = dict(entry_actions or {})
        self.final_states = frozenset(final_states)
        self._validate()

        self.timeouts: dict[str, list[Transition]] = {s: [] for s in self.states}
        self.on_message: dict[str, dict[str, list[Transition]]] = {s: {} for s in self.states}
        self.conditions: dict[str, list[Transition]] = {s: [] for s in self.states}
        for tr in self.transitions:
            trig = tr.trigger
            if isinstance(trig, Timeout):
                self.timeouts[tr.source].append(tr)
            elif isinstance(trig, MessageTrigger):
                self.on_message[tr.source].setdefault(trig.tag, []).append(tr)
            else:
                self.conditions[tr.source].append(tr)

    def _validate(self) -> None:
        declared = set(self.states)
        if len(declared) != len(self.states):
            raise InvalidChart(f"{self.name}: duplicate state names")
        if self.initial not in declared:
            raise InvalidChart(f"{self.name}: initial state {self.initial!r} is not declared")
        for tr in self.transitions:
            if tr.source not in declared or tr.target not in declared:
                raise InvalidChart(f"{self.name}: transition {tr.source!r}->{tr.target!r} uses an undeclared state")
            if not isinstance(tr.trigger, (Timeout, MessageTrigger, Condition)):
                raise InvalidChart(f"{self.name}: unsupported trigger {tr.trigger!r}")
        for s in list(self.entry_actions) + list(self.final_states):
            if s not in declared:
                raise InvalidChart(f"{self.name}: {s!r} is not a declared state")


@dataclass
class AgentInstance:
    agent_id: int
    chart: StateChart
    current_state: str
    entered_at: SimTime
    attributes: dict[str, Any] = field(default_factory=dict)
    alive: bool = True
    _timers: list[Event] = field(default_factory=list, repr=False)


@dataclass(frozen=True)
class Message:
    tag: str
    sender: int | None
    recipient: int
    payload: Any = None


@dataclass(frozen=True)
class TransitionRecord:
    time: SimTime
    agent_id: int
    from_state: str
    to_state: str
    trigger: str


class Population:
    """All agents of one replication, bound to one calendar.

    Example:
        >>> cal = EventCalendar()
        >>> chart = StateChart("demo", ["A", "B"], "A", [Transition("A", "B", Timeout(5.0))])
        >>> pop = Population(cal)
        >>> aid = pop.spawn_agent(chart)
        >>> _ = cal.run_until(10.0)
        >>> pop.agents[aid].current_state, pop.log[0].time
        ('B', 5.0)
    """

    def __init__(self, calendar: EventCalendar, guard_cap: int = DEFAULT_GUARD_CAP,
                 record_log: bool = True) -> None:
        self.calendar = calendar
        self.guard_cap = guard_cap
        self.agents: dict[int, AgentInstance] = {}
        self.log: list[TransitionRecord] = []
        self.dropped: list[tuple[SimTime, Message, str]] = []
        self.spawned = 0
        self.despawned = 0
        self.record_log = record_log
        self._next_id = 0
        self._guarded: set[int] = set()
        self._notify_pending = False

    @property
    def now(self) -> SimTime:
        return self.calendar.clock

    @property
    def live(self) -> int:
        return len(self.agents)

    # -- lifecycle -------------------------------------------------------------

    def spawn_agent(self, chart: StateChart, attributes: dict[str, Any] | None = None) -> int:
        if not isinstance(chart, StateChart):
            raise InvalidChart(f"not a StateChart: {chart!r}")
        aid = self._next_id
        self._next_id += 1
        agent = AgentInstance(aid, chart, chart.initial, self.now, dict(attributes or {}))
        self.agents[aid] = agent
        self.spawned += 1
        self._enter(agent, chart.initial)
        return aid

    def despawn(self, agent_id: int) -> None:
        agent = self.agents.pop(agent_id)
        self._disarm(agent)
        self._guarded.discard(agent_id)
        agent.alive = False
        self.despawned += 1

    # -- messaging -------------------------------------------------------------

    def send_message(self, msg: Message, at: SimTime | None = None) -> None:
        when = self.now if at is None else at
        if when < self.now:
            raise SchedulingInPast(f"message {msg.tag!r} at t={when} is before clock {self.now}")
        self.calendar.schedule(when, self._deliver, msg)

    def _deliver(self, msg: Message) -> None:
        agent = self.agents.get(msg.recipient)
        if agent is None:
            self._drop(msg, "recipient does not exist")
            return
        for tr in agent.chart.on_message[agent.current_state].get(msg.tag, ()):
            if tr.enabled(agent):
                agent.attributes["last_message"] = msg
                self._fire(agent, tr)
                return
        self._drop(msg, f"no transition for {msg.tag!r} in state {agent.current_state}")

    def _drop(self, msg: Message, reason: str) -> None:
        self.dropped.append((self.now, msg, reason))
        logger.warning("t=%.6f dropped message %r to agent %s: %s", self.now, msg.tag, msg.recipient, reason)

    # -- conditions ------------------------------------------------------------

    def request_notify(self) -> None:
        """Evaluate guards once the current instant has settled.

        Schedules a single :meth:`notify_guards` call at the current time with
        late priority, so it runs after every ordinary event at this instant.
        """
        if not self._notify_pending:
            self._notify_pending = True
            self.calendar.schedule(self.now, self._deferred_notify, priority=LATE)

    def _deferred_notify(self) -> None:
        self._notify_pending = False
        self.notify_guards()

    def notify_guards(self) -> int:
        """Fire enabled condition transitions to a fixed point.

        Each pass visits agents in ascending id and fires at most one condition
        transition per agent. Passes repeat until one fires nothing.
        """
        fired = 0
        for _ in range(self.guard_cap):
            fired_this_pass = 0
            for aid in sorted(self._guarded):
                agent = self.agents.get(aid)
                if agent is None:
                    continue
                for tr in agent.chart.conditions[agent.current_state]:
                    if tr.trigger.guard(agent) and tr.enabled(agent):
                        self._fire(agent, tr)
                        fired_this_pass += 1
                        break
            if not fired_this_pass:
                return fired
            fired += fired_this_pass
        raise GuardCascadeOverflow(f"guards still firing after {self.guard_cap} passes at t={self.now}")

    # -- internals -------------------------------------------------------------

    def _fire(self, agent: AgentInstance, tr: Transition) -> None:
        self._disarm(agent)
        if self.record_log:
            self.log.append(TransitionRecord(self.now, agent.agent_id, tr.source, tr.target,
                                             tr.trigger.describe()))
        if tr.action is not None:
            tr.action(agent)
        if agent.alive:
            self._enter(agent, tr.target)

    def _enter(self, agent: AgentInstance, state: str) -> None:
        chart = agent.chart
        agent.current_state = state
        agent.entered_at = self.now
        if chart.conditions[state]:
            self._guarded.add(agent.agent_id)
        else:
            self._guarded.discard(agent.agent_id)
        for tr in chart.timeouts[state]:
            if tr.enabled(agent):
                agent._timers.append(
                    self.calendar.schedule(self.now + tr.trigger.delay_for(agent), self._timeout, agent, tr))
        entry = chart.entry_actions.get(state)
        if entry is not None:
            entry(agent)
        if agent.alive and state in chart.final_states:
            self.despawn(agent.agent_id)

    def _timeout(self, agent: AgentInstance, tr: Transition) -> None:
        self._fire(agent, tr)

    def _disarm(self, agent: AgentInstance) -> None:
        for ev in agent._timers:
            ev.cancelled = True
        agent._timers.clear()

    def export_log_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "agent_id", "from_state", "to_state", "trigger"])
            for r in self.log:
                w.writerow([f"{r.time:.6f}", r.agent_id, r.from_state, r.to_state, r.trigger])
