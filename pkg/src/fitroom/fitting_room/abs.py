"""Agent-based realization of the fitting room.

Customers and staff are agents with their own state charts. Staff pick work
through condition transitions out of ``Idle`` and run the service as a
timeout; customers move between states on the ``serve``/``done`` messages
staff send them, and on their own fitting timeout.
"""

from __future__ import annotations

import time

from ..agent_core import (
    AgentInstance,
    Condition,
    Message,
    MessageTrigger,
    Population,
    StateChart,
    Timeout,
    Transition,
)
from ..event_core import EventCalendar, draw, replication_streams
from .model import (
    QUEUES,
    Customer,
    QueueBook,
    QueueId,
    ReplicationResult,
    ScenarioConfig,
    build_result,
    draw_customer,
)

CUSTOMER_STATES = ("WaitEntry", "BeingServedEntry", "Fitting", "WaitHelp", "BeingHelped",
                   "WaitReturn", "BeingServedReturn", "Departed")
STAFF_STATES = ("Idle", "ServingEntry", "Helping", "ServingReturn")

_SERVING_STATE = {QueueId.ENTRY: "ServingEntry", QueueId.HELP: "Helping",
                  QueueId.RETURN: "ServingReturn"}

SERVE = "serve"
DONE = "done"


class _AbsRun:
    def __init__(self, cfg: ScenarioConfig, seed: int, record_log: bool = False) -> None:
        self.cfg = cfg
        self.seed = seed
        self.cal = EventCalendar()
        self.pop = Population(self.cal, record_log=record_log)
        self.streams = replication_streams(seed)
        self.book = QueueBook()
        self.customers: list[Customer] = []
        self.busy = [0.0, 0.0, 0.0]
        self._gap = cfg.interarrival_distribution() if cfg.arrivals_enabled else None
        self.customer_chart = self._customer_chart()
        self.staff_chart = self._staff_chart()
        self.staff_ids = [self.pop.spawn_agent(self.staff_chart, {"job": None})
                          for _ in range(cfg.staff_count)]

    # -- charts ----------------------------------------------------------------

    def _customer_chart(self) -> StateChart:
        def joins(q: QueueId):
            def enter(agent: AgentInstance) -> None:
                self.book.join(q, agent.attributes["customer"], self.cal.clock)
                self.pop.request_notify()
            return enter

        def fitting_time(agent: AgentInstance) -> float:
            return agent.attributes["customer"].fitting_duration

        def wants_help(agent: AgentInstance) -> bool:
            return agent.attributes["customer"].wants_help

        serve, done = MessageTrigger(SERVE), MessageTrigger(DONE)
        return StateChart(
            "customer",
            CUSTOMER_STATES,
            "WaitEntry",
            [
                Transition("WaitEntry", "BeingServedEntry", serve),
                Transition("BeingServedEntry", "Fitting", done),
                Transition("Fitting", "WaitHelp", Timeout(fitting_time), guard=wants_help),
                Transition("Fitting", "WaitReturn", Timeout(fitting_time),
                           guard=lambda a: not wants_help(a)),
                Transition("WaitHelp", "BeingHelped", serve),
                Transition("BeingHelped", "WaitReturn", done),
                Transition("WaitReturn", "BeingServedReturn", serve),
                Transition("BeingServedReturn", "Departed", done),
            ],
            entry_actions={
                "WaitEntry": joins(QueueId.ENTRY),
                "WaitHelp": joins(QueueId.HELP),
                "WaitReturn": joins(QueueId.RETURN),
            },
            final_states=("Departed",),
        )

    def _staff_chart(self) -> StateChart:
        policy = self.cfg.job_selection_policy

        def picks(q: QueueId):
            def guard(agent: AgentInstance) -> bool:
                return self.book.select(policy) is q
            return guard

        def take(q: QueueId):
            def action(agent: AgentInstance) -> None:
                now = self.cal.clock
                c = self.book.pop(q, now)
                agent.attributes["job"] = (q, c, now)
                self.pop.send_message(Message(SERVE, agent.agent_id, c.agent_id))
            return action

        def service_time(agent: AgentInstance) -> float:
            q, c, _ = agent.attributes["job"]
            return c.duration(q)

        def finish(agent: AgentInstance) -> None:
            now = self.cal.clock
            q, c, start = agent.attributes["job"]
            agent.attributes["job"] = None
            self.busy[QUEUES.index(q)] += now - start
            c.set_end(q, now)
            self.pop.send_message(Message(DONE, agent.agent_id, c.agent_id))

        transitions = []
        for q in QUEUES:
            state = _SERVING_STATE[q]
            transitions.append(Transition("Idle", state, Condition(f"next_is_{q.value}", picks(q)),
                                          action=take(q)))
            transitions.append(Transition(state, "Idle", Timeout(service_time), action=finish))
        return StateChart("staff", STAFF_STATES, "Idle", transitions,
                          entry_actions={"Idle": lambda agent: self.pop.request_notify()})

    # -- arrivals --------------------------------------------------------------

    def _schedule_next_arrival(self) -> None:
        t = self.cal.clock + draw(self.streams["arrivals"], self._gap)
        if t < self.cfg.horizon_minutes:
            self.cal.schedule(t, self._arrive)

    def _arrive(self) -> None:
        c = draw_customer(len(self.customers), self.cal.clock, self.cfg, self.streams)
        self.customers.append(c)
        self._schedule_next_arrival()
        # staff address the customer only after the deferred guard pass
        c.agent_id = self.pop.spawn_agent(self.customer_chart, {"customer": c})

    # -- driver ----------------------------------------------------------------

    def run(self) -> ReplicationResult:
        started = time.perf_counter()
        cfg = self.cfg
        if self._gap is not None:
            self._schedule_next_arrival()
        if cfg.close_policy == "finish_in_system":
            self.cal.run()
            elapsed = max(cfg.horizon_minutes, self.cal.clock)
        else:
            self.cal.run_until(cfg.horizon_minutes)
            elapsed = cfg.horizon_minutes
            for sid in self.staff_ids:
                job = self.pop.agents[sid].attributes["job"]
                if job is not None:
                    q, _, start = job
                    self.busy[QUEUES.index(q)] += elapsed - start
        log = self.pop.log if self.pop.record_log else None
        return build_result(self.seed, "ABS", cfg, self.customers, self.book, self.busy,
                            elapsed, time.perf_counter() - started, transition_log=log)


def run_abs_replication(config: ScenarioConfig, seed: int, record_log: bool = False) -> ReplicationResult:
    """Run one simulated day as an agent-based model.

    With ``record_log`` the agents' full transition log is kept on
    ``result.trace.transition_log``.
    """
    config.validate()
    return _AbsRun(config, seed, record_log).run()
