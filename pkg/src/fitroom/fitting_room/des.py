"""Process-flow (DES) realization of the fitting room.

Customers are passive entities pushed through the flow
entry queue -> job 1 -> fitting -> [help queue -> job 2] -> return queue -> job 3.
Staff dispatch runs at late priority, after every other event at the same
instant, so zero-length activities settle before the next job is chosen.
"""

from __future__ import annotations

import time

from ..event_core import LATE, EventCalendar, draw, replication_streams
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


class _DesRun:
    def __init__(self, cfg: ScenarioConfig, seed: int) -> None:
        self.cfg = cfg
        self.seed = seed
        self.cal = EventCalendar()
        self.streams = replication_streams(seed)
        self.book = QueueBook()
        self.customers: list[Customer] = []
        self.idle = [True] * cfg.staff_count
        # per staff member: (queue, customer, start) of the service in progress
        self.serving: list[tuple[QueueId, Customer, float] | None] = [None] * cfg.staff_count
        self.busy = [0.0, 0.0, 0.0]
        self._dispatch_pending = False
        self._gap = cfg.interarrival_distribution() if cfg.arrivals_enabled else None

    # -- arrivals --------------------------------------------------------------

    def _schedule_next_arrival(self) -> None:
        t = self.cal.clock + draw(self.streams["arrivals"], self._gap)
        if t < self.cfg.horizon_minutes:
            self.cal.schedule(t, self._arrive)

    def _arrive(self) -> None:
        now = self.cal.clock
        c = draw_customer(len(self.customers), now, self.cfg, self.streams)
        self.customers.append(c)
        self._schedule_next_arrival()
        self.book.join(QueueId.ENTRY, c, now)
        self._request_dispatch()

    # -- staff -----------------------------------------------------------------

    def _request_dispatch(self) -> None:
        if not self._dispatch_pending and any(self.idle):
            self._dispatch_pending = True
            self.cal.schedule(self.cal.clock, self._dispatch, priority=LATE)

    def _dispatch(self) -> None:
        self._dispatch_pending = False
        now = self.cal.clock
        for staff, free in enumerate(self.idle):
            if not free:
                continue
            q = self.book.select(self.cfg.job_selection_policy)
            if q is None:
                return
            c = self.book.pop(q, now)
            self.idle[staff] = False
            self.serving[staff] = (q, c, now)
            self.cal.schedule(now + c.duration(q), self._end_service, staff)

    def _end_service(self, staff: int) -> None:
        now = self.cal.clock
        q, c, start = self.serving[staff]
        self.serving[staff] = None
        self.idle[staff] = True
        self.busy[QUEUES.index(q)] += now - start
        c.set_end(q, now)
        if q is QueueId.ENTRY:
            self.cal.schedule(now + c.fitting_duration, self._end_fitting, c)
        elif q is QueueId.HELP:
            # fitting resumes for zero extra time after help
            self.book.join(QueueId.RETURN, c, now)
        self._request_dispatch()

    def _end_fitting(self, c: Customer) -> None:
        self.book.join(QueueId.HELP if c.wants_help else QueueId.RETURN, c, self.cal.clock)
        self._request_dispatch()

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
            for in_progress in self.serving:
                if in_progress is not None:
                    q, _, start = in_progress
                    self.busy[QUEUES.index(q)] += elapsed - start
        return build_result(self.seed, "DES", cfg, self.customers, self.book, self.busy,
                            elapsed, time.perf_counter() - started)


def run_des_replication(config: ScenarioConfig, seed: int) -> ReplicationResult:
    """Run one simulated day as a process-flow model."""
    config.validate()
    return _DesRun(config, seed).run()
