"""Discrete-event kernel: clock, future-event list and seeded random streams.

Times are plain floats measured in minutes since the run starts (9:00 am).
Events at equal times run in insertion order; an optional integer priority
sorts ahead of the sequence number so scenario code can ask for "after
everything else at this instant" processing (see ``LATE``).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from itertools import count
from typing import Any, Callable

import numpy as np

SimTime = float

DEFAULT_HORIZON: SimTime = 480.0

NORMAL = 0
LATE = 1

PURPOSES: tuple[str, ...] = (
    "arrivals",
    "entry_service",
    "help_service",
    "return_service",
    "fitting_duration",
    "help_decision",
    "garment_count",
)

_SEED_MASK = (1 << 64) - 1


class SchedulingInPast(ValueError):
    """Raised when an event is scheduled before the current clock."""


class InvalidDistributionParameter(ValueError):
    pass


class Event:
    """A scheduled unit of work. Handles returned by ``schedule`` are events."""

    __slots__ = ("fire_time", "priority", "sequence", "payload", "args", "cancelled")

    def __init__(self, fire_time: SimTime, priority: int, sequence: int,
                 payload: Callable[..., Any], args: tuple) -> None:
        self.fire_time = fire_time
        self.priority = priority
        self.sequence = sequence
        self.payload = payload
        self.args = args
        self.cancelled = False

    def __repr__(self) -> str:
        name = getattr(self.payload, "__name__", repr(self.payload))
        state = " cancelled" if self.cancelled else ""
        return f"<Event t={self.fire_time:g} seq={self.sequence} {name}{state}>"


class EventCalendar:
    """Future-event list ordered by (fire_time, priority, sequence).

    Example:
        >>> cal = EventCalendar()
        >>> out = []
        >>> for t in (3.0, 1.0, 2.0):
        ...     _ = cal.schedule(t, out.append, t)
        >>> cal.run_until(10.0)
        3
        >>> out
        [1.0, 2.0, 3.0]
    """

    def __init__(self, start: SimTime = 0.0, trace: bool = False) -> None:
        if start < 0:
            raise ValueError("start time must be non-negative")
        self.clock: SimTime = float(start)
        self._heap: list[tuple[float, int, int, Event]] = []
        self._seq = count()
        self.executed = 0
        self.log: list[tuple[SimTime, int]] | None = [] if trace else None

    def __len__(self) -> int:
        return sum(1 for *_, ev in self._heap if not ev.cancelled)

    @property
    def empty(self) -> bool:
        return len(self) == 0

    def peek_time(self) -> SimTime | None:
        heap = self._heap
        while heap and heap[0][3].cancelled:
            heapq.heappop(heap)
        return heap[0][0] if heap else None

    def schedule(self, at: SimTime, payload: Callable[..., Any], *args: Any,
                 priority: int = NORMAL) -> Event:
        if at < self.clock:
            raise SchedulingInPast(f"cannot schedule at t={at} (clock={self.clock})")
        seq = next(self._seq)
        ev = Event(at, priority, seq, payload, args)
        heapq.heappush(self._heap, (at, priority, seq, ev))
        return ev

    def schedule_in(self, delay: SimTime, payload: Callable[..., Any], *args: Any,
                    priority: int = NORMAL) -> Event:
        if delay < 0:
            raise SchedulingInPast(f"negative delay {delay}")
        return self.schedule(self.clock + delay, payload, *args, priority=priority)

    @staticmethod
    def cancel(event: Event) -> None:
        # lazy deletion; the heap entry is skipped when popped
        event.cancelled = True

    def _fire(self, ev: Event) -> None:
        self.clock = ev.fire_time
        self.executed += 1
        if self.log is not None:
            self.log.append((ev.fire_time, ev.sequence))
        ev.payload(*ev.args)

    def step(self) -> bool:
        """Execute the next live event. Returns False when none is left."""
        heap = self._heap
        while heap:
            ev = heapq.heappop(heap)[3]
            if not ev.cancelled:
                self._fire(ev)
                return True
        return False

    def run_until(self, t_end: SimTime) -> int:
        """Execute every event with fire_time <= t_end; leave clock at t_end."""
        if t_end < self.clock:
            raise SchedulingInPast(f"run_until({t_end}) is before clock {self.clock}")
        heap = self._heap
        n = 0
        while heap and heap[0][0] <= t_end:
            ev = heapq.heappop(heap)[3]
            if ev.cancelled:
                continue
            self._fire(ev)
            n += 1
        self.clock = float(t_end)
        return n

    def run(self) -> int:
        """Execute events until the calendar is exhausted."""
        n = 0
        while self.step():
            n += 1
        return n


# -- random streams -----------------------------------------------------------


class RngStream:
    """Seeded uniform stream identified by (seed, stream_index).

    Backed by PCG64 seeded through ``SeedSequence(seed, spawn_key=(index,))``,
    so the sequence is the same on every platform. Uniforms are fetched from
    the generator in blocks; the values are identical to one-at-a-time draws.
    """

    _BLOCK = 256

    def __init__(self, seed: int, stream_index: int) -> None:
        if stream_index < 0:
            raise ValueError("stream_index must be non-negative")
        self.seed = int(seed) & _SEED_MASK
        self.stream_index = int(stream_index)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_index,))
        self._gen = np.random.Generator(np.random.PCG64(ss))
        self._buf: list[float] = []
        self._pos = 0
        self.consumed = 0

    def uniform(self) -> float:
        """One U[0, 1) variate."""
        if self._pos >= len(self._buf):
            self._buf = self._gen.random(self._BLOCK).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        self.consumed += 1
        return u

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_index={self.stream_index})"


def replication_streams(seed: int) -> dict[str, RngStream]:
    """One stream per purpose for a replication seed."""
    return {name: RngStream(seed, i) for i, name in enumerate(PURPOSES)}


# -- distributions ------------------------------------------------------------


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self) -> None:
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise InvalidDistributionParameter(f"exponential rate must be > 0, got {self.rate}")

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    def from_uniform(self, u: float) -> float:
        return -math.log(1.0 - u) / self.rate

    def to_dict(self) -> dict:
        return {"type": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class Deterministic:
    value: float

    def __post_init__(self) -> None:
        if not (self.value >= 0 and math.isfinite(self.value)):
            raise InvalidDistributionParameter(f"deterministic value must be >= 0, got {self.value}")

    @property
    def mean(self) -> float:
        return self.value

    def from_uniform(self, u: float) -> float:
        return self.value

    def to_dict(self) -> dict:
        return {"type": "deterministic", "value": self.value}


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    def __post_init__(self) -> None:
        if not (0 <= self.low <= self.high and math.isfinite(self.high)):
            raise InvalidDistributionParameter(f"uniform needs 0 <= low <= high, got {self.low}, {self.high}")

    @property
    def mean(self) -> float:
        return 0.5 * (self.low + self.high)

    def from_uniform(self, u: float) -> float:
        return self.low + (self.high - self.low) * u

    def to_dict(self) -> dict:
        return {"type": "uniform", "low": self.low, "high": self.high}


@dataclass(frozen=True)
class Geometric:
    """Number of trials up to and including the first success (support 1, 2, ...)."""

    p: float

    def __post_init__(self) -> None:
        if not (0 < self.p <= 1):
            raise InvalidDistributionParameter(f"geometric p must be in (0, 1], got {self.p}")

    @property
    def mean(self) -> float:
        return 1.0 / self.p

    def from_uniform(self, u: float) -> int:
        if self.p == 1.0:
            return 1
        return 1 + int(math.floor(math.log(1.0 - u) / math.log(1.0 - self.p)))

    def to_dict(self) -> dict:
        return {"type": "geometric", "p": self.p}


Distribution = Exponential | Deterministic | Uniform | Geometric

_DIST_TYPES = {
    "exponential": (Exponential, ("rate",)),
    "deterministic": (Deterministic, ("value",)),
    "uniform": (Uniform, ("low", "high")),
    "geometric": (Geometric, ("p",)),
}


def distribution_from_dict(data: dict) -> Distribution:
    """Build a distribution from its JSON form, e.g. ``{"type": "exponential", "rate": 1}``."""
    if not isinstance(data, dict) or "type" not in data:
        raise InvalidDistributionParameter(f"distribution must be an object with a 'type' key: {data!r}")
    try:
        cls, params = _DIST_TYPES[data["type"]]
    except KeyError:
        raise InvalidDistributionParameter(f"unknown distribution type {data['type']!r}") from None
    extra = set(data) - {"type", *params}
    missing = set(params) - set(data)
    if extra or missing:
        raise InvalidDistributionParameter(
            f"{data['type']}: unexpected keys {sorted(extra)}, missing keys {sorted(missing)}")
    try:
        values = [float(data[k]) for k in params]
    except (TypeError, ValueError):
        raise InvalidDistributionParameter(f"non-numeric parameter in {data!r}") from None
    return cls(*values)


def draw(stream: RngStream, distribution: Distribution) -> float:
    """Consume exactly one uniform from ``stream`` and map it through ``distribution``."""
    return distribution.from_uniform(stream.uniform())


def draw_many(stream: RngStream, distribution: Distribution, n: int) -> list[float]:
    return [distribution.from_uniform(stream.uniform()) for _ in range(n)]

