"""Closed-form M/M/1 results and Little's-law checks for simulated runs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .fitting_room.model import ReplicationResult

LITTLE_EPS = 1e-12


class UnstableSystem(ValueError):
    pass


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class MM1Params:
    lam: float
    mu: float

    def __post_init__(self) -> None:
        if not self.lam >= 0:
            raise ValueError(f"arrival rate must be >= 0, got {self.lam}")
        if not self.mu > 0:
            raise ValueError(f"service rate must be > 0, got {self.mu}")

    @property
    def rho(self) -> float:
        return self.lam / self.mu


@dataclass(frozen=True)
class MM1Metrics:
    rho: float
    Wq: float
    W: float
    Lq: float
    L: float


def mm1_metrics(p: MM1Params) -> MM1Metrics:
    """Steady-state M/M/1 waiting times (minutes) and queue lengths.

    >>> mm1_metrics(MM1Params(0.8, 1.0)).Wq
    4.000000000000001
    """
    rho = p.rho
    if rho >= 1:
        raise UnstableSystem(f"rho = {rho:.4f} >= 1 has no steady state")
    wq = p.lam / (p.mu * (p.mu - p.lam))
    w = wq + 1.0 / p.mu
    return MM1Metrics(rho=rho, Wq=wq, W=w, Lq=p.lam * wq, L=p.lam * w)


def littles_law_error(L_observed: float, lam: float, W: float) -> float:
    """Relative gap |L - lam*W| / max(L, eps)."""
    return abs(L_observed - lam * W) / max(L_observed, LITTLE_EPS)


def littles_law_check(result: ReplicationResult, lambda_observed: float | None = None) -> float:
    """Little's-law gap for the queues of one replication.

    L is the time-average number waiting (integrated over the run), W the mean
    per-customer wait of completed customers, and lambda defaults to completed
    customers per elapsed minute.
    """
    if not result.waiting_time_sample or result.elapsed_minutes <= 0:
        raise InsufficientData("replication has no completed customers")
    lam = result.customers_completed / result.elapsed_minutes if lambda_observed is None else lambda_observed
    return littles_law_error(result.time_average_in_queue, lam, result.mean_wait)


def pooled_littles_law_check(results: Iterable[ReplicationResult]) -> float:
    """Little's-law gap with L, lambda and W pooled over replications."""
    area = elapsed = waits = 0.0
    completed = 0
    for r in results:
        area += math.fsum(r.queue_length_integrals.values())
        elapsed += r.elapsed_minutes
        waits += math.fsum(r.waiting_time_sample)
        completed += len(r.waiting_time_sample)
    if completed == 0 or elapsed <= 0:
        raise InsufficientData("no completed customers in any replication")
    return littles_law_error(area / elapsed, completed / elapsed, waits / completed)
