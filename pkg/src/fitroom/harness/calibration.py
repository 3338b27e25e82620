"""Fit unpublished scenario rates to a target mean wait and staff workload split.

Coordinate search in two steps:

1. Service means follow from the workload ratios. With job-1 mean ``s`` and
   help probability ``p`` held at the base config's values, job 3 gets mean
   ``s * f3 / f1`` and job 2 gets ``s * f2 / (f1 * p)``, so expected busy time
   splits as ``f1 : f2 : f3``.
2. The arrival rate is bisected on ``[0, staff_count / service minutes per
   customer)`` until the pooled mean wait over a fixed seed list is within
   tolerance of the target. Reusing the seeds makes the estimate a smooth
   function of the rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..event_core import Exponential
from ..fitting_room import ScenarioConfig, TARGET_WORKLOAD, workload_fractions
from .experiment import replication_seeds, run_replications


class CalibrationFailed(RuntimeError):
    def __init__(self, message: str, best: "CalibrationResult | None" = None) -> None:
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class CalibrationTargets:
    mean_wait: float = 1.68
    workload_fractions: tuple[float, float, float] = TARGET_WORKLOAD


@dataclass
class CalibrationResult:
    config: ScenarioConfig
    achieved_mean_wait: float
    achieved_fractions: tuple[float, float, float]
    iterations: int
    history: list[tuple[float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "achieved_mean_wait": self.achieved_mean_wait,
            "achieved_fractions": list(self.achieved_fractions),
            "iterations": self.iterations,
            "history": [list(h) for h in self.history],
        }


def service_config(base: ScenarioConfig, fractions: tuple[float, float, float]) -> ScenarioConfig:
    """Set exponential service means for jobs 1-3 from the workload split."""
    f1, f2, f3 = fractions
    if any(f < 0 for f in fractions) or not math.isclose(f1 + f2 + f3, 1.0, abs_tol=1e-9):
        raise CalibrationFailed(f"workload fractions {fractions} must be non-negative and sum to 1")
    if f1 <= 0 or f3 <= 0:
        raise CalibrationFailed("every customer receives jobs 1 and 3, so their shares must be > 0")
    p = base.help_probability
    if p > 0 and f2 <= 0:
        raise CalibrationFailed("help path is enabled (help_probability > 0) but job 2 share is 0")
    if p == 0 and f2 > 0:
        raise CalibrationFailed("job 2 share > 0 needs help_probability > 0")
    s = base.entry_service.mean
    if s <= 0:
        raise CalibrationFailed("base job 1 mean must be > 0")
    changes = {"entry_service": Exponential(1.0 / s),
               "return_service": Exponential(f1 / (s * f3))}
    if p > 0:
        changes["help_service"] = Exponential(f1 * p / (s * f2))
    return base.replace(**changes)


def _evaluate(cfg: ScenarioConfig, seeds: list[int], paradigm: str,
              workers: int | None) -> tuple[float, tuple[float, float, float]]:
    results = run_replications(paradigm, cfg, seeds, workers)
    waits = [w for r in results for w in r.waiting_time_sample]
    mean = math.fsum(waits) / len(waits) if waits else 0.0
    fracs = [workload_fractions(r) for r in results if sum(r.staff_busy_minutes_by_job) > 0]
    if not fracs:
        return mean, (0.0, 0.0, 0.0)
    avg = tuple(math.fsum(f[i] for f in fracs) / len(fracs) for i in range(3))
    return mean, avg  # type: ignore[return-value]


def calibrate(targets: CalibrationTargets = CalibrationTargets(), tolerance: float = 0.05,
              max_iterations: int = 40, base: ScenarioConfig | None = None,
              replications: int = 100, base_seed: int = 0, fraction_tolerance: float = 0.03,
              paradigm: str = "DES", workers: int | None = None) -> CalibrationResult:
    """Return a config whose pooled mean wait and workload split hit the targets."""
    base = base or ScenarioConfig()
    if not targets.mean_wait > 0:
        raise CalibrationFailed(f"target mean wait {targets.mean_wait} is infeasible: service times are nonzero")
    cfg = service_config(base, tuple(targets.workload_fractions))
    seeds = replication_seeds(base_seed, replications)

    lo, hi = 0.0, cfg.staff_count / cfg.service_minutes_per_customer
    best: CalibrationResult | None = None
    history: list[tuple[float, float]] = []
    for it in range(1, max_iterations + 1):
        rate = 0.5 * (lo + hi)
        trial = cfg.replace(arrival_rate=rate)
        mean, fracs = _evaluate(trial, seeds, paradigm, workers)
        history.append((rate, mean))
        candidate = CalibrationResult(trial, mean, fracs, it, list(history))
        if best is None or abs(mean - targets.mean_wait) < abs(best.achieved_mean_wait - targets.mean_wait):
            best = candidate
        if abs(mean - targets.mean_wait) <= tolerance:
            off = max(abs(a - b) for a, b in zip(fracs, targets.workload_fractions))
            if off > fraction_tolerance:
                raise CalibrationFailed(
                    f"mean wait reached {mean:.3f} but workload split {fracs} is off by {off:.3f}", best)
            return candidate
        if mean < targets.mean_wait:
            lo = rate
        else:
            hi = rate
    raise CalibrationFailed(
        f"no arrival rate within {max_iterations} iterations; best mean wait "
        f"{best.achieved_mean_wait:.3f} at rate {best.config.arrival_rate:.5f}", best)
