"""Replication batches, paradigm comparison and the experiment report."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Sequence

from .. import __version__
from ..fitting_room import ReplicationResult, ScenarioConfig, run_replication
from ..stats_suite import (
    Sample,
    VarianceUndefined,
    ZeroReferenceVariance,
    describe,
    histogram,
    mann_whitney_u,
    variance_comparison,
)
from .config_io import ExperimentSpec, load_reference_sample

_SEED_MASK = (1 << 64) - 1
# offset of the held-out synthetic-reference seed from base_seed (golden-ratio constant)
_REFERENCE_SEED_OFFSET = 0x9E3779B97F4A7C15


class ReplicationError(RuntimeError):
    def __init__(self, paradigm: str, index: int, seed: int, cause: BaseException) -> None:
        super().__init__(f"{paradigm} replication {index} (seed {seed}) failed: {cause!r}")
        self.paradigm = paradigm
        self.index = index
        self.seed = seed


def replication_seeds(base_seed: int, n: int) -> list[int]:
    return [(base_seed + i) & _SEED_MASK for i in range(n)]


def _run_one(args: tuple[str, ScenarioConfig, int, int]) -> ReplicationResult:
    paradigm, config, index, seed = args
    try:
        result = run_replication(paradigm, config, seed)
    except Exception as exc:
        raise ReplicationError(paradigm, index, seed, exc) from exc
    result.trace = None  # keep inter-process payloads small
    return result


def run_replications(paradigm: str, config: ScenarioConfig, seeds: Sequence[int],
                     workers: int | None = None, keep_trace: bool = False) -> list[ReplicationResult]:
    """Run one replication per seed; results come back in seed order."""
    workers = workers or os.cpu_count() or 1
    jobs = [(paradigm, config, i, s) for i, s in enumerate(seeds)]
    if workers <= 1 or len(jobs) <= 1 or keep_trace:
        out = []
        for paradigm_, cfg, i, s in jobs:
            try:
                out.append(run_replication(paradigm_, cfg, s))
            except Exception as exc:
                raise ReplicationError(paradigm_, i, s, exc) from exc
        return out
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def comparison_sample(results: Sequence[ReplicationResult], unit: str, metric: str,
                      label: str = "") -> Sample:
    """Pooled per-customer waits, or one mean wait per replication."""
    if unit == "customer":
        return Sample([w for r in results for w in r.sample(metric)], label)
    if unit == "replication":
        means = []
        for r in results:
            s = r.sample(metric)
            if s:
                means.append(math.fsum(s) / len(s))
        return Sample(means, label)
    raise ValueError(f"unknown comparison unit {unit!r}")


def synthetic_reference(config: ScenarioConfig, base_seed: int) -> Sample:
    """One simulated DES day from a seed no replication of the experiment uses."""
    seed = (base_seed + _REFERENCE_SEED_OFFSET) & _SEED_MASK
    result = run_replication("DES", config, seed)
    return Sample(result.sample(config.waiting_metric), label="synthetic_reference")


def _describe_or_none(sample: Sample) -> dict | None:
    try:
        return describe(sample).to_dict()
    except (VarianceUndefined, ValueError):
        return None


def _hist(sample: Sample, width: float) -> list[list[float]]:
    return [[b.start, b.end, b.count] for b in histogram(sample, width)]


def _mw(a: Sample, b: Sample, alpha: float) -> dict | None:
    if len(a) == 0 or len(b) == 0:
        return None
    return mann_whitney_u(a, b, alpha).to_dict()


def _var(a: Sample, b: Sample, threshold: float) -> dict | None:
    try:
        return variance_comparison(a, b, threshold).to_dict()
    except (VarianceUndefined, ZeroReferenceVariance):
        return None


@dataclass
class ParadigmReport:
    results: list[ReplicationResult]
    stats: dict | None
    histogram: list[list[float]]

    def to_dict(self, include_timing: bool = True) -> dict:
        return {"results": [r.to_dict(include_timing) for r in self.results],
                "stats": self.stats, "histogram": self.histogram}

    @classmethod
    def from_dict(cls, d: dict) -> "ParadigmReport":
        return cls([ReplicationResult.from_dict(r) for r in d["results"]], d["stats"], d["histogram"])


@dataclass
class ExperimentReport:
    """Everything one experiment produced, plus what is needed to recompute it."""

    paradigms: dict[str, ParadigmReport]
    reference: dict | None
    validation: dict | None
    cross_paradigm: dict | None
    provenance: dict[str, Any] = field(default_factory=dict)

    def to_dict(self, include_timing: bool = True) -> dict:
        prov = dict(self.provenance)
        if not include_timing:
            prov.pop("timestamps", None)
        return {
            "paradigms": {k: v.to_dict(include_timing) for k, v in self.paradigms.items()},
            "reference": self.reference,
            "validation": self.validation,
            "cross_paradigm": self.cross_paradigm,
            "provenance": prov,
        }

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        return cls(
            paradigms={k: ParadigmReport.from_dict(v) for k, v in d["paradigms"].items()},
            reference=d["reference"],
            validation=d["validation"],
            cross_paradigm=d["cross_paradigm"],
            provenance=d["provenance"],
        )

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        return cls.from_dict(json.loads(text))

    def sample(self, paradigm: str) -> Sample:
        spec = self.provenance["config"]
        return comparison_sample(self.paradigms[paradigm].results, spec["comparison_unit"],
                                 spec["scenario"]["waiting_metric"], paradigm)

    @property
    def rejected(self) -> bool:
        """True when any reference test rejects or finds different variability."""
        if not self.validation:
            return False
        for tests in self.validation.values():
            mw, var = tests.get("mann_whitney"), tests.get("variance")
            if (mw and mw["reject_null"]) or (var and var["verdict"] == "different"):
                return True
        return False


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def run_experiment(spec: ExperimentSpec, reference: Sample | None = None,
                   workers: int | None = None, keep_trace: bool = False) -> ExperimentReport:
    """Run every requested paradigm and, given a reference sample, both validation tests.

    Each paradigm uses the same seed list ``base_seed + i`` so customer draws
    line up across paradigms. The reference comes from ``reference`` or,
    failing that, from ``spec.reference_sample_path``. ``keep_trace`` runs
    serially and keeps per-customer detail on each result (needed for sample
    CSV export).
    """
    started = _now()
    cfg = spec.scenario
    seeds = replication_seeds(spec.base_seed, spec.replications)
    if reference is None and spec.reference_sample_path:
        reference = load_reference_sample(spec.reference_sample_path)
    workers = workers or spec.workers

    paradigms: dict[str, ParadigmReport] = {}
    samples: dict[str, Sample] = {}
    for name in spec.paradigms:
        results = run_replications(name, cfg, seeds, workers, keep_trace)
        sample = comparison_sample(results, spec.comparison_unit, cfg.waiting_metric, name)
        samples[name] = sample
        paradigms[name] = ParadigmReport(results, _describe_or_none(sample),
                                         _hist(sample, spec.histogram_bin_width))

    ref_block = validation = cross = None
    if reference is not None:
        ref_block = {"label": reference.label, "values": list(reference.values),
                     "stats": _describe_or_none(reference),
                     "histogram": _hist(reference, spec.histogram_bin_width)}
        validation = {
            name: {"mann_whitney": _mw(s, reference, spec.alpha),
                   "variance": _var(s, reference, spec.variance_threshold_percent)}
            for name, s in samples.items()
        }
    if "DES" in samples and "ABS" in samples:
        cross = {"mann_whitney": _mw(samples["DES"], samples["ABS"], spec.alpha)}

    provenance = {
        "config": spec.to_dict(),
        "seeds": seeds,
        "artifact_version": __version__,
        "timestamps": {"started": started, "finished": _now()},
    }
    return ExperimentReport(paradigms, ref_block, validation, cross, provenance)
