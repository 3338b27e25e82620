"""Experiment configuration and reference-sample loading."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..fitting_room.model import PARADIGMS, InvalidConfig, ScenarioConfig
from ..stats_suite import DEFAULT_ALPHA, DEFAULT_VARIANCE_THRESHOLD, Sample

COMPARISON_UNITS = ("customer", "replication")


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    def __init__(self, field_name: str, message: str) -> None:
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class NegativeWaitingTime(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    replications: int = 100
    base_seed: int = 0
    paradigms: tuple[str, ...] = PARADIGMS
    reference_sample_path: str | None = None
    alpha: float = DEFAULT_ALPHA
    variance_threshold_percent: float = DEFAULT_VARIANCE_THRESHOLD
    comparison_unit: str = "customer"
    histogram_bin_width: float = 1.0
    workers: int | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.replications, int) or self.replications < 1:
            raise ValidationError("replications", "must be a positive integer")
        if not isinstance(self.base_seed, int) or self.base_seed < 0:
            raise ValidationError("base_seed", "must be a non-negative integer")
        if not self.paradigms or any(p not in PARADIGMS for p in self.paradigms):
            raise ValidationError("paradigms", f"must be a non-empty subset of {PARADIGMS}")
        if len(set(self.paradigms)) != len(self.paradigms):
            raise ValidationError("paradigms", "duplicates are not allowed")
        if not (isinstance(self.alpha, (int, float)) and 0 < self.alpha < 1):
            raise ValidationError("alpha", "must be in (0, 1)")
        if not self.variance_threshold_percent >= 0:
            raise ValidationError("variance_threshold_percent", "must be >= 0")
        if self.comparison_unit not in COMPARISON_UNITS:
            raise ValidationError("comparison_unit", f"must be one of {COMPARISON_UNITS}")
        if not (self.histogram_bin_width > 0 and math.isfinite(self.histogram_bin_width)):
            raise ValidationError("histogram_bin_width", "must be > 0")
        if self.workers is not None and (not isinstance(self.workers, int) or self.workers < 1):
            raise ValidationError("workers", "must be a positive integer")

    def replace(self, **changes: Any) -> "ExperimentSpec":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        d["scenario"] = self.scenario.to_dict()
        d["paradigms"] = list(self.paradigms)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        if not isinstance(data, dict):
            raise ValidationError("<root>", "config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key not in known:
                raise ValidationError(key, "unknown key")
        kwargs = dict(data)
        scen = kwargs.get("scenario", {})
        if not isinstance(scen, dict):
            raise ValidationError("scenario", "must be an object")
        try:
            kwargs["scenario"] = ScenarioConfig.from_dict(scen)
        except InvalidConfig as exc:
            raise ValidationError(f"scenario.{exc.field or '?'}", str(exc)) from exc
        if "paradigms" in kwargs:
            p = kwargs["paradigms"]
            if not isinstance(p, list):
                raise ValidationError("paradigms", "must be a list")
            kwargs["paradigms"] = tuple(str(x).upper() for x in p)
        return cls(**kwargs)


def load_config(path: str | Path) -> ExperimentSpec:
    """Read an experiment config (JSON), fill defaults and validate it."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ParseError(f"{p}: cannot read config ({exc.strerror or exc})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{p}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return ExperimentSpec.from_dict(data)


def load_reference_sample(path: str | Path, column: str = "total_wait") -> Sample:
    """Read waiting times from the ``total_wait`` column of a CSV file."""
    p = Path(path)
    try:
        fh = p.open(newline="")
    except OSError as exc:
        raise ParseError(f"{p}: cannot read sample ({exc.strerror or exc})") from exc
    values: list[float] = []
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in reader.fieldnames:
            raise ParseError(f"{p}: header must contain a {column!r} column")
        for row_no, row in enumerate(reader, start=2):
            raw = (row.get(column) or "").strip()
            try:
                v = float(raw)
            except ValueError:
                raise ParseError(f"{p}: row {row_no}: {column}={raw!r} is not a number") from None
            if not math.isfinite(v):
                raise ParseError(f"{p}: row {row_no}: {column}={raw!r} is not finite")
            if v < 0:
                raise NegativeWaitingTime(f"{p}: row {row_no}: negative waiting time {v}")
            values.append(v)
    if not values:
        raise ParseError(f"{p}: no data rows")
    return Sample(values, label=p.stem)
