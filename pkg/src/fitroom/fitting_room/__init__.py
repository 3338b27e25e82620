"""The fitting-room scenario, realized once as DES and once as ABS."""

from .abs import run_abs_replication
from .des import run_des_replication
from .model import (
    PARADIGMS,
    QUEUES,
    TARGET_WORKLOAD,
    Customer,
    InvalidConfig,
    NoBusyTime,
    QueueId,
    ReplicationResult,
    ScenarioConfig,
    StaffJob,
    mm1_degenerate_config,
    staff_select_next_job,
    workload_fractions,
)

RUNNERS = {"DES": run_des_replication, "ABS": run_abs_replication}


def run_replication(paradigm: str, config: ScenarioConfig, seed: int) -> ReplicationResult:
    try:
        runner = RUNNERS[paradigm.upper()]
    except KeyError:
        raise InvalidConfig(f"unknown paradigm {paradigm!r}; expected DES or ABS") from None
    return runner(config, seed)


__all__ = [
    "PARADIGMS", "QUEUES", "RUNNERS", "TARGET_WORKLOAD", "Customer", "InvalidConfig", "NoBusyTime",
    "QueueId", "ReplicationResult", "ScenarioConfig", "StaffJob", "mm1_degenerate_config",
    "run_abs_replication", "run_des_replication", "run_replication", "staff_select_next_job",
    "workload_fractions",
]
