"""Event logs: per-task records, named overhead spans, validation, and I/O.

The log is the single source of truth for metrics and fitting. CSV column
order (one task record per row):

    task_id,item_id,stage,node_id,size_mb,cpu_cores,gpus,mem_mb,
    t_submit,t_start,t_end

Floats are written with repr (shortest round-trip), so a log written twice
from identical state is byte-identical. The JSON document carries the records
plus overhead spans and the clock kind ("virtual" for simulated runs, "wall"
for the local backend).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

from .cluster import ClusterSpec
from .designs import ExecutionPlan
from .workload import Stage

OVERHEAD_NAMES = frozenset(
    {"dataset_discovery", "scheduler", "setup", "distribute", "bootstrap", "teardown"}
)

CSV_COLUMNS = (
    "task_id",
    "item_id",
    "stage",
    "node_id",
    "size_mb",
    "cpu_cores",
    "gpus",
    "mem_mb",
    "t_submit",
    "t_start",
    "t_end",
)


@dataclass(frozen=True)
class TaskRecord:
    """One task execution: submit -> start on a node -> end."""

    task_id: str
    item_id: str
    stage: Stage
    node_id: int
    size_mb: float
    cpu_cores: int
    gpus: int
    mem_mb: float
    t_submit: float
    t_start: float
    t_end: float

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class OverheadSpan:
    """A named non-compute time span (dispatcher latency, setup, spawn cost...)."""

    name: str
    t_start: float
    t_end: float

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass
class OverheadConfig:
    """Synthetic overheads injected by the engines; all in seconds.

    ``distribute_s=None`` means "use the measured partitioning time from the
    plan" (design 2a); any float overrides it. Bootstrap/teardown apply per
    task execution and extend the node-occupancy window.
    """

    dataset_discovery_s: float = 0.0
    scheduler_latency_s: float = 0.0
    queue_setup_s: float = 0.0
    distribute_s: float | None = None
    task_bootstrap_s: float = 0.0
    task_teardown_s: float = 0.0

    def to_json(self) -> dict:
        return {
            "dataset_discovery_s": self.dataset_discovery_s,
            "scheduler_latency_s": self.scheduler_latency_s,
            "queue_setup_s": self.queue_setup_s,
            "distribute_s": self.distribute_s,
            "task_bootstrap_s": self.task_bootstrap_s,
            "task_teardown_s": self.task_teardown_s,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "OverheadConfig":
        return cls(**{k: doc[k] for k in cls().to_json() if k in doc})


@dataclass
class EventLog:
    records: list[TaskRecord] = field(default_factory=list)
    overhead_spans: list[OverheadSpan] = field(default_factory=list)
    clock_kind: str = "virtual"  # "virtual" | "wall"

    def sorted_records(self) -> list[TaskRecord]:
        return sorted(self.records, key=lambda r: (r.t_start, r.t_end, r.task_id))

    # -- time envelope ---------------------------------------------------------

    def t_origin(self) -> float:
        starts = [r.t_submit for r in self.records] + [s.t_start for s in self.overhead_spans]
        return min(starts) if starts else 0.0

    def t_final(self) -> float:
        ends = [r.t_end for r in self.records] + [s.t_end for s in self.overhead_spans]
        return max(ends) if ends else 0.0

    # -- I/O --------------------------------------------------------------------

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for r in self.sorted_records():
                writer.writerow(
                    [
                        r.task_id,
                        r.item_id,
                        r.stage.value,
                        r.node_id,
                        repr(r.size_mb),
                        r.cpu_cores,
                        r.gpus,
                        repr(r.mem_mb),
                        repr(r.t_submit),
                        repr(r.t_start),
                        repr(r.t_end),
                    ]
                )

    @classmethod
    def from_csv(cls, path, clock_kind: str = "virtual") -> "EventLog":
        records = []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                records.append(
                    TaskRecord(
                        task_id=row["task_id"],
                        item_id=row["item_id"],
                        stage=Stage(row["stage"]),
                        node_id=int(row["node_id"]),
                        size_mb=float(row["size_mb"]),
                        cpu_cores=int(row["cpu_cores"]),
                        gpus=int(row["gpus"]),
                        mem_mb=float(row["mem_mb"]),
                        t_submit=float(row["t_submit"]),
                        t_start=float(row["t_start"]),
                        t_end=float(row["t_end"]),
                    )
                )
        return cls(records=records, clock_kind=clock_kind)

    def to_json(self) -> dict:
        return {
            "clock_kind": self.clock_kind,
            "records": [
                {
                    "task_id": r.task_id,
                    "item_id": r.item_id,
                    "stage": r.stage.value,
                    "node_id": r.node_id,
                    "size_mb": r.size_mb,
                    "cpu_cores": r.cpu_cores,
                    "gpus": r.gpus,
                    "mem_mb": r.mem_mb,
                    "t_submit": r.t_submit,
                    "t_start": r.t_start,
                    "t_end": r.t_end,
                }
                for r in self.sorted_records()
            ],
            "overhead_spans": [
                {"name": s.name, "t_start": s.t_start, "t_end": s.t_end}
                for s in self.overhead_spans
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "EventLog":
        records = [
            TaskRecord(
                task_id=d["task_id"],
                item_id=d["item_id"],
                stage=Stage(d["stage"]),
                node_id=d["node_id"],
                size_mb=d["size_mb"],
                cpu_cores=d["cpu_cores"],
                gpus=d["gpus"],
                mem_mb=d["mem_mb"],
                t_submit=d["t_submit"],
                t_start=d["t_start"],
                t_end=d["t_end"],
            )
            for d in doc["records"]
        ]
        spans = [
            OverheadSpan(name=d["name"], t_start=d["t_start"], t_end=d["t_end"])
            for d in doc["overhead_spans"]
        ]
        return cls(records=records, overhead_spans=spans, clock_kind=doc["clock_kind"])

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load_json(cls, path) -> "EventLog":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate_log(log: EventLog, plan: ExecutionPlan) -> list[str]:
    """Check a finished run's log against the plan; returns violation messages.

    Verifies completeness (each item ran both stages exactly once), record
    time ordering, stage ordering per item, stage-2 colocation with stage 1,
    node capacity at every instant, and overhead span sanity.
    """
    problems: list[str] = []
    cluster = plan.cluster

    by_item: dict[str, dict[Stage, list[TaskRecord]]] = {}
    for r in log.records:
        by_item.setdefault(r.item_id, {}).setdefault(r.stage, []).append(r)

    for item in plan.workload.items:
        stages = by_item.get(item.id, {})
        for stage in (Stage.FIRST, Stage.SECOND):
            n = len(stages.get(stage, []))
            if n != 1:
                problems.append(f"item {item.id!r}: {stage.value} ran {n} times, expected 1")
    known_ids = {it.id for it in plan.workload.items}
    for item_id in by_item:
        if item_id not in known_ids:
            problems.append(f"log mentions unknown item {item_id!r}")

    for r in log.records:
        if not (r.t_submit <= r.t_start < r.t_end):
            problems.append(
                f"task {r.task_id!r}: need t_submit <= t_start < t_end, "
                f"got {r.t_submit}/{r.t_start}/{r.t_end}"
            )
        if not (0 <= r.node_id < cluster.n_nodes):
            problems.append(f"task {r.task_id!r}: node {r.node_id} outside cluster")

    for item_id, stages in by_item.items():
        firsts, seconds = stages.get(Stage.FIRST, []), stages.get(Stage.SECOND, [])
        if len(firsts) == 1 and len(seconds) == 1:
            s1, s2 = firsts[0], seconds[0]
            if s2.t_start < s1.t_end:
                problems.append(
                    f"item {item_id!r}: stage2 started at {s2.t_start} "
                    f"before stage1 ended at {s1.t_end}"
                )
            if s2.node_id != s1.node_id:
                problems.append(
                    f"item {item_id!r}: stage2 on node {s2.node_id}, stage1 on {s1.node_id}"
                )

    problems.extend(_check_capacity(log, cluster))

    for s in log.overhead_spans:
        if s.name not in OVERHEAD_NAMES:
            problems.append(f"unknown overhead span name {s.name!r}")
        if s.t_end < s.t_start:
            problems.append(f"overhead span {s.name!r} ends before it starts")

    return problems


def _check_capacity(log: EventLog, cluster: ClusterSpec) -> list[str]:
    """Sweep per node: concurrent demand must never exceed capacity."""
    problems = []
    per_node: dict[int, list[TaskRecord]] = {}
    for r in log.records:
        per_node.setdefault(r.node_id, []).append(r)
    for node_id, recs in per_node.items():
        events: list[tuple[float, int, int, int, float]] = []
        for r in recs:
            events.append((r.t_start, 1, r.cpu_cores, r.gpus, r.mem_mb))
            events.append((r.t_end, 0, -r.cpu_cores, -r.gpus, -r.mem_mb))
        # releases sort before starts at the same instant (end is exclusive)
        events.sort(key=lambda e: (e[0], e[1]))
        cpus = gpus = 0
        mem = 0.0
        for t, _, dc, dg, dm in events:
            cpus += dc
            gpus += dg
            mem += dm
            if (
                cpus > cluster.cpus_per_node
                or gpus > cluster.gpus_per_node
                or mem > cluster.mem_per_node_mb * (1 + 1e-9)
            ):
                problems.append(
                    f"node {node_id}: capacity exceeded at t={t} "
                    f"({cpus}c/{gpus}g/{mem}MB in use)"
                )
                break
    return problems
