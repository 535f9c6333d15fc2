"""Run metrics derived from event logs: utilization, throughput, overheads.

Busy-resource timelines are exact step functions built by an interval sweep
over task records (+demand at t_start, -demand at t_end); averages integrate
the step function over the run window, so there is no sampling error. The
module only computes and serializes; rendering lives elsewhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .cluster import ClusterSpec
from .eventlog import OVERHEAD_NAMES, EventLog
from .workload import Stage

# A timeline is a list of (time, busy) breakpoints: `busy` holds from `time`
# until the next breakpoint; the last breakpoint always drops back to zero.
Timeline = list[tuple[float, float]]


@dataclass
class MetricsReport:
    makespan_s: float
    avg_cpu_util_pct: float
    avg_gpu_util_pct: float
    throughput_mb_s: float
    imbalance_cv: float
    overheads_s: dict[str, float]
    per_node: dict[int, dict[str, float]]
    cpu_timeline: Timeline = field(default_factory=list)
    gpu_timeline: Timeline = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "makespan_s": self.makespan_s,
            "avg_cpu_util_pct": self.avg_cpu_util_pct,
            "avg_gpu_util_pct": self.avg_gpu_util_pct,
            "throughput_mb_s": self.throughput_mb_s,
            "imbalance_cv": self.imbalance_cv,
            "overheads_s": self.overheads_s,
            "per_node": {str(k): v for k, v in self.per_node.items()},
        }

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")

    def save_timelines_csv(self, path) -> None:
        """Merged step-function breakpoints: t, busy_cpus, busy_gpus."""
        times = sorted({t for t, _ in self.cpu_timeline} | {t for t, _ in self.gpu_timeline})
        with open(path, "w") as fh:
            fh.write("t,busy_cpus,busy_gpus\n")
            for t in times:
                fh.write(
                    f"{t!r},{step_value(self.cpu_timeline, t)!r},"
                    f"{step_value(self.gpu_timeline, t)!r}\n"
                )


def makespan(log: EventLog) -> float:
    """End of the last record/span minus start of the earliest; 0 for empty logs."""
    if not log.records and not log.overhead_spans:
        return 0.0
    return log.t_final() - log.t_origin()


def busy_timeline(log: EventLog, demand) -> Timeline:
    """Step function of total busy `demand` (a TaskRecord -> number function)."""
    deltas: dict[float, float] = {}
    for r in log.records:
        d = demand(r)
        if d == 0:
            continue
        deltas[r.t_start] = deltas.get(r.t_start, 0.0) + d
        deltas[r.t_end] = deltas.get(r.t_end, 0.0) - d
    level = 0.0
    out: Timeline = []
    for t in sorted(deltas):
        level += deltas[t]
        if not out or out[-1][1] != level:
            out.append((t, level))
    return out


def integrate_timeline(timeline: Timeline, t0: float, t1: float) -> float:
    """Integral of the step function over [t0, t1]."""
    if t1 <= t0 or not timeline:
        return 0.0
    total = 0.0
    for i, (t, level) in enumerate(timeline):
        seg_start = t
        seg_end = timeline[i + 1][0] if i + 1 < len(timeline) else t1
        lo, hi = max(seg_start, t0), min(seg_end, t1)
        if hi > lo:
            total += level * (hi - lo)
    return total


def timeline_average(timeline: Timeline, t0: float, t1: float) -> float:
    """Time-weighted mean level over [t0, t1]."""
    if t1 <= t0:
        return 0.0
    return integrate_timeline(timeline, t0, t1) / (t1 - t0)


def utilization(log: EventLog, cluster: ClusterSpec) -> tuple[Timeline, Timeline, float, float]:
    """(cpu_timeline, gpu_timeline, avg_cpu_pct, avg_gpu_pct) over the run window."""
    cpu_tl = busy_timeline(log, lambda r: r.cpu_cores)
    gpu_tl = busy_timeline(log, lambda r: r.gpus)
    span = makespan(log)
    if span <= 0:
        return cpu_tl, gpu_tl, 0.0, 0.0
    t0 = log.t_origin()
    cpu_pct = 100.0 * integrate_timeline(cpu_tl, t0, t0 + span) / (cluster.total_cpus * span)
    gpu_pct = (
        100.0 * integrate_timeline(gpu_tl, t0, t0 + span) / (cluster.total_gpus * span)
        if cluster.total_gpus
        else 0.0
    )
    return cpu_tl, gpu_tl, cpu_pct, gpu_pct


def step_value(timeline: Timeline, t: float) -> float:
    """Level of the step function at time t (0 before the first breakpoint)."""
    level = 0.0
    for bt, lv in timeline:
        if bt <= t:
            level = lv
        else:
            break
    return level


def throughput(log: EventLog) -> float:
    """MB of items whose second stage completed, per second of makespan."""
    span = makespan(log)
    if span <= 0:
        return 0.0
    done_mb = sum(r.size_mb for r in log.records if r.stage is Stage.SECOND)
    return done_mb / span


def overhead_report(log: EventLog) -> dict[str, float]:
    """Total seconds per overhead name; names outside the ledger are rejected."""
    out: dict[str, float] = {}
    for s in log.overhead_spans:
        if s.name not in OVERHEAD_NAMES:
            raise ValueError(f"unknown overhead span name {s.name!r}")
        out[s.name] = out.get(s.name, 0.0) + s.duration
    return out


def per_node_totals(log: EventLog) -> dict[int, dict[str, float]]:
    """Per node: busy seconds per stage and completed item count."""
    out: dict[int, dict[str, float]] = {}
    for r in log.records:
        node = out.setdefault(
            r.node_id, {"stage1_busy_s": 0.0, "stage2_busy_s": 0.0, "items_processed": 0}
        )
        if r.stage is Stage.FIRST:
            node["stage1_busy_s"] += r.duration
        else:
            node["stage2_busy_s"] += r.duration
            node["items_processed"] += 1
    return out


def imbalance(log: EventLog) -> float:
    """Coefficient of variation (population std / mean) of per-node busy time."""
    totals = per_node_totals(log)
    if not totals:
        return 0.0
    busy = np.array([v["stage1_busy_s"] + v["stage2_busy_s"] for v in totals.values()])
    mean = float(busy.mean())
    if mean == 0:
        return 0.0
    return float(busy.std() / mean)


def compute_metrics(log: EventLog, cluster: ClusterSpec) -> MetricsReport:
    cpu_tl, gpu_tl, cpu_pct, gpu_pct = utilization(log, cluster)
    return MetricsReport(
        makespan_s=makespan(log),
        avg_cpu_util_pct=cpu_pct,
        avg_gpu_util_pct=gpu_pct,
        throughput_mb_s=throughput(log),
        imbalance_cv=imbalance(log),
        overheads_s=overhead_report(log),
        per_node=per_node_totals(log),
        cpu_timeline=cpu_tl,
        gpu_timeline=gpu_tl,
    )
