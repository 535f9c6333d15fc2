"""Dispatch designs: how a two-stage workload is bound to cluster nodes.

Design "1"  -- one pipeline per item. A central dispatcher releases every task
               individually (serialized at the scheduler latency); stage-2
               tasks are tag-pinned to the node where their item's stage 1 ran.
Design "2"  -- late binding. All items sit in one shared input queue; long-
               running stage-1 workers on every node pull from it and feed a
               per-node intermediate queue consumed by that node's stage-2
               workers.
Design "2a" -- early binding. Items are partitioned up front across nodes
               (longest-predicted-first onto the least-loaded node) into
               per-node input queues; no shared queue exists at run time.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .cluster import ClusterSpec, NodeState, can_place, worker_counts
from .errors import PlanningError
from .perf import PerfModel, predict_duration
from .workload import DataItem, Stage, WorkloadSpec

DESIGNS = ("1", "2", "2a")

PIPELINE_PER_ITEM = "1"
SHARED_QUEUE = "2"
PARTITIONED_QUEUES = "2a"


@dataclass
class ExecutionPlan:
    """Everything an engine needs to run a workload under one design."""

    design: str
    workload: WorkloadSpec
    cluster: ClusterSpec
    # max concurrent (stage1, stage2) workers per node; for design 1 this is
    # the capacity envelope rather than a fixed worker pool
    workers_per_node: tuple[int, int]
    # queue topology, by name; empty for design 1
    queues: tuple[str, ...] = ()
    # design 2a only: node_id -> items bound to that node, processing order
    per_node_items: dict[int, list[DataItem]] | None = None
    # design 2a only: wall-clock seconds spent computing the partition
    distribute_measured_s: float = 0.0
    # design 1 only: item id -> node id, filled while the run places stage 1
    affinity_tags: dict[str, int] = field(default_factory=dict)


def _check_feasible(workload: WorkloadSpec, cluster: ClusterSpec) -> tuple[int, int]:
    k1, k2 = worker_counts(cluster, workload)
    if k1 < 1 or k2 < 1:
        raise PlanningError(
            f"infeasible plan: a node fits {k1} stage-1 and {k2} stage-2 tasks; "
            "both stages must fit at least once per node"
        )
    return k1, k2


def plan_design1(workload: WorkloadSpec, cluster: ClusterSpec) -> ExecutionPlan:
    """Per-item pipelines behind a central dispatcher; no queues."""
    k1, k2 = _check_feasible(workload, cluster)
    return ExecutionPlan(
        design=PIPELINE_PER_ITEM,
        workload=workload,
        cluster=cluster,
        workers_per_node=(k1, k2),
    )


def plan_design2(workload: WorkloadSpec, cluster: ClusterSpec) -> ExecutionPlan:
    """Shared input queue plus one intermediate queue per node."""
    k1, k2 = _check_feasible(workload, cluster)
    queues = ("input",) + tuple(f"node{n}.stage2" for n in range(cluster.n_nodes))
    return ExecutionPlan(
        design=SHARED_QUEUE,
        workload=workload,
        cluster=cluster,
        workers_per_node=(k1, k2),
        queues=queues,
    )


def plan_design2a(
    workload: WorkloadSpec, cluster: ClusterSpec, model: PerfModel
) -> ExecutionPlan:
    """Early binding: balance predicted stage-1 durations across nodes up front.

    The partitioning wall time is recorded on the plan; the engines surface it
    as the run's distribute overhead (unless overridden by configuration).
    """
    k1, k2 = _check_feasible(workload, cluster)
    t0 = time.perf_counter()
    partition = partition_early_binding(list(workload.items), cluster.n_nodes, model)
    # Queue service order: the partition lists arrive longest-predicted-first.
    # Keep that (large items early evens out the stage-2 tail) but promote each
    # node's shortest item to the head so the first stage-2 worker is fed as
    # soon as possible instead of waiting on the node's largest stage-1 task.
    partition = {
        node: items[-1:] + items[:-1] for node, items in partition.items()
    }
    elapsed = time.perf_counter() - t0
    queues = tuple(f"node{n}.input" for n in range(cluster.n_nodes)) + tuple(
        f"node{n}.stage2" for n in range(cluster.n_nodes)
    )
    return ExecutionPlan(
        design=PARTITIONED_QUEUES,
        workload=workload,
        cluster=cluster,
        workers_per_node=(k1, k2),
        queues=queues,
        per_node_items=partition,
        distribute_measured_s=elapsed,
    )


def plan(design: str, workload: WorkloadSpec, cluster: ClusterSpec,
         stage1_model: PerfModel | None = None) -> ExecutionPlan:
    if design == PIPELINE_PER_ITEM:
        return plan_design1(workload, cluster)
    if design == SHARED_QUEUE:
        return plan_design2(workload, cluster)
    if design == PARTITIONED_QUEUES:
        if stage1_model is None:
            raise PlanningError("design 2a needs the stage-1 model to balance partitions")
        return plan_design2a(workload, cluster, stage1_model)
    raise PlanningError(f"unknown design {design!r}; expected one of {DESIGNS}")


def partition_early_binding(
    items: list[DataItem], n_nodes: int, model: PerfModel
) -> dict[int, list[DataItem]]:
    """Greedy longest-predicted-duration-first onto the least-loaded node.

    Classic LPT: sort items by predicted stage-1 duration descending, then
    repeatedly give the next item to the node with the smallest running total.
    Guarantees a makespan within 4/3 of the optimal partition. Ties break
    toward the lower node id, and the sort is stable on the original item
    order, so the partition is deterministic.
    """
    if n_nodes < 1:
        raise PlanningError("partition needs at least one node")
    order = sorted(
        range(len(items)),
        key=lambda i: (-predict_duration(model, items[i].size_mb), i),
    )
    loads = [0.0] * n_nodes
    parts: dict[int, list[DataItem]] = {n: [] for n in range(n_nodes)}
    for i in order:
        target = min(range(n_nodes), key=lambda n: (loads[n], n))
        parts[target].append(items[i])
        loads[target] += predict_duration(model, items[i].size_mb)
    return parts


def tagged_place(
    nodes: list[NodeState],
    plan_: ExecutionPlan,
    item: DataItem,
    stage: Stage,
) -> NodeState | None:
    """Design-1 placement: stage 1 first-fit, stage 2 pinned by affinity tag.

    Returns the chosen node, or None when nothing can host the task right now
    (the caller retries on the next resource release). An untagged stage-2
    item is a planning error: its stage 1 never placed.
    """
    task = plan_.workload.task(stage)
    if stage == Stage.FIRST:
        for node in nodes:
            if can_place(node, task):
                return node
        return None
    if item.id not in plan_.affinity_tags:
        raise PlanningError(f"stage-2 placement for untagged item {item.id!r}")
    node = nodes[plan_.affinity_tags[item.id]]
    return node if can_place(node, task) else None
