"""Virtual-time discrete-event execution of a plan.

Single-threaded simulator: a heap of (time, sequence, action) drives node
allocation, queue traffic, and the design-1 dispatcher. Sequence numbers make
same-instant ordering total, and every task's noisy duration comes from its
own RNG stream keyed by (seed, item index, stage), so a given config + seed
always produces an identical event log -- and the same item gets the same
duration under every design, which keeps cross-design comparisons paired.
"""

from __future__ import annotations

import heapq
import itertools
from collections import deque
from typing import Callable

import numpy as np

from .cluster import NodeState, allocate, release
from .designs import (
    PARTITIONED_QUEUES,
    PIPELINE_PER_ITEM,
    SHARED_QUEUE,
    ExecutionPlan,
    tagged_place,
)
from .errors import ConfigurationError
from .eventlog import EventLog, OverheadConfig, OverheadSpan, TaskRecord
from .perf import PerfModel, sample_duration
from .queueproto import DEFAULT_WAIT_INTERVAL_S, PullKind, TaskQueue
from .workload import DataItem, Stage


class _EventLoop:
    """Priority-queue event loop over virtual time."""

    def __init__(self):
        self._heap: list[tuple[float, int, Callable[[], None]]] = []
        self._seq = itertools.count()
        self.now = 0.0

    def at(self, t: float, fn: Callable[[], None]) -> None:
        heapq.heappush(self._heap, (t, next(self._seq), fn))

    def after(self, dt: float, fn: Callable[[], None]) -> None:
        self.at(self.now + dt, fn)

    def run(self) -> None:
        while self._heap:
            t, _, fn = heapq.heappop(self._heap)
            self.now = t
            fn()


def task_rng(seed: int, item_index: int, stage: Stage) -> np.random.Generator:
    """Per-task RNG stream; identical across designs and backends."""
    return np.random.default_rng([seed, item_index, 1 if stage is Stage.FIRST else 2])


def simulate(
    plan: ExecutionPlan,
    models: dict[Stage, PerfModel],
    overheads: OverheadConfig,
    seed: int,
    *,
    wait_interval_s: float = DEFAULT_WAIT_INTERVAL_S,
    node_speed_factors: list[float] | None = None,
) -> EventLog:
    """Run the plan to completion in virtual time and return its event log."""
    if seed < 0:
        raise ConfigurationError("seed must be a non-negative integer")
    if not (wait_interval_s > 0):
        raise ConfigurationError("wait_interval_s must be > 0")
    n_nodes = plan.cluster.n_nodes
    speed = node_speed_factors if node_speed_factors is not None else [1.0] * n_nodes
    if len(speed) != n_nodes:
        raise ConfigurationError(f"need {n_nodes} node speed factors, got {len(speed)}")
    if any(not (s > 0) for s in speed):
        raise ConfigurationError("node speed factors must be > 0")

    sim = _Sim(plan, models, overheads, seed, wait_interval_s, speed)
    if plan.design == PIPELINE_PER_ITEM:
        sim.run_dispatcher_design()
    elif plan.design in (SHARED_QUEUE, PARTITIONED_QUEUES):
        sim.run_queue_design()
    else:
        raise ConfigurationError(f"unknown design {plan.design!r}")
    return sim.log


class _Sim:
    def __init__(self, plan, models, overheads, seed, wait_interval_s, speed):
        self.plan: ExecutionPlan = plan
        self.models = models
        self.oh: OverheadConfig = overheads
        self.seed = seed
        self.wait = wait_interval_s
        self.speed = speed
        self.loop = _EventLoop()
        self.nodes: list[NodeState] = plan.cluster.fresh_nodes()
        self.log = EventLog(clock_kind="virtual")
        self._item_index = {it.id: i for i, it in enumerate(plan.workload.items)}

    # -- shared task execution -------------------------------------------------

    def _duration(self, item: DataItem, stage: Stage, node: NodeState) -> float:
        rng = task_rng(self.seed, self._item_index[item.id], stage)
        d = sample_duration(self.models[stage], item.size_mb, rng)
        return d * self.speed[node.node_id]

    def execute(
        self,
        item: DataItem,
        stage: Stage,
        node: NodeState,
        t_submit: float,
        on_done: Callable[[], None],
    ) -> None:
        """Occupy the node for bootstrap + compute + teardown, then log and release."""
        task = self.plan.workload.task(stage)
        task_id = f"{item.id}.{stage.value}"
        allocate(node, task, task_id)
        b, td = self.oh.task_bootstrap_s, self.oh.task_teardown_s
        t_start = self.loop.now
        t_end = t_start + b + self._duration(item, stage, node) + td
        if b > 0:
            self.log.overhead_spans.append(OverheadSpan("bootstrap", t_start, t_start + b))
        if td > 0:
            self.log.overhead_spans.append(OverheadSpan("teardown", t_end - td, t_end))

        def finish():
            release(node, task, task_id)
            self.log.records.append(
                TaskRecord(
                    task_id=task_id,
                    item_id=item.id,
                    stage=stage,
                    node_id=node.node_id,
                    size_mb=item.size_mb,
                    cpu_cores=task.cpu_cores,
                    gpus=task.gpus,
                    mem_mb=task.mem_mb,
                    t_submit=t_submit,
                    t_start=t_start,
                    t_end=t_end,
                )
            )
            on_done()

        self.loop.at(t_end, finish)

    # -- design 1: central dispatcher -------------------------------------------

    def run_dispatcher_design(self) -> None:
        pending: deque[tuple[DataItem, Stage, float]] = deque()
        ready: list[tuple[DataItem, Stage, float]] = []
        dispatcher_busy = [False]
        loop, oh = self.loop, self.oh

        def submit(item: DataItem, stage: Stage) -> None:
            pending.append((item, stage, loop.now))
            pump()

        def pump() -> None:
            if dispatcher_busy[0] or not pending:
                return
            dispatcher_busy[0] = True
            entry = pending.popleft()
            latency = oh.scheduler_latency_s
            if latency > 0:
                self.log.overhead_spans.append(
                    OverheadSpan("scheduler", loop.now, loop.now + latency)
                )

            def released():
                dispatcher_busy[0] = False
                ready.append(entry)
                place()
                pump()

            loop.after(latency, released)

        def place() -> None:
            # keep scanning the FIFO pool until a full pass places nothing
            progress = True
            while progress:
                progress = False
                for i, (item, stage, t_sub) in enumerate(ready):
                    node = tagged_place(self.nodes, self.plan, item, stage)
                    if node is None:
                        continue
                    ready.pop(i)
                    if stage is Stage.FIRST:
                        self.plan.affinity_tags[item.id] = node.node_id
                    start(item, stage, t_sub, node)
                    progress = True
                    break

        def start(item: DataItem, stage: Stage, t_sub: float, node: NodeState) -> None:
            def done():
                if stage is Stage.FIRST:
                    submit(item, Stage.SECOND)
                place()

            self.execute(item, stage, node, t_sub, done)

        t0 = self._fixed_prologue(with_setup=False, with_distribute=False)
        loop.at(t0, lambda: [submit(it, Stage.FIRST) for it in self.plan.workload.items])
        loop.run()

    # -- designs 2 / 2a: long-running workers over queues -----------------------

    def run_queue_design(self) -> None:
        plan, loop = self.plan, self.loop
        early = plan.design == PARTITIONED_QUEUES
        t0 = self._fixed_prologue(with_setup=True, with_distribute=early)
        k1, k2 = plan.workers_per_node

        stage2_q = {n.node_id: TaskQueue(f"node{n.node_id}.stage2") for n in self.nodes}
        if early:
            assert plan.per_node_items is not None
            input_qs = {n.node_id: TaskQueue(f"node{n.node_id}.input") for n in self.nodes}
        else:
            shared = TaskQueue("input")
            input_qs = {n.node_id: shared for n in self.nodes}

        def setup():
            # Seed inputs and connect every stage-1 worker to its stage-2 queue
            # *before* any worker's first pull, so no receiver can see a
            # premature Empty.
            if early:
                for nid, q in input_qs.items():
                    h = q.sender_connect()
                    for item in plan.per_node_items[nid]:
                        h.push(item)
                    h.close()
            else:
                h = input_qs[0].sender_connect()
                for item in plan.workload.items:
                    h.push(item)
                h.close()
            for node in self.nodes:
                handles = [stage2_q[node.node_id].sender_connect() for _ in range(k1)]
                for w, handle in enumerate(handles):
                    loop.at(loop.now, _make_stage1_worker(node, w, handle))
                for w in range(k2):
                    loop.at(loop.now, _make_stage2_worker(node, w))

        def _make_stage1_worker(node: NodeState, widx: int, handle):
            rid = f"node{node.node_id}.stage1.w{widx}"
            q = input_qs[node.node_id]

            def step():
                res = q.pull(rid)
                if res.kind is PullKind.DATA:
                    item = res.item

                    def done():
                        handle.push(item)
                        step()

                    self.execute(item, Stage.FIRST, node, loop.now, done)
                elif res.kind is PullKind.WAIT:
                    loop.after(self.wait, step)
                else:
                    handle.close()

            return step

        def _make_stage2_worker(node: NodeState, widx: int):
            rid = f"node{node.node_id}.stage2.w{widx}"
            q = stage2_q[node.node_id]

            def step():
                res = q.pull(rid)
                if res.kind is PullKind.DATA:
                    self.execute(res.item, Stage.SECOND, node, loop.now, step)
                elif res.kind is PullKind.WAIT:
                    loop.after(self.wait, step)
                # Empty: worker terminates

            return step

        loop.at(t0, setup)
        loop.run()

    # -- prologue spans ----------------------------------------------------------

    def _fixed_prologue(self, *, with_setup: bool, with_distribute: bool) -> float:
        t = 0.0
        if self.oh.dataset_discovery_s > 0:
            self.log.overhead_spans.append(
                OverheadSpan("dataset_discovery", t, t + self.oh.dataset_discovery_s)
            )
        t += self.oh.dataset_discovery_s
        if with_setup and self.oh.queue_setup_s > 0:
            self.log.overhead_spans.append(OverheadSpan("setup", t, t + self.oh.queue_setup_s))
        if with_setup:
            t += self.oh.queue_setup_s
        if with_distribute:
            dist = (
                self.oh.distribute_s
                if self.oh.distribute_s is not None
                else self.plan.distribute_measured_s
            )
            if dist > 0:
                self.log.overhead_spans.append(OverheadSpan("distribute", t, t + dist))
            t += dist
        return t
