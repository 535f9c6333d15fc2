"""Local-process backend: real threads, real subprocesses, wall-clock log.

Runs the same plans as the simulator but for real: worker threads speak the
queue protocol over the localhost transport, every task execution spawns the
mock-task executable inside a per-node directory, and stage 2 consumes the
token file its item's stage 1 wrote there. Task sleep durations come from the
same per-(item, stage) RNG streams as the simulator, so a sim run with the
same seed is directly comparable.

Spawn/reap cost cannot be split from outside the child, so each task's
measured overhead (wall duration minus requested sleep) is logged as a single
`bootstrap` span. Timestamps are wall-clock seconds relative to run start.
"""

from __future__ import annotations

import subprocess
import sys
import threading
import time
from collections import deque
from pathlib import Path

from .cluster import NodeState, allocate, release
from .designs import (
    PARTITIONED_QUEUES,
    PIPELINE_PER_ITEM,
    SHARED_QUEUE,
    ExecutionPlan,
    tagged_place,
)
from .errors import ConfigurationError, TaskExecutionError
from .eventlog import EventLog, OverheadConfig, OverheadSpan, TaskRecord
from .perf import PerfModel, sample_duration
from .queueproto import PullKind, TaskQueue
from .simengine import task_rng
from .transport import QueueClient, QueueServer
from .workload import DataItem, Stage
from . import mocktask

DEFAULT_LOCAL_WAIT_S = 0.05


def execute_local(
    plan: ExecutionPlan,
    models: dict[Stage, PerfModel],
    overheads: OverheadConfig,
    seed: int,
    workdir,
    *,
    wait_interval_s: float = DEFAULT_LOCAL_WAIT_S,
    node_speed_factors: list[float] | None = None,
    mock_cmd: list[str] | None = None,
) -> EventLog:
    """Execute the plan with real processes; returns a wall-clock event log."""
    if seed < 0:
        raise ConfigurationError("seed must be a non-negative integer")
    if not (wait_interval_s > 0):
        raise ConfigurationError("wait_interval_s must be > 0")
    n_nodes = plan.cluster.n_nodes
    speed = node_speed_factors if node_speed_factors is not None else [1.0] * n_nodes
    if len(speed) != n_nodes:
        raise ConfigurationError(f"need {n_nodes} node speed factors, got {len(speed)}")

    runner = _LocalRun(plan, models, overheads, seed, Path(workdir), wait_interval_s,
                       speed, mock_cmd)
    return runner.run()


class _LocalRun:
    def __init__(self, plan, models, overheads, seed, workdir, wait_interval_s, speed, mock_cmd):
        self.plan: ExecutionPlan = plan
        self.models = models
        self.oh: OverheadConfig = overheads
        self.seed = seed
        self.workdir = workdir
        self.wait = wait_interval_s
        self.speed = speed
        self.mock_cmd = mock_cmd or [sys.executable, mocktask.__file__]

        self.nodes: list[NodeState] = plan.cluster.fresh_nodes()
        self.log = EventLog(clock_kind="wall")
        self.lock = threading.Lock()
        self.cond = threading.Condition(self.lock)
        self.abort_reason: str | None = None
        self._t0 = 0.0
        self._item_index = {it.id: i for i, it in enumerate(plan.workload.items)}
        self._durations = {
            (it.id, stage): sample_duration(
                models[stage], it.size_mb, task_rng(seed, i, stage)
            )
            for i, it in enumerate(plan.workload.items)
            for stage in (Stage.FIRST, Stage.SECOND)
        }

    # -- clock, spans, task spawn ------------------------------------------------

    def now(self) -> float:
        return time.perf_counter() - self._t0

    def _span(self, name: str, t_start: float, t_end: float) -> None:
        with self.lock:
            self.log.overhead_spans.append(OverheadSpan(name, t_start, t_end))

    def _abort(self, reason: str) -> None:
        with self.cond:
            if self.abort_reason is None:
                self.abort_reason = reason
            self.cond.notify_all()

    def aborted(self) -> bool:
        return self.abort_reason is not None

    def node_dir(self, node_id: int) -> Path:
        return self.workdir / f"node{node_id:03d}"

    def run_task(self, item: DataItem, stage: Stage, node: NodeState, t_submit: float) -> None:
        """Spawn the mock task, measure it, and append record + overhead span."""
        task = self.plan.workload.task(stage)
        task_id = f"{item.id}.{stage.value}"
        sleep_s = self._durations[(item.id, stage)] * self.speed[node.node_id]
        out_tok = self.node_dir(node.node_id) / f"{item.id}.{stage.value}.tok"
        argv = list(self.mock_cmd) + ["--sleep-s", repr(sleep_s), "--out", str(out_tok)]
        if stage is Stage.SECOND:
            argv += ["--require", str(self.node_dir(node.node_id) / f"{item.id}.stage1.tok")]

        t_start = self.now()
        try:
            proc = subprocess.run(argv, capture_output=True, text=True)
        except OSError as exc:
            raise TaskExecutionError(f"task {task_id!r}: spawn failed: {exc}", self.log)
        t_end = self.now()
        if proc.returncode != 0:
            raise TaskExecutionError(
                f"task {task_id!r}: exit {proc.returncode}: {proc.stderr.strip()}", self.log
            )
        overhead = max(t_end - t_start - sleep_s, 0.0)
        with self.lock:
            if overhead > 0:
                self.log.overhead_spans.append(
                    OverheadSpan("bootstrap", t_start, t_start + overhead)
                )
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

    # -- top level -----------------------------------------------------------------

    def run(self) -> EventLog:
        self.workdir.mkdir(parents=True, exist_ok=True)
        for node in self.nodes:
            self.node_dir(node.node_id).mkdir(exist_ok=True)
        self._t0 = time.perf_counter()

        if self.oh.dataset_discovery_s > 0:
            t = self.now()
            time.sleep(self.oh.dataset_discovery_s)
            self._span("dataset_discovery", t, self.now())

        if self.plan.design == PIPELINE_PER_ITEM:
            self._run_dispatcher_design()
        elif self.plan.design in (SHARED_QUEUE, PARTITIONED_QUEUES):
            self._run_queue_design()
        else:
            raise ConfigurationError(f"unknown design {self.plan.design!r}")

        if self.abort_reason is not None:
            raise TaskExecutionError(self.abort_reason, self.log)
        return self.log

    # -- design 1: dispatcher thread + placement under a condition variable ---------

    def _run_dispatcher_design(self) -> None:
        submissions: deque[tuple[DataItem, Stage, float]] = deque()
        ready: list[tuple[DataItem, Stage, float]] = []
        total = 2 * len(self.plan.workload.items)
        done_count = [0]
        executors: list[threading.Thread] = []

        def dispatcher():
            dispatched = 0
            while dispatched < total:
                with self.cond:
                    while not submissions and not self.aborted():
                        self.cond.wait(0.1)
                    if self.aborted():
                        return
                    entry = submissions.popleft()
                latency = self.oh.scheduler_latency_s
                if latency > 0:
                    t = self.now()
                    time.sleep(latency)
                    self._span("scheduler", t, self.now())
                with self.cond:
                    ready.append(entry)
                    self._place_locked()
                    self.cond.notify_all()
                dispatched += 1

        def executor(item: DataItem, stage: Stage, t_submit: float, node: NodeState):
            task = self.plan.workload.task(stage)
            task_id = f"{item.id}.{stage.value}"
            try:
                self.run_task(item, stage, node, t_submit)
            except TaskExecutionError as exc:
                self._abort(str(exc))
                return
            finally:
                with self.cond:
                    release(node, task, task_id)
                    done_count[0] += 1
                    self._place_locked()
                    self.cond.notify_all()
            if stage is Stage.FIRST:
                with self.cond:
                    submissions.append((item, Stage.SECOND, self.now()))
                    self.cond.notify_all()

        def spawn_executor(item, stage, t_submit, node):
            t = threading.Thread(target=executor, args=(item, stage, t_submit, node), daemon=True)
            executors.append(t)
            t.start()

        self._spawn_executor = spawn_executor
        self._ready = ready

        t_all = self.now()
        with self.cond:
            for item in self.plan.workload.items:
                submissions.append((item, Stage.FIRST, t_all))
            self.cond.notify_all()

        disp = threading.Thread(target=dispatcher, daemon=True)
        disp.start()
        with self.cond:
            while done_count[0] < total and not self.aborted():
                self.cond.wait(0.1)
        disp.join(timeout=5.0)
        for t in executors:
            t.join(timeout=5.0)

    def _place_locked(self) -> None:
        """Scan the ready pool FIFO and start everything that fits. Lock held."""
        progress = True
        while progress:
            progress = False
            for i, (item, stage, t_submit) in enumerate(self._ready):
                node = tagged_place(self.nodes, self.plan, item, stage)
                if node is None:
                    continue
                task = self.plan.workload.task(stage)
                allocate(node, task, f"{item.id}.{stage.value}")
                if stage is Stage.FIRST:
                    self.plan.affinity_tags[item.id] = node.node_id
                self._ready.pop(i)
                self._spawn_executor(item, stage, t_submit, node)
                progress = True
                break

    # -- designs 2 / 2a: worker threads over the socket transport --------------------

    def _run_queue_design(self) -> None:
        plan = self.plan
        early = plan.design == PARTITIONED_QUEUES
        k1, k2 = plan.workers_per_node

        t_setup = self.now()
        queues: dict[str, TaskQueue] = {}
        if early:
            in_name = {n.node_id: f"node{n.node_id}.input" for n in self.nodes}
            for name in in_name.values():
                queues[name] = TaskQueue(name)
        else:
            queues["input"] = TaskQueue("input")
            in_name = {n.node_id: "input" for n in self.nodes}
        s2_name = {n.node_id: f"node{n.node_id}.stage2" for n in self.nodes}
        for name in s2_name.values():
            queues[name] = TaskQueue(name)
        server = QueueServer(queues)
        if self.oh.queue_setup_s > 0:
            time.sleep(self.oh.queue_setup_s)
        self._span("setup", t_setup, self.now())

        seeder = QueueClient(server.address)
        try:
            if early:
                t_dist = self.now()
                dist_s = (
                    self.oh.distribute_s
                    if self.oh.distribute_s is not None
                    else plan.distribute_measured_s
                )
                if dist_s > 0:
                    time.sleep(dist_s)
                assert plan.per_node_items is not None
                for nid, items in plan.per_node_items.items():
                    sid = seeder.connect(in_name[nid])
                    for item in items:
                        seeder.push(in_name[nid], sid, item)
                    seeder.done(in_name[nid], sid)
                self._span("distribute", t_dist, self.now())
            else:
                sid = seeder.connect("input")
                for item in plan.workload.items:
                    seeder.push("input", sid, item)
                seeder.done("input", sid)
        finally:
            seeder.close()

        # Stage-1 workers must be connected as stage-2 senders before any
        # stage-2 worker's first pull; do every connect before starting threads.
        workers: list[threading.Thread] = []
        stage1_conns = []
        for node in self.nodes:
            for w in range(k1):
                client = QueueClient(server.address)
                sender_id = client.connect(s2_name[node.node_id])
                stage1_conns.append((node, w, client, sender_id))
        for node, w, client, sender_id in stage1_conns:
            workers.append(
                threading.Thread(
                    target=self._stage1_worker,
                    args=(node, w, client, sender_id, in_name[node.node_id],
                          s2_name[node.node_id]),
                    daemon=True,
                )
            )
        for node in self.nodes:
            for w in range(k2):
                workers.append(
                    threading.Thread(
                        target=self._stage2_worker,
                        args=(node, w, server.address, s2_name[node.node_id]),
                        daemon=True,
                    )
                )
        for t in workers:
            t.start()
        for t in workers:
            t.join()
        server.close()

    def _stage1_worker(self, node, widx, client, sender_id, in_queue, out_queue):
        rid = f"node{node.node_id}.stage1.w{widx}"
        task = self.plan.workload.task(Stage.FIRST)
        try:
            while not self.aborted():
                res = client.pull(in_queue, rid)
                if res.kind is PullKind.DATA:
                    item = res.item
                    t_submit = self.now()
                    with self.lock:
                        allocate(node, task, f"{item.id}.stage1")
                    try:
                        self.run_task(item, Stage.FIRST, node, t_submit)
                    finally:
                        with self.lock:
                            release(node, task, f"{item.id}.stage1")
                    client.push(out_queue, sender_id, item)
                elif res.kind is PullKind.WAIT:
                    time.sleep(self.wait)
                else:
                    break
            client.done(out_queue, sender_id)
        except Exception as exc:  # any worker failure aborts the run
            self._abort(str(exc))
        finally:
            client.close()

    def _stage2_worker(self, node, widx, address, queue_name):
        rid = f"node{node.node_id}.stage2.w{widx}"
        task = self.plan.workload.task(Stage.SECOND)
        client = QueueClient(address)
        try:
            while not self.aborted():
                res = client.pull(queue_name, rid)
                if res.kind is PullKind.DATA:
                    item = res.item
                    t_submit = self.now()
                    with self.lock:
                        allocate(node, task, f"{item.id}.stage2")
                    try:
                        self.run_task(item, Stage.SECOND, node, t_submit)
                    finally:
                        with self.lock:
                            release(node, task, f"{item.id}.stage2")
                elif res.kind is PullKind.WAIT:
                    time.sleep(self.wait)
                else:
                    break
        except Exception as exc:
            self._abort(str(exc))
        finally:
            client.close()
