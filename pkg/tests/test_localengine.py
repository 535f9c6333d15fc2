from __future__ import annotations

import pytest

from stagesim.cluster import ClusterSpec
from stagesim.designs import plan
from stagesim.errors import TaskExecutionError
from stagesim.eventlog import validate_log
from stagesim.localengine import execute_local
from stagesim.mocktask import main as mocktask_main
from stagesim.perf import PerfModel
from stagesim.workload import Stage
from conftest import make_workload

FAST = {
    Stage.FIRST: PerfModel(0.0, 0.05, 0.0, 0.01),
    Stage.SECOND: PerfModel(0.0, 0.05, 0.0, 0.01),
}


@pytest.fixture
def small_cluster():
    return ClusterSpec(n_nodes=1, cpus_per_node=8, gpus_per_node=1, mem_per_node_mb=17000.0)


def _small_workload(n):
    from stagesim.workload import TaskSpec

    pipeline = (
        TaskSpec(stage=Stage.FIRST, cpu_cores=1, gpus=0, mem_mb=8000.0, perf_model_id="stage1"),
        TaskSpec(stage=Stage.SECOND, cpu_cores=1, gpus=1, mem_mb=1000.0, perf_model_id="stage2"),
    )
    return make_workload([float(100 + 10 * i) for i in range(n)], pipeline=pipeline)


def test_local_run_writes_one_token_per_task(small_cluster, no_overheads, tmp_path):
    wl = _small_workload(4)
    p = plan("2", wl, small_cluster)
    log = execute_local(p, FAST, no_overheads, seed=2, workdir=tmp_path, wait_interval_s=0.02)
    tokens = sorted(t.name for t in tmp_path.rglob("*.tok"))
    assert len(tokens) == 8
    for it in wl.items:
        assert f"{it.id}.stage1.tok" in tokens
        assert f"{it.id}.stage2.tok" in tokens
    assert log.clock_kind == "wall"
    assert validate_log(log, p) == []


def test_local_dispatcher_design(small_cluster, no_overheads, tmp_path):
    wl = _small_workload(3)
    p = plan("1", wl, small_cluster)
    log = execute_local(p, FAST, no_overheads, seed=2, workdir=tmp_path, wait_interval_s=0.02)
    assert len(log.records) == 6
    assert validate_log(log, p) == []


def test_local_records_bootstrap_spans(small_cluster, no_overheads, tmp_path):
    wl = _small_workload(2)
    p = plan("2", wl, small_cluster)
    log = execute_local(p, FAST, no_overheads, seed=2, workdir=tmp_path, wait_interval_s=0.02)
    boots = [s for s in log.overhead_spans if s.name == "bootstrap"]
    assert len(boots) == 4  # one measured spawn per task process
    assert all(s.duration > 0 for s in boots)


def test_spawn_failure_carries_partial_log(small_cluster, no_overheads, tmp_path):
    wl = _small_workload(2)
    p = plan("2", wl, small_cluster)
    with pytest.raises(TaskExecutionError) as err:
        execute_local(
            p,
            FAST,
            no_overheads,
            seed=2,
            workdir=tmp_path,
            wait_interval_s=0.02,
            mock_cmd=["/nonexistent-task-binary"],
        )
    assert err.value.log is not None


def test_mocktask_writes_token(tmp_path):
    out = tmp_path / "x.stage1.tok"
    rc = mocktask_main(["--sleep-s", "0", "--out", str(out)])
    assert rc == 0
    assert out.exists()


def test_mocktask_refuses_missing_requirement(tmp_path):
    out = tmp_path / "x.stage2.tok"
    rc = mocktask_main(
        ["--sleep-s", "0", "--out", str(out), "--require", str(tmp_path / "absent.tok")]
    )
    assert rc == 2
    assert not out.exists()


def test_mocktask_honors_requirement(tmp_path):
    dep = tmp_path / "x.stage1.tok"
    dep.write_text("ok\n")
    out = tmp_path / "x.stage2.tok"
    rc = mocktask_main(["--sleep-s", "0", "--out", str(out), "--require", str(dep)])
    assert rc == 0
    assert out.exists()
