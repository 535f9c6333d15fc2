"""Command-line interface.

    stagesim generate --config CFG --out DIR
    stagesim run      --config CFG [--design {1,2,2a}] [--backend {sim,local}]
                      [--seed N] [--out DIR] [--no-figures]
    stagesim compare  RUN_DIR [RUN_DIR ...] --out DIR [--no-figures]
    stagesim fit      --events EVENTS.CSV --stage {stage1,stage2} [--binned]
                      [--bin-width W] [--bin-origin O] [--out DIR] [--no-figures]

`--config` takes a JSON file or a bundled fixture name (uc1-desk, uc2-desk).
Each run directory receives the resolved config copy, events.csv, the full
eventlog.json, metrics.json, a utilization timeline CSV, and (unless
--no-figures) rendered PNGs next to the delimited files. Exit status is 0
only when the run's event log validates against the plan.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from .analysis import fit_binned, fit_linear
from .config import load_config
from .designs import plan
from .errors import (
    ConfigurationError,
    DegenerateFitError,
    PlanningError,
    ProtocolError,
    TaskExecutionError,
)
from .eventlog import EventLog, validate_log
from .localengine import execute_local
from .metrics import compute_metrics
from .simengine import simulate
from .workload import Stage, bin_items

OVERHEAD_COLUMNS = (
    "dataset_discovery",
    "scheduler",
    "setup",
    "distribute",
    "bootstrap",
    "teardown",
)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, PlanningError, DegenerateFitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TaskExecutionError, ProtocolError) as exc:
        print(f"execution error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stagesim", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(required=True)

    p = sub.add_parser("generate", help="materialize a workload to JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="plan and execute one experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--design", choices=["1", "2", "2a"])
    p.add_argument("--backend", choices=["sim", "local"])
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="tabulate metrics across run directories")
    p.add_argument("runs", nargs="+", help="run output directories")
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("fit", help="recover duration-model parameters from a log")
    p.add_argument("--events", required=True, help="events.csv from a run")
    p.add_argument("--stage", choices=["stage1", "stage2"], required=True)
    p.add_argument("--binned", action="store_true", help="fit bin means, not raw points")
    p.add_argument("--bin-width", type=float, default=125.0)
    p.add_argument("--bin-origin", type=float, default=50.0)
    p.add_argument("--trim-fraction", type=float, default=0.05)
    p.add_argument("--out")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_fit)

    return parser


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "workload.json"
    cfg.workload.save(path)
    print(f"wrote {path} ({len(cfg.workload.items)} items, "
          f"{cfg.workload.total_mb:.1f} MB total)")
    return 0


def run_experiment(cfg, out_dir: Path, *, figures: bool = True, workdir=None):
    """Plan, execute, and report one experiment into `out_dir`.

    Returns (log, report, problems). Used by both the CLI and tests.
    """
    the_plan = plan(cfg.design, cfg.workload, cfg.cluster,
                    stage1_model=cfg.models[Stage.FIRST])
    if cfg.backend == "sim":
        log = simulate(
            the_plan, cfg.models, cfg.overheads, cfg.seed,
            wait_interval_s=cfg.wait_interval_s,
            node_speed_factors=cfg.node_speed_factors,
        )
    else:
        log = execute_local(
            the_plan, cfg.models, cfg.overheads, cfg.seed,
            workdir or out_dir / "nodes",
            wait_interval_s=cfg.wait_interval_s,
            node_speed_factors=cfg.node_speed_factors,
        )

    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config.json", "w") as fh:
        json.dump(cfg.raw, fh, indent=2)
        fh.write("\n")
    log.to_csv(out_dir / "events.csv")
    log.save_json(out_dir / "eventlog.json")
    report = compute_metrics(log, cfg.cluster)
    report.save_json(out_dir / "metrics.json")
    report.save_timelines_csv(out_dir / "utilization.csv")
    if figures:
        from .figures import utilization_figure

        utilization_figure(report, cfg.cluster, out_dir / "utilization.png")
    problems = validate_log(log, the_plan)
    return log, report, problems


def cmd_run(args) -> int:
    cfg = load_config(
        args.config, design=args.design, backend=args.backend,
        seed=args.seed, out_dir=args.out,
    )
    if cfg.out_dir is None:
        raise ConfigurationError("no output directory: pass --out or set out_dir in the config")
    out_dir = Path(cfg.out_dir)
    log, report, problems = run_experiment(cfg, out_dir, figures=not args.no_figures)
    print(
        f"design {cfg.design} on {cfg.backend}: makespan {report.makespan_s:.2f} s, "
        f"cpu {report.avg_cpu_util_pct:.1f}%, gpu {report.avg_gpu_util_pct:.1f}%, "
        f"{report.throughput_mb_s:.2f} MB/s -> {out_dir}"
    )
    if problems:
        for p in problems:
            print(f"validation: {p}", file=sys.stderr)
        return 1
    return 0


def cmd_compare(args) -> int:
    rows = []
    for run_dir in args.runs:
        run_path = Path(run_dir)
        with open(run_path / "metrics.json") as fh:
            metrics = json.load(fh)
        design = "?"
        cfg_path = run_path / "config.json"
        if cfg_path.exists():
            with open(cfg_path) as fh:
                design = json.load(fh).get("design", "?")
        rows.append({"design": design, "run": str(run_dir), **metrics})

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = out / "compare.csv"
    with open(table, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["design", "run", "makespan_s", "avg_cpu_util_pct", "avg_gpu_util_pct",
             "throughput_mb_s", "imbalance_cv"]
            + [f"overhead_{n}_s" for n in OVERHEAD_COLUMNS]
        )
        for r in rows:
            overheads = r.get("overheads_s", {})
            writer.writerow(
                [r["design"], r["run"], repr(r["makespan_s"]), repr(r["avg_cpu_util_pct"]),
                 repr(r["avg_gpu_util_pct"]), repr(r["throughput_mb_s"]),
                 repr(r["imbalance_cv"])]
                + [repr(overheads.get(n, 0.0)) for n in OVERHEAD_COLUMNS]
            )
    if not args.no_figures:
        from .figures import compare_figure

        compare_figure(rows, out / "compare.png")
    print(f"wrote {table} ({len(rows)} runs)")
    return 0


def cmd_fit(args) -> int:
    log = EventLog.from_csv(args.events)
    stage = Stage(args.stage)
    points = [(r.size_mb, r.duration) for r in log.records if r.stage is stage]
    if not points:
        raise DegenerateFitError(f"no {stage.value} records in {args.events}")
    bins = None
    if args.binned:
        result = fit_binned(points, args.bin_width, args.bin_origin, args.trim_fraction)
        bins = bin_items(points, args.bin_width, args.bin_origin)
    else:
        result = fit_linear(points)

    design = use_case = None
    sibling_cfg = Path(args.events).parent / "config.json"
    if sibling_cfg.exists():
        with open(sibling_cfg) as fh:
            doc = json.load(fh)
        design = doc.get("design")
        use_case = doc.get("workload", {}).get("use_case")

    fit_doc = {"design": design, "use_case": use_case, "task": stage.value,
               **result.to_json()}
    out = Path(args.out) if args.out else Path(args.events).parent
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "fit.json", "w") as fh:
        json.dump(fit_doc, fh, indent=2)
        fh.write("\n")
    if not args.no_figures:
        from .figures import fit_figure

        fit_figure(points, result, out / "fit.png", bins=bins)
    print(
        f"{stage.value}: alpha={result.alpha:.4g} s/MB, beta={result.beta:.4g} s, "
        f"R^2={result.r_squared:.3f} ({result.n_points} points) -> {out / 'fit.json'}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
