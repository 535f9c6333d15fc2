"""Report figures rendered to files alongside the delimited outputs.

All plotting lives here so the metrics/analysis modules stay pure emitters.
The CLI report path calls these after writing CSV/JSON; nothing else imports
matplotlib.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .analysis import FitResult, box_stats
from .cluster import ClusterSpec
from .metrics import MetricsReport
from .workload import Bin

_FIG_DPI = 110


def utilization_figure(report: MetricsReport, cluster: ClusterSpec, path) -> None:
    """Step plot of CPU and GPU busy share over the run."""
    fig, ax = plt.subplots(figsize=(8, 4))
    for timeline, total, label, color in (
        (report.cpu_timeline, cluster.total_cpus, "CPU", "tab:blue"),
        (report.gpu_timeline, cluster.total_gpus, "GPU", "tab:orange"),
    ):
        if total == 0 or not timeline:
            continue
        xs = [t for t, _ in timeline]
        ys = [100.0 * busy / total for _, busy in timeline]
        ax.step(xs, ys, where="post", label=label, color=color)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("utilization [%]")
    ax.set_ylim(bottom=0)
    ax.legend(loc="upper right")
    ax.set_title(f"resource utilization (makespan {report.makespan_s:.1f} s)")
    fig.tight_layout()
    fig.savefig(path, dpi=_FIG_DPI)
    plt.close(fig)


def fit_figure(
    points: list[tuple[float, float]],
    fit: FitResult,
    path,
    bins: list[Bin] | None = None,
) -> None:
    """Duration vs size: raw scatter or per-bin box plots, plus the fitted line."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    if bins:
        occupied = [b for b in bins if b.count > 0]
        ax.boxplot(
            [b.values() for b in occupied],
            positions=[(b.lo + b.hi) / 2 for b in occupied],
            widths=0.6 * (occupied[0].hi - occupied[0].lo),
            manage_ticks=False,
            flierprops={"markersize": 2},
        )
        means = [(b.mean_size(), b.mean_value()) for b in occupied]
        ax.plot([m[0] for m in means], [m[1] for m in means], "o", ms=3, color="tab:green",
                label="bin means")
    else:
        ax.plot([p[0] for p in points], [p[1] for p in points], ".", ms=2, alpha=0.4,
                label="tasks")
    xs = sorted(p[0] for p in points)
    ax.plot(
        [xs[0], xs[-1]],
        [fit.alpha * xs[0] + fit.beta, fit.alpha * xs[-1] + fit.beta],
        "-", color="tab:red",
        label=f"fit: {fit.alpha:.3g}*x + {fit.beta:.3g}  (R^2={fit.r_squared:.2f})",
    )
    ax.set_xlabel("input size [MB]")
    ax.set_ylabel("duration [s]")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=_FIG_DPI)
    plt.close(fig)


def compare_figure(rows: list[dict], path) -> None:
    """Per-design makespan bars plus stacked overhead totals."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    labels = [str(r.get("design", "?")) for r in rows]
    ax1.bar(labels, [r["makespan_s"] for r in rows], color="tab:blue")
    ax1.set_ylabel("makespan [s]")
    ax1.set_xlabel("design")

    overhead_names = sorted({k for r in rows for k in r.get("overheads_s", {})})
    bottoms = [0.0] * len(rows)
    for name in overhead_names:
        heights = [r.get("overheads_s", {}).get(name, 0.0) for r in rows]
        ax2.bar(labels, heights, bottom=bottoms, label=name)
        bottoms = [b + h for b, h in zip(bottoms, heights)]
    ax2.set_ylabel("overhead [s]")
    ax2.set_xlabel("design")
    if overhead_names:
        ax2.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=_FIG_DPI)
    plt.close(fig)


def box_summary_figure(groups: dict[str, list[float]], ylabel: str, path) -> None:
    """Labeled Tukey box plots for a handful of value groups."""
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = list(groups)
    ax.boxplot([groups[k] for k in labels], tick_labels=labels)
    for i, k in enumerate(labels):
        stats = box_stats(groups[k])
        ax.plot(i + 1, stats.mean, "x", color="tab:red")
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    fig.savefig(path, dpi=_FIG_DPI)
    plt.close(fig)
