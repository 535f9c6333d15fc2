"""Statistical toolkit: linear fits, bin trimming, and box-plot summaries.

Reproduces the duration-versus-size analysis pipeline: bin task durations by
input size, drop unrepresentative head/tail bins, and least-squares fit a line
through the remainder. `fit_linear` is the raw kernel; `fit_binned` composes
the full pipeline on bin means.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateFitError
from .workload import Bin, bin_items

# Fraction of the dataset the head (and, separately, the tail) may hold and
# still be considered unrepresentative.
DEFAULT_TRIM_FRACTION = 0.05


@dataclass(frozen=True)
class FitResult:
    alpha: float  # slope, seconds per MB
    beta: float  # intercept, seconds
    r_squared: float
    residuals: tuple[float, ...]
    n_points: int
    bins_used: tuple[int, int] | None = None  # inclusive (first, last) bin index

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "r_squared": self.r_squared,
            "n_points": self.n_points,
            "bins_used": list(self.bins_used) if self.bins_used else None,
        }


@dataclass(frozen=True)
class BoxStats:
    median: float
    q1: float
    q3: float
    whisker_lo: float
    whisker_hi: float
    outliers: tuple[float, ...]
    mean: float
    std: float


def fit_linear(points: list[tuple[float, float]]) -> FitResult:
    """Least-squares line through (x, y) points; closed form via lstsq.

    R-squared is 1 - SS_res/SS_tot, defined as 0.0 when the y values have no
    variance. Needs at least two distinct x values to identify a line.
    """
    if len(points) < 2 or len({p[0] for p in points}) < 2:
        raise DegenerateFitError(
            f"fit needs >= 2 points with distinct x, got {len(points)} points"
        )
    x = np.array([p[0] for p in points], dtype=float)
    y = np.array([p[1] for p in points], dtype=float)
    design = np.column_stack([x, np.ones_like(x)])
    (alpha, beta), *_ = np.linalg.lstsq(design, y, rcond=None)
    fitted = alpha * x + beta
    residuals = y - fitted
    ss_res = float(np.sum(residuals**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 0.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return FitResult(
        alpha=float(alpha),
        beta=float(beta),
        r_squared=r2,
        residuals=tuple(float(r) for r in residuals),
        n_points=len(points),
    )


def select_bins(bins: list[Bin], trim_fraction: float = DEFAULT_TRIM_FRACTION) -> tuple[int, int]:
    """Trim unrepresentative head and tail bins; returns inclusive index bounds.

    Drops the longest prefix of bins whose cumulative occupancy stays below
    `trim_fraction` of all points, and likewise the longest suffix. The kept
    range is contiguous; interior sparse bins are never dropped.
    """
    if not bins:
        raise ConfigurationError("select_bins needs at least one bin")
    if not (0 <= trim_fraction < 1):
        raise ConfigurationError(f"trim_fraction must be in [0, 1), got {trim_fraction}")
    counts = [b.count for b in bins]
    total = sum(counts)
    if total == 0:
        raise ConfigurationError("select_bins needs at least one occupied bin")
    budget = trim_fraction * total

    first, cum = 0, 0
    while first < len(bins) and cum + counts[first] < budget:
        cum += counts[first]
        first += 1
    last, cum = len(bins) - 1, 0
    while last >= 0 and cum + counts[last] < budget:
        cum += counts[last]
        last -= 1
    if first > last:  # degenerate trim (tiny datasets): keep everything instead
        return 0, len(bins) - 1
    return first, last


def fit_binned(
    points: list[tuple[float, float]],
    bin_width: float,
    origin: float,
    trim_fraction: float = DEFAULT_TRIM_FRACTION,
) -> FitResult:
    """Bin points by size, trim head/tail, and fit a line to per-bin means."""
    bins = bin_items(points, bin_width, origin)
    first, last = select_bins(bins, trim_fraction)
    kept = [b for b in bins[first : last + 1] if b.count > 0]
    means = [(b.mean_size(), b.mean_value()) for b in kept]
    fit = fit_linear(means)
    return FitResult(
        alpha=fit.alpha,
        beta=fit.beta,
        r_squared=fit.r_squared,
        residuals=fit.residuals,
        n_points=len(points),
        bins_used=(first, last),
    )


def box_stats(values: list[float]) -> BoxStats:
    """Tukey box-plot summary: quartiles, 1.5*IQR whiskers, outliers beyond."""
    if not values:
        raise ConfigurationError("box_stats needs at least one value")
    arr = np.array(values, dtype=float)
    q1, med, q3 = (float(q) for q in np.percentile(arr, [25, 50, 75]))
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = arr[(arr >= lo_fence) & (arr <= hi_fence)]
    whisker_lo = float(inside.min()) if inside.size else q1
    whisker_hi = float(inside.max()) if inside.size else q3
    outliers = tuple(float(v) for v in arr[(arr < lo_fence) | (arr > hi_fence)])
    return BoxStats(
        median=med,
        q1=q1,
        q3=q3,
        whisker_lo=whisker_lo,
        whisker_hi=whisker_hi,
        outliers=outliers,
        mean=float(arr.mean()),
        std=float(arr.std()),
    )
