"""Linear task-duration model with multiplicative log-normal noise.

Duration scales linearly with input size: T(x) = alpha*x + beta, clamped at a
small floor. Noise multiplies the prediction by exp(sigma*Z) with Z standard
normal, so the *median* sampled duration equals the prediction exactly and the
spread is positively skewed, matching how measured task durations behave.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class PerfModel:
    alpha: float  # seconds per MB
    beta: float  # seconds
    noise_sigma: float = 0.0  # log-scale
    floor_s: float = 0.1

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ConfigurationError("noise_sigma must be >= 0")
        if not (self.floor_s > 0):
            raise ConfigurationError("floor_s must be > 0")


def predict_duration(model: PerfModel, size_mb: float) -> float:
    """Deterministic duration at `size_mb`, clamped to the floor."""
    return max(model.alpha * size_mb + model.beta, model.floor_s)


def sample_duration(model: PerfModel, size_mb: float, rng: np.random.Generator) -> float:
    """One noisy draw around the prediction; sigma=0 degenerates to predict."""
    base = predict_duration(model, size_mb)
    if model.noise_sigma == 0.0:
        return base
    draw = base * math.exp(model.noise_sigma * rng.standard_normal())
    return max(draw, model.floor_s)


# Default model profiles: measured (alpha, beta) per (design, use case, stage).
# Rows are keyed by the dispatch design they were measured under because the
# middleware interference differs per design; profiles are injected via config,
# never re-derived by the engine.
MODEL_TABLE: dict[tuple[str, str, str], tuple[float, float]] = {
    ("1", "uc1", "stage1"): (1.92e-2, 60.49),
    ("1", "uc1", "stage2"): (5.21e-2, 128.53),
    ("1", "uc2", "stage1"): (0.93, 2.45),
    ("1", "uc2", "stage2"): (5.21e-2, 128.53),
    ("2", "uc1", "stage1"): (3.17e-2, 64.81),
    ("2", "uc1", "stage2"): (4.71e-2, 95.83),
    ("2", "uc2", "stage1"): (0.62, 1.52),
    ("2", "uc2", "stage2"): (3.16e-2, 0.29),
    ("2a", "uc1", "stage1"): (2.74e-2, 49.03),
    ("2a", "uc1", "stage2"): (4.80e-2, 87.60),
    ("2a", "uc2", "stage1"): (0.54, 1.51),
    ("2a", "uc2", "stage2"): (2.82e-2, 0.26),
}


def profile(design: str, use_case: str, stage: str, *, noise_sigma: float = 0.0,
            floor_s: float = 0.1) -> PerfModel:
    """Look up a bundled (alpha, beta) row and wrap it in a PerfModel."""
    key = (design, use_case, stage)
    if key not in MODEL_TABLE:
        raise ConfigurationError(f"no bundled model profile for {key}")
    alpha, beta = MODEL_TABLE[key]
    return PerfModel(alpha=alpha, beta=beta, noise_sigma=noise_sigma, floor_s=floor_s)
