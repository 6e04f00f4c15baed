"""User-level bootstrap confidence bands for the fitted cycle curve.

Whole users are resampled with replacement; each resample re-runs
normalisation and the harmonic fit, and the band is the pointwise
nearest-rank percentile envelope of the resampled fitted curves. A user drawn
twice contributes two blocks treated as distinct users, and since each copy's
mean equals the original user's mean, the per-copy normalisation equals the
user's stored normalised block; the per-user blocks are therefore precomputed
once and gathered per resample.

Resample b draws its indices from an independent RNG substream keyed by
(seed, b), so serial and parallel execution produce identical bands.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .cyclegam import DEFAULT_GRID, FourierSpec, fourier_design
from .errors import AllResamplesFailed, InsufficientUsers
from .preprocess import CycleDataset


@dataclass(frozen=True)
class BootstrapConfig:
    n_samples: int = 200
    seed: int = 0
    ci_level: float = 0.95
    grid: tuple[float, ...] = tuple(float(d) for d in DEFAULT_GRID)

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        if not (0.0 < self.ci_level < 1.0):
            raise ValueError("ci_level must be in (0, 1)")


@dataclass
class ConfidenceBand:
    grid: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    n_effective_samples: int
    ci_level: float
    n_samples: int
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "grid": [float(g) for g in self.grid],
            "lower": [float(v) for v in self.lower],
            "upper": [float(v) for v in self.upper],
            "n_effective_samples": int(self.n_effective_samples),
            "ci_level": float(self.ci_level),
            "n_samples": int(self.n_samples),
        }


def nearest_rank_band(samples: np.ndarray, ci_level: float) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric nearest-rank percentile envelope over axis 0.

    With m sorted values and tail mass a = (1 - ci)/2, the band takes the
    ceil(a*m)-th value from each end (no interpolation), e.g. the 5th-smallest
    and 196th of 200 sorted values for a 95% band.
    """
    m = samples.shape[0]
    alpha = (1.0 - ci_level) / 2.0
    k = max(1, int(np.ceil(alpha * m)))
    ordered = np.sort(samples, axis=0)
    return ordered[k - 1], ordered[m - k]


def resample_draws(n_users: int, n_samples: int, seed: int) -> np.ndarray:
    """Per-resample user draws from counter-keyed RNG substreams."""
    draws = np.empty((n_samples, n_users), dtype=np.int64)
    for b in range(n_samples):
        rng = np.random.default_rng((seed, b))
        draws[b] = rng.integers(0, n_users, size=n_users)
    return draws


def bootstrap_band(
    dataset: CycleDataset,
    spec: FourierSpec = FourierSpec(),
    config: BootstrapConfig = BootstrapConfig(),
) -> ConfidenceBand:
    """Percentile band of the fitted curve under user-level resampling."""
    if dataset.n_users < 2:
        raise InsufficientUsers(
            f"bootstrap needs >= 2 distinct users, got {dataset.n_users}"
        )
    grid = np.asarray(config.grid, dtype=float)
    design = fourier_design(dataset.cycle_days, spec)
    grid_design = fourier_design(grid, spec)
    draws = resample_draws(dataset.n_users, config.n_samples, config.seed)

    curves, ok = _kernels.bootstrap_curves(
        dataset.norm_values, design, dataset.user_ptr, draws, grid_design
    )
    n_ok = int(ok.sum())
    if n_ok == 0:
        raise AllResamplesFailed("every bootstrap refit was rank deficient")

    lower, upper = nearest_rank_band(curves[ok], config.ci_level)
    warnings = []
    if n_ok < 0.8 * config.n_samples:
        warnings.append(
            f"only {n_ok}/{config.n_samples} bootstrap refits succeeded; "
            "band may be unreliable"
        )
    return ConfidenceBand(
        grid=grid,
        lower=lower,
        upper=upper,
        n_effective_samples=n_ok,
        ci_level=config.ci_level,
        n_samples=config.n_samples,
        warnings=warnings,
    )
