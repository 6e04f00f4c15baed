"""Cyclic harmonic regression on the centred cycle-day scale.

The model is ordinary least squares on a truncated Fourier basis
``[1, sin(w d), cos(w d), ..., sin(K w d), cos(K w d)]`` with ``w = 2*pi /
period`` and a fixed 28-day period, so the fitted curve is periodic by
construction. Significance comes from the F-test of the harmonic terms
against the intercept-only model; effect size is the percent of null
deviance explained.

Solving goes through a Householder QR decomposition (kernel layer); the
explicit normal-equations solve exists only as an independent oracle in the
test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _kernels
from .errors import RankDeficient, TooFewObservations
from .preprocess import CYCLE_DAY_MAX, CYCLE_DAY_MIN, CycleDataset

DEFAULT_PERIOD = 28.0
DEFAULT_GRID = np.arange(CYCLE_DAY_MIN, CYCLE_DAY_MAX + 1, dtype=float)
AIC_K_RANGE = (1, 2, 3, 4)


@dataclass(frozen=True)
class FourierSpec:
    n_harmonics: int = 2
    period: float = DEFAULT_PERIOD

    def __post_init__(self):
        if self.n_harmonics < 1:
            raise ValueError("n_harmonics must be >= 1")
        if not (self.period > 0):
            raise ValueError("period must be positive")

    @property
    def n_params(self) -> int:
        return 2 * self.n_harmonics + 1


def fourier_design(days, spec: FourierSpec) -> np.ndarray:
    """Basis matrix [1, sin(kwd), cos(kwd)]_{k=1..K}; accepts any real days."""
    d = np.asarray(days, dtype=float)
    omega = 2.0 * math.pi / spec.period
    cols = [np.ones_like(d)]
    for k in range(1, spec.n_harmonics + 1):
        cols.append(np.sin(k * omega * d))
        cols.append(np.cos(k * omega * d))
    return np.column_stack(cols)


def build_design(days, spec: FourierSpec = FourierSpec()) -> np.ndarray:
    """Design matrix for observed cycle days (validated to the centred scale)."""
    d = np.asarray(days, dtype=float)
    lo, hi = -spec.period / 2.0, spec.period / 2.0 - 1.0
    if d.size and (d.min() < lo or d.max() > hi):
        raise ValueError(f"cycle days outside [{lo:g}, {hi:g}]")
    return fourier_design(d, spec)


@dataclass
class FourierFit:
    coefficients: np.ndarray
    rss: float
    rss_null: float
    f_stat: float
    p_value: float
    deviance_explained_pct: float
    aic: float
    n_obs: int
    residuals: np.ndarray
    spec: FourierSpec

    def to_dict(self) -> dict:
        return {
            "coefficients": [float(c) for c in self.coefficients],
            "rss": float(self.rss),
            "rss_null": float(self.rss_null),
            "f_stat": float(self.f_stat),
            "p_value": float(self.p_value),
            "deviance_explained_pct": float(self.deviance_explained_pct),
            "aic": float(self.aic),
            "n_obs": int(self.n_obs),
            "n_harmonics": self.spec.n_harmonics,
            "period": float(self.spec.period),
        }


@dataclass
class DiagnosticsBundle:
    qq_theoretical: np.ndarray
    qq_sample: np.ndarray
    residual_by_day: list[dict]
    aic_by_k: dict[int, float]


def _gaussian_aic(rss: float, n: int, n_params: int) -> float:
    if rss <= 0.0:
        return float("-inf")
    return n * math.log(rss / n) + 2 * n_params


def fit_arrays(days: np.ndarray, values: np.ndarray, spec: FourierSpec = FourierSpec()) -> FourierFit:
    """Fit the harmonic model to raw (day, value) arrays."""
    y = np.asarray(values, dtype=float)
    d = np.asarray(days, dtype=float)
    n = y.size
    p = spec.n_params
    if n <= p:
        raise TooFewObservations(f"{n} observations cannot support {p} parameters")
    X = fourier_design(d, spec)
    beta, ok = _kernels.lstsq_qr(X, y)
    if not ok:
        raise RankDeficient("design matrix is rank deficient (too few distinct cycle days?)")
    residuals = y - X @ beta
    rss = float(residuals @ residuals)
    ybar = float(y.mean())
    rss_null = float(((y - ybar) ** 2).sum())

    q = 2 * spec.n_harmonics
    if rss_null <= 0.0:
        f_stat, p_value, deviance = 0.0, 1.0, 0.0
    elif rss <= 0.0:
        f_stat, p_value, deviance = float("inf"), 0.0, 100.0
    else:
        f_stat = ((rss_null - rss) / q) / (rss / (n - p))
        p_value = float(stats.f.sf(f_stat, q, n - p))
        deviance = (rss_null - rss) / rss_null * 100.0

    return FourierFit(
        coefficients=np.asarray(beta, dtype=float),
        rss=rss,
        rss_null=rss_null,
        f_stat=float(f_stat),
        p_value=float(p_value),
        deviance_explained_pct=float(deviance),
        aic=_gaussian_aic(rss, n, p),
        n_obs=n,
        residuals=residuals,
        spec=spec,
    )


def fit(dataset: CycleDataset, spec: FourierSpec = FourierSpec()) -> FourierFit:
    """Fit the cyclic model to a dataset's normalised values."""
    return fit_arrays(dataset.cycle_days, dataset.norm_values, spec)


def predict(fit_result: FourierFit, grid) -> np.ndarray:
    """Evaluate the fitted curve at arbitrary (fractional, unbounded) days."""
    return fourier_design(grid, fit_result.spec) @ fit_result.coefficients


def diagnostics(fit_result: FourierFit, dataset: CycleDataset) -> DiagnosticsBundle:
    """Assumption checks: QQ data, residual spread per day, AIC across K."""
    res = np.sort(fit_result.residuals)
    n = res.size
    probs = np.arange(1, n + 1) / (n + 1)
    theoretical = stats.norm.ppf(probs)

    by_day = []
    days = np.asarray(dataset.cycle_days)
    for d in range(CYCLE_DAY_MIN, CYCLE_DAY_MAX + 1):
        mask = days == d
        count = int(mask.sum())
        if count == 0:
            continue
        vals = fit_result.residuals[mask]
        by_day.append(
            {
                "day": d,
                "n": count,
                "mean": float(vals.mean()),
                "variance": float(vals.var(ddof=1)) if count >= 2 else None,
            }
        )

    ks = sorted(set(AIC_K_RANGE) | {fit_result.spec.n_harmonics})
    aic_by_k: dict[int, float] = {}
    for k in ks:
        sub = FourierSpec(n_harmonics=k, period=fit_result.spec.period)
        try:
            aic_by_k[k] = fit_arrays(dataset.cycle_days, dataset.norm_values, sub).aic
        except (TooFewObservations, RankDeficient):
            aic_by_k[k] = float("nan")

    return DiagnosticsBundle(
        qq_theoretical=theoretical,
        qq_sample=res,
        residual_by_day=by_day,
        aic_by_k=aic_by_k,
    )
