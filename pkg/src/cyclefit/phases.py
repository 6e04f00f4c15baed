"""Turning points of the fitted curve and per-phase linear trends.

Turning points are roots of the analytic first derivative, bracketed on a
0.01-day grid over one full cycle, refined by bisection to 1e-6 day, then
rounded to the nearest whole day for interpretability. Between consecutive
turning points (cyclically), ordinary least squares on the daily population
means gives the phase slope in percent of individual mean per day.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .cyclegam import FourierFit, predict
from .errors import FlatCurve, SegmentTooShort
from .preprocess import CycleDataset, daily_means

FLAT_TOLERANCE = 1e-12
SCAN_STEP = 0.01
BISECT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class TurningPoint:
    day: int
    kind: str  # "peak" or "trough"
    fitted_value: float

    def to_dict(self) -> dict:
        return {"day": self.day, "kind": self.kind, "fitted_value": float(self.fitted_value)}


@dataclass(frozen=True)
class PhaseSegment:
    start_day: int
    end_day: int
    slope: float
    slope_se: float
    p_value: float
    n_days: int

    def to_dict(self) -> dict:
        return {
            "start_day": self.start_day,
            "end_day": self.end_day,
            "slope": float(self.slope),
            "slope_se": float(self.slope_se),
            "p_value": float(self.p_value),
            "n_days": self.n_days,
        }


def curve_derivative(fit: FourierFit, days) -> np.ndarray:
    """Analytic first derivative of the fitted curve."""
    d = np.asarray(days, dtype=float)
    omega = 2.0 * math.pi / fit.spec.period
    out = np.zeros_like(d)
    for k in range(1, fit.spec.n_harmonics + 1):
        b_sin = fit.coefficients[2 * k - 1]
        b_cos = fit.coefficients[2 * k]
        out += k * omega * (b_sin * np.cos(k * omega * d) - b_cos * np.sin(k * omega * d))
    return out


def curve_second_derivative(fit: FourierFit, days) -> np.ndarray:
    d = np.asarray(days, dtype=float)
    omega = 2.0 * math.pi / fit.spec.period
    out = np.zeros_like(d)
    for k in range(1, fit.spec.n_harmonics + 1):
        b_sin = fit.coefficients[2 * k - 1]
        b_cos = fit.coefficients[2 * k]
        out -= (k * omega) ** 2 * (b_sin * np.sin(k * omega * d) + b_cos * np.cos(k * omega * d))
    return out


def _bisect_root(fit: FourierFit, lo: float, hi: float) -> float:
    flo = float(curve_derivative(fit, lo))
    while hi - lo > BISECT_TOLERANCE:
        mid = 0.5 * (lo + hi)
        fmid = float(curve_derivative(fit, mid))
        if fmid == 0.0:
            return mid
        if (flo < 0.0) != (fmid < 0.0):
            hi = mid
        else:
            lo, flo = mid, fmid
    return 0.5 * (lo + hi)


def _canonical_day(day: int, period: float) -> int:
    half = int(period / 2)
    return (day + half) % int(period) - half


def find_turning_points(fit: FourierFit) -> list[TurningPoint]:
    """Locate peaks and troughs of the fitted curve on integer days."""
    if np.max(np.abs(fit.coefficients[1:])) < FLAT_TOLERANCE:
        raise FlatCurve("all harmonic coefficients are ~0; curve has no turning points")

    period = fit.spec.period
    half = period / 2.0
    n_steps = int(round(period / SCAN_STEP))
    grid = -half + SCAN_STEP * np.arange(n_steps)
    deriv = curve_derivative(fit, grid)

    roots: list[tuple[float, str]] = []  # (root day, kind)
    for i in range(n_steps):
        a = float(deriv[i])
        b = float(deriv[(i + 1) % n_steps])
        lo = float(grid[i])
        if a == 0.0:
            curv = float(curve_second_derivative(fit, lo))
            if curv != 0.0:
                roots.append((lo, "peak" if curv < 0.0 else "trough"))
            continue
        if a * b < 0.0:
            root = _bisect_root(fit, lo, lo + SCAN_STEP)
            roots.append((root, "peak" if a > 0.0 else "trough"))

    by_day: dict[int, tuple[float, str, float]] = {}  # day -> (|f''|, kind, root)
    for root, kind in roots:
        day = _canonical_day(int(math.floor(root + 0.5)), period)
        strength = abs(float(curve_second_derivative(fit, root)))
        if day not in by_day or strength > by_day[day][0]:
            by_day[day] = (strength, kind, root)

    points = [
        TurningPoint(day, kind, float(predict(fit, [day])[0]))
        for day, (_, kind, _) in sorted(by_day.items())
    ]
    return points


def _slope_stats(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    n = x.size
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ yc) / sxx
    intercept = float(y.mean()) - slope * float(x.mean())
    resid = y - (intercept + slope * x)
    rss = float(resid @ resid)
    if n > 2 and rss > 0.0:
        sigma2 = rss / (n - 2)
        se = math.sqrt(sigma2 / sxx)
        t = slope / se
        p = 2.0 * float(stats.t.sf(abs(t), n - 2))
    else:
        # perfect line (or only 2 days): zero residual SE
        se = 0.0
        p = 1.0 if slope == 0.0 else 0.0
    return slope, se, p


def fit_phase_models(dataset: CycleDataset, turning_points: list[TurningPoint]) -> list[PhaseSegment]:
    """OLS trend of daily population means within each inter-extremum segment.

    Segment endpoints belong to both adjacent segments; the wrapped segment
    is unrolled onto a contiguous day axis before fitting.
    """
    if len(turning_points) < 2:
        raise ValueError("need at least 2 turning points to form segments")
    period = int(turning_points[0].fitted_value * 0 + 28) if not turning_points else 28
    days, means, _ = daily_means(dataset)
    mean_by_day = {int(d): float(m) for d, m in zip(days, means)}

    pts = sorted(turning_points, key=lambda t: t.day)
    segments: list[PhaseSegment] = []
    for i, start in enumerate(pts):
        nxt = pts[(i + 1) % len(pts)]
        end_unwrapped = nxt.day + (period if i == len(pts) - 1 else 0)
        xs, ys = [], []
        for x in range(start.day, end_unwrapped + 1):
            canonical = _canonical_day(x, float(period))
            if canonical in mean_by_day:
                xs.append(float(x))
                ys.append(mean_by_day[canonical])
        if len(xs) < 2:
            raise SegmentTooShort(
                f"segment [{start.day}, {nxt.day}] has {len(xs)} day(s) with data"
            )
        slope, se, p = _slope_stats(np.array(xs), np.array(ys))
        segments.append(
            PhaseSegment(
                start_day=start.day,
                end_day=nxt.day,
                slope=slope,
                slope_se=se,
                p_value=p,
                n_days=len(xs),
            )
        )
    return segments
