"""Turn period records and raw observations into a modelling-ready dataset.

Pipeline order is fixed: build cycles -> filter cycles by length -> label
cycle days -> filter users by per-phase counts -> normalise to percent of the
user's own mean. Normalisation comes last because the per-user mean is defined
over included observations only.

Cycle days live on the centred -14..+13 scale (day 0 = onset). Ties between
two equidistant onsets resolve to the later onset (a negative day); days with
no slot on the scale are unassigned and dropped. Observations in the 14-day
window before a user's first onset and the 13-day window after their last are
labelled even though they sit outside any complete cycle.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

from .errors import InvalidBounds, ZeroUserMean
from .ingest import PeriodRecord, RawObservation

CYCLE_DAY_MIN = -14
CYCLE_DAY_MAX = 13
DEFAULT_MIN_CYCLE_LEN = 21
DEFAULT_MAX_CYCLE_LEN = 35
DEFAULT_MIN_PER_PHASE = 5


@dataclass(frozen=True)
class Cycle:
    user_id: str
    start: date
    end: date  # day before the next onset
    length_days: int


@dataclass(frozen=True)
class LabelledObservation:
    user_id: str
    obs_date: date
    cycle_day: int
    raw_value: float


@dataclass(frozen=True)
class Observation:
    user_id: str
    obs_date: date
    cycle_day: int
    raw_value: float
    norm_value: float


@dataclass(frozen=True)
class CycleDataset:
    """Columnar store of normalised observations, grouped by user.

    Rows are sorted by (user, date, raw value); ``user_ptr[i]:user_ptr[i+1]``
    slices user ``user_ids[i]``'s block.
    """

    user_ids: tuple[str, ...]
    user_ptr: np.ndarray
    obs_dates: tuple[date, ...]
    cycle_days: np.ndarray
    raw_values: np.ndarray
    norm_values: np.ndarray
    user_means: dict[str, float]

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_obs(self) -> int:
        return len(self.cycle_days)

    @property
    def observations(self) -> list[Observation]:
        out = []
        user_of_row = np.repeat(np.arange(self.n_users), np.diff(self.user_ptr))
        for i in range(self.n_obs):
            out.append(
                Observation(
                    self.user_ids[user_of_row[i]],
                    self.obs_dates[i],
                    int(self.cycle_days[i]),
                    float(self.raw_values[i]),
                    float(self.norm_values[i]),
                )
            )
        return out

    def user_rows(self, i: int) -> slice:
        return slice(int(self.user_ptr[i]), int(self.user_ptr[i + 1]))

    def subset_users(self, users: set[str]) -> "CycleDataset":
        keep = [i for i, u in enumerate(self.user_ids) if u in users]
        rows = np.concatenate(
            [np.arange(self.user_ptr[i], self.user_ptr[i + 1]) for i in keep]
        ) if keep else np.array([], dtype=int)
        lengths = [int(self.user_ptr[i + 1] - self.user_ptr[i]) for i in keep]
        ptr = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
        ids = tuple(self.user_ids[i] for i in keep)
        return CycleDataset(
            user_ids=ids,
            user_ptr=ptr,
            obs_dates=tuple(self.obs_dates[r] for r in rows),
            cycle_days=self.cycle_days[rows],
            raw_values=self.raw_values[rows],
            norm_values=self.norm_values[rows],
            user_means={u: self.user_means[u] for u in ids},
        )


@dataclass
class EdaSummary:
    cycle_length_hist: dict[int, int]
    n_cycles_built: int
    n_cycles_kept: int
    excluded_cycles_short: int
    excluded_cycles_long: int
    n_users_input: int
    n_users_kept: int
    excluded_users_phase: int
    obs_total: int
    obs_kept: int
    obs_unassigned: int
    obs_in_excluded_cycles: int
    obs_excluded_user_filter: int
    per_user_obs: dict[str, int]
    date_min: date | None
    date_max: date | None

    def to_dict(self) -> dict:
        return {
            "cycle_length_hist": {str(k): v for k, v in sorted(self.cycle_length_hist.items())},
            "n_cycles_built": self.n_cycles_built,
            "n_cycles_kept": self.n_cycles_kept,
            "excluded_cycles_short": self.excluded_cycles_short,
            "excluded_cycles_long": self.excluded_cycles_long,
            "n_users_input": self.n_users_input,
            "n_users_kept": self.n_users_kept,
            "excluded_users_phase": self.excluded_users_phase,
            "obs_total": self.obs_total,
            "obs_kept": self.obs_kept,
            "obs_unassigned": self.obs_unassigned,
            "obs_in_excluded_cycles": self.obs_in_excluded_cycles,
            "obs_excluded_user_filter": self.obs_excluded_user_filter,
            "per_user_obs": dict(sorted(self.per_user_obs.items())),
            "date_min": self.date_min.isoformat() if self.date_min else None,
            "date_max": self.date_max.isoformat() if self.date_max else None,
        }


@dataclass
class LabelResult:
    eligible: list[LabelledObservation]
    cycles_built: list[Cycle]
    cycles_kept: list[Cycle]
    cycles_excluded: list[Cycle]
    n_unassigned: int = 0
    n_in_excluded_cycles: int = 0


def build_cycles(periods: list[PeriodRecord]) -> list[Cycle]:
    """One cycle per consecutive onset pair per user."""
    onsets_by_user: dict[str, list[date]] = {}
    for rec in periods:
        onsets_by_user.setdefault(rec.user_id, []).append(rec.onset_date)
    cycles: list[Cycle] = []
    for user in sorted(onsets_by_user):
        onsets = sorted(onsets_by_user[user])
        for a, b in zip(onsets, onsets[1:]):
            cycles.append(Cycle(user, a, b - timedelta(days=1), (b - a).days))
    return cycles


def filter_cycles(
    cycles: list[Cycle],
    min_len: int = DEFAULT_MIN_CYCLE_LEN,
    max_len: int = DEFAULT_MAX_CYCLE_LEN,
) -> tuple[list[Cycle], list[Cycle]]:
    """Keep cycles with min_len <= length <= max_len (bounds inclusive)."""
    if min_len > max_len:
        raise InvalidBounds(f"min_len {min_len} > max_len {max_len}")
    kept = [c for c in cycles if min_len <= c.length_days <= max_len]
    excluded = [c for c in cycles if not (min_len <= c.length_days <= max_len)]
    return kept, excluded


def label_cycle_day(obs_date: date, onsets: list[date]) -> int | None:
    """Signed day to the nearest onset, or None when off the -14..+13 scale.

    Equidistant ties resolve to the later onset (negative day).
    """
    if not onsets:
        raise ValueError("label_cycle_day requires at least one onset")
    i = bisect_right(onsets, obs_date)
    best: int | None = None
    for j in (i - 1, i):
        if 0 <= j < len(onsets):
            delta = (obs_date - onsets[j]).days
            if best is None or abs(delta) < abs(best) or (abs(delta) == abs(best) and delta < best):
                best = delta
    if best is None or not (CYCLE_DAY_MIN <= best <= CYCLE_DAY_MAX):
        return None
    return best


def label_observations(
    outcomes: list[RawObservation],
    periods: list[PeriodRecord],
    min_len: int = DEFAULT_MIN_CYCLE_LEN,
    max_len: int = DEFAULT_MAX_CYCLE_LEN,
) -> LabelResult:
    """Label each observation and classify it for the quality tallies.

    An observation is eligible when it lies inside a kept cycle, in the
    14-day window before the user's first onset, or in the 13-day window
    from the last onset; observations inside excluded cycles are tallied as
    such even when their day label would be in range.
    """
    cycles = build_cycles(periods)
    kept_cycles, excluded_cycles = filter_cycles(cycles, min_len, max_len)
    kept_by_user: dict[str, set[date]] = {}
    for c in kept_cycles:
        kept_by_user.setdefault(c.user_id, set()).add(c.start)

    onsets_by_user: dict[str, list[date]] = {}
    for rec in periods:
        onsets_by_user.setdefault(rec.user_id, []).append(rec.onset_date)
    for user in onsets_by_user:
        onsets_by_user[user].sort()

    result = LabelResult([], cycles, kept_cycles, excluded_cycles)
    for obs in outcomes:
        onsets = onsets_by_user.get(obs.user_id)
        if not onsets:
            result.n_unassigned += 1
            continue
        i = bisect_right(onsets, obs.obs_date)
        in_cycle = 0 < i < len(onsets)  # between onsets[i-1] and onsets[i]
        if in_cycle and onsets[i - 1] not in kept_by_user.get(obs.user_id, set()):
            result.n_in_excluded_cycles += 1
            continue
        day = label_cycle_day(obs.obs_date, onsets)
        if day is None:
            result.n_unassigned += 1
            continue
        result.eligible.append(
            LabelledObservation(obs.user_id, obs.obs_date, day, obs.value)
        )
    return result


def filter_users(
    labelled: list[LabelledObservation],
    min_per_phase: int = DEFAULT_MIN_PER_PHASE,
) -> tuple[list[LabelledObservation], dict[str, tuple[int, int]]]:
    """Keep users with >= min_per_phase observations in each phase.

    Day 0 counts toward the positive phase.
    """
    neg: dict[str, int] = {}
    pos: dict[str, int] = {}
    for obs in labelled:
        if obs.cycle_day < 0:
            neg[obs.user_id] = neg.get(obs.user_id, 0) + 1
        else:
            pos[obs.user_id] = pos.get(obs.user_id, 0) + 1
    users = set(neg) | set(pos)
    excluded = {
        u: (neg.get(u, 0), pos.get(u, 0))
        for u in users
        if neg.get(u, 0) < min_per_phase or pos.get(u, 0) < min_per_phase
    }
    kept = [o for o in labelled if o.user_id not in excluded]
    return kept, excluded


def normalize(labelled: list[LabelledObservation]) -> CycleDataset:
    """Express each observation as a percentage of its user's mean."""
    ordered = sorted(labelled, key=lambda o: (o.user_id, o.obs_date, o.raw_value))
    user_ids: list[str] = []
    lengths: list[int] = []
    for obs in ordered:
        if not user_ids or obs.user_id != user_ids[-1]:
            user_ids.append(obs.user_id)
            lengths.append(0)
        lengths[-1] += 1
    ptr = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)

    raw = np.array([o.raw_value for o in ordered], dtype=float)
    days = np.array([o.cycle_day for o in ordered], dtype=np.int64)
    norm = np.empty_like(raw)
    means: dict[str, float] = {}
    for i, user in enumerate(user_ids):
        block = raw[ptr[i] : ptr[i + 1]]
        mean = float(block.mean())
        if mean == 0.0:
            raise ZeroUserMean(user)
        means[user] = mean
        norm[ptr[i] : ptr[i + 1]] = block / mean * 100.0

    return CycleDataset(
        user_ids=tuple(user_ids),
        user_ptr=ptr,
        obs_dates=tuple(o.obs_date for o in ordered),
        cycle_days=days,
        raw_values=raw,
        norm_values=norm,
        user_means=means,
    )


def daily_means(dataset: CycleDataset) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Population mean of the normalised outcome per integer cycle day.

    Returns (days, means, counts) for days that have at least one observation.
    """
    days = np.arange(CYCLE_DAY_MIN, CYCLE_DAY_MAX + 1)
    means = np.full(days.shape, np.nan)
    counts = np.zeros(days.shape, dtype=int)
    for k, d in enumerate(days):
        mask = dataset.cycle_days == d
        counts[k] = int(mask.sum())
        if counts[k]:
            means[k] = float(dataset.norm_values[mask].mean())
    present = counts > 0
    return days[present], means[present], counts[present]


def compute_eda(
    outcomes: list[RawObservation],
    label_result: LabelResult,
    excluded_users: dict[str, tuple[int, int]],
    dataset: CycleDataset | None,
) -> EdaSummary:
    hist: dict[int, int] = {}
    for c in label_result.cycles_built:
        hist[c.length_days] = hist.get(c.length_days, 0) + 1
    n_short = sum(1 for c in label_result.cycles_excluded if c.length_days < DEFAULT_MIN_CYCLE_LEN)
    excluded_user_obs = sum(
        1 for o in label_result.eligible if o.user_id in excluded_users
    )
    obs_kept = len(label_result.eligible) - excluded_user_obs
    per_user = {}
    if dataset is not None:
        per_user = {
            u: int(dataset.user_ptr[i + 1] - dataset.user_ptr[i])
            for i, u in enumerate(dataset.user_ids)
        }
    dates = [o.obs_date for o in outcomes]
    all_users = {o.user_id for o in outcomes}
    return EdaSummary(
        cycle_length_hist=hist,
        n_cycles_built=len(label_result.cycles_built),
        n_cycles_kept=len(label_result.cycles_kept),
        excluded_cycles_short=n_short,
        excluded_cycles_long=len(label_result.cycles_excluded) - n_short,
        n_users_input=len(all_users),
        n_users_kept=dataset.n_users if dataset is not None else 0,
        excluded_users_phase=len(excluded_users),
        obs_total=len(outcomes),
        obs_kept=obs_kept,
        obs_unassigned=label_result.n_unassigned,
        obs_in_excluded_cycles=label_result.n_in_excluded_cycles,
        obs_excluded_user_filter=excluded_user_obs,
        per_user_obs=per_user,
        date_min=min(dates) if dates else None,
        date_max=max(dates) if dates else None,
    )


def prepare(
    periods: list[PeriodRecord],
    outcomes: list[RawObservation],
    min_len: int = DEFAULT_MIN_CYCLE_LEN,
    max_len: int = DEFAULT_MAX_CYCLE_LEN,
    min_per_phase: int = DEFAULT_MIN_PER_PHASE,
) -> tuple[CycleDataset | None, EdaSummary]:
    """Full preprocessing chain; dataset is None when no user survives."""
    label_result = label_observations(outcomes, periods, min_len, max_len)
    kept, excluded_users = filter_users(label_result.eligible, min_per_phase)
    dataset = normalize(kept) if kept else None
    eda = compute_eda(outcomes, label_result, excluded_users, dataset)
    return dataset, eda
