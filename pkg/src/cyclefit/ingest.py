"""CSV ingestion: column auto-detection, table parsing, example data.

Accepted date formats are ISO 8601 (``YYYY-MM-DD``) and slash dates
(``DD/MM/YYYY`` or ``MM/DD/YYYY``). Slash files are disambiguated from their
own content: a file where some day field exceeds 12 pins the convention, and a
file that stays ambiguous on a date that actually differs between readings is
rejected rather than guessed at.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np

from .errors import (
    AmbiguousColumns,
    EmptyInput,
    MissingColumn,
    ParseError,
)

_ISO_RE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})$")
_SLASH_RE = re.compile(r"^(\d{1,2})/(\d{1,2})/(\d{4})$")

EXAMPLE_AMPLITUDE_1 = 3.0
EXAMPLE_AMPLITUDE_2 = 1.0
EXAMPLE_NOISE_SD = 5.0
EXAMPLE_OFFSET_SD = 10.0


@dataclass(frozen=True)
class PeriodRecord:
    user_id: str
    onset_date: date


@dataclass(frozen=True)
class RawObservation:
    user_id: str
    obs_date: date
    value: float


@dataclass(frozen=True)
class ConfounderTable:
    """One row per user; covariate values may be NaN (missing)."""

    user_ids: tuple[str, ...]
    columns: tuple[str, ...]
    values: np.ndarray  # shape (n_users, n_columns)

    def column(self, name: str) -> dict[str, float]:
        if name not in self.columns:
            raise MissingColumn(f"no covariate column {name!r}")
        j = self.columns.index(name)
        return {u: float(self.values[i, j]) for i, u in enumerate(self.user_ids)}


@dataclass(frozen=True)
class ColumnMapping:
    user_column: str
    date_column: str | None
    value_column: str | None = None
    detection_mode: str = "explicit"


@dataclass
class ParsedTable:
    """Result of parsing one CSV, with bookkeeping for validation reports."""

    records: list
    n_rows: int
    n_duplicates: int
    warnings: list[str] = field(default_factory=list)


def _read_csv(source) -> tuple[list[str], list[list[str]]]:
    if isinstance(source, (bytes, bytearray)):
        text = bytes(source).decode("utf-8-sig")
    elif isinstance(source, str):
        text = source.encode("utf-8").decode("utf-8-sig") if source.startswith("﻿") else source
    elif hasattr(source, "read"):
        raw = source.read()
        text = raw.decode("utf-8-sig") if isinstance(raw, (bytes, bytearray)) else raw
    else:
        raise TypeError(f"unsupported CSV source {type(source)!r}")
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise EmptyInput("CSV has no header row")
    header = [h.strip() for h in rows[0]]
    return header, rows[1:]


def _looks_like_date(value: str) -> bool:
    value = value.strip()
    if _ISO_RE.match(value):
        y, m, d = (int(g) for g in _ISO_RE.match(value).groups())
        return _valid_ymd(y, m, d)
    m = _SLASH_RE.match(value)
    if m:
        a, b, y = (int(g) for g in m.groups())
        return _valid_ymd(y, b, a) or _valid_ymd(y, a, b)
    return False


def _valid_ymd(y: int, m: int, d: int) -> bool:
    try:
        date(y, m, d)
        return True
    except ValueError:
        return False


def _looks_numeric(value: str) -> bool:
    try:
        float(value)
        return True
    except ValueError:
        return False


class _DateReader:
    """Two-pass slash-date disambiguation over one file."""

    def __init__(self):
        self.day_first_evidence = False
        self.month_first_evidence = False
        self.saw_differing_slash = False

    def observe(self, value: str):
        m = _SLASH_RE.match(value.strip())
        if not m:
            return
        a, b, _ = (int(g) for g in m.groups())
        if a > 12:
            self.day_first_evidence = True
        if b > 12:
            self.month_first_evidence = True
        if a != b:
            self.saw_differing_slash = True

    def resolve(self) -> bool:
        """Return day_first; raise if the file cannot be disambiguated."""
        if self.day_first_evidence and self.month_first_evidence:
            raise ParseError(
                "date column mixes DD/MM/YYYY and MM/DD/YYYY conventions"
            )
        if self.day_first_evidence:
            return True
        if self.month_first_evidence:
            return False
        if self.saw_differing_slash:
            raise ParseError(
                "ambiguous slash dates: no value pins DD/MM vs MM/DD; "
                "use ISO dates or an explicit column mapping"
            )
        return False  # all-identical readings; either convention works

    def parse(self, value: str, day_first: bool, row: int) -> date:
        value = value.strip()
        m = _ISO_RE.match(value)
        if m:
            y, mo, d = (int(g) for g in m.groups())
            if not _valid_ymd(y, mo, d):
                raise ParseError(f"invalid calendar date {value!r}", row=row)
            return date(y, mo, d)
        m = _SLASH_RE.match(value)
        if m:
            a, b, y = (int(g) for g in m.groups())
            d, mo = (a, b) if day_first else (b, a)
            if not _valid_ymd(y, mo, d):
                raise ParseError(f"invalid calendar date {value!r}", row=row)
            return date(y, mo, d)
        raise ParseError(f"unparseable date {value!r}", row=row)


def detect_columns(header: list[str], sample_rows: list[list[str]], kind: str) -> ColumnMapping:
    """Infer which columns hold the user id, date, and (for outcomes) value.

    The date column is the one with the highest fraction of date-parseable
    sample values; the user column prefers a name containing "user"/"id" and
    otherwise the lowest-cardinality non-date column; the outcome value column
    is the remaining numeric column.
    """
    if kind not in ("periods", "outcomes", "confounders"):
        raise ValueError(f"unknown table kind {kind!r}")
    if not header:
        raise MissingColumn("empty header")
    if not sample_rows:
        raise EmptyInput("no sample rows to detect columns from")

    ncol = len(header)
    cells: list[list[str]] = [[] for _ in range(ncol)]
    for row in sample_rows:
        for j in range(ncol):
            if j < len(row) and row[j].strip():
                cells[j].append(row[j].strip())

    date_frac = [
        (sum(_looks_like_date(v) for v in col) / len(col)) if col else 0.0
        for col in cells
    ]
    num_frac = [
        (sum(_looks_numeric(v) for v in col) / len(col)) if col else 0.0
        for col in cells
    ]
    cardinality = [len(set(col)) for col in cells]

    date_col: int | None = None
    if kind in ("periods", "outcomes"):
        best = max(date_frac)
        if best <= 0.5:
            raise MissingColumn(f"no date-like column found in header {header}")
        tied = [j for j in range(ncol) if date_frac[j] == best]
        if len(tied) > 1:
            named = [j for j in tied if re.search(r"date|day|onset|time", header[j], re.I)]
            if len(named) != 1:
                raise AmbiguousColumns(
                    f"columns {[header[j] for j in tied]} are equally date-like"
                )
            tied = named
        date_col = tied[0]

    rest = [j for j in range(ncol) if j != date_col]
    if not rest:
        raise MissingColumn("no candidate for the user id column")
    named_user = [j for j in rest if re.search(r"user|\bid\b|_id|id_|^id$", header[j], re.I)]
    pool = named_user or rest
    min_card = min(cardinality[j] for j in pool)
    user_candidates = [j for j in pool if cardinality[j] == min_card]
    if len(user_candidates) > 1:
        raise AmbiguousColumns(
            f"columns {[header[j] for j in user_candidates]} tie as user id"
        )
    user_col = user_candidates[0]

    value_col: int | None = None
    if kind == "outcomes":
        numeric = [j for j in rest if j != user_col and num_frac[j] >= 0.9]
        if not numeric:
            raise MissingColumn("no numeric outcome column found")
        if len(numeric) > 1:
            named = [j for j in numeric if re.search(r"value|outcome|score", header[j], re.I)]
            if len(named) != 1:
                raise AmbiguousColumns(
                    f"columns {[header[j] for j in numeric]} all look like outcome values"
                )
            numeric = named
        value_col = numeric[0]

    return ColumnMapping(
        user_column=header[user_col],
        date_column=header[date_col] if date_col is not None else None,
        value_column=header[value_col] if value_col is not None else None,
        detection_mode="auto",
    )


def _column_indices(header: list[str], mapping: ColumnMapping, need_date: bool, need_value: bool):
    def idx(name: str | None, role: str) -> int | None:
        if name is None:
            return None
        if name not in header:
            raise MissingColumn(f"{role} column {name!r} not in header {header}")
        return header.index(name)

    ui = idx(mapping.user_column, "user")
    di = idx(mapping.date_column, "date") if need_date else None
    if need_date and di is None:
        raise MissingColumn("a date column is required")
    vi = idx(mapping.value_column, "value") if need_value else None
    if need_value and vi is None:
        raise MissingColumn("a value column is required")
    return ui, di, vi


def _cell(row: list[str], j: int, rowno: int, role: str) -> str:
    if j >= len(row) or not row[j].strip():
        raise ParseError(f"missing {role}", row=rowno)
    return row[j].strip()


def parse_periods(source, mapping: ColumnMapping) -> ParsedTable:
    """Parse period onset dates; exact duplicate (user, date) rows collapse."""
    header, rows = _read_csv(source)
    if not rows:
        raise EmptyInput("no data rows")
    ui, di, _ = _column_indices(header, mapping, need_date=True, need_value=False)

    reader = _DateReader()
    for row in rows:
        if di < len(row):
            reader.observe(row[di])
    day_first = reader.resolve()

    seen: set[tuple[str, date]] = set()
    records: list[PeriodRecord] = []
    n_dup = 0
    for i, row in enumerate(rows):
        rowno = i + 2  # header is file line 1
        user = _cell(row, ui, rowno, "user id")
        onset = reader.parse(_cell(row, di, rowno, "date"), day_first, rowno)
        key = (user, onset)
        if key in seen:
            n_dup += 1
            continue
        seen.add(key)
        records.append(PeriodRecord(user, onset))

    records.sort(key=lambda r: (r.user_id, r.onset_date))
    warnings = []
    if n_dup:
        warnings.append(f"collapsed {n_dup} duplicate period row(s)")
    return ParsedTable(records, n_rows=len(rows), n_duplicates=n_dup, warnings=warnings)


def parse_outcomes(source, mapping: ColumnMapping) -> ParsedTable:
    """Parse outcome observations.

    Multiple readings per (user, date) are kept as separate observations;
    only rows identical in user, date, and value collapse (with a warning).
    Non-finite values are rejected with their row number.
    """
    header, rows = _read_csv(source)
    if not rows:
        raise EmptyInput("no data rows")
    ui, di, vi = _column_indices(header, mapping, need_date=True, need_value=True)

    reader = _DateReader()
    for row in rows:
        if di < len(row):
            reader.observe(row[di])
    day_first = reader.resolve()

    seen: set[tuple[str, date, float]] = set()
    records: list[RawObservation] = []
    n_dup = 0
    for i, row in enumerate(rows):
        rowno = i + 2
        user = _cell(row, ui, rowno, "user id")
        obs_date = reader.parse(_cell(row, di, rowno, "date"), day_first, rowno)
        raw = _cell(row, vi, rowno, "value")
        try:
            value = float(raw)
        except ValueError:
            raise ParseError(f"unparseable value {raw!r}", row=rowno) from None
        if not math.isfinite(value):
            raise ParseError(f"non-finite value {raw!r}", row=rowno)
        key = (user, obs_date, value)
        if key in seen:
            n_dup += 1
            continue
        seen.add(key)
        records.append(RawObservation(user, obs_date, value))

    records.sort(key=lambda r: (r.user_id, r.obs_date, r.value))
    warnings = []
    if n_dup:
        warnings.append(f"collapsed {n_dup} duplicate outcome row(s)")
    return ParsedTable(records, n_rows=len(rows), n_duplicates=n_dup, warnings=warnings)


def parse_confounders(source, mapping: ColumnMapping) -> ConfounderTable:
    """Parse user-level covariates; blank cells become NaN (missing)."""
    header, rows = _read_csv(source)
    if not rows:
        raise EmptyInput("no data rows")
    ui, _, _ = _column_indices(header, mapping, need_date=False, need_value=False)
    cov_cols = [j for j in range(len(header)) if j != ui]
    if not cov_cols:
        raise MissingColumn("confounder table has no covariate columns")

    by_user: dict[str, list[float]] = {}
    for i, row in enumerate(rows):
        rowno = i + 2
        user = _cell(row, ui, rowno, "user id")
        if user in by_user:
            raise ParseError(f"duplicate user {user!r} in confounder table", row=rowno)
        vals = []
        for j in cov_cols:
            cell = row[j].strip() if j < len(row) else ""
            if not cell or cell.lower() in ("na", "nan", "null"):
                vals.append(float("nan"))
                continue
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(
                    f"unparseable covariate {header[j]!r} value {cell!r}", row=rowno
                ) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite covariate value {cell!r}", row=rowno)
            vals.append(v)
        by_user[user] = vals

    users = tuple(sorted(by_user))
    values = np.array([by_user[u] for u in users], dtype=float).reshape(len(users), len(cov_cols))
    return ConfounderTable(users, tuple(header[j] for j in cov_cols), values)


def periods_to_csv(records: list[PeriodRecord]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["user_id", "onset_date"])
    for r in records:
        w.writerow([r.user_id, r.onset_date.isoformat()])
    return out.getvalue()


def outcomes_to_csv(records: list[RawObservation]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["user_id", "date", "value"])
    for r in records:
        w.writerow([r.user_id, r.obs_date.isoformat(), repr(r.value)])
    return out.getvalue()


def confounders_to_csv(table: ConfounderTable) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["user_id", *table.columns])
    for i, u in enumerate(table.user_ids):
        row = [u]
        for v in table.values[i]:
            row.append("" if math.isnan(v) else repr(float(v)))
        w.writerow(row)
    return out.getvalue()


def _signed_day_to_nearest(day_index: int, onsets: list[int]) -> int:
    """Signed distance to the nearest onset; equidistant ties go to the later
    onset, yielding a negative day."""
    best = None
    for o in onsets:
        delta = day_index - o
        if best is None:
            best = delta
            continue
        if abs(delta) < abs(best) or (abs(delta) == abs(best) and delta < best):
            best = delta
    return best


def generate_example(
    seed: int,
    n_users: int = 40,
    days_per_user: int = 60,
) -> tuple[list[PeriodRecord], list[RawObservation], ConfounderTable]:
    """Synthetic dataset with a known injected cycle waveform.

    Per user: cycle lengths are uniform on 26..30 days; daily outcome values
    follow ``100 + A1*sin(2*pi*d/28) + A2*cos(4*pi*d/28) + offset + noise``
    with ``A1=3``, ``A2=1``, noise sd 5, and a per-user offset (sd 10), where
    ``d`` is the signed day to the nearest onset. Covariates (age, mean_steps,
    mean_sleep) are drawn independently of the outcome. Deterministic in
    ``seed``.
    """
    if n_users < 1:
        raise ValueError("n_users must be >= 1")
    if days_per_user < 0:
        raise ValueError("days_per_user must be >= 0")
    rng = np.random.default_rng(seed)
    width = max(3, len(str(n_users)))
    base = date(2024, 1, 1)

    periods: list[PeriodRecord] = []
    outcomes: list[RawObservation] = []
    conf_users: list[str] = []
    conf_rows: list[list[float]] = []

    for u in range(n_users):
        user = f"u{u + 1:0{width}d}"
        start = base + timedelta(days=int(rng.integers(0, 28)))
        onsets = [0]
        while onsets[-1] <= days_per_user:
            onsets.append(onsets[-1] + int(rng.integers(26, 31)))
        offset = float(rng.normal(0.0, EXAMPLE_OFFSET_SD))
        for t in range(days_per_user):
            d = _signed_day_to_nearest(t, onsets)
            wave = EXAMPLE_AMPLITUDE_1 * math.sin(2 * math.pi * d / 28.0) + (
                EXAMPLE_AMPLITUDE_2 * math.cos(4 * math.pi * d / 28.0)
            )
            value = 100.0 + wave + offset + float(rng.normal(0.0, EXAMPLE_NOISE_SD))
            outcomes.append(RawObservation(user, start + timedelta(days=t), round(value, 4)))
        for o in onsets:
            periods.append(PeriodRecord(user, start + timedelta(days=o)))

        age = round(float(rng.uniform(18.0, 45.0)), 1)
        steps = float(max(500.0, round(rng.normal(8000.0, 2500.0))))
        sleep = round(float(np.clip(rng.normal(7.2, 0.9), 4.0, 10.0)), 2)
        conf_users.append(user)
        conf_rows.append([age, steps, sleep])

    periods.sort(key=lambda r: (r.user_id, r.onset_date))
    outcomes.sort(key=lambda r: (r.user_id, r.obs_date, r.value))
    confounders = ConfounderTable(
        tuple(conf_users), ("age", "mean_steps", "mean_sleep"), np.array(conf_rows)
    )
    return periods, outcomes, confounders
