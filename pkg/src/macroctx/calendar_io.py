"""Ingestion and business-day alignment.

Reads price bars, macro indicator series (offline CSV or an economic-data
HTTP service) and precomputed text-embedding files, then lines everything up
on a business-day calendar with publication lags and forward fill.

File formats
------------
Price CSV::

    date,open,high,low,close,volume

Macro CSV (``.`` marks a missing value)::

    date,value

Embedding file (one pre-aggregated vector per date)::

    # dim=<d> normalized=<true|false>
    date,v1,...,vd

Sentiment CSV::

    date,<column>,...
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import FetchError, MissingInputError, ValidationError
from .features import FeatureSpec, PriceSeries, build_numeric_vector, feature_names, forward_return, make_label

logger = logging.getLogger(__name__)

PRICE_HEADER = ["date", "open", "high", "low", "close", "volume"]
MACRO_HEADER = ["date", "value"]

# Business days between an observation's reference date and its public release.
DEFAULT_RELEASE_LAGS: dict[str, int] = {
    "CPI": 10,
    "CPIAUCSL": 10,
    "UNRATE": 5,
    "GDP": 30,
    "GDPC1": 30,
    "T10Y2Y": 0,
}

API_KEY_ENV = "FRED_API_KEY"
DEFAULT_ENDPOINT = "https://api.stlouisfed.org/fred/series/observations"

_WEEKDAY_NAMES = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")


def parse_date(value) -> dt.date:
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    try:
        return dt.date.fromisoformat(str(value).strip())
    except ValueError as exc:
        raise ValidationError(f"not an ISO-8601 date: {value!r}") from exc


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise MissingInputError(p, what)
    return p


# --------------------------------------------------------------------------
# calendar


@dataclass(frozen=True)
class BusinessCalendar:
    """Weekday mask plus an explicit holiday list.

    ``add`` is total: a non-business anchor first rolls forward (backward for
    negative offsets), so ``add(saturday, 1)`` is the following Monday, the
    same as ``add(saturday, 0)``.
    """

    weekmask: frozenset[int] = frozenset(range(5))
    holidays: tuple[dt.date, ...] = ()

    def __post_init__(self):
        mask = frozenset(int(d) for d in self.weekmask)
        if not mask or not mask <= set(range(7)):
            raise ValidationError(f"weekmask must be a non-empty subset of 0..6, got {sorted(mask)}")
        hols = tuple(parse_date(h) for h in self.holidays)
        if len(set(hols)) != len(hols):
            raise ValidationError("holiday list contains duplicates")
        for h in hols:
            if h.weekday() not in mask:
                raise ValidationError(f"holiday {h} does not fall on a business weekday")
        object.__setattr__(self, "weekmask", mask)
        object.__setattr__(self, "holidays", tuple(sorted(hols)))

    @classmethod
    def from_names(cls, days: Iterable[str] = _WEEKDAY_NAMES[:5], holidays=()) -> "BusinessCalendar":
        lookup = {n.lower(): i for i, n in enumerate(_WEEKDAY_NAMES)}
        try:
            mask = frozenset(lookup[d.strip().lower()[:3]] for d in days)
        except KeyError as exc:
            raise ValidationError(f"unknown weekday name {exc.args[0]!r}") from None
        return cls(weekmask=mask, holidays=tuple(holidays))

    @property
    def _np_weekmask(self) -> list[int]:
        return [1 if i in self.weekmask else 0 for i in range(7)]

    @property
    def _np_holidays(self) -> np.ndarray:
        return np.array([h.isoformat() for h in self.holidays], dtype="datetime64[D]")

    def is_business_day(self, day) -> bool:
        return bool(np.is_busday(np.datetime64(parse_date(day), "D"),
                                 weekmask=self._np_weekmask, holidays=self._np_holidays))

    def add(self, anchor, n: int) -> dt.date:
        """Move ``n`` business days from ``anchor`` (negative moves back)."""
        day = np.datetime64(parse_date(anchor), "D")
        kw = dict(weekmask=self._np_weekmask, holidays=self._np_holidays)
        if np.is_busday(day, **kw) or n == 0:
            roll = "forward" if n >= 0 else "backward"
            out = np.busday_offset(day, n, roll=roll, **kw)
        elif n > 0:
            out = np.busday_offset(day, n - 1, roll="forward", **kw)
        else:
            out = np.busday_offset(day, n + 1, roll="backward", **kw)
        return out.astype(dt.date)

    def previous(self, day) -> dt.date:
        return self.add(day, -1)

    def business_days(self, start, end) -> list[dt.date]:
        start, end = parse_date(start), parse_date(end)
        if end < start:
            return []
        days = np.arange(np.datetime64(start, "D"), np.datetime64(end, "D") + 1)
        keep = np.is_busday(days, weekmask=self._np_weekmask, holidays=self._np_holidays)
        return [d.astype(dt.date) for d in days[keep]]


# --------------------------------------------------------------------------
# prices


@dataclass(frozen=True)
class PriceBar:
    date: dt.date
    open: float
    high: float
    low: float
    close: float
    volume: float

    def __post_init__(self):
        vals = (self.open, self.high, self.low, self.close, self.volume)
        if not all(math.isfinite(v) for v in vals):
            raise ValidationError(f"non-finite value in bar {self.date}")
        if self.low > min(self.open, self.close):
            raise ValidationError(f"low {self.low} above min(open, close) on {self.date}")
        if self.high < max(self.open, self.close):
            raise ValidationError(f"high {self.high} below max(open, close) on {self.date}")
        if self.low > self.high:
            raise ValidationError(f"low {self.low} above high {self.high} on {self.date}")
        if self.volume < 0:
            raise ValidationError(f"negative volume on {self.date}")


def _read_csv_rows(path: Path, expected_header: Sequence[str] | None = None):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = None
        for lineno, row in enumerate(reader, start=1):
            if not row or row[0].startswith("#"):
                continue
            if header is None:
                header = [h.strip() for h in row]
                if expected_header is not None and header != list(expected_header):
                    raise ValidationError(
                        f"{path}: header {header} does not match {list(expected_header)}")
                continue
            yield lineno, header, row
    if header is None:
        raise ValidationError(f"{path}: empty file")


def load_price_csv(path, calendar: BusinessCalendar | None = None) -> list[PriceBar]:
    """Load daily bars, dropping rows that are not business days.

    Raises ``ValidationError`` naming the line for malformed rows, invariant
    violations, and duplicated dates.
    """
    calendar = calendar or BusinessCalendar()
    path = _require_file(path, "price file")
    bars: dict[dt.date, PriceBar] = {}
    skipped = 0
    for lineno, _header, row in _read_csv_rows(path, PRICE_HEADER):
        try:
            if len(row) != len(PRICE_HEADER):
                raise ValidationError(f"expected {len(PRICE_HEADER)} fields, got {len(row)}")
            day = parse_date(row[0])
            bar = PriceBar(day, *(float(v) for v in row[1:]))
        except (ValueError, ValidationError) as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
        if day in bars:
            raise ValidationError(f"{path}:{lineno}: duplicate date {day}")
        if not calendar.is_business_day(day):
            skipped += 1
            continue
        bars[day] = bar
    if skipped:
        logger.warning("%s: dropped %d non-business-day rows", path, skipped)
    return [bars[d] for d in sorted(bars)]



def write_price_csv(path, bars: Iterable[PriceBar]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PRICE_HEADER)
        for b in bars:
            w.writerow([b.date.isoformat(), repr(float(b.open)), repr(float(b.high)), repr(float(b.low)),
                        repr(float(b.close)), repr(float(b.volume))])


# --------------------------------------------------------------------------
# macro series


def default_release_lag(series_id: str) -> int:
    lag = DEFAULT_RELEASE_LAGS.get(series_id.upper())
    if lag is None:
        logger.info("no default release lag for %s; assuming 0 business days", series_id)
        return 0
    return lag


@dataclass(frozen=True)
class MacroSeries:
    series_id: str
    observations: tuple[tuple[dt.date, float], ...]
    release_lag_bd: int
    skipped: int = 0

    def __post_init__(self):
        if self.release_lag_bd < 0:
            raise ValidationError(f"{self.series_id}: release lag must be >= 0")
        obs = tuple((parse_date(d), float(v)) for d, v in self.observations)
        for (d0, _), (d1, _) in zip(obs, obs[1:]):
            if d1 <= d0:
                raise ValidationError(f"{self.series_id}: observations not strictly increasing at {d1}")
        object.__setattr__(self, "observations", obs)


def _parse_observations(pairs, series_id: str) -> tuple[list[tuple[dt.date, float]], int]:
    obs, skipped = [], 0
    for day, raw in pairs:
        raw = str(raw).strip()
        if raw in (".", ""):
            skipped += 1
            continue
        value = float(raw)
        if not math.isfinite(value):
            raise ValidationError(f"{series_id}: non-finite value on {day}")
        obs.append((parse_date(day), value))
    obs.sort(key=lambda o: o[0])
    return obs, skipped


def load_macro_csv(path, series_id: str, release_lag_bd: int | None = None) -> MacroSeries:
    path = _require_file(path, f"macro file for {series_id}")
    pairs = []
    for lineno, _header, row in _read_csv_rows(path, MACRO_HEADER):
        if len(row) != 2:
            raise ValidationError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
        pairs.append((row[0], row[1]))
    try:
        obs, skipped = _parse_observations(pairs, series_id)
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    lag = default_release_lag(series_id) if release_lag_bd is None else release_lag_bd
    return MacroSeries(series_id, tuple(obs), lag, skipped)


def write_macro_csv(path, series: MacroSeries) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MACRO_HEADER)
        for d, v in series.observations:
            w.writerow([d.isoformat(), repr(float(v))])


def fetch_macro_series(
    endpoint: str | None,
    api_key: str | None,
    series_id: str,
    start=None,
    end=None,
    *,
    release_lag_bd: int | None = None,
    client=None,
    timeout: float = 30.0,
) -> MacroSeries:
    """Download one series from a FRED-style observations endpoint.

    ``endpoint`` may contain a ``{series_id}`` placeholder; otherwise the id is
    sent as the ``series_id`` query parameter. The key falls back to the
    ``FRED_API_KEY`` environment variable. Pass an ``httpx.Client`` as
    ``client`` to control transport (tests use ``httpx.MockTransport``).
    """
    import httpx

    endpoint = endpoint or DEFAULT_ENDPOINT
    key = api_key or os.environ.get(API_KEY_ENV)
    if not key:
        raise ValidationError(f"economic-data API key missing; set {API_KEY_ENV}")
    params = {"api_key": key, "file_type": "json"}
    if "{series_id}" in endpoint:
        url = endpoint.format(series_id=series_id)
    else:
        url = endpoint
        params["series_id"] = series_id
    if start is not None:
        params["observation_start"] = parse_date(start).isoformat()
    if end is not None:
        params["observation_end"] = parse_date(end).isoformat()

    owns_client = client is None
    client = client or httpx.Client(timeout=timeout)
    try:
        resp = client.get(url, params=params)
    except httpx.HTTPError as exc:
        raise FetchError(f"{series_id}: request failed: {exc}", retryable=True) from exc
    finally:
        if owns_client:
            client.close()

    if resp.status_code != 200:
        retryable = resp.status_code == 429 or resp.status_code >= 500
        raise FetchError(f"{series_id}: HTTP {resp.status_code}", status=resp.status_code,
                         retryable=retryable)
    try:
        payload = resp.json()
        pairs = [(o["date"], o["value"]) for o in payload["observations"]]
        obs, skipped = _parse_observations(pairs, series_id)
    except (ValueError, KeyError, TypeError) as exc:
        raise FetchError(f"{series_id}: unparseable payload: {exc}", status=resp.status_code) from exc
    if skipped:
        logger.info("%s: skipped %d missing observations", series_id, skipped)
    lag = default_release_lag(series_id) if release_lag_bd is None else release_lag_bd
    return MacroSeries(series_id, tuple(obs), lag, skipped)


def apply_publication_lag(series: MacroSeries, calendar: BusinessCalendar, start, end) -> dict[dt.date, float]:
    """Daily business-day view of ``series`` as it was publicly known.

    Each day gets the latest observation whose reference date, advanced by the
    release lag, is on or before that day. Days before the first release are
    absent from the result.
    """
    if not series.observations:
        raise ValidationError(f"{series.series_id}: empty series")
    release = [calendar.add(r, series.release_lag_bd) for r, _ in series.observations]
    values = [v for _, v in series.observations]
    out: dict[dt.date, float] = {}
    i = -1
    for day in calendar.business_days(start, end):
        while i + 1 < len(release) and release[i + 1] <= day:
            i += 1
        if i >= 0:
            out[day] = values[i]
    return out


# --------------------------------------------------------------------------
# standardization


@dataclass(frozen=True, eq=False)
class ScalerParams:
    """Per-column mean/std (population) fitted on a training window."""

    mean: np.ndarray
    std: np.ndarray
    degenerate: np.ndarray

    EPS = 1e-12

    @classmethod
    def identity(cls, n: int) -> "ScalerParams":
        return cls(np.zeros(n), np.ones(n), np.zeros(n, dtype=bool))

    def transform(self, values) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.mean) / self.std

    def inverse(self, values) -> np.ndarray:
        return np.asarray(values, dtype=float) * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(),
                "degenerate": [bool(v) for v in self.degenerate]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScalerParams":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float),
                   np.asarray(d["degenerate"], dtype=bool))


def fit_scaler(dates: Sequence[dt.date] | None, values, start=None, end=None) -> ScalerParams:
    """Fit standardization on rows whose date lies in ``[start, end]``.

    With no window bounds every row is used and ``dates`` may be None.

    Population std (ddof=0); columns with std below 1e-12 get std 1 and are
    flagged in ``degenerate``.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if start is None and end is None:
        mask = np.ones(len(values), dtype=bool)
    else:
        lo = parse_date(start) if start is not None else dt.date.min
        hi = parse_date(end) if end is not None else dt.date.max
        mask = np.array([lo <= parse_date(d) <= hi for d in dates], dtype=bool)
        if len(mask) != len(values):
            raise ValidationError("dates and values differ in length")
    rows = values[mask]
    if len(rows) == 0:
        raise ValidationError("no rows inside the training window")
    if len(rows) < 2:
        raise ValidationError("scaler needs at least 2 rows inside the training window")
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    degenerate = std < ScalerParams.EPS
    if degenerate.any():
        logger.warning("scaler: %d constant column(s) left unscaled", int(degenerate.sum()))
    std = np.where(degenerate, 1.0, std)
    return ScalerParams(mean, std, degenerate)


# --------------------------------------------------------------------------
# embeddings


@dataclass(frozen=True, eq=False)
class EmbeddingRecord:
    date: dt.date
    vector: np.ndarray


def _parse_embedding_header(line: str) -> tuple[int, bool]:
    if not line.startswith("#"):
        raise ValidationError("embedding file must start with '# dim=<d> normalized=<true|false>'")
    fields = dict(tok.split("=", 1) for tok in line[1:].split() if "=" in tok)
    try:
        dim = int(fields["dim"])
        flag = fields["normalized"].lower()
    except (KeyError, ValueError):
        raise ValidationError(f"bad embedding header: {line.strip()!r}") from None
    if dim < 1 or flag not in ("true", "false"):
        raise ValidationError(f"bad embedding header: {line.strip()!r}")
    return dim, flag == "true"


def load_embeddings(path) -> list[EmbeddingRecord]:
    path = _require_file(path, "embedding file")
    with open(path) as fh:
        dim, normalized = _parse_embedding_header(fh.readline())
        records: dict[dt.date, EmbeddingRecord] = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("date,"):
                continue
            parts = line.split(",")
            day = parse_date(parts[0])
            if len(parts) - 1 != dim:
                raise ValidationError(f"{path}:{lineno}: {day} has dimension {len(parts) - 1}, expected {dim}")
            try:
                vec = np.array([float(p) for p in parts[1:]])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: unparseable component on {day}") from None
            if not np.isfinite(vec).all():
                raise ValidationError(f"{path}:{lineno}: non-finite component on {day}")
            if not normalized:
                norm = float(np.linalg.norm(vec))
                if norm < 1e-12:
                    raise ValidationError(f"{path}:{lineno}: zero vector on {day} cannot be normalized")
                vec = vec / norm
            if day in records:
                raise ValidationError(f"{path}:{lineno}: duplicate date {day}")
            vec.setflags(write=False)
            records[day] = EmbeddingRecord(day, vec)
    return [records[d] for d in sorted(records)]


def write_embeddings(path, records: Iterable[EmbeddingRecord], normalized: bool = True) -> None:
    records = list(records)
    dim = len(records[0].vector) if records else 0
    with open(path, "w") as fh:
        fh.write(f"# dim={dim} normalized={'true' if normalized else 'false'}\n")
        fh.write("date," + ",".join(f"v{i + 1}" for i in range(dim)) + "\n")
        for r in records:
            fh.write(r.date.isoformat() + "," + ",".join(repr(float(v)) for v in r.vector) + "\n")


# --------------------------------------------------------------------------
# sentiment scalars


def load_sentiment_csv(path) -> dict[dt.date, dict[str, float]]:
    path = _require_file(path, "sentiment file")
    out: dict[dt.date, dict[str, float]] = {}
    for lineno, header, row in _read_csv_rows(path):
        if header[0] != "date" or len(row) != len(header):
            raise ValidationError(f"{path}:{lineno}: malformed sentiment row")
        day = parse_date(row[0])
        if day in out:
            raise ValidationError(f"{path}:{lineno}: duplicate date {day}")
        try:
            out[day] = {k: float(v) for k, v in zip(header[1:], row[1:])}
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: unparseable value") from None
    return out


def write_sentiment_csv(path, rows: Mapping[dt.date, Mapping[str, float]], columns: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *columns])
        for day in sorted(rows):
            w.writerow([day.isoformat(), *(repr(float(rows[day][c])) for c in columns)])


# --------------------------------------------------------------------------
# alignment


@dataclass(frozen=True, eq=False)
class AlignedRecord:
    """One business day's causally lagged inputs.

    ``fwd_return`` is the close-to-close return realized over the next day; it
    is an evaluation target like ``label`` and never enters features.
    """

    date: dt.date
    x_num: np.ndarray
    t_vec: np.ndarray
    z_vec: np.ndarray
    label: int | None
    fwd_return: float | None = None


@dataclass
class AlignReport:
    business_days: int = 0
    kept: int = 0
    dropped: dict[str, int] = field(default_factory=lambda: {
        "price": 0, "features": 0, "embedding": 0, "macro": 0, "sentiment": 0, "label": 0})

    def to_dict(self) -> dict:
        return {"business_days": self.business_days, "kept": self.kept, "dropped": dict(self.dropped)}


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def align(
    bars: Sequence[PriceBar],
    macro: Mapping[str, Mapping[dt.date, float]],
    embeddings: Sequence[EmbeddingRecord],
    calendar: BusinessCalendar,
    start,
    end,
    spec: FeatureSpec | None = None,
    sentiment: Mapping[dt.date, Mapping[str, float]] | None = None,
    *,
    require_label: bool = True,
) -> tuple[list[AlignedRecord], AlignReport]:
    """Assemble one record per business day in ``[start, end]``.

    ``macro`` maps series id to its lag-adjusted daily values (see
    ``apply_publication_lag``); the series order fixes the layout of
    ``z_vec``. The text vector for day t is the embedding dated on the
    previous business day. Days missing any input are dropped and counted by
    cause in the returned report.
    """
    spec = spec or FeatureSpec()
    prices = PriceSeries.from_bars(bars)
    emb = {r.date: r.vector for r in embeddings}
    series_ids = list(macro)
    report = AlignReport()
    records: list[AlignedRecord] = []
    for day in calendar.business_days(start, end):
        report.business_days += 1
        if day not in prices:
            report.dropped["price"] += 1
            continue
        sent_row = None
        if spec.sentiment_columns:
            sent_row = (sentiment or {}).get(day)
        x = build_numeric_vector(prices, sent_row if sent_row is not None else {}, spec, day)
        if x is None:
            cause = "sentiment" if spec.sentiment_columns and sent_row is None else "features"
            report.dropped[cause] += 1
            continue
        t_vec = emb.get(calendar.previous(day))
        if t_vec is None:
            report.dropped["embedding"] += 1
            continue
        z = [macro[s].get(day) for s in series_ids]
        if any(v is None for v in z):
            report.dropped["macro"] += 1
            continue
        label = make_label(prices, day)
        if label is None and require_label:
            report.dropped["label"] += 1
            continue
        records.append(AlignedRecord(day, _frozen(x), _frozen(t_vec), _frozen(z), label,
                                     forward_return(prices, day)))
    report.kept = len(records)
    if not records:
        raise ValidationError(f"alignment produced zero rows; dropped by cause: {report.dropped}")
    return records, report


# --------------------------------------------------------------------------
# aligned dataset file


def write_aligned_csv(path, records: Sequence[AlignedRecord], x_names: Sequence[str],
                      z_names: Sequence[str], meta: Mapping[str, str] | None = None) -> None:
    d = len(records[0].t_vec) if records else 0
    with open(path, "w", newline="") as fh:
        fh.write("# macroctx aligned v1\n")
        for k, v in (meta or {}).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "label", "fwd_return", *(f"x:{n}" for n in x_names),
                    *(f"t:{i}" for i in range(d)), *(f"z:{n}" for n in z_names)])
        for r in records:
            w.writerow([r.date.isoformat(), "" if r.label is None else r.label,
                        "" if r.fwd_return is None else repr(float(r.fwd_return)),
                        *(repr(float(v)) for v in r.x_num), *(repr(float(v)) for v in r.t_vec),
                        *(repr(float(v)) for v in r.z_vec)])


def read_aligned_csv(path) -> tuple[list[AlignedRecord], list[str], list[str], dict[str, str]]:
    path = _require_file(path, "aligned dataset")
    meta: dict[str, str] = {}
    with open(path, newline="") as fh:
        lines = [ln for ln in fh]
    body = []
    for ln in lines:
        if ln.startswith("#"):
            if "=" in ln:
                k, v = ln[1:].strip().split("=", 1)
                meta[k.strip()] = v.strip()
        else:
            body.append(ln)
    reader = csv.reader(body)
    header = next(reader)
    xi = [i for i, h in enumerate(header) if h.startswith("x:")]
    ti = [i for i, h in enumerate(header) if h.startswith("t:")]
    zi = [i for i, h in enumerate(header) if h.startswith("z:")]
    records = []
    for row in reader:
        records.append(AlignedRecord(
            parse_date(row[0]),
            _frozen([float(row[i]) for i in xi]),
            _frozen([float(row[i]) for i in ti]),
            _frozen([float(row[i]) for i in zi]),
            int(row[1]) if row[1] != "" else None,
            float(row[2]) if row[2] != "" else None,
        ))
    return records, [header[i][2:] for i in xi], [header[i][2:] for i in zi], meta


def macro_daily(series: Iterable[MacroSeries], calendar: BusinessCalendar, start, end) -> dict[str, dict[dt.date, float]]:
    """``apply_publication_lag`` for several series, keyed by id in input order."""
    return {s.series_id: apply_publication_lag(s, calendar, start, end) for s in series}


__all__ = [
    "AlignReport", "AlignedRecord", "BusinessCalendar", "DEFAULT_RELEASE_LAGS", "EmbeddingRecord",
    "MacroSeries", "PriceBar", "ScalerParams", "align", "apply_publication_lag", "default_release_lag",
    "feature_names", "fetch_macro_series", "fit_scaler", "load_embeddings", "load_macro_csv",
    "load_price_csv", "load_sentiment_csv", "macro_daily", "parse_date", "read_aligned_csv",
    "write_aligned_csv", "write_embeddings", "write_macro_csv", "write_price_csv", "write_sentiment_csv",
]
