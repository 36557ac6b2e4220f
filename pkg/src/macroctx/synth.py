"""Seeded regime-switching market generator and the regime-shift experiment.

Each day belongs to a regime and carries a binary text signal s. The text
embedding sits near a (regime, s) cluster center, the macro vector near the
regime mean, and the next-day direction is Bernoulli with a probability that
depends on (regime, s). Two training regimes give the same signal opposite
meanings, so text alone is ambiguous whenever the regime is unknown.

The held-out final regime has never-seen text clusters placed midway between
the two training regimes' clusters, and a macro state that rhymes with
(sits closest to) one training regime whose label rule it shares. A
"sentiment" scalar predicts direction during training and is pure noise
afterwards. Macro-conditioned retrieval can recover the analogous regime;
text-only retrieval cannot.
"""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .calendar_io import (AlignedRecord, BusinessCalendar, EmbeddingRecord, MacroSeries, PriceBar, align,
                          fit_scaler, macro_daily, write_embeddings, write_macro_csv, write_price_csv,
                          write_sentiment_csv)
from .errors import ValidationError
from .evaluation import EvaluationReport
from .features import FeatureSpec, feature_names
from .pipeline import PRESETS, Dataset, Settings, evaluate_frozen, fit_final, get_preset, run_cv
from .retrieval import build_index, search_causal

logger = logging.getLogger(__name__)

DEFAULT_SEED = 1
DEFAULT_START = dt.date(2010, 1, 4)
MIN_OOD_DAYS = 30
SENTIMENT_COLUMN = "sentiment"
SYNTH_FEATURES = FeatureSpec(return_lags=(1, 2, 5), vol_window=10, include_ohlcv=False,
                             sentiment_columns=(SENTIMENT_COLUMN,))
# bars generated before the first scheduled day so lags and vol are defined
WARMUP_DAYS = 12


@dataclass(frozen=True, eq=False)
class RegimeSpec:
    regime_id: int
    macro_mean: np.ndarray
    macro_noise_std: float
    text_centers: Mapping[int, np.ndarray]
    text_noise_std: float
    label_rule: Mapping[int, float]
    sentiment_strength: float = 0.0

    def __post_init__(self):
        if self.macro_noise_std <= 0 or self.text_noise_std <= 0:
            raise ValidationError(f"regime {self.regime_id}: noise std must be positive")
        if set(self.text_centers) != {1, -1} or set(self.label_rule) != {1, -1}:
            raise ValidationError(f"regime {self.regime_id}: centers and rule must cover signals +1 and -1")
        for c in self.text_centers.values():
            if abs(np.linalg.norm(c) - 1.0) > 1e-9:
                raise ValidationError(f"regime {self.regime_id}: text centers must be unit vectors")
        if not all(0.0 <= p <= 1.0 for p in self.label_rule.values()):
            raise ValidationError(f"regime {self.regime_id}: up-probabilities must lie in [0, 1]")


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def default_regimes() -> list[RegimeSpec]:
    """Three regimes in d=8 text / p=4 macro space.

    Regime 2 is the held-out shift: macro 6 noise-sd away from regime 0 and
    far from regime 1, text clusters equidistant from regimes 0 and 1.
    """
    e = np.eye(8)
    mu = np.array([1.0, 1.0, -1.0, 1.0])
    rule_a = {1: 0.8, -1: 0.2}
    rule_b = {1: 0.2, -1: 0.8}
    return [
        RegimeSpec(0, mu, 0.2, {1: e[0], -1: e[1]}, 0.15, rule_a, sentiment_strength=1.0),
        RegimeSpec(1, -mu, 0.2, {1: e[2], -1: e[3]}, 0.15, rule_b, sentiment_strength=1.0),
        RegimeSpec(2, mu + np.array([1.2, 0.0, 0.0, 0.0]), 0.2,
                   {1: _unit(e[0] + e[2] + e[4]), -1: _unit(e[1] + e[3] + e[4])}, 0.15, rule_a,
                   sentiment_strength=0.0),
    ]


def default_schedule(n_days: int = 600, ood_days: int = 150, block: int = 45) -> list[tuple[int, int]]:
    """Alternate regimes 0/1 in blocks, then hold out ``ood_days`` of regime 2."""
    train_days = n_days - ood_days
    if train_days < 0:
        raise ValidationError("ood_days exceeds n_days")
    schedule, regime = [], 0
    while train_days > 0:
        n = min(block, train_days)
        schedule.append((regime, n))
        train_days -= n
        regime = 1 - regime
    if ood_days:
        schedule.append((2, ood_days))
    return schedule


@dataclass(eq=False)
class SyntheticDataset:
    records: list[AlignedRecord]
    regimes: np.ndarray
    signals: np.ndarray
    seed: int
    schedule: list[tuple[int, dt.date, dt.date]]
    specs: list[RegimeSpec]
    bars: list[PriceBar] = field(default_factory=list)
    macro: list[MacroSeries] = field(default_factory=list)
    embeddings: list[EmbeddingRecord] = field(default_factory=list)
    sentiment: dict[dt.date, dict[str, float]] = field(default_factory=dict)
    calendar: BusinessCalendar = field(default_factory=BusinessCalendar)
    feature_spec: FeatureSpec = SYNTH_FEATURES

    def __len__(self) -> int:
        return len(self.records)

    @property
    def ood_start(self) -> dt.date:
        return self.schedule[-1][1]

    def split(self) -> tuple[list[AlignedRecord], list[AlignedRecord]]:
        """Records before the final schedule segment, and the segment itself."""
        cut = self.ood_start
        return [r for r in self.records if r.date < cut], [r for r in self.records if r.date >= cut]

    def write(self, directory) -> dict[str, Path]:
        """Emit the raw inputs in the standard ingestion file formats."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {"prices": d / "prices.csv", "embeddings": d / "embeddings.csv", "sentiment": d / "sentiment.csv"}
        write_price_csv(paths["prices"], self.bars)
        write_embeddings(paths["embeddings"], self.embeddings, normalized=True)
        write_sentiment_csv(paths["sentiment"], self.sentiment, [SENTIMENT_COLUMN])
        for s in self.macro:
            paths[f"macro:{s.series_id}"] = d / f"macro_{s.series_id}.csv"
            write_macro_csv(paths[f"macro:{s.series_id}"], s)
        with open(d / "regimes.csv", "w") as fh:
            fh.write("date,regime,signal\n")
            for r, g, s in zip(self.records, self.regimes, self.signals):
                fh.write(f"{r.date.isoformat()},{int(g)},{int(s)}\n")
        return paths


def _validate(specs: Sequence[RegimeSpec], schedule: Sequence[tuple[int, int]], n_days: int) -> dict[int, RegimeSpec]:
    by_id = {s.regime_id: s for s in specs}
    if len(by_id) != len(specs):
        raise ValidationError("duplicate regime ids")
    if len(by_id) < 2:
        raise ValidationError("need at least two regimes")
    dims = {(len(s.macro_mean), len(next(iter(s.text_centers.values())))) for s in specs}
    if len(dims) != 1:
        raise ValidationError("regimes disagree on macro/text dimensions")
    ids = list(by_id)
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            gap = np.linalg.norm(by_id[a].macro_mean - by_id[b].macro_mean)
            if gap < 4 * max(by_id[a].macro_noise_std, by_id[b].macro_noise_std):
                raise ValidationError(f"regimes {a} and {b} are not macro-separable ({gap:.3f})")
    if any(n < 0 for _, n in schedule) or sum(n for _, n in schedule) != n_days:
        raise ValidationError(f"schedule lengths must be non-negative and sum to n_days={n_days}")
    unknown = {g for g, _ in schedule} - set(by_id)
    if unknown:
        raise ValidationError(f"schedule names unknown regimes {sorted(unknown)}")
    return by_id


def generate(specs: Sequence[RegimeSpec] | None = None, schedule: Sequence[tuple[int, int]] | None = None,
             n_days: int = 600, seed: int = DEFAULT_SEED, start: dt.date = DEFAULT_START,
             calendar: BusinessCalendar | None = None) -> SyntheticDataset:
    """Draw a dataset; identical arguments give identical output.

    ``schedule`` lists ``(regime_id, n_days)`` segments covering ``n_days``.
    """
    specs = list(specs) if specs is not None else default_regimes()
    schedule = list(schedule) if schedule is not None else default_schedule(n_days)
    calendar = calendar or BusinessCalendar()
    by_id = _validate(specs, schedule, n_days)
    if n_days == 0:
        return SyntheticDataset([], np.zeros(0, int), np.zeros(0, int), seed, [], specs, calendar=calendar)

    rng = np.random.default_rng(seed)
    first = calendar.add(start, 0)
    total = WARMUP_DAYS + n_days + 1
    days = [first]
    while len(days) < total:
        days.append(calendar.add(days[-1], 1))
    regime_of = [schedule[0][0]] * WARMUP_DAYS
    for g, n in schedule:
        regime_of += [g] * n
    regime_of.append(schedule[-1][0])

    p = len(specs[0].macro_mean)
    macro_obs: list[list[tuple[dt.date, float]]] = [[] for _ in range(p)]
    embeddings, sentiment, signals, bars = [], {}, [], []
    open_ = 100.0
    for i, day in enumerate(days):
        spec = by_id[regime_of[i]]
        s = 1 if rng.random() < 0.5 else -1
        z = spec.macro_mean + spec.macro_noise_std * rng.standard_normal(p)
        center = spec.text_centers[s]
        text = _unit(center + spec.text_noise_std * rng.standard_normal(len(center)))
        direction = 1.0 if spec.label_rule[s] > 0.5 else -1.0
        sent = spec.sentiment_strength * direction + rng.standard_normal()
        up = rng.random() < spec.label_rule[s]

        close = open_ * float(np.exp(0.01 * rng.standard_normal()))
        wick = np.abs(rng.standard_normal(2)) * 0.003
        high = max(open_, close) * (1 + wick[0])
        low = min(open_, close) * (1 - wick[1])
        volume = float(round(1e6 * np.exp(0.2 * rng.standard_normal())))
        bars.append(PriceBar(day, float(open_), float(high), float(low), float(close), volume))
        gap = 0.0005 + abs(0.004 * rng.standard_normal())
        open_ = close * (1 + gap) if up else close * (1 - gap)

        for j in range(p):
            macro_obs[j].append((day, float(z[j])))
        text.setflags(write=False)
        # the headline feeding day t is dated the business day before t
        embeddings.append(EmbeddingRecord(calendar.previous(day), text))
        sentiment[day] = {SENTIMENT_COLUMN: float(sent)}
        signals.append(s)

    macro = [MacroSeries(f"M{j + 1}", tuple(obs), 0) for j, obs in enumerate(macro_obs)]
    lo, hi = days[WARMUP_DAYS], days[WARMUP_DAYS + n_days - 1]
    records, _ = align(bars, macro_daily(macro, calendar, days[0], days[-1]), embeddings, calendar, lo, hi,
                       SYNTH_FEATURES, sentiment)
    pos = {d: i for i, d in enumerate(days)}
    regimes = np.array([regime_of[pos[r.date]] for r in records], dtype=int)
    sigs = np.array([signals[pos[r.date]] for r in records], dtype=int)
    segs, i = [], WARMUP_DAYS
    for g, n in schedule:
        if n:
            segs.append((g, days[i], days[i + n - 1]))
        i += n
    return SyntheticDataset(records, regimes, sigs, seed, segs, specs, bars, macro, embeddings, sentiment,
                            calendar, SYNTH_FEATURES)


# --------------------------------------------------------------------------
# sanity probes


def nearest_centroid_accuracy(dataset: SyntheticDataset) -> float:
    """Share of days whose raw macro vector is nearest its own regime mean."""
    ids = [s.regime_id for s in dataset.specs]
    means = np.stack([s.macro_mean for s in dataset.specs])
    Z = np.stack([r.z_vec for r in dataset.records])
    dist = ((Z[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
    guess = np.array(ids)[dist.argmin(axis=1)]
    return float((guess == dataset.regimes).mean())


def neighbor_vote_accuracy(train: Dataset, ood: Dataset, alpha: float, k: int = 5) -> float:
    """Majority vote of the K retrieved training days' labels on OOD days.

    ``alpha=0`` is a text-only vote; ``alpha>0`` masks candidates by macro
    proximity through the fused query.
    """
    scaler = fit_scaler(train.dates, train.Z)
    index = build_index(train.dates, train.T, scaler.transform(train.Z), alpha)
    label_of = dict(zip(train.dates, train.y))
    Zs = scaler.transform(ood.Z)
    hits = 0
    for i, day in enumerate(ood.dates):
        q = index.query_for(day, ood.T[i], Zs[i])
        votes = [label_of[n.date] for n in search_causal(index, q.fused, day, k)]
        guess = int(2 * sum(votes) > len(votes))
        hits += int(guess == ood.y[i])
    return hits / len(ood)


# --------------------------------------------------------------------------
# experiment


@dataclass
class PresetOutcome:
    cv: EvaluationReport
    ood: EvaluationReport
    fitted: object
    cv_log: object
    ood_log: object


@dataclass
class ExperimentResult:
    outcomes: dict[str, PresetOutcome]
    train_days: int
    ood_days: int

    def accuracy(self, preset: str) -> float:
        return self.outcomes[preset].ood.classification.accuracy

    def delta_f1(self, preset: str) -> float:
        return self.outcomes[preset].ood.deltas.delta_f1

    def checks(self) -> dict[str, bool]:
        out = {}
        if {"macro_retrieval", "text_retrieval"} <= set(self.outcomes):
            out["macro_accuracy_beats_text_by_0.05"] = (
                self.accuracy("macro_retrieval") >= self.accuracy("text_retrieval") + 0.05)
        if "macro_retrieval" in self.outcomes:
            m = self.delta_f1("macro_retrieval")
            out["macro_smallest_delta_f1"] = all(m <= self.delta_f1(p) for p in self.outcomes)
            if "numeric_only" in self.outcomes:
                out["numeric_delta_f1_exceeds_macro"] = self.delta_f1("numeric_only") > m
        return out

    def passed(self) -> bool:
        return all(self.checks().values())


def regime_shift_experiment(dataset: SyntheticDataset, presets: Sequence[str] = tuple(PRESETS),
                            settings: Settings | None = None) -> ExperimentResult:
    """Train on the early schedule, score the final segment with frozen pipelines."""
    settings = settings or Settings()
    train_recs, ood_recs = dataset.split()
    if len(ood_recs) < MIN_OOD_DAYS:
        raise ValidationError(f"held-out segment has {len(ood_recs)} days; need >= {MIN_OOD_DAYS}")
    x_names = feature_names(dataset.feature_spec)
    z_names = [s.series_id for s in dataset.macro]
    train = Dataset.from_records(train_recs, x_names, z_names)
    ood = Dataset.from_records(ood_recs, x_names, z_names)
    outcomes = {}
    for name in presets:
        preset = get_preset(name)
        cv = run_cv(train, preset, settings)
        fitted = fit_final(train, preset, settings)
        res = evaluate_frozen(fitted, ood, cv.report, settings.threshold)
        outcomes[name] = PresetOutcome(cv.report, res.report, fitted, cv.log, res.log)
        logger.info("%s: cv acc %.3f f1 %.3f | ood acc %.3f f1 %.3f", name,
                    cv.report.classification.accuracy, cv.report.f1,
                    res.report.classification.accuracy, res.report.f1)
    return ExperimentResult(outcomes, len(train), len(ood))
