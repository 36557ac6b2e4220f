"""Preset definitions and the CV / freeze / frozen-OOD orchestration.

One retrieval index is built over the whole training window. Per-fold causal
views are date masks on that index: a training row retrieves from entries
dated before itself, a validation row from entries dated before its fold's
first validation day. Under exact search this is the same as rebuilding the
index per fold.
"""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .calendar_io import AlignedRecord, ScalerParams, fit_scaler
from .errors import ProtocolViolation, ValidationError
from .evaluation import EvaluationReport, evaluate_predictions, robustness_deltas
from .features import FeatureSpec
from .model import (FrozenBundle, ModelParams, TrainConfig, predict_proba, time_series_split,
                    train_logistic, with_scaler)
from .retrieval import CausalIndex, build_index, memory_or_fallback

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Preset:
    name: str
    label: str
    segments: tuple[str, ...]
    alpha: float | None = None  # fixed retrieval alpha; None defers to settings

    @property
    def uses_retrieval(self) -> bool:
        return "r" in self.segments


PRESETS: dict[str, Preset] = {
    p.name: p for p in (
        Preset("numeric_only", "Numeric-only", ("x_num",)),
        Preset("text_only", "Text-only", ("t",)),
        Preset("multimodal", "Multimodal (No-Ret)", ("x_num", "z", "t")),
        Preset("text_retrieval", "Text-Retrieval (alpha=0)", ("x_num", "r"), alpha=0.0),
        Preset("macro_retrieval", "Macro-Retrieval (alpha=0.5)", ("x_num", "r")),
    )
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValidationError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None


@dataclass(frozen=True)
class Settings:
    alpha: float = 0.5
    k: int = 5
    folds: int = 5
    train: TrainConfig = field(default_factory=TrainConfig)
    threshold: float = 0.5

    def alpha_for(self, preset: Preset) -> float | None:
        if not preset.uses_retrieval:
            return None
        return self.alpha if preset.alpha is None else preset.alpha


@dataclass(frozen=True, eq=False)
class Dataset:
    dates: list[dt.date]
    X: np.ndarray
    T: np.ndarray
    Z: np.ndarray
    y: np.ndarray
    returns: np.ndarray
    x_names: tuple[str, ...] = ()
    z_names: tuple[str, ...] = ()

    @classmethod
    def from_records(cls, records: Sequence[AlignedRecord], x_names=(), z_names=()) -> "Dataset":
        if not records:
            raise ValidationError("dataset is empty")
        missing = [r.date for r in records if r.label is None or r.fwd_return is None]
        if missing:
            raise ValidationError(f"{len(missing)} record(s) lack a label/forward return, first {missing[0]}")
        return cls([r.date for r in records], np.stack([r.x_num for r in records]),
                   np.stack([r.t_vec for r in records]), np.stack([r.z_vec for r in records]),
                   np.array([r.label for r in records], dtype=int),
                   np.array([r.fwd_return for r in records], dtype=float), tuple(x_names), tuple(z_names))

    def __len__(self) -> int:
        return len(self.dates)

    def window(self, start: dt.date | None, end: dt.date | None) -> "Dataset":
        keep = [i for i, d in enumerate(self.dates)
                if (start is None or d >= start) and (end is None or d <= end)]
        return self.take(keep)

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset([self.dates[i] for i in idx], self.X[idx], self.T[idx], self.Z[idx], self.y[idx],
                       self.returns[idx], self.x_names, self.z_names)


@dataclass
class RetrievalLog:
    """Every (query date, neighbor dates) pair produced during a run."""

    entries: list[tuple[dt.date, tuple[dt.date, ...]]] = field(default_factory=list)
    no_history: int = 0

    def add(self, day: dt.date, neighbors) -> None:
        dates = tuple(n.date for n in neighbors)
        if any(d >= day for d in dates):
            raise ProtocolViolation(f"retrieval for {day} returned a neighbor on/after the query date")
        self.entries.append((day, dates))
        if not dates:
            self.no_history += 1

    def violations(self) -> int:
        return sum(1 for day, ns in self.entries for d in ns if d >= day)


def contextual_memories(index: CausalIndex, dates, T, Zs, k: int, cutoffs=None,
                        log: RetrievalLog | None = None) -> tuple[np.ndarray, np.ndarray]:
    """r_t for each row plus the number of neighbors actually used."""
    R = np.zeros((len(dates), index.d))
    used = np.zeros(len(dates), dtype=int)
    for i, day in enumerate(dates):
        query = index.query_for(day, T[i], Zs[i])
        cutoff = None if cutoffs is None else cutoffs[i]
        mem, neighbors = memory_or_fallback(index, query.fused, day, k, cutoff)
        R[i] = mem.vector
        used[i] = mem.k_used
        if log is not None:
            log.add(day, neighbors)
    return R, used


def design_matrix(preset: Preset, X, Zs, T, R=None) -> tuple[np.ndarray, tuple[tuple[str, int], ...]]:
    blocks = {"x_num": X, "z": Zs, "t": T, "r": R}
    parts, layout = [], []
    for seg in preset.segments:
        block = blocks[seg]
        if block is None:
            raise ValidationError(f"preset {preset.name} needs segment {seg!r}")
        parts.append(np.asarray(block, dtype=float))
        layout.append((seg, parts[-1].shape[1]))
    return np.hstack(parts), tuple(layout)


def fit_head(M: np.ndarray, y: np.ndarray, layout, config: TrainConfig, log: list | None = None) -> ModelParams:
    scaler = fit_scaler(None, M) if len(M) >= 2 else ScalerParams.identity(M.shape[1])
    params = train_logistic(scaler.transform(M), y, config, log=log)
    return with_scaler(params, scaler, layout)


def _base_info(preset: Preset, settings: Settings) -> dict:
    return {"alpha": settings.alpha_for(preset), "k": settings.k if preset.uses_retrieval else None,
            "segments": list(preset.segments), "label": preset.label,
            "train_config": settings.train.to_dict(), "threshold": settings.threshold,
            "numeric_scaling": "all design columns standardized on the training rows"}


@dataclass
class CVResult:
    report: EvaluationReport
    probabilities: np.ndarray
    test_index: np.ndarray
    log: RetrievalLog


def run_cv(train: Dataset, preset: Preset, settings: Settings, macro_scaler: ScalerParams | None = None) -> CVResult:
    """Expanding-window CV; metrics are computed on pooled validation days."""
    splits = time_series_split(len(train), settings.folds)
    macro_scaler = macro_scaler or fit_scaler(train.dates, train.Z)
    Zs = macro_scaler.transform(train.Z)
    log, train_log = RetrievalLog(), RetrievalLog()
    R = None
    index = None
    k = settings.k
    if preset.uses_retrieval:
        index = build_index(train.dates, train.T, Zs, settings.alpha_for(preset))
        R, _ = contextual_memories(index, train.dates, train.T, Zs, k, log=train_log)
    probs, test_idx = [], []
    for split in splits:
        tr = np.arange(split.train.start, split.train.stop)
        te = np.arange(split.test.start, split.test.stop)
        R_fold = None
        if index is not None:
            R_fold = R.copy()
            cutoff = train.dates[te[0]]
            sub_dates = [train.dates[i] for i in te]
            R_fold[te], _ = contextual_memories(index, sub_dates, train.T[te], Zs[te], k,
                                                cutoffs=[cutoff] * len(te), log=log)
        M, layout = design_matrix(preset, train.X, Zs, train.T, R_fold)
        params = fit_head(M[tr], train.y[tr], layout, settings.train)
        probs.append(np.atleast_1d(predict_proba(params, M[te])))
        test_idx.append(te)
    p = np.concatenate(probs)
    te_all = np.concatenate(test_idx)
    info = _base_info(preset, settings)
    info.update(folds=settings.folds, no_history_days=log.no_history,
                first_test_date=train.dates[te_all[0]].isoformat(),
                last_test_date=train.dates[te_all[-1]].isoformat())
    report = evaluate_predictions("cv", preset.name, train.y[te_all], p, train.returns[te_all],
                                  settings.threshold, info)
    log.entries = train_log.entries + log.entries
    return CVResult(report, p, te_all, log)


@dataclass
class FittedPipeline:
    preset: Preset
    params: ModelParams
    macro_scaler: ScalerParams
    index: CausalIndex | None
    alpha: float | None
    k: int | None
    train_start: dt.date
    train_end: dt.date
    training_log: list
    retrieval_log: RetrievalLog


def fit_final(train: Dataset, preset: Preset, settings: Settings,
              macro_scaler: ScalerParams | None = None) -> FittedPipeline:
    """Train on the full training window; the result is what gets frozen."""
    macro_scaler = macro_scaler or fit_scaler(train.dates, train.Z)
    Zs = macro_scaler.transform(train.Z)
    index = R = None
    log = RetrievalLog()
    if preset.uses_retrieval:
        index = build_index(train.dates, train.T, Zs, settings.alpha_for(preset))
        R, _ = contextual_memories(index, train.dates, train.T, Zs, settings.k, log=log)
    M, layout = design_matrix(preset, train.X, Zs, train.T, R)
    history: list = []
    params = fit_head(M, train.y, layout, settings.train, log=history)
    return FittedPipeline(preset, params, macro_scaler, index, settings.alpha_for(preset),
                          settings.k if preset.uses_retrieval else None, train.dates[0], train.dates[-1],
                          history, log)


@dataclass
class OODResult:
    report: EvaluationReport
    probabilities: np.ndarray
    log: RetrievalLog


def evaluate_frozen(bundle: FrozenBundle | FittedPipeline, ood: Dataset, cv: EvaluationReport | dict | None = None,
                    threshold: float = 0.5) -> OODResult:
    """Score OOD days with frozen weights, scalers and index. Mutates nothing."""
    train_end = bundle.train_end
    if isinstance(train_end, str):
        train_end = dt.date.fromisoformat(train_end)
    if len(ood) == 0:
        raise ValidationError("OOD dataset is empty")
    if ood.dates[0] <= train_end:
        raise ProtocolViolation(f"OOD window starts {ood.dates[0]}, not after training end {train_end}")
    preset = get_preset(bundle.preset if isinstance(bundle.preset, str) else bundle.preset.name)
    Zs = bundle.macro_scaler.transform(ood.Z)
    log = RetrievalLog()
    R = None
    if preset.uses_retrieval:
        if bundle.index is None:
            raise ValidationError(f"bundle for {preset.name} carries no retrieval index")
        R, _ = contextual_memories(bundle.index, ood.dates, ood.T, Zs, bundle.k, log=log)
    M, layout = design_matrix(preset, ood.X, Zs, ood.T, R)
    if tuple(layout) != tuple(bundle.params.feature_layout):
        raise ValidationError(f"OOD feature layout {layout} differs from the bundle's {bundle.params.feature_layout}")
    p = np.atleast_1d(predict_proba(bundle.params, M))
    info = {"alpha": bundle.alpha, "k": bundle.k, "segments": list(preset.segments), "label": preset.label,
            "threshold": threshold, "no_history_days": log.no_history,
            "first_date": ood.dates[0].isoformat(), "last_date": ood.dates[-1].isoformat()}
    report = evaluate_predictions("ood", preset.name, ood.y, p, ood.returns, threshold, info)
    if cv is not None:
        if isinstance(cv, EvaluationReport):
            cv = {"f1": cv.f1, "sharpe": cv.sharpe}
        report.deltas = robustness_deltas(cv, {"f1": report.f1, "sharpe": report.sharpe})
    return OODResult(report, p, log)


def feature_spec_note(spec: FeatureSpec) -> dict:
    return {**spec.to_dict(), "scaling": "train-window standardization of every numeric column"}
