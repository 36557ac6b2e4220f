"""Classification and long-short trading metrics plus CV-to-OOD deltas.

Degenerate denominators yield 0 and add a flag instead of raising, so batch
reports always come out complete.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .model import predict_position

ANNUALIZATION = 252


@dataclass(frozen=True)
class ClassificationMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    mcc: float
    auroc: float
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "precision": self.precision, "recall": self.recall,
                "f1": self.f1, "mcc": self.mcc, "auroc": self.auroc, "flags": list(self.flags)}


@dataclass(frozen=True)
class FinancialMetrics:
    profit_factor: float
    win_rate: float
    sharpe_252: float
    flags: tuple[str, ...] = ()

    @property
    def profit_factor_infinite(self) -> bool:
        return math.isinf(self.profit_factor)

    def to_dict(self) -> dict:
        pf = None if self.profit_factor_infinite else self.profit_factor
        return {"profit_factor": pf, "win_rate": self.win_rate, "sharpe_252": self.sharpe_252,
                "flags": list(self.flags)}


@dataclass(frozen=True)
class RobustnessDeltas:
    delta_f1: float
    delta_sharpe: float

    def to_dict(self) -> dict:
        return {"delta_f1": self.delta_f1, "delta_sharpe": self.delta_sharpe}


@dataclass
class EvaluationReport:
    kind: str
    preset: str
    n_samples: int
    classification: ClassificationMetrics
    financial: FinancialMetrics
    info: dict[str, Any] = field(default_factory=dict)
    deltas: RobustnessDeltas | None = None

    @property
    def f1(self) -> float:
        return self.classification.f1

    @property
    def sharpe(self) -> float:
        return self.financial.sharpe_252

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "preset": self.preset, "n_samples": self.n_samples,
               "classification": self.classification.to_dict(), "financial": self.financial.to_dict(),
               **self.info}
        if self.deltas is not None:
            out["deltas"] = self.deltas.to_dict()
        return out


def strategy_returns(positions, asset_returns) -> np.ndarray:
    pos = np.asarray(positions, dtype=float)
    ret = np.asarray(asset_returns, dtype=float)
    if pos.shape != ret.shape:
        raise ValidationError(f"positions ({pos.size}) and returns ({ret.size}) differ in length")
    return pos * ret


def _average_ranks(values: np.ndarray) -> np.ndarray:
    _, inverse, counts = np.unique(values, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    return (ends - (counts - 1) / 2.0)[inverse]


def auroc(labels, scores) -> float | None:
    """Mann-Whitney AUROC with tied scores counted as 1/2; None for one class."""
    y = np.asarray(labels).astype(int)
    s = np.asarray(scores, dtype=float)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = _average_ranks(s)
    return float((ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def classification_metrics(labels, predictions, probabilities) -> ClassificationMetrics:
    y = np.asarray(labels).astype(int)
    yhat = np.asarray(predictions).astype(int)
    yhat = np.where(yhat < 0, 0, yhat)  # accept {-1,+1} positions
    prob = np.asarray(probabilities, dtype=float)
    if len(y) == 0:
        raise ValidationError("classification metrics need at least one sample")
    if not (len(y) == len(yhat) == len(prob)):
        raise ValidationError("labels, predictions and probabilities differ in length")
    if ((prob < 0) | (prob > 1)).any():
        raise ValidationError("probabilities must lie in [0, 1]")
    flags = []
    tp = int(((yhat == 1) & (y == 1)).sum())
    tn = int(((yhat == 0) & (y == 0)).sum())
    fp = int(((yhat == 1) & (y == 0)).sum())
    fn = int(((yhat == 0) & (y == 1)).sum())
    accuracy = (tp + tn) / len(y)
    if tp + fp == 0:
        precision = 0.0
        flags.append("precision_undefined")
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 0.0
        flags.append("recall_undefined")
    else:
        recall = tp / (tp + fn)
    if precision + recall == 0:
        f1 = 0.0
        flags.append("f1_undefined")
    else:
        f1 = 2 * precision * recall / (precision + recall)
    marginals = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if marginals == 0:
        mcc = 0.0
        flags.append("mcc_undefined")
    else:
        mcc = (tp * tn - fp * fn) / math.sqrt(marginals)
    auc = auroc(y, prob)
    if auc is None:
        auc = 0.0
        flags.append("auroc_undefined")
    return ClassificationMetrics(accuracy, precision, recall, f1, mcc, auc, tuple(flags))


def financial_metrics(returns) -> FinancialMetrics:
    r = np.asarray(returns, dtype=float)
    if r.size == 0:
        raise ValidationError("financial metrics need at least one return")
    flags = []
    gains = float(r[r > 0].sum())
    losses = float(-r[r < 0].sum())
    if losses > 0:
        pf = gains / losses
    elif gains > 0:
        pf = math.inf
        flags.append("profit_factor_infinite")
    else:
        pf = 0.0
        flags.append("profit_factor_undefined")
    active = int((r != 0).sum())
    if active == 0:
        win_rate = 0.0
        flags.append("win_rate_undefined")
    else:
        win_rate = int((r > 0).sum()) / active
    std = float(r.std())
    if r.size < 2 or std < 1e-12:
        sharpe = 0.0
        flags.append("sharpe_undefined")
    else:
        sharpe = math.sqrt(ANNUALIZATION) * float(r.mean()) / std
    return FinancialMetrics(pf, win_rate, sharpe, tuple(flags))


def _metric(report, name: str) -> float:
    if isinstance(report, EvaluationReport):
        return report.f1 if name == "f1" else report.sharpe
    try:
        value = report[name]
    except (KeyError, TypeError):
        raise ValidationError(f"report is missing {name!r}") from None
    if value is None:
        raise ValidationError(f"report is missing {name!r}")
    return float(value)


def robustness_deltas(cv, ood) -> RobustnessDeltas:
    """CV minus OOD for F1 and Sharpe.

    Accepts ``EvaluationReport`` objects or mappings with ``f1`` and ``sharpe``.
    """
    return RobustnessDeltas(_metric(cv, "f1") - _metric(ood, "f1"),
                            _metric(cv, "sharpe") - _metric(ood, "sharpe"))


def evaluate_predictions(kind: str, preset: str, labels, probabilities, asset_returns,
                         threshold: float = 0.5, info: Mapping[str, Any] | None = None) -> EvaluationReport:
    prob = np.asarray(probabilities, dtype=float)
    positions = predict_position(prob, threshold)
    cls = classification_metrics(labels, (positions > 0).astype(int), prob)
    fin = financial_metrics(strategy_returns(positions, asset_returns))
    return EvaluationReport(kind, preset, len(prob), cls, fin, dict(info or {}))


def _fmt(v: float | None) -> str:
    return "inf" if v is None else f"{v:.4f}"


def write_tables(prefix, rows: Sequence[tuple[str, EvaluationReport]], comment: str | None = None) -> list[str]:
    """CSV tables laid out like the classification and financial result tables."""
    paths = [f"{prefix}_classification.csv", f"{prefix}_financial.csv"]
    with open(paths[0], "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Setting", "Acc", "F1", "MCC", "AUROC", "Prec", "Rec"])
        for name, rep in rows:
            c = rep.classification
            w.writerow([name, *(_fmt(v) for v in (c.accuracy, c.f1, c.mcc, c.auroc, c.precision, c.recall))])
    with open(paths[1], "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Setting", "Profit Factor", "Win Rate", "Sharpe (252)"])
        for name, rep in rows:
            f = rep.financial
            pf = None if f.profit_factor_infinite else f.profit_factor
            w.writerow([name, _fmt(pf), _fmt(f.win_rate), _fmt(f.sharpe_252)])
    return paths


def write_delta_table(path, rows: Sequence[tuple[str, EvaluationReport, EvaluationReport]],
                      comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Setting", "F1_CV", "F1_OOD", "Delta_F1", "Sharpe_CV", "Sharpe_OOD", "Delta_Sharpe"])
        for name, cv, ood in rows:
            d = robustness_deltas(cv, ood)
            w.writerow([name, _fmt(cv.f1), _fmt(ood.f1), _fmt(d.delta_f1),
                        _fmt(cv.sharpe), _fmt(ood.sharpe), _fmt(d.delta_sharpe)])
