"""Logistic forecasting head, chronological splits, and frozen bundles."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .calendar_io import ScalerParams
from .errors import ChecksumError, MissingInputError, ValidationError
from .features import FeatureSpec
from .retrieval import CausalIndex

logger = logging.getLogger(__name__)

BUNDLE_FORMAT = "macroctx.bundle/1"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    l2_lambda: float = 1e-4
    max_epochs: int = 5000
    tolerance: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.l2_lambda < 0 or self.max_epochs < 1 or self.tolerance <= 0:
            raise ValidationError(f"invalid training config: {self}")

    def to_dict(self) -> dict:
        return {"learning_rate": self.learning_rate, "l2_lambda": self.l2_lambda,
                "max_epochs": self.max_epochs, "tolerance": self.tolerance, "seed": self.seed}


@dataclass(frozen=True, eq=False)
class ModelParams:
    W: np.ndarray
    b: float
    feature_scaler: ScalerParams
    feature_layout: tuple[tuple[str, int], ...]
    epochs: int = 0

    def __post_init__(self):
        total = sum(n for _, n in self.feature_layout)
        if total != len(self.W):
            raise ValidationError(f"layout covers {total} features but W has {len(self.W)}")

    def to_dict(self) -> dict:
        return {"W": self.W.tolist(), "b": self.b, "feature_scaler": self.feature_scaler.to_dict(),
                "feature_layout": [[name, n] for name, n in self.feature_layout], "epochs": self.epochs}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelParams":
        return cls(np.asarray(d["W"], dtype=float), float(d["b"]), ScalerParams.from_dict(d["feature_scaler"]),
                   tuple((name, int(n)) for name, n in d["feature_layout"]), int(d.get("epochs", 0)))


@dataclass(frozen=True)
class FoldSplit:
    fold_index: int
    train: range
    test: range


def time_series_split(n: int, k: int = 5) -> list[FoldSplit]:
    """Expanding-window splits with equal, consecutive test blocks.

    ``test_size = n // (k + 1)``; fold i tests on the block starting at
    ``n - (k - i + 1) * test_size`` and trains on everything before it.
    """
    if k < 2:
        raise ValidationError(f"need at least 2 folds, got {k}")
    if n < k + 1:
        raise ValidationError(f"{n} samples are too few for {k} folds (need >= {k + 1})")
    size = n // (k + 1)
    folds = []
    for i in range(1, k + 1):
        start = n - (k - i + 1) * size
        folds.append(FoldSplit(i, range(0, start), range(start, start + size)))
    return folds


def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


def loss_and_grad(W: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2_lambda: float):
    """Mean log-loss plus ``l2_lambda / 2 * |W|^2`` and its gradient."""
    z = X @ W + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2_lambda * (W @ W))
    resid = _sigmoid(z) - y
    gW = X.T @ resid / len(y) + l2_lambda * W
    gb = float(resid.mean())
    return loss, gW, gb


def train_logistic(features, labels, config: TrainConfig | None = None,
                   log: list | None = None) -> ModelParams:
    """Full-batch gradient descent from zero weights.

    Stops after ``max_epochs`` or once the gradient's max-norm drops below
    ``tolerance``. Appends ``(epoch, loss, grad_norm)`` to ``log`` if given.
    The returned params carry an identity scaler; callers attach their own.
    """
    config = config or TrainConfig()
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValidationError("features must be a 2-D matrix with one row per label")
    if len(y) < 2:
        raise ValidationError("need at least 2 training rows")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValidationError("labels must be 0/1")
    if y.min() == y.max():
        raise ValidationError("training labels contain a single class")
    W = np.zeros(X.shape[1])
    b = 0.0
    epoch = 0
    # overflow shows up as a non-finite loss, which is reported below
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, config.max_epochs + 1):
            loss, gW, gb = loss_and_grad(W, b, X, y, config.l2_lambda)
            if not math.isfinite(loss):
                raise ValidationError(f"non-finite loss at epoch {epoch}")
            gnorm = max(float(np.max(np.abs(gW))) if gW.size else 0.0, abs(gb))
            if log is not None:
                log.append((epoch, loss, gnorm))
            if gnorm < config.tolerance:
                break
            W = W - config.learning_rate * gW
            b = b - config.learning_rate * gb
    return ModelParams(W, float(b), ScalerParams.identity(X.shape[1]), (("features", X.shape[1]),), epoch)


def _assemble(params: ModelParams, parts) -> np.ndarray:
    arrays = [np.asarray(p, dtype=float) for p in parts if p is not None]
    if len(arrays) == 1 and arrays[0].ndim == 2:
        X = arrays[0]
    else:
        expected = [n for _, n in params.feature_layout]
        if len(arrays) == len(expected):
            for a, (name, n) in zip(arrays, params.feature_layout):
                if a.shape[-1] != n:
                    raise ValidationError(f"segment {name!r} has {a.shape[-1]} values, expected {n}")
        X = np.concatenate(arrays, axis=-1)
    if X.shape[-1] != len(params.W):
        raise ValidationError(f"got {X.shape[-1]} features, model expects {len(params.W)}")
    return X


def predict_proba(params: ModelParams, *parts):
    """``sigmoid(W . scale([x_num ; r_t]) + b)``.

    Pass the feature segments in layout order (or one pre-concatenated
    vector/matrix). A 1-D input yields a float, a 2-D input an array.
    """
    X = _assemble(params, parts)
    p = _sigmoid(params.feature_scaler.transform(X) @ params.W + params.b)
    return float(p) if np.ndim(p) == 0 else p


def predict_position(p_hat, threshold: float = 0.5):
    """+1 when ``p_hat >= threshold``, else -1."""
    if np.ndim(p_hat) == 0:
        return 1 if p_hat >= threshold else -1
    return np.where(np.asarray(p_hat) >= threshold, 1, -1)


# --------------------------------------------------------------------------
# frozen bundle


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass(frozen=True, eq=False)
class FrozenBundle:
    params: ModelParams
    macro_scaler: ScalerParams
    feature_spec: FeatureSpec
    preset: str
    alpha: float | None
    k: int | None
    train_start: str
    train_end: str
    config_hash: str
    index: CausalIndex | None = None
    index_file: str | None = None
    index_sha256: str | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def uses_retrieval(self) -> bool:
        return self.index is not None


def freeze(path, params: ModelParams, index: CausalIndex | None, macro_scaler: ScalerParams,
           feature_spec: FeatureSpec, *, preset: str, alpha: float | None, k: int | None,
           train_start: str, train_end: str, config_hash: str,
           extra: Mapping[str, Any] | None = None) -> Path:
    """Persist weights, scalers and the index snapshot as a checksummed bundle.

    The index is written next to the bundle as ``<stem>.index`` and referenced
    by file name and sha256.
    """
    path = Path(path)
    index_name = index_sha = None
    if index is not None:
        index_path = path.with_suffix(".index")
        index.save(index_path)
        index_name, index_sha = index_path.name, sha256_file(index_path)
    payload = {
        "model": params.to_dict(),
        "macro_scaler": macro_scaler.to_dict(),
        "feature_spec": feature_spec.to_dict(),
        "preset": preset,
        "alpha": alpha,
        "k": k,
        "train_start": train_start,
        "train_end": train_end,
        "config_hash": config_hash,
        "index_file": index_name,
        "index_sha256": index_sha,
        "extra": dict(extra or {}),
    }
    body = canonical_json(payload)
    doc = {"format": BUNDLE_FORMAT, "sha256": hashlib.sha256(body.encode()).hexdigest(), "payload": payload}
    path.write_text(canonical_json(doc) + "\n")
    return path


def load_bundle(path) -> FrozenBundle:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(path, "frozen bundle")
    try:
        doc = json.loads(path.read_bytes())
        payload = doc["payload"]
        expected = doc["sha256"]
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise ChecksumError(f"{path}: unreadable bundle") from exc
    if doc.get("format") != BUNDLE_FORMAT:
        raise ChecksumError(f"{path}: unknown bundle format {doc.get('format')!r}")
    if hashlib.sha256(canonical_json(payload).encode()).hexdigest() != expected:
        raise ChecksumError(f"{path}: bundle checksum mismatch")
    index = None
    if payload["index_file"]:
        index_path = path.parent / payload["index_file"]
        if not index_path.is_file():
            raise MissingInputError(index_path, "index snapshot")
        if sha256_file(index_path) != payload["index_sha256"]:
            raise ChecksumError(f"{index_path}: does not match the bundle's recorded checksum")
        index = CausalIndex.load(index_path)
    return FrozenBundle(
        params=ModelParams.from_dict(payload["model"]),
        macro_scaler=ScalerParams.from_dict(payload["macro_scaler"]),
        feature_spec=FeatureSpec.from_dict(payload["feature_spec"]),
        preset=payload["preset"], alpha=payload["alpha"], k=payload["k"],
        train_start=payload["train_start"], train_end=payload["train_end"],
        config_hash=payload["config_hash"], index=index,
        index_file=payload["index_file"], index_sha256=payload["index_sha256"],
        extra=payload["extra"],
    )


def with_scaler(params: ModelParams, scaler: ScalerParams, layout: Sequence[tuple[str, int]]) -> ModelParams:
    return replace(params, feature_scaler=scaler, feature_layout=tuple(layout))
