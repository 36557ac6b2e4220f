"""Fused retrieval query: L2-normalized ``[text ; alpha * macro]``."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

DEFAULT_ALPHA = 0.5
NORM_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class FusedQuery:
    date: dt.date | None
    vector: np.ndarray
    alpha: float


def l2_normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = float(np.linalg.norm(v))
    if not np.isfinite(norm) or norm <= NORM_EPS:
        raise ValidationError(f"cannot normalize vector with norm {norm}")
    return v / norm


def fuse_vector(t_vec, z_vec, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    if alpha < 0:
        raise ValidationError(f"alpha must be >= 0, got {alpha}")
    z = np.asarray(z_vec, dtype=float)
    if not np.isfinite(z).all():
        raise ValidationError("macro vector has non-finite components")
    return l2_normalize(np.concatenate([np.asarray(t_vec, dtype=float), alpha * z]))


def fuse(t_vec, z_vec, alpha: float = DEFAULT_ALPHA, date: dt.date | None = None) -> FusedQuery:
    """Build the unit-norm retrieval query for one day.

    The macro block may be all zeros (constant training window); only an
    all-zero concatenation is rejected.
    """
    return FusedQuery(date, fuse_vector(t_vec, z_vec, alpha), float(alpha))


def fuse_rows(texts, macros, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Row-wise ``fuse_vector`` for stacked inputs."""
    texts = np.asarray(texts, dtype=float)
    macros = np.asarray(macros, dtype=float)
    if texts.shape[0] != macros.shape[0]:
        raise ValidationError("text and macro row counts differ")
    return np.stack([fuse_vector(t, z, alpha) for t, z in zip(texts, macros)]) if len(texts) else \
        np.zeros((0, texts.shape[1] + macros.shape[1]))
