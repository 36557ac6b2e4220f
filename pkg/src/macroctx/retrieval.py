"""Exact causal inner-product retrieval over fused day vectors.

The index is a flat, date-sorted matrix. A query dated t only sees entries
dated strictly before t (and before an optional cutoff), which is a prefix of
the matrix, so the causal mask costs one bisection.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
from bisect import bisect_left
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .calendar_io import parse_date
from .errors import ChecksumError, MissingInputError, ValidationError
from .fusion import fuse_vector

logger = logging.getLogger(__name__)

INDEX_MAGIC = b"MACROCTX-INDEX\n"
INDEX_VERSION = 1
DIAGNOSTICS_HEADER = ["query_date", "neighbor_date", "rank", "sim_joint", "sim_text", "macro_L2"]
_BLOCK = 4096


def _readonly(a) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Neighbor:
    date: dt.date
    sim_joint: float
    rank: int
    position: int


@dataclass(frozen=True, eq=False)
class ContextualMemory:
    date: dt.date | None
    vector: np.ndarray
    k_used: int

    @property
    def no_history(self) -> bool:
        return self.k_used == 0


@dataclass(frozen=True, eq=False)
class QueryVectors:
    date: dt.date
    fused: np.ndarray
    text: np.ndarray
    macro: np.ndarray


@dataclass(frozen=True)
class RetrievalDiagnostics:
    query_date: dt.date
    neighbor_date: dt.date
    sim_joint: float
    sim_text: float
    macro_L2: float
    rank: int

    def csv_row(self) -> list[str]:
        return [self.query_date.isoformat(), self.neighbor_date.isoformat(), str(self.rank),
                f"{self.sim_joint:.4f}", f"{self.sim_text:.4f}", f"{self.macro_L2:.4f}"]


class CausalIndex:
    """Immutable date-sorted store of fused, text and standardized macro vectors."""

    def __init__(self, dates: Sequence[dt.date], fused, text, macro, alpha: float):
        self.dates = tuple(dates)
        self.fused = _readonly(fused)
        self.text = _readonly(text)
        self.macro = _readonly(macro)
        self.alpha = float(alpha)
        n = len(self.dates)
        if not (self.fused.shape[0] == self.text.shape[0] == self.macro.shape[0] == n):
            raise ValidationError("index arrays disagree on entry count")
        self.d = self.text.shape[1]
        self.p = self.macro.shape[1]
        if self.fused.shape[1] != self.d + self.p:
            raise ValidationError("fused width must equal text dim + macro dim")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValidationError("index dates must be strictly increasing")
        self._ordinals = [d.toordinal() for d in self.dates]

    def __len__(self) -> int:
        return len(self.dates)

    def eligible(self, query_date: dt.date, cutoff: dt.date | None = None) -> int:
        """Number of leading entries dated before ``min(query_date, cutoff)``."""
        bound = query_date if cutoff is None else min(query_date, cutoff)
        return bisect_left(self._ordinals, bound.toordinal())

    def position(self, day: dt.date) -> int:
        i = bisect_left(self._ordinals, day.toordinal())
        if i == len(self.dates) or self.dates[i] != day:
            raise ValidationError(f"{day} is not in the index")
        return i

    def query_for(self, day: dt.date, t_vec, z_std) -> QueryVectors:
        t = np.asarray(t_vec, dtype=float)
        z = np.asarray(z_std, dtype=float)
        if t.shape != (self.d,) or z.shape != (self.p,):
            raise ValidationError(f"query dims ({t.size}, {z.size}) do not match index ({self.d}, {self.p})")
        return QueryVectors(day, fuse_vector(t, z, self.alpha), t, z)

    # persistence -----------------------------------------------------------

    def _payload(self) -> bytes:
        return b"".join(a.astype("<f8").tobytes() for a in (self.fused, self.text, self.macro))

    def save(self, path) -> str:
        """Write the snapshot; returns the payload sha256."""
        payload = self._payload()
        digest = hashlib.sha256(payload).hexdigest()
        header = {"version": INDEX_VERSION, "d": self.d, "p": self.p, "alpha": self.alpha,
                  "n": len(self), "dates": [d.isoformat() for d in self.dates], "sha256": digest}
        with open(path, "wb") as fh:
            fh.write(INDEX_MAGIC)
            fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode() + b"\n")
            fh.write(payload)
        return digest

    @classmethod
    def load(cls, path) -> "CausalIndex":
        path = Path(path)
        if not path.is_file():
            raise MissingInputError(path, "index snapshot")
        raw = path.read_bytes()
        if not raw.startswith(INDEX_MAGIC):
            raise ChecksumError(f"{path}: not an index snapshot")
        rest = raw[len(INDEX_MAGIC):]
        nl = rest.find(b"\n")
        try:
            header = json.loads(rest[:nl])
        except ValueError as exc:
            raise ChecksumError(f"{path}: corrupt header") from exc
        if header.get("version") != INDEX_VERSION:
            raise ValidationError(f"{path}: unsupported index version {header.get('version')}")
        payload = rest[nl + 1:]
        if hashlib.sha256(payload).hexdigest() != header["sha256"]:
            raise ChecksumError(f"{path}: payload checksum mismatch")
        n, d, p = header["n"], header["d"], header["p"]
        arr = np.frombuffer(payload, dtype="<f8")
        if arr.size != n * (2 * d + 2 * p):
            raise ChecksumError(f"{path}: payload size does not match header")
        a, b = n * (d + p), n * (d + p) + n * d
        return cls([parse_date(s) for s in header["dates"]], arr[:a].reshape(n, d + p),
                   arr[a:b].reshape(n, d), arr[b:].reshape(n, p), header["alpha"])


def build_index(dates: Sequence[dt.date], texts, macros, alpha: float) -> CausalIndex:
    """Fuse each training day and store entries sorted by date.

    ``macros`` must already be standardized with the training-window scaler.
    """
    texts = np.asarray(texts, dtype=float)
    macros = np.asarray(macros, dtype=float)
    if len(dates) == 0:
        raise ValidationError("cannot build an index from zero records")
    if texts.ndim != 2 or macros.ndim != 2 or len(texts) != len(dates) or len(macros) != len(dates):
        raise ValidationError("text/macro matrices must have one row per date")
    if len(set(dates)) != len(dates):
        raise ValidationError("duplicate date in index input")
    order = sorted(range(len(dates)), key=lambda i: dates[i])
    texts, macros = texts[order], macros[order]
    fused = np.stack([fuse_vector(t, z, alpha) for t, z in zip(texts, macros)])
    return CausalIndex([dates[i] for i in order], fused, texts, macros, alpha)


def _similarities(matrix: np.ndarray, q: np.ndarray) -> np.ndarray:
    # elementwise product + row sum: identical rows give bit-identical scores
    out = np.empty(matrix.shape[0])
    for start in range(0, matrix.shape[0], _BLOCK):
        block = matrix[start:start + _BLOCK]
        out[start:start + len(block)] = (block * q).sum(axis=1)
    return out


def search_causal(index: CausalIndex, query, query_date: dt.date, k: int,
                  cutoff: dt.date | None = None) -> list[Neighbor]:
    """Exact top-``k`` inner-product neighbors dated before ``query_date``.

    Ties go to the earlier entry. An empty list means no eligible history.
    """
    if k < 1:
        raise ValidationError(f"K must be >= 1, got {k}")
    q = np.asarray(getattr(query, "vector", getattr(query, "fused", query)), dtype=float)
    if q.shape != (index.d + index.p,):
        raise ValidationError(f"query dimension {q.shape} does not match index width {index.d + index.p}")
    n = index.eligible(query_date, cutoff)
    if n == 0:
        logger.debug("no history before %s", query_date)
        return []
    sims = _similarities(index.fused[:n], q)
    order = np.argsort(-sims, kind="stable")[:k]
    return [Neighbor(index.dates[i], float(sims[i]), rank, int(i)) for rank, i in enumerate(order, 1)]


def contextual_memory(index: CausalIndex, neighbors: Sequence[Neighbor],
                      date: dt.date | None = None) -> ContextualMemory:
    """Arithmetic mean of the neighbors' text vectors."""
    if not neighbors:
        raise ValidationError("contextual memory needs at least one neighbor")
    rows = [index.position(n.date) for n in neighbors]
    return ContextualMemory(date, index.text[rows].mean(axis=0), len(rows))


def memory_or_fallback(index: CausalIndex, query, query_date: dt.date, k: int,
                       cutoff: dt.date | None = None) -> tuple[ContextualMemory, list[Neighbor]]:
    """Search then average; zero vector with ``k_used == 0`` if no history."""
    neighbors = search_causal(index, query, query_date, k, cutoff)
    if not neighbors:
        return ContextualMemory(query_date, np.zeros(index.d), 0), []
    return contextual_memory(index, neighbors, query_date), neighbors


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b / (na * nb))


def diagnostics(index: CausalIndex, query: QueryVectors, neighbors: Sequence[Neighbor]) -> list[RetrievalDiagnostics]:
    rows = []
    for nb in sorted(neighbors, key=lambda n: n.rank):
        i = index.position(nb.date)
        rows.append(RetrievalDiagnostics(
            query.date, nb.date,
            sim_joint=float(index.fused[i] @ query.fused),
            sim_text=_cosine(query.text, index.text[i]),
            macro_L2=float(np.linalg.norm(query.macro - index.macro[i])),
            rank=nb.rank,
        ))
    return rows


def write_diagnostics_csv(path, rows: Sequence[RetrievalDiagnostics], comment: str | None = None) -> None:
    rows = sorted(rows, key=lambda r: (r.query_date, r.rank))
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DIAGNOSTICS_HEADER)
        for r in rows:
            w.writerow(r.csv_row())
