"""Run configuration: sectioned ``key = value`` text file.

Example::

    [data]
    prices = data/spx.csv
    embeddings = data/headlines.emb

    [macro]
    CPI = data/cpi.csv
    UNRATE = data/unrate.csv

    [windows]
    train_start = 2007-01-01
    train_end = 2023-12-31
    ood_start = 2024-01-01
    ood_end = 2024-12-31

    [run]
    preset = macro_retrieval

Sections ``[macro]`` and ``[lags]`` take series ids as keys; every other
section accepts only the keys listed in ``_SCHEMA``. Unknown sections or keys
are rejected.
"""

from __future__ import annotations

import configparser
import datetime as dt
import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path

from .calendar_io import BusinessCalendar, parse_date
from .errors import MissingInputError, ValidationError
from .features import FeatureSpec
from .fusion import DEFAULT_ALPHA
from .model import TrainConfig, canonical_json

PRESET_NAMES = ("numeric_only", "text_only", "multimodal", "text_retrieval", "macro_retrieval")

_SCHEMA = {
    "data": {"prices", "embeddings", "sentiment"},
    "ood_data": {"prices", "embeddings", "sentiment"},
    "calendar": {"weekmask", "holidays"},
    "features": {"return_lags", "vol_window", "include_ohlcv", "sentiment_columns"},
    "retrieval": {"alpha", "k"},
    "train": {"learning_rate", "l2_lambda", "max_epochs", "tolerance", "seed", "folds"},
    "windows": {"train_start", "train_end", "ood_start", "ood_end"},
    "run": {"preset", "output"},
}
_FREE_SECTIONS = {"macro", "lags"}


@dataclass(frozen=True)
class DataPaths:
    prices: str | None = None
    embeddings: str | None = None
    sentiment: str | None = None

    def to_dict(self) -> dict:
        return {"prices": self.prices, "embeddings": self.embeddings, "sentiment": self.sentiment}


@dataclass(frozen=True)
class RunConfig:
    data: DataPaths = field(default_factory=DataPaths)
    ood_data: DataPaths = field(default_factory=DataPaths)
    macro: tuple[tuple[str, str], ...] = ()
    lags: tuple[tuple[str, int], ...] = ()
    weekmask: tuple[str, ...] = ("Mon", "Tue", "Wed", "Thu", "Fri")
    holidays: tuple[dt.date, ...] = ()
    features: FeatureSpec = field(default_factory=FeatureSpec)
    alpha: float = DEFAULT_ALPHA
    k: int = 5
    train: TrainConfig = field(default_factory=TrainConfig)
    folds: int = 5
    train_start: dt.date | None = None
    train_end: dt.date | None = None
    ood_start: dt.date | None = None
    ood_end: dt.date | None = None
    preset: str = "macro_retrieval"
    output: str = "out"
    base_dir: str = "."

    def __post_init__(self):
        if self.preset not in PRESET_NAMES:
            raise ValidationError(f"unknown preset {self.preset!r}; choose from {', '.join(PRESET_NAMES)}")
        if self.alpha < 0:
            raise ValidationError("alpha must be >= 0")
        if self.k < 1:
            raise ValidationError("k must be >= 1")
        if self.folds < 2:
            raise ValidationError("folds must be >= 2")
        if self.train_start and self.train_end and self.train_end < self.train_start:
            raise ValidationError("train_end precedes train_start")
        if self.ood_start and self.ood_end and self.ood_end < self.ood_start:
            raise ValidationError("ood_end precedes ood_start")
        unknown = {s for s, _ in self.lags} - {s for s, _ in self.macro}
        if unknown:
            raise ValidationError(f"[lags] names series absent from [macro]: {sorted(unknown)}")

    @property
    def calendar(self) -> BusinessCalendar:
        return BusinessCalendar.from_names(self.weekmask, self.holidays)

    def resolve(self, path: str | None) -> Path | None:
        if path is None:
            return None
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def lag_for(self, series_id: str) -> int | None:
        return dict(self.lags).get(series_id)

    def to_dict(self) -> dict:
        """Everything that affects results. The output directory is excluded."""
        iso = lambda d: d.isoformat() if d else None  # noqa: E731
        return {
            "data": self.data.to_dict(),
            "ood_data": self.ood_data.to_dict(),
            "macro": [list(m) for m in self.macro],
            "lags": [list(m) for m in self.lags],
            "calendar": {"weekmask": list(self.weekmask), "holidays": [iso(h) for h in self.holidays]},
            "features": self.features.to_dict(),
            "retrieval": {"alpha": self.alpha, "k": self.k},
            "train": {**self.train.to_dict(), "folds": self.folds},
            "windows": {"train_start": iso(self.train_start), "train_end": iso(self.train_end),
                        "ood_start": iso(self.ood_start), "ood_end": iso(self.ood_end)},
            "preset": self.preset,
        }

    def config_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if "seed" in kw:
            kw["train"] = replace(self.train, seed=int(kw.pop("seed")))
        return replace(self, **kw)


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"not a boolean: {s!r}")


def _list(s: str) -> list[str]:
    return [p.strip() for p in s.replace(";", ",").split(",") if p.strip()]


def parse_config(text: str, base_dir: str | Path = ".") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=(";",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"config syntax error: {exc}") from None

    for section in cp.sections():
        if section in _FREE_SECTIONS:
            continue
        if section not in _SCHEMA:
            raise ValidationError(f"unknown config section [{section}]")
        unknown = set(cp[section]) - _SCHEMA[section]
        if unknown:
            raise ValidationError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")

    def get(section, key, default=None):
        return cp[section][key].strip() if cp.has_section(section) and key in cp[section] else default

    try:
        fs = FeatureSpec()
        lags_raw = get("features", "return_lags")
        vol_raw = get("features", "vol_window")
        features = FeatureSpec(
            return_lags=tuple(int(v) for v in _list(lags_raw)) if lags_raw is not None else fs.return_lags,
            vol_window=(None if vol_raw.lower() in ("none", "") else int(vol_raw)) if vol_raw is not None
            else fs.vol_window,
            include_ohlcv=_bool(get("features", "include_ohlcv", "true")),
            sentiment_columns=tuple(_list(get("features", "sentiment_columns", ""))),
        )
        tc = TrainConfig()
        train = TrainConfig(
            learning_rate=float(get("train", "learning_rate", tc.learning_rate)),
            l2_lambda=float(get("train", "l2_lambda", tc.l2_lambda)),
            max_epochs=int(get("train", "max_epochs", tc.max_epochs)),
            tolerance=float(get("train", "tolerance", tc.tolerance)),
            seed=int(get("train", "seed", tc.seed)),
        )
        opt_date = lambda key: parse_date(get("windows", key)) if get("windows", key) else None  # noqa: E731
        data = lambda sec: DataPaths(get(sec, "prices"), get(sec, "embeddings"), get(sec, "sentiment"))  # noqa: E731
        return RunConfig(
            data=data("data"),
            ood_data=data("ood_data"),
            macro=tuple((k, v.strip()) for k, v in cp["macro"].items()) if cp.has_section("macro") else (),
            lags=tuple((k, int(v)) for k, v in cp["lags"].items()) if cp.has_section("lags") else (),
            weekmask=tuple(get("calendar", "weekmask", "Mon Tue Wed Thu Fri").replace(",", " ").split()),
            holidays=tuple(parse_date(h) for h in _list(get("calendar", "holidays", ""))),
            features=features,
            alpha=float(get("retrieval", "alpha", DEFAULT_ALPHA)),
            k=int(get("retrieval", "k", 5)),
            train=train,
            folds=int(get("train", "folds", 5)),
            train_start=opt_date("train_start"),
            train_end=opt_date("train_end"),
            ood_start=opt_date("ood_start"),
            ood_end=opt_date("ood_end"),
            preset=get("run", "preset", "macro_retrieval"),
            output=get("run", "output", "out"),
            base_dir=str(base_dir),
        )
    except ValidationError:
        raise
    except ValueError as exc:
        raise ValidationError(f"bad config value: {exc}") from None


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise MissingInputError(p, "config file")
    return parse_config(p.read_text(), base_dir=p.parent)


def dump_config(cfg: RunConfig) -> str:
    """Serialize back to the text format (round-trips through ``parse_config``)."""
    lines = []

    def section(name, items):
        items = [(k, v) for k, v in items if v is not None]
        if items:
            lines.append(f"[{name}]")
            lines.extend(f"{k} = {v}" for k, v in items)
            lines.append("")

    section("data", cfg.data.to_dict().items())
    section("ood_data", cfg.ood_data.to_dict().items())
    section("macro", cfg.macro)
    section("lags", cfg.lags)
    section("calendar", [("weekmask", " ".join(cfg.weekmask)),
                         ("holidays", ", ".join(h.isoformat() for h in cfg.holidays))])
    f = cfg.features
    section("features", [("return_lags", ", ".join(map(str, f.return_lags))),
                         ("vol_window", "none" if f.vol_window is None else f.vol_window),
                         ("include_ohlcv", str(f.include_ohlcv).lower()),
                         ("sentiment_columns", ", ".join(f.sentiment_columns))])
    section("retrieval", [("alpha", repr(cfg.alpha)), ("k", cfg.k)])
    t = cfg.train
    section("train", [("learning_rate", repr(t.learning_rate)), ("l2_lambda", repr(t.l2_lambda)),
                      ("max_epochs", t.max_epochs), ("tolerance", repr(t.tolerance)), ("seed", t.seed),
                      ("folds", cfg.folds)])
    section("windows", [(k, v.isoformat() if v else None) for k, v in
                        (("train_start", cfg.train_start), ("train_end", cfg.train_end),
                         ("ood_start", cfg.ood_start), ("ood_end", cfg.ood_end))])
    section("run", [("preset", cfg.preset), ("output", cfg.output)])
    return "\n".join(lines)
