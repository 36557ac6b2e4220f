"""Command-line front end.

Every command reads one configuration file and writes into one output
directory. All artifacts carry the configuration hash: JSON reports under
``config_sha256`` (plus the full resolved config), CSV files on a leading
``# config_sha256=...`` line. Nothing time-dependent is written, so reruns on
unchanged inputs are byte-identical.

Exit codes: 0 success, 1 validation failure, 2 missing input, 3 protocol
violation.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from .calendar_io import (API_KEY_ENV, AlignedRecord, MacroSeries, align, fetch_macro_series, fit_scaler,
                          load_embeddings, load_macro_csv, load_price_csv, load_sentiment_csv, macro_daily,
                          parse_date, read_aligned_csv, write_aligned_csv)
from .config import RunConfig, load_config
from .errors import FetchError, MissingInputError, ProtocolViolation, ValidationError
from .evaluation import write_delta_table, write_tables
from .features import feature_names
from .model import canonical_json, freeze, load_bundle
from .pipeline import (PRESETS, Dataset, Settings, evaluate_frozen, feature_spec_note, fit_final, get_preset,
                       run_cv)
from .retrieval import build_index, diagnostics, search_causal, write_diagnostics_csv
from .synth import (DEFAULT_SEED, default_schedule, generate, nearest_centroid_accuracy, neighbor_vote_accuracy,
                    regime_shift_experiment)

logger = logging.getLogger("macroctx")

EXIT_OK, EXIT_VALIDATION, EXIT_MISSING, EXIT_PROTOCOL = 0, 1, 2, 3
TRAIN_FILE = "aligned_train.csv"
OOD_FILE = "aligned_ood.csv"


# --------------------------------------------------------------------------
# output helpers


def write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n")
    return path


def _stamp(cfg_hash: str) -> str:
    return f"config_sha256={cfg_hash}"


def _envelope(cfg: RunConfig, body: dict) -> dict:
    return {"config_sha256": cfg.config_hash(), "config": cfg.to_dict(), **body}


def _settings(cfg: RunConfig) -> Settings:
    return Settings(alpha=cfg.alpha, k=cfg.k, folds=cfg.folds, train=cfg.train)


def _presets(arg: str | None, cfg: RunConfig) -> list[str]:
    if arg is None:
        return [cfg.preset]
    if arg == "all":
        return list(PRESETS)
    return [get_preset(p.strip()).name for p in arg.split(",")]


# --------------------------------------------------------------------------
# ingestion


def _load_macro(cfg: RunConfig) -> list[MacroSeries]:
    out = []
    for series_id, source in cfg.macro:
        lag = cfg.lag_for(series_id)
        if source.startswith("api:"):
            key = os.environ.get(API_KEY_ENV)
            if not key:
                raise MissingInputError(f"${API_KEY_ENV}", "economic-data API key")
            remote_id = source[4:] or series_id
            out.append(fetch_macro_series(None, key, remote_id, release_lag_bd=lag))
            out[-1] = MacroSeries(series_id, out[-1].observations, out[-1].release_lag_bd, out[-1].skipped)
        else:
            out.append(load_macro_csv(cfg.resolve(source), series_id, lag))
    if not out:
        raise ValidationError("config lists no [macro] series")
    return out


def _align_window(cfg: RunConfig, paths, macro, start, end, require_label=True):
    if not paths.prices or not paths.embeddings:
        raise ValidationError("config needs prices and embeddings paths")
    cal = cfg.calendar
    bars = load_price_csv(cfg.resolve(paths.prices), cal)
    embeddings = load_embeddings(cfg.resolve(paths.embeddings))
    sentiment = load_sentiment_csv(cfg.resolve(paths.sentiment)) if paths.sentiment else None
    if cfg.features.sentiment_columns and sentiment is None:
        raise ValidationError("features name sentiment columns but no sentiment file is configured")
    start = start or bars[0].date
    end = end or bars[-1].date
    daily = macro_daily(macro, cal, min(start, bars[0].date), max(end, bars[-1].date))
    return align(bars, daily, embeddings, cal, start, end, cfg.features, sentiment, require_label=require_label)


def _check_windows(cfg: RunConfig) -> None:
    if cfg.ood_start and cfg.train_end and cfg.ood_start <= cfg.train_end:
        raise ProtocolViolation(f"OOD window starts {cfg.ood_start}, not after training end {cfg.train_end}")


def cmd_ingest(cfg: RunConfig, out: Path, args) -> int:
    macro = _load_macro(cfg)
    x_names = feature_names(cfg.features)
    z_names = [s.series_id for s in macro]
    h = cfg.config_hash()
    report = {"macro": {s.series_id: {"release_lag_bd": s.release_lag_bd, "observations": len(s.observations),
                                      "skipped": s.skipped} for s in macro}}
    records, rep = _align_window(cfg, cfg.data, macro, cfg.train_start, cfg.train_end)
    write_aligned_csv(out / TRAIN_FILE, records, x_names, z_names, {"config_sha256": h, "window": "train"})
    report["train"] = {**rep.to_dict(), "first": records[0].date.isoformat(), "last": records[-1].date.isoformat()}
    if cfg.ood_start or cfg.ood_data.prices:
        _check_windows(cfg)
        paths = cfg.ood_data if cfg.ood_data.prices else cfg.data
        ood, rep = _align_window(cfg, paths, macro, cfg.ood_start, cfg.ood_end)
        write_aligned_csv(out / OOD_FILE, ood, x_names, z_names, {"config_sha256": h, "window": "ood"})
        report["ood"] = {**rep.to_dict(), "first": ood[0].date.isoformat(), "last": ood[-1].date.isoformat()}
    write_json(out / "ingest_report.json", _envelope(cfg, report))
    print(f"ingested {report['train']['kept']} training rows"
          + (f", {report['ood']['kept']} OOD rows" if "ood" in report else "") + f" into {out}")
    return EXIT_OK


def _dataset(out: Path, name: str) -> Dataset:
    records, x_names, z_names, _ = read_aligned_csv(out / name)
    return Dataset.from_records(records, x_names, z_names)


# --------------------------------------------------------------------------
# training / evaluation


def cmd_cv(cfg: RunConfig, out: Path, args) -> int:
    train = _dataset(out, TRAIN_FILE)
    settings = _settings(cfg)
    rows = []
    for name in _presets(args.preset, cfg):
        res = run_cv(train, get_preset(name), settings)
        body = {"report": res.report.to_dict(), "features": feature_spec_note(cfg.features),
                "retrieval_queries": len(res.log.entries), "causal_violations": res.log.violations()}
        write_json(out / f"cv_{name}.json", _envelope(cfg, body))
        rows.append((res.report.info["label"], res.report))
        print(f"{name}: CV acc {res.report.classification.accuracy:.4f} F1 {res.report.f1:.4f} "
              f"Sharpe {res.report.sharpe:.4f}")
    write_tables(out / "cv", rows, _stamp(cfg.config_hash()))
    return EXIT_OK


def cmd_build_index(cfg: RunConfig, out: Path, args) -> int:
    train = _dataset(out, TRAIN_FILE)
    scaler = fit_scaler(train.dates, train.Z)
    alpha = _settings(cfg).alpha_for(get_preset(args.preset or cfg.preset))
    if alpha is None:
        raise ValidationError(f"preset {args.preset or cfg.preset} does not use retrieval")
    index = build_index(train.dates, train.T, scaler.transform(train.Z), alpha)
    digest = index.save(out / "index.index")
    write_json(out / "index_report.json", _envelope(cfg, {"entries": len(index), "alpha": alpha,
                                                          "payload_sha256": digest}))
    print(f"indexed {len(index)} entries (alpha={alpha})")
    return EXIT_OK


def _bundle_path(out: Path, preset: str, arg: str | None) -> Path:
    return Path(arg) if arg else out / f"bundle_{preset}.json"


def cmd_freeze(cfg: RunConfig, out: Path, args) -> int:
    train = _dataset(out, TRAIN_FILE)
    settings = _settings(cfg)
    for name in _presets(args.preset, cfg):
        preset = get_preset(name)
        cv = run_cv(train, preset, settings)
        fitted = fit_final(train, preset, settings)
        path = freeze(_bundle_path(out, name, None), fitted.params, fitted.index, fitted.macro_scaler,
                      cfg.features, preset=name, alpha=fitted.alpha, k=fitted.k,
                      train_start=fitted.train_start.isoformat(), train_end=fitted.train_end.isoformat(),
                      config_hash=cfg.config_hash(),
                      extra={"cv": {"f1": cv.report.f1, "sharpe": cv.report.sharpe},
                             "final_epochs": fitted.params.epochs,
                             "final_loss": fitted.training_log[-1][1] if fitted.training_log else None})
        print(f"froze {name} -> {path}")
    return EXIT_OK


def cmd_evaluate_ood(cfg: RunConfig, out: Path, args) -> int:
    _check_windows(cfg)
    ood = _dataset(out, OOD_FILE)
    names = _presets(args.preset, cfg)
    if args.bundle and len(names) > 1:
        raise ValidationError("--bundle applies to a single preset")
    rows = []
    for name in names:
        bundle = load_bundle(_bundle_path(out, name, args.bundle))
        res = evaluate_frozen(bundle, ood, bundle.extra.get("cv"))
        body = {"report": res.report.to_dict(), "bundle_config_sha256": bundle.config_hash,
                "causal_violations": res.log.violations()}
        write_json(out / f"ood_{bundle.preset}.json", _envelope(cfg, body))
        rows.append((res.report.info["label"], res.report))
        d = res.report.deltas
        print(f"{bundle.preset}: OOD acc {res.report.classification.accuracy:.4f} F1 {res.report.f1:.4f}"
              + (f" dF1 {d.delta_f1:+.4f} dSharpe {d.delta_sharpe:+.4f}" if d else ""))
    write_tables(out / "ood", rows, _stamp(cfg.config_hash()))
    return EXIT_OK


# --------------------------------------------------------------------------
# diagnostics / export


def _fused_rows(index, dates, records: Sequence[AlignedRecord], scaler):
    """(date, fused vector) for OOD records under the frozen scaler and alpha."""
    by_date = {r.date: r for r in records}
    for d in dates:
        r = by_date[d]
        yield d, index.query_for(d, r.t_vec, scaler.transform(r.z_vec))


def _write_projection(path: Path, cfg_hash: str, index, queries) -> int:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {_stamp(cfg_hash)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["role", "date", *(f"f{i}" for i in range(index.fused.shape[1]))])
        n = 0
        for d, vec in zip(index.dates, index.fused):
            w.writerow(["train", d.isoformat(), *(repr(float(v)) for v in vec)])
            n += 1
        for d, q in queries:
            w.writerow(["query", d.isoformat(), *(repr(float(v)) for v in q.fused)])
            n += 1
    return n


def _retrieval_bundle(out: Path, cfg: RunConfig, args):
    name = args.preset or cfg.preset
    bundle = load_bundle(_bundle_path(out, name, args.bundle))
    if bundle.index is None:
        raise ValidationError(f"bundle for {bundle.preset} has no retrieval index")
    return bundle


def cmd_diagnose(cfg: RunConfig, out: Path, args) -> int:
    bundle = _retrieval_bundle(out, cfg, args)
    records, *_ = read_aligned_csv(out / OOD_FILE)
    valid = [r.date for r in records]
    dates = sorted({parse_date(d) for d in args.dates})
    unknown = [d for d in dates if d not in set(valid)]
    if unknown:
        raise ValidationError(f"date(s) {', '.join(map(str, unknown))} not in the OOD window "
                              f"{valid[0]}..{valid[-1]} (business days with complete inputs)")
    k = args.k or bundle.k
    rows, queries = [], list(_fused_rows(bundle.index, dates, records, bundle.macro_scaler))
    for d, q in queries:
        rows.extend(diagnostics(bundle.index, q, search_causal(bundle.index, q.fused, d, k)))
    h = cfg.config_hash()
    write_diagnostics_csv(out / f"diagnostics_{bundle.preset}.csv", rows, _stamp(h))
    n = _write_projection(out / f"projection_{bundle.preset}.csv", h, bundle.index, queries)
    print(f"{len(rows)} neighbor rows, {n} projection rows")
    return EXIT_OK


def cmd_export_embeddings(cfg: RunConfig, out: Path, args) -> int:
    bundle = _retrieval_bundle(out, cfg, args)
    records, *_ = read_aligned_csv(out / OOD_FILE)
    queries = _fused_rows(bundle.index, [r.date for r in records], records, bundle.macro_scaler)
    n = _write_projection(out / f"embeddings_{bundle.preset}.csv", cfg.config_hash(), bundle.index, queries)
    print(f"exported {n} fused vectors")
    return EXIT_OK


# --------------------------------------------------------------------------
# synthetic experiment


def cmd_synth_experiment(cfg: RunConfig | None, out: Path, args) -> int:
    if args.seed is not None:
        seed = args.seed
    else:
        seed = cfg.train.seed if cfg else DEFAULT_SEED
    settings = _settings(cfg) if cfg else Settings()
    ds = generate(schedule=default_schedule(args.days, args.ood_days), n_days=args.days, seed=seed)
    ds.write(out / "data")
    res = regime_shift_experiment(ds, settings=settings)
    train_recs, ood_recs = ds.split()
    x_names = feature_names(ds.feature_spec)
    z_names = [s.series_id for s in ds.macro]
    train = Dataset.from_records(train_recs, x_names, z_names)
    ood = Dataset.from_records(ood_recs, x_names, z_names)
    config = {"seed": seed, "days": args.days, "ood_days": args.ood_days, "alpha": settings.alpha,
              "k": settings.k, "folds": settings.folds, "train": settings.train.to_dict(),
              "features": ds.feature_spec.to_dict()}
    h = hashlib.sha256(canonical_json(config).encode()).hexdigest()
    probes = {"nearest_centroid_accuracy": nearest_centroid_accuracy(ds),
              "text_vote_accuracy": neighbor_vote_accuracy(train, ood, 0.0, settings.k),
              "macro_vote_accuracy": neighbor_vote_accuracy(train, ood, settings.alpha, settings.k)}
    for name, o in res.outcomes.items():
        write_json(out / f"synth_{name}.json", {"config_sha256": h, "config": config,
                                                "cv": o.cv.to_dict(), "ood": o.ood.to_dict()})
    labels = [(o.cv.info["label"], o.cv, o.ood) for o in res.outcomes.values()]
    write_delta_table(out / "synth_deltas.csv", labels, _stamp(h))
    checks = res.checks()
    write_json(out / "synth_summary.json", {"config_sha256": h, "config": config, "checks": checks,
                                            "probes": probes, "train_days": res.train_days,
                                            "ood_days": res.ood_days,
                                            "schedule": [[g, a.isoformat(), b.isoformat()]
                                                         for g, a, b in ds.schedule]})
    for name, o in res.outcomes.items():
        print(f"{name:16s} OOD acc {o.ood.classification.accuracy:.4f}  dF1 {o.ood.deltas.delta_f1:+.4f}")
    for k, v in checks.items():
        print(f"{'PASS' if v else 'FAIL'} {k}")
    return EXIT_OK if res.passed() else EXIT_VALIDATION


# --------------------------------------------------------------------------
# entry point


COMMANDS = {
    "ingest": cmd_ingest,
    "cv": cmd_cv,
    "build-index": cmd_build_index,
    "freeze": cmd_freeze,
    "evaluate-ood": cmd_evaluate_ood,
    "diagnose": cmd_diagnose,
    "export-embeddings": cmd_export_embeddings,
    "synth-experiment": cmd_synth_experiment,
}


def build_parser() -> argparse.ArgumentParser:
    def add_global(p, default):
        p.add_argument("--config", type=Path, default=default, help="run configuration file")
        p.add_argument("--output", type=Path, default=default, help="output directory (overrides [run] output)")
        p.add_argument("--seed", type=int, default=default, help="override the configured seed")
        p.add_argument("-v", "--verbose", action="store_true", default=default or False)

    # global flags are accepted before or after the subcommand; the
    # subcommand copies suppress their defaults so they never mask the
    # top-level value
    common = argparse.ArgumentParser(add_help=False)
    add_global(common, argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="macroctx", description="Macro-contextual retrieval forecasting pipeline")
    add_global(parser, None)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="align raw inputs into dataset files")
    for name, help_ in (("cv", "time-series cross-validation"), ("build-index", "build the retrieval index"),
                        ("freeze", "train on the full window and freeze a bundle")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--preset", help="preset name, comma list, or 'all' (default: config preset)")
    p = sub.add_parser("evaluate-ood", parents=[common], help="score the OOD window with a frozen bundle")
    p.add_argument("--preset")
    p.add_argument("--bundle", help="bundle path (default: <output>/bundle_<preset>.json)")
    p = sub.add_parser("diagnose", parents=[common], help="neighbor diagnostics for OOD dates")
    p.add_argument("--preset")
    p.add_argument("--bundle")
    p.add_argument("--k", type=int)
    p.add_argument("dates", nargs="+")
    p = sub.add_parser("export-embeddings", parents=[common], help="fused vectors for external projection")
    p.add_argument("--preset")
    p.add_argument("--bundle")
    p = sub.add_parser("synth-experiment", parents=[common], help="five-preset regime-shift experiment")
    p.add_argument("--days", type=int, default=600)
    p.add_argument("--ood-days", type=int, default=150)
    return parser


def _run(args) -> int:
    cfg = None
    if args.config is not None:
        cfg = load_config(args.config)
        if args.command != "synth-experiment":
            cfg = cfg.with_overrides(seed=args.seed)
    elif args.command != "synth-experiment":
        raise ValidationError(f"{args.command} needs --config")
    if args.output is not None:
        out = args.output
    elif cfg is not None:
        out = cfg.resolve(cfg.output)
    else:
        out = Path("out")
    out.mkdir(parents=True, exist_ok=True)
    return COMMANDS[args.command](cfg, out, args)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except ProtocolViolation as exc:
        print(f"protocol violation: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except MissingInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ValidationError, FetchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
