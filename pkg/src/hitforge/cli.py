"""``hitforge`` command line: ingest -> build-corpus -> split -> train -> evaluate
-> search -> report.

Every subcommand writes only under ``--out`` and leaves a ``manifest.json``
there recording the command, flags, seed, SHA-256 digests of inputs and
outputs, the tool version and start/finish timestamps. Exit status is 0 on
success, 1 on a domain error (one line on stderr), 2 on a usage error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import fields
from datetime import date, datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Optional

from . import HitforgeError, __version__
from . import corpus as corpus_mod
from . import eval as eval_mod
from . import ingest, search, synthetic
from .features import DEFAULT_SCHEMA, build_matrix, fit_scaler
from .models import KINDS, default_config, load_model, save_model, train
from .models.config import CONFIGS

log = logging.getLogger("hitforge")
MANIFEST = "manifest.json"
TOKEN_ENV = "HITFORGE_TOKEN"
SPLIT_FILES = {"train": "train.csv", "val": "val.csv", "test": "test.csv"}


class UsageError(Exception):
    pass


# --------------------------------------------------------------------- manifest

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _digests(paths) -> dict:
    out = {}
    for p in paths:
        p = Path(p)
        if p.is_dir():
            for f in sorted(q for q in p.rglob("*") if q.is_file()):
                out[str(f)] = _sha256(f)
        elif p.is_file():
            out[str(p)] = _sha256(p)
    return out


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(out: Path, command: str, args: argparse.Namespace, inputs,
                   outputs, started: str) -> Path:
    flags = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
             if k not in ("func", "command")}
    doc = {
        "command": command,
        "flags": flags,
        "seed": getattr(args, "seed", None),
        "inputs": _digests(inputs),
        "outputs": {str(Path(p).relative_to(out)): _sha256(Path(p)) for p in outputs},
        "version": __version__,
        "started": started,
        "finished": _now(),
    }
    path = out / MANIFEST
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n",
                    encoding="utf-8")
    return path


# ------------------------------------------------------------------ subcommands

def _year_range(text: str) -> tuple[int, int]:
    try:
        a, _, b = text.partition("-")
        lo, hi = int(a), int(b or a)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YEAR or YEAR-YEAR, got {text!r}")
    if lo > hi:
        raise argparse.ArgumentTypeError(f"empty year range {text!r}")
    return lo, hi


def _iso_date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {text!r}")


def _transport(args) -> ingest.Transport:
    root = args.fixtures or os.environ.get(ingest.FIXTURES_ENV)
    if root:
        if not Path(root).is_dir():
            raise HitforgeError(f"fixture directory {root} does not exist")
        return ingest.Transport(mode="fixture", fixture_root=Path(root),
                                rate_limit=args.rate_limit)
    token = os.environ.get(TOKEN_ENV)
    if not token:
        raise HitforgeError(f"no --fixtures, {ingest.FIXTURES_ENV} or {TOKEN_ENV} given")
    return ingest.Transport(mode="live", credentials=token, rate_limit=args.rate_limit)


def cmd_ingest(args, out: Path):
    transport = _transport(args)
    lo, hi = args.years
    start = args.chart_start or date(lo, 1, 1)
    end = args.chart_end or date(hi, 12, 31)
    by_year = ingest.fetch_years(transport, range(lo, hi + 1), workers=args.workers)
    tracks = [t for y in range(lo, hi + 1) for t in by_year[y]]
    if not tracks:
        raise HitforgeError(f"no tracks found for {lo}-{hi}")
    feats = ingest.fetch_audio_features(transport, [t.track_id for t in tracks])
    chart = ingest.fetch_chart_range(transport, ingest.chart_weeks(start, end),
                                     workers=args.workers)
    spotify, charts = out / "spotify.jsonl", out / "charts.jsonl"
    ingest.write_jsonl(spotify, ingest.spotify_records(tracks, feats))
    ingest.write_jsonl(charts, (e.to_dict() for e in chart))
    log.info("ingested %d tracks and %d chart rows", len(tracks), len(chart))
    inputs = [transport.fixture_root] if transport.fixture_root else []
    return inputs, [spotify, charts]


def cmd_build_corpus(args, out: Path):
    records = ingest.read_jsonl(args.spotify)
    chart = [ingest.ChartEntry.from_dict(d) for d in ingest.read_jsonl(args.charts)]
    res = corpus_mod.build_corpus(records, chart, seed=args.seed,
                                  n_per_class=args.n_per_class, min_year=args.min_year,
                                  max_year=args.max_year,
                                  min_count_per_year=args.min_count_per_year)
    csv_path, jsonl_path, report = out / "corpus.csv", out / "corpus.jsonl", \
        out / "merge_report.json"
    corpus_mod.write_tracks_csv(csv_path, res.corpus)
    corpus_mod.write_tracks_jsonl(jsonl_path, res.corpus)
    report.write_text(json.dumps(res.report.to_dict(), indent=2, sort_keys=True) + "\n",
                      encoding="utf-8")
    return [args.spotify, args.charts], [csv_path, jsonl_path, report]


def cmd_split(args, out: Path):
    tracks = corpus_mod.read_tracks_csv(args.corpus)
    split = corpus_mod.make_splits(tracks, seed=args.seed)
    written = []
    for name, part in split.parts().items():
        path = out / SPLIT_FILES[name]
        corpus_mod.write_tracks_csv(path, part)
        written.append(path)
    return [args.corpus], written


def _read_split(data: Path, name: str):
    path = data / SPLIT_FILES[name]
    if not path.is_file():
        raise HitforgeError(f"{path} not found (run `hitforge split` first)")
    return path, corpus_mod.read_tracks_csv(path)


def _overrides(args) -> dict:
    kind = args.model
    valid = {f.name for f in fields(CONFIGS[kind])}
    out = {}
    for name in _OVERRIDABLE:
        value = getattr(args, name)
        if value is None:
            continue
        if name not in valid:
            raise UsageError(f"--{name.replace('_', '-')} does not apply to --model {kind}")
        out[name] = value
    return out


def cmd_train(args, out: Path):
    train_path, tracks = _read_split(args.data, "train")
    config = default_config(args.model, seed=args.seed, **_overrides(args))
    scaler = fit_scaler(tracks, DEFAULT_SCHEMA)
    matrix = build_matrix(tracks, DEFAULT_SCHEMA, scaler)
    model = train(args.model, matrix, config, workers=args.workers)
    path = out / "model.json"
    save_model(path, model, DEFAULT_SCHEMA, scaler)
    return [train_path], [path]


def cmd_evaluate(args, out: Path):
    model, schema, scaler = load_model(args.model)
    if schema is None or scaler is None:
        raise HitforgeError(f"{args.model} carries no feature schema/scaler")
    split_path, tracks = _read_split(args.data, args.split)
    matrix = build_matrix(tracks, schema, scaler)
    name = args.name or model.kind
    rep = eval_mod.MetricsReport.evaluate(name, args.split, model.predict(matrix.rows),
                                          matrix.labels)
    metrics_path = out / "metrics.json"
    metrics_path.write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n",
                            encoding="utf-8")
    written = eval_mod.emit_report([rep], out)
    return [args.model, split_path], [metrics_path, *written]


def _resolve_sweep(text: str) -> Path:
    p = Path(text)
    if p.is_file():
        return p
    bundled = resources.files("hitforge") / "sweeps" / f"{text}.json"
    if bundled.is_file():
        return Path(str(bundled))
    raise HitforgeError(f"sweep {text!r} is neither a file nor a bundled sweep")


def cmd_search(args, out: Path):
    sweep_path = _resolve_sweep(args.sweep)
    sweep = search.load_sweep(sweep_path)
    train_path, train_tracks = _read_split(args.data, "train")
    val_path, val_tracks = _read_split(args.data, "val")
    split = corpus_mod.CorpusSplit(train_tracks, val_tracks, [], args.seed)
    stages = search.run_sweep(sweep, split, workers=args.workers, master_seed=args.seed)
    trials_path, best_path = out / "trials.csv", out / "best_config.json"
    search.write_trials_csv(trials_path, stages)
    best = search.best_trial(stages)
    stage = next(name for name, trials in stages.items() if best in trials)
    doc = {"model": sweep["model"], "stage": stage, "index": best.index, "seed": best.seed,
           "params": best.params, "config": best.config(sweep["model"]).to_dict(),
           "val_accuracy": best.accuracy}
    best_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return [sweep_path, train_path, val_path], [trials_path, best_path]


def cmd_report(args, out: Path):
    reports = []
    for path in args.metrics:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        for d in doc if isinstance(doc, list) else [doc]:
            reports.append(eval_mod.MetricsReport.from_dict(d))
    return list(args.metrics), eval_mod.emit_report(reports, out)


def cmd_synth_fixtures(args, out: Path):
    summary = synthetic.generate(out, seed=args.seed)
    log.info("synthetic fixtures: %s", summary)
    written = sorted(p for p in out.iterdir() if p.is_file() and p.name != MANIFEST)
    return [], written


# ---------------------------------------------------------------------- parser

_OVERRIDABLE = sorted({f.name for cls in CONFIGS.values() for f in fields(cls)}
                      - {"seed", "criterion"})


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes"):
        return True
    if low in ("0", "false", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _override_type(name: str):
    for cls in CONFIGS.values():
        for f in fields(cls):
            if f.name == name:
                return _bool if isinstance(f.default, bool) else type(f.default)
    raise KeyError(name)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hitforge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hitforge {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    workers = os.cpu_count() or 1

    def command(name, func, help_text, seed=True):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.set_defaults(func=func)
        p.add_argument("--out", type=Path, required=True, help="output directory")
        if seed:
            p.add_argument("--seed", type=int, required=True, help="master seed")
        return p

    p = command("ingest", cmd_ingest, "fetch tracks, audio features and weekly charts",
                seed=False)
    p.add_argument("--fixtures", type=Path,
                   help=f"fixture directory (default: ${ingest.FIXTURES_ENV}; "
                        f"otherwise live mode with ${TOKEN_ENV})")
    p.add_argument("--years", type=_year_range, default=(ingest.YEAR_MIN, ingest.YEAR_MAX),
                   help="release years, e.g. 2014-2017")
    p.add_argument("--chart-start", type=_iso_date, help="first chart week (YYYY-MM-DD)")
    p.add_argument("--chart-end", type=_iso_date, help="last chart week (YYYY-MM-DD)")
    p.add_argument("--rate-limit", type=float, default=10.0, help="requests per second")
    p.add_argument("--workers", type=int, default=workers)

    p = command("build-corpus", cmd_build_corpus, "merge, label and balance the corpus")
    p.add_argument("--spotify", type=Path, required=True, help="spotify.jsonl from ingest")
    p.add_argument("--charts", type=Path, required=True, help="charts.jsonl from ingest")
    p.add_argument("--n-per-class", type=int, help="tracks per class (default: all hits)")
    p.add_argument("--min-year", type=int, default=ingest.YEAR_MIN)
    p.add_argument("--max-year", type=int, default=ingest.YEAR_MAX)
    p.add_argument("--min-count-per-year", type=int, default=0)

    p = command("split", cmd_split, "stratified train/val/test split")
    p.add_argument("--corpus", type=Path, required=True, help="corpus.csv")

    p = command("train", cmd_train, "train one model on DATA/train.csv")
    p.add_argument("--model", choices=KINDS, required=True)
    p.add_argument("--data", type=Path, required=True, help="directory from `split`")
    p.add_argument("--workers", type=int, default=workers)
    hp = p.add_argument_group("hyperparameter overrides")
    for name in _OVERRIDABLE:
        hp.add_argument(f"--{name.replace('_', '-')}", dest=name, type=_override_type(name))

    p = command("evaluate", cmd_evaluate, "score a saved model on one split", seed=False)
    p.add_argument("--model", type=Path, required=True, help="model.json")
    p.add_argument("--data", type=Path, required=True, help="directory from `split`")
    p.add_argument("--split", choices=tuple(SPLIT_FILES), default="val")
    p.add_argument("--name", help="row label in results.csv (default: model kind)")

    p = command("search", cmd_search, "randomized then grid hyperparameter search")
    p.add_argument("--sweep", required=True, help="sweep JSON file or bundled name (lr/nn/rf/svm)")
    p.add_argument("--data", type=Path, required=True, help="directory from `split`")
    p.add_argument("--workers", type=int, default=workers)

    p = command("report", cmd_report, "combine metrics.json files into report tables",
                seed=False)
    p.add_argument("--metrics", type=Path, nargs="+", required=True)

    command("synth-fixtures", cmd_synth_fixtures,
            "write the seeded synthetic fixture corpus")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if getattr(args, "workers", 1) < 1:
        parser.print_usage(sys.stderr)
        print("hitforge: error: --workers must be at least 1", file=sys.stderr)
        return 2
    started = _now()
    out: Path = args.out
    try:
        if args.command == "train":
            _overrides(args)
        if out.exists() and not out.is_dir():
            raise HitforgeError(f"--out {out} is not a directory")
        out.mkdir(parents=True, exist_ok=True)
        inputs, outputs = args.func(args, out)
        write_manifest(out, args.command, args, inputs, outputs, started)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"hitforge: error: {exc}", file=sys.stderr)
        return 2
    except (HitforgeError, ValueError, OSError, KeyError) as exc:
        msg = " ".join(str(exc).split()) or type(exc).__name__
        print(f"hitforge: {args.command}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
