"""Command-line driver: ``extract``, ``train``, ``eval``, ``predict`` and ``sweep``.

Exit codes:
  0  success
  2  bad command-line usage or configuration values
  3  input problem (missing files, nothing to process, audio too short)
  4  file format problem (WAV, .adle records, ADLM checkpoints)
  5  numeric failure (training diverged)
  6  schema mismatch (class ids, shapes, single-class training data)
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import cnn
from .config import REPORT_DIR_ENV, load_config
from .embedding import EmbeddingClip, StandinExtractor, identity_pca, load_records, write_records
from .errors import EmptyInputError, FormatError, NumericError, SchemaError, TooShortError
from .evaluation import write_report
from .ontology import LabelMap
from .pipeline import embed_wav, evaluate_clips, predict_wav, train_from_clips
from .segment import SWEEP_WINDOWS

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_FORMAT = 4
EXIT_NUMERIC = 5
EXIT_SCHEMA = 6

log = logging.getLogger("audio_adl")


def _wav_files(inputs) -> list[Path]:
    files = []
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            files.extend(sorted(q for q in p.rglob("*") if q.suffix.lower() == ".wav"))
        elif p.exists():
            files.append(p)
        else:
            raise FileNotFoundError(f"{p} does not exist")
    return files


def _read_manifest(path) -> dict:
    """CSV with columns file, labels (';'-separated) and optional subject."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            labels = frozenset(s.strip() for s in row.get("labels", "").split(";") if s.strip())
            out[Path(row["file"]).name] = (labels, row.get("subject") or None)
    return out


def _load_many(paths):
    pca, clips = None, []
    for path in paths:
        this_pca, these = load_records(path)
        if pca is not None and this_pca != pca:
            raise SchemaError(f"{path} was quantized with different PCA parameters")
        pca = this_pca
        clips.extend(these)
    return pca, clips


def _config(args):
    cfg = load_config(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "window", None) is not None:
        cfg = replace(cfg, window=args.window)
    if getattr(args, "resample", None) is not None:
        cfg = replace(cfg, resample=replace(cfg.resample, method=args.resample))
    if getattr(args, "k_neighbors", None) is not None:
        cfg = replace(cfg, resample=replace(cfg.resample, k_neighbors=args.k_neighbors))
    if getattr(args, "k", None):
        cfg = replace(cfg, ks=tuple(args.k))
    if getattr(args, "max_epochs", None) is not None:
        cfg = replace(cfg, train=replace(cfg.train, max_epochs=args.max_epochs))
    return cfg


def _label_map(cfg):
    return LabelMap.from_csv(cfg.label_map) if cfg.label_map else LabelMap.default()


def _report_dir(args, cfg) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    return Path(os.environ.get(REPORT_DIR_ENV) or cfg.reports)


def cmd_extract(args) -> int:
    cfg = _config(args)
    files = _wav_files(args.inputs)
    if not files:
        log.error("no WAV files found in %s", ", ".join(args.inputs))
        return EXIT_INPUT
    manifest = _read_manifest(args.manifest) if args.manifest else {}
    default_labels = frozenset(s.strip() for s in (args.labels or "").split(";") if s.strip())
    pca = load_records(cfg.pca)[0] if cfg.pca else identity_pca()
    extractor = StandinExtractor(cfg.extractor_seed)
    clips, failures = [], 0
    for i, path in enumerate(files, start=1):
        try:
            codes, _ = embed_wav(path, extractor, pca, cfg.frontend)
        except (FormatError, EmptyInputError) as exc:
            failures += 1
            log.warning("[%d/%d] skipping %s: %s", i, len(files), path, exc)
            continue
        if len(codes) == 0:
            failures += 1
            log.warning("[%d/%d] skipping %s: shorter than one %.2f s patch", i, len(files), path, cfg.frontend.patch_seconds)
            continue
        labels, subject = manifest.get(path.name, (default_labels, None))
        clips.append(EmbeddingClip(path.stem, labels, codes, subject or args.subject))
        log.info("[%d/%d] %s: %d embedding vectors", i, len(files), path, len(codes))
    if not clips:
        log.error("all %d input file(s) failed", len(files))
        return EXIT_FORMAT
    write_records(clips, args.output, pca)
    log.info("wrote %d clip(s) to %s (%d skipped)", len(clips), args.output, failures)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    pca, clips = _load_many(args.records)
    out = Path(args.out or cfg.models)
    out.mkdir(parents=True, exist_ok=True)
    model, history = train_from_clips(
        clips, pca, cfg, _label_map(cfg),
        epoch_log=lambda r: log.info(
            "epoch %d: loss %.4f val_loss %.4f val_acc %.4f", r.epoch, r.train_loss, r.val_loss, r.val_accuracy
        ),
    )
    cnn.save_checkpoint(model, out / "model.adlm")
    cnn.write_history_csv(out / "history.csv", history)
    log.info("saved %s and %s", out / "model.adlm", out / "history.csv")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args)
    model = cnn.load_checkpoint(args.checkpoint)
    pca, clips = _load_many(args.records)
    out = _report_dir(args, cfg)
    windows = SWEEP_WINDOWS if args.sweep else (args.window or model.window,)
    for w in windows:
        report = evaluate_clips(model, clips, pca, cfg.ks, w, _label_map(cfg), args.subject)
        prefix = f"window{w:02d}_" if args.sweep else ""
        write_report(report, out, prefix)
        log.info(
            "window %d: %s, weighted F-score %.4f",
            w, ", ".join(f"top-{k} {report.overall[k]:.4f}" for k in cfg.ks), report.overall_f1,
        )
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = _config(args)
    model = cnn.load_checkpoint(args.checkpoint)
    pca = load_records(cfg.pca)[0] if cfg.pca else identity_pca()
    rows = predict_wav(model, args.wav, pca, StandinExtractor(cfg.extractor_seed), cfg.frontend, args.top)
    w = csv.writer(sys.stdout, lineterminator="\n")
    header = ["start_time"]
    for i in range(1, args.top + 1):
        header += [f"label{i}", f"prob{i}"]
    w.writerow(header)
    for row in rows:
        cells = [f"{row.start_time:.2f}"]
        for name, prob in row.top:
            cells += [name, f"{prob:.6f}"]
        w.writerow(cells)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    pca, train_clips = _load_many(args.records)
    eval_pca, eval_clips = _load_many(args.eval)
    if eval_pca != pca:
        raise SchemaError("training and evaluation records use different PCA parameters")
    out = _report_dir(args, cfg)
    models = Path(cfg.models)
    models.mkdir(parents=True, exist_ok=True)
    windows = tuple(args.windows) if args.windows else SWEEP_WINDOWS
    summary = []
    for w in windows:
        wcfg = replace(cfg, window=w)
        model, history = train_from_clips(train_clips, pca, wcfg, _label_map(cfg))
        cnn.save_checkpoint(model, models / f"window{w:02d}.adlm")
        report = evaluate_clips(model, eval_clips, pca, cfg.ks, w, _label_map(cfg), args.subject)
        write_report(report, out, f"window{w:02d}_")
        summary.append([w, report.overall_f1] + [report.overall[k] for k in cfg.ks])
        log.info("window %d: weighted F-score %.4f", w, report.overall_f1)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["window", "weighted_f1"] + [f"top{k}_weighted_accuracy" for k in cfg.ks])
        for row in summary:
            writer.writerow([row[0]] + [f"{v:.6f}" for v in row[1:]])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file with sections")
    common.add_argument("--seed", type=int, help="seed for splitting, oversampling and training")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="audio-adl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", parents=[common], help="WAV files -> .adle embedding records")
    p.add_argument("inputs", nargs="+", help="WAV files or directories")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--labels", help="';'-separated source labels for every clip")
    p.add_argument("--manifest", help="CSV with file, labels, subject columns")
    p.add_argument("--subject")
    p.set_defaults(func=cmd_extract)

    train_opts = argparse.ArgumentParser(add_help=False)
    train_opts.add_argument("--window", type=int)
    train_opts.add_argument("--resample", choices=["none", "random", "smote"])
    train_opts.add_argument("--k-neighbors", type=int, help="SMOTE neighbourhood size")
    train_opts.add_argument("--max-epochs", type=int)

    eval_opts = argparse.ArgumentParser(add_help=False)
    eval_opts.add_argument("--k", type=int, action="append", help="top-k to report (repeatable)")
    eval_opts.add_argument("--subject", help="subject id overriding record metadata")

    p = sub.add_parser("train", parents=[common, train_opts], help="records -> checkpoint + history")
    p.add_argument("records", nargs="+")
    p.add_argument("--out", help="directory for model.adlm and history.csv")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common, eval_opts], help="checkpoint + labelled records -> reports")
    p.add_argument("checkpoint")
    p.add_argument("records", nargs="+")
    p.add_argument("--window", type=int)
    p.add_argument("--sweep", action="store_true", help=f"re-segment at windows {SWEEP_WINDOWS}")
    p.add_argument("--out", help=f"report directory (default: ${REPORT_DIR_ENV} or config)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", parents=[common], help="top-k activities per segment of a WAV")
    p.add_argument("checkpoint")
    p.add_argument("wav")
    p.add_argument("--top", type=int, default=3)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("sweep", parents=[common, train_opts, eval_opts], help="train and evaluate per window size")
    p.add_argument("records", nargs="+", help="training records")
    p.add_argument("--eval", nargs="+", required=True, help="evaluation records")
    p.add_argument("--windows", type=int, nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (FileNotFoundError, TooShortError, EmptyInputError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except FormatError as exc:
        log.error("%s", exc)
        return EXIT_FORMAT
    except NumericError as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC
    except SchemaError as exc:
        log.error("%s", exc)
        return EXIT_SCHEMA
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
