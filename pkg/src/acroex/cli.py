"""Command-line entry point: convert, train, predict, score.

Exit codes: 0 success, 1 usage/configuration error, 2 data or format error,
3 runtime failure. All randomness flows from one seed; reruns with identical
inputs produce byte-identical output files.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys

from . import trainer as trainer_mod
from .corpus import (
    SLICE_NAMES,
    documents_from_records,
    load_corpus,
    save_corpus,
    slice_key,
)
from .embeddings import DEFAULT_HASHED_DIM, open_embedding_file
from .errors import AcroexError, ConfigError, DataFormatError
from .model import ModelConfig, load_checkpoint, predict_document, save_checkpoint
from .scorer import format_report_table, report_to_dict, score_corpus
from .trainer import GridRow, TrainConfig, format_grid, write_metrics

logger = logging.getLogger(__name__)

# canonical name -> accepted input aliases, tried in order
_CONVERT_ALIASES = {
    "id": ("id", "ID"),
    "text": ("text", "sentence"),
    "short": ("short", "acronyms"),
    "long": ("long", "long-forms", "long_forms"),
}

_CONFIG_KEYS = {
    "train_corpus": str,
    "dev_corpus": str,
    "out_dir": str,
    "provider": str,
    "embeddings": str,
    "embedding_dim": int,
    "hidden_size": int,
    "dropout": float,
    "seed": int,
    "epochs": int,
    "learning_rate": float,
    "batch_size": int,
    "patience": int,
    "clip_norm": float,
    "mode": str,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="acroex", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert release records to the canonical corpus format")
    p.add_argument("--in", dest="in_path", required=True, help="input records (JSON list)")
    p.add_argument("--out", required=True, help="canonical corpus output path")
    p.add_argument("--language", help="language for records that carry none")
    p.add_argument("--domain", help="domain for records that carry none")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("train", help="train a model from a run-config file")
    p.add_argument("--config", required=True, help="key = value run config")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--mode", choices=trainer_mod.TRAIN_MODES, help="overrides the config mode")
    p.add_argument("--provider", choices=("file", "hashed"), help="overrides the provider")
    p.add_argument("--embeddings", help="overrides the embedding-file path")
    p.add_argument("--out", help="overrides the output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="tag a corpus with a trained checkpoint")
    p.add_argument("--checkpoint", required=True, help="checkpoint file")
    p.add_argument("--corpus", required=True, help="canonical corpus to tag")
    p.add_argument("--out", required=True, help="prediction output path")
    p.add_argument("--embeddings", help="embedding file (file-provider checkpoints)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("score", help="score predictions against gold spans")
    p.add_argument("--pred", required=True, help="prediction corpus")
    p.add_argument("--gold", required=True, help="gold corpus")
    p.add_argument("--out", help="also write the report as JSON here")
    p.set_defaults(func=cmd_score)
    return parser


def _convert_record(record, index: int, language, domain) -> dict:
    if not isinstance(record, dict):
        raise DataFormatError(f"record {index}: expected an object, got {type(record).__name__}")
    out = {}
    for canonical, aliases in _CONVERT_ALIASES.items():
        present = [a for a in aliases if a in record]
        if len(present) > 1:
            raise DataFormatError(
                f"record {index}: fields {present} are aliases of the same field"
            )
        if present:
            out[canonical] = record[present[0]]
        elif canonical in ("short", "long"):
            out[canonical] = []
        else:
            raise DataFormatError(
                f"record {index}: missing field {canonical!r} (accepted names: {list(aliases)})"
            )
    out["language"] = record.get("language", language)
    out["domain"] = record.get("domain", domain)
    for field in ("language", "domain"):
        if out[field] is None:
            raise DataFormatError(
                f"record {index}: no {field!r} field and no --{field} flag given"
            )
    return out


def cmd_convert(args) -> int:
    with open(args.in_path, encoding="utf-8") as fh:
        try:
            records = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{args.in_path}: not valid JSON: {exc}") from exc
    if not isinstance(records, list):
        raise DataFormatError(f"{args.in_path}: expected a top-level list")
    canonical = [
        _convert_record(r, i, args.language, args.domain) for i, r in enumerate(records)
    ]
    docs = documents_from_records(canonical, origin=args.in_path)
    save_corpus(docs, args.out)
    logger.info("converted %d records to %s", len(docs), args.out)
    return 0


def parse_run_config(path) -> dict:
    """Read a key = value file; unknown keys and bad values are usage errors."""
    settings = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value, got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in settings:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            try:
                settings[key] = _CONFIG_KEYS[key](value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    return settings


def cmd_train(args) -> int:
    settings = parse_run_config(args.config)
    if args.seed is not None:
        settings["seed"] = args.seed
    if args.mode is not None:
        settings["mode"] = args.mode
    if args.provider is not None:
        settings["provider"] = args.provider
    if args.embeddings is not None:
        settings["embeddings"] = args.embeddings
    if args.out is not None:
        settings["out_dir"] = args.out
    for required in ("train_corpus", "out_dir"):
        if required not in settings:
            raise ConfigError(f"run config is missing {required!r}")

    train_docs = load_corpus(settings["train_corpus"])
    dev_docs = load_corpus(settings["dev_corpus"]) if "dev_corpus" in settings else []

    provider = settings.get("provider", "hashed")
    emb_file = None
    if provider == "file":
        if "embeddings" not in settings:
            raise ConfigError("provider is 'file' but no embeddings path is set")
        emb_file = open_embedding_file(settings["embeddings"])
        embedding_dim = settings.get("embedding_dim", emb_file.dim)
    else:
        embedding_dim = settings.get("embedding_dim", DEFAULT_HASHED_DIM)

    seed = settings.get("seed", 0)
    model_config = ModelConfig(
        embedding_dim=embedding_dim,
        hidden_size=settings.get("hidden_size", 256),
        provider_kind=provider,
        seed=seed,
        dropout=settings.get("dropout", 0.0),
    )
    train_config = TrainConfig(
        epochs=settings.get("epochs", 20),
        learning_rate=settings.get("learning_rate", 1.0e-3),
        batch_size=settings.get("batch_size", 32),
        patience=settings.get("patience", 5),
        clip_norm=settings.get("clip_norm", 5.0),
        mode=settings.get("mode", "joint"),
        seed=seed,
    )
    model_config.validate()
    train_config.validate()

    out_dir = settings["out_dir"]
    os.makedirs(out_dir, exist_ok=True)

    if train_config.mode == "joint":
        best, reports = trainer_mod.train(
            train_docs, dev_docs, model_config, train_config, emb_file
        )
        checkpoint_path = os.path.join(out_dir, "model.aeck")
        save_checkpoint(best, checkpoint_path)
        write_metrics(reports, os.path.join(out_dir, "metrics.jsonl"))
        logger.info("wrote %s and metrics.jsonl (%d epochs)", checkpoint_path, len(reports))
        if dev_docs:
            cells = trainer_mod.evaluate(best, dev_docs)
            print(format_grid([GridRow(label="joint", cells=cells)]))
    else:
        cells = {name: None for name in SLICE_NAMES}
        cells["overall"] = None
        for name in SLICE_NAMES:
            slice_train = [d for d in train_docs if slice_key(d) == name]
            slice_dev = [d for d in dev_docs if slice_key(d) == name]
            if not slice_train:
                logger.info("slice %s: no training documents, skipped", name)
                continue
            best, reports = trainer_mod.train(
                slice_train, slice_dev, model_config, train_config, emb_file
            )
            save_checkpoint(best, os.path.join(out_dir, f"model-{name}.aeck"))
            write_metrics(reports, os.path.join(out_dir, f"metrics-{name}.jsonl"))
            if slice_dev:
                cells[name] = trainer_mod.evaluate(best, slice_dev)[name]
        print(format_grid([GridRow(label="per-language", cells=cells)]))
    return 0


def cmd_predict(args) -> int:
    model = load_checkpoint(args.checkpoint)
    if model.config.provider_kind == "file":
        if args.embeddings is None:
            raise ConfigError("checkpoint uses the file provider; pass --embeddings")
        model.attach_embedding_file(open_embedding_file(args.embeddings))
    docs = load_corpus(args.corpus)
    preds = []
    for doc in docs:
        short, long_, _ = predict_document(model, doc)
        preds.append(dataclasses.replace(doc, short_spans=short, long_spans=long_))
    save_corpus(preds, args.out)
    logger.info("wrote predictions for %d documents to %s", len(preds), args.out)
    return 0


def cmd_score(args) -> int:
    pred_docs = load_corpus(args.pred)
    gold_docs = load_corpus(args.gold)
    report = score_corpus(pred_docs, gold_docs)
    print(format_report_table(report))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report_to_dict(report), fh, indent=1, sort_keys=True)
            fh.write("\n")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        logger.error("%s", exc)
        return 1
    except (DataFormatError, OSError) as exc:
        logger.error("%s", exc)
        return 2
    except AcroexError as exc:
        logger.error("%s", exc)
        return 3
    except Exception:
        logger.exception("unexpected failure")
        return 3


if __name__ == "__main__":
    sys.exit(main())
