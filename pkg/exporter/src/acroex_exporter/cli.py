"""Command line front end: adapt a masked-LM checkpoint, export embeddings.

Exit codes: 0 success, 1 usage or configuration problem, 2 unreadable or
malformed input data, 3 any other failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import POOLING_MODES, ExporterConfig
from .errors import CorpusReadError, ExporterConfigError, ExporterError

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> _Parser:
    parser = _Parser(prog="acroex-export", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    adapt = sub.add_parser("adapt", help="continue masked-LM training on corpus text")
    adapt.add_argument("--base-model", required=True, help="checkpoint to start from")
    adapt.add_argument(
        "--corpus", action="append", required=True,
        help="corpus JSON file; repeat to pool several files",
    )
    adapt.add_argument("--out-dir", required=True, help="where to save the adapted checkpoint")
    adapt.add_argument("--epochs", type=int, default=3)
    adapt.add_argument("--mask-rate", type=float, default=0.15)
    adapt.add_argument("--lr", type=float, default=5.0e-5)
    adapt.add_argument("--batch-size", type=int, default=16)
    adapt.add_argument("--seed", type=int, default=0)
    adapt.add_argument("--max-length", type=int, default=None)

    export = sub.add_parser("export", help="write one embedding record per document")
    export.add_argument("--checkpoint", required=True, help="encoder checkpoint to embed with")
    export.add_argument("--corpus", required=True, help="corpus JSON file")
    export.add_argument("--out", required=True, help="embedding file to write")
    export.add_argument("--pooling", choices=POOLING_MODES, default="mean")
    export.add_argument("--seed", type=int, default=0)
    export.add_argument("--max-length", type=int, default=None)

    return parser


def _run_adapt(args) -> int:
    from .corpus_io import load_corpus_texts
    from .mlm import adapt_mlm

    config = ExporterConfig(
        base_model=args.base_model,
        pretrain_epochs=args.epochs,
        mask_rate=args.mask_rate,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        seed=args.seed,
        max_length=args.max_length,
    )
    texts = []
    for path in args.corpus:
        texts.extend(doc.text for doc in load_corpus_texts(path))
    saved = adapt_mlm(texts, config, args.out_dir)
    logger.info("adapted checkpoint at %s", saved)
    return 0


def _run_export(args) -> int:
    from .export import export_embeddings

    config = ExporterConfig(
        base_model=args.checkpoint,
        output_path=args.out,
        pooling=args.pooling,
        seed=args.seed,
        max_length=args.max_length,
    )
    export_embeddings(args.checkpoint, args.corpus, config)
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        if args.command == "adapt":
            return _run_adapt(args)
        return _run_export(args)
    except ExporterConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CorpusReadError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ExporterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
