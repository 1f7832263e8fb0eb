"""Mini-batch maximum-likelihood training with Adam and early stopping.

Each epoch shuffles the training sentences with a seeded generator, averages
gradients over each batch, clips them by global norm, and applies Adam. When a
dev set is given, the dev overall macro-F1 drives early stopping and best-model
selection; the returned model is the best one seen, not the last.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass

import numpy as np

from . import model as model_mod
from .corpus import Document, SLICE_NAMES, sentences_from_documents, slice_key
from .embeddings import EmbeddingFile, build_vocab
from .errors import ConfigError, NonFiniteLossError
from .model import Model, ModelConfig, clone_model, new_model
from .rng import SplitMix64
from .scorer import ScoreReport, score_corpus

logger = logging.getLogger(__name__)

TRAIN_MODES = ("joint", "per-language")
# learning-rate magnitude for fine-tuning a pretrained encoder end to end;
# far too small for from-scratch training, hence not the default
FINETUNE_LEARNING_RATE = 5.0e-6


@dataclass
class TrainConfig:
    epochs: int = 20
    learning_rate: float = 1.0e-3
    batch_size: int = 32
    patience: int = 5
    clip_norm: float = 5.0
    mode: str = "joint"
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1.0e-8

    def validate(self) -> None:
        for name in ("epochs", "batch_size", "patience"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("learning_rate", "clip_norm", "eps"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.patience > self.epochs:
            raise ConfigError(
                f"patience {self.patience} must not exceed epochs {self.epochs}"
            )
        if self.mode not in TRAIN_MODES:
            raise ConfigError(f"mode must be one of {TRAIN_MODES}, got {self.mode!r}")
        for name in ("beta1", "beta2"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must be in (0, 1), got {getattr(self, name)}")


@dataclass
class EpochReport:
    epoch: int  # 1-based
    train_nll: float
    dev: dict[str, ScoreReport | None] | None  # keys: SLICE_NAMES + "overall"


class AdamState:
    """First/second moment accumulators, one pair per named tensor."""

    def __init__(self, params: dict[str, np.ndarray], config: TrainConfig):
        self.config = config
        self.step = 0
        self.m = {name: np.zeros_like(p) for name, p in params.items()}
        self.v = {name: np.zeros_like(p) for name, p in params.items()}

    def update(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        c = self.config
        self.step += 1
        bc1 = 1.0 - c.beta1**self.step
        bc2 = 1.0 - c.beta2**self.step
        for name, p in params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            p -= c.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + c.eps)


def global_norm(grads: dict[str, np.ndarray]) -> float:
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g * g))
    return float(np.sqrt(total))


def clip_by_global_norm(grads: dict[str, np.ndarray], clip_norm: float) -> float:
    """Scale all gradients in place so their joint norm is at most clip_norm."""
    norm = global_norm(grads)
    if norm > clip_norm:
        scale = clip_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def evaluate(model: Model, docs: list[Document]) -> dict[str, ScoreReport | None]:
    """Per-slice reports plus an 'overall' report pooling every document."""
    if not docs:
        raise ValueError("evaluate needs at least one document")
    preds = []
    for doc in docs:
        short, long_, _ = model_mod.predict_document(model, doc)
        preds.append(dataclasses.replace(doc, short_spans=short, long_spans=long_))
    out: dict[str, ScoreReport | None] = {}
    for name in SLICE_NAMES:
        pairs = [(p, g) for p, g in zip(preds, docs) if slice_key(g) == name]
        if pairs:
            out[name] = score_corpus([p for p, _ in pairs], [g for _, g in pairs])
        else:
            out[name] = None
    out["overall"] = score_corpus(preds, docs)
    return out


def train(
    train_docs: list[Document],
    dev_docs: list[Document],
    model_config: ModelConfig,
    train_config: TrainConfig,
    embedding_file: EmbeddingFile | None = None,
) -> tuple[Model, list[EpochReport]]:
    """Train a fresh model; returns (best model, one report per epoch run)."""
    model_config.validate()
    train_config.validate()
    sentences = [s for s in sentences_from_documents(train_docs) if s.tokens]
    if not sentences:
        raise ConfigError("training set has no documents with tokens")

    rng = SplitMix64(train_config.seed)
    vocab = None
    if model_config.provider_kind == "hashed":
        vocab = build_vocab([t.surface for t in s.tokens] for s in sentences)
    model = new_model(model_config, rng, vocab)
    if model_config.provider_kind == "file":
        if embedding_file is None:
            raise ConfigError("file provider selected but no embedding file given")
        model.attach_embedding_file(embedding_file)

    adam = AdamState(model.named_parameters(), train_config)
    dropout_rng = rng if model_config.dropout > 0.0 else None
    reports: list[EpochReport] = []
    best: Model | None = None
    best_f1 = -np.inf
    best_epoch = 0

    order = np.arange(len(sentences))
    for epoch in range(1, train_config.epochs + 1):
        rng.shuffle(order)
        total_nll = 0.0
        for batch_index, lo in enumerate(range(0, len(order), train_config.batch_size)):
            batch = [sentences[i] for i in order[lo : lo + train_config.batch_size]]
            summed: dict[str, np.ndarray] | None = None
            batch_nll = 0.0
            for sentence in batch:
                loss, grads = model_mod.sentence_loss_and_grads(
                    model, sentence, dropout_rng
                )
                if not np.isfinite(loss):
                    ids = [s.doc_id for s in batch]
                    raise NonFiniteLossError(
                        f"non-finite loss {loss} at epoch {epoch}, batch "
                        f"{batch_index}, documents {ids}"
                    )
                batch_nll += loss
                if summed is None:
                    summed = grads
                else:
                    for name, g in grads.items():
                        summed[name] += g
            for g in summed.values():
                g /= len(batch)
            clip_by_global_norm(summed, train_config.clip_norm)
            adam.update(model.named_parameters(), summed)
            total_nll += batch_nll

        report = EpochReport(
            epoch=epoch,
            train_nll=total_nll / len(sentences),
            dev=evaluate(model, dev_docs) if dev_docs else None,
        )
        reports.append(report)
        if report.dev is None:
            logger.info("epoch %d: train nll %.6f", epoch, report.train_nll)
            continue
        overall = report.dev["overall"].macro.f1
        logger.info(
            "epoch %d: train nll %.6f, dev macro F1 %.4f",
            epoch,
            report.train_nll,
            overall,
        )
        if overall > best_f1:
            best_f1 = overall
            best_epoch = epoch
            best = clone_model(model)
            best.metadata = {"epoch": epoch, "best_dev_macro_f1": overall}
        elif epoch - best_epoch >= train_config.patience:
            logger.info(
                "stopping at epoch %d: no improvement since epoch %d", epoch, best_epoch
            )
            break

    if best is None:
        best = clone_model(model)
        best.metadata = {"epoch": train_config.epochs, "best_dev_macro_f1": None}
    return best, reports


def _prf_dict(prf) -> dict:
    return {"precision": prf.precision, "recall": prf.recall, "f1": prf.f1}


def _report_dict(report: ScoreReport | None):
    if report is None:
        return None
    return {
        "short": _prf_dict(report.short),
        "long": _prf_dict(report.long),
        "macro": _prf_dict(report.macro),
    }


def epoch_report_to_dict(report: EpochReport) -> dict:
    dev = None
    if report.dev is not None:
        dev = {name: _report_dict(r) for name, r in report.dev.items()}
    return {"epoch": report.epoch, "train_nll": report.train_nll, "dev": dev}


def write_metrics(reports: list[EpochReport], path) -> None:
    """One structured record per line, one line per epoch."""
    with open(path, "w", encoding="utf-8") as fh:
        for report in reports:
            fh.write(
                json.dumps(epoch_report_to_dict(report), sort_keys=True) + "\n"
            )


@dataclass
class GridRow:
    label: str
    cells: dict[str, ScoreReport | None]  # keys: SLICE_NAMES + "overall"


def run_experiment_grid(
    train_docs: list[Document],
    dev_docs: list[Document],
    model_config: ModelConfig,
    train_config: TrainConfig,
    modes=("joint",),
    pretrain_tags=(0,),
    embedding_paths: dict[int, object] | None = None,
) -> list[GridRow]:
    """Train one row per (embedding tag, mode); per-language rows merge 7 models.

    With the hashed provider the tag axis collapses to a single untagged
    column. With the file provider every requested tag needs an entry in
    embedding_paths; its file is used for both training and evaluation.
    """
    from .embeddings import open_embedding_file

    for mode in modes:
        if mode not in TRAIN_MODES:
            raise ConfigError(f"unknown grid mode {mode!r}")

    if model_config.provider_kind == "hashed":
        providers = [("hashed", None)]
    else:
        providers = []
        for tag in pretrain_tags:
            if not embedding_paths or tag not in embedding_paths:
                raise ConfigError(f"no embedding file for pretraining tag {tag}")
            providers.append((f"ep{tag}", open_embedding_file(embedding_paths[tag])))

    rows: list[GridRow] = []
    for tag_label, emb_file in providers:
        for mode in modes:
            cfg = dataclasses.replace(train_config, mode=mode)
            if mode == "joint":
                best, _ = train(train_docs, dev_docs, model_config, cfg, emb_file)
                cells = evaluate(best, dev_docs) if dev_docs else {}
            else:
                cells = {name: None for name in SLICE_NAMES}
                cells["overall"] = None  # separate models; no joint overall score
                for name in SLICE_NAMES:
                    slice_train = [d for d in train_docs if slice_key(d) == name]
                    slice_dev = [d for d in dev_docs if slice_key(d) == name]
                    if not slice_train or not slice_dev:
                        continue
                    best, _ = train(slice_train, slice_dev, model_config, cfg, emb_file)
                    cells[name] = evaluate(best, slice_dev)[name]
            rows.append(GridRow(label=f"{mode}/{tag_label}", cells=cells))
    return rows


def format_grid(rows: list[GridRow]) -> str:
    """Aligned table: one row per grid entry, macro F1 per slice column."""
    columns = list(SLICE_NAMES) + ["overall"]
    header = f"{'row':<20}" + "".join(f"{c:>10}" for c in columns)
    lines = [header]
    for row in rows:
        cells = []
        for c in columns:
            report = row.cells.get(c)
            cells.append(f"{report.macro.f1:>10.3f}" if report else f"{'-':>10}")
        lines.append(f"{row.label:<20}" + "".join(cells))
    return "\n".join(lines)
