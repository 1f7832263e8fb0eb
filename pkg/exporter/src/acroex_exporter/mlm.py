"""Masked-language-model adaptation of a pretrained encoder on corpus text."""

from __future__ import annotations

import logging
import random

import torch
from transformers import (
    AutoModelForMaskedLM,
    AutoTokenizer,
    DataCollatorForLanguageModeling,
)

from .config import ExporterConfig
from .errors import ExporterError

logger = logging.getLogger(__name__)


def _effective_max_length(tokenizer, config: ExporterConfig) -> int:
    cap = tokenizer.model_max_length
    if config.max_length is not None:
        cap = min(cap, config.max_length)
    # some tokenizers report a sentinel "no limit" value
    if cap is None or cap > 1_000_000:
        cap = 512
    return int(cap)


def _encode_texts(tokenizer, texts, max_length: int) -> list[dict]:
    features = []
    for text in texts:
        ids = tokenizer(text, truncation=True, max_length=max_length)["input_ids"]
        features.append({"input_ids": ids})
    return features


def _batches(features, batch_size, order):
    for lo in range(0, len(order), batch_size):
        yield [features[i] for i in order[lo : lo + batch_size]]


def _is_oom(exc: RuntimeError) -> bool:
    return "out of memory" in str(exc).lower()


def _train_one_epoch(model, collator, features, order, optimizer, batch_size):
    total = 0.0
    steps = 0
    for batch in _batches(features, batch_size, order):
        out = model(**collator(batch))
        out.loss.backward()
        optimizer.step()
        optimizer.zero_grad()
        total += float(out.loss.detach())
        steps += 1
    return total / max(steps, 1)


def adapt_mlm(corpus_texts, config: ExporterConfig, out_dir) -> str:
    """Continue masked-LM training for config.pretrain_epochs; save to out_dir.

    Zero epochs short-circuits: the base checkpoint path is returned untouched
    and nothing is written. On an out-of-memory failure the batch size halves
    and the epoch restarts, down to batch size 1.
    """
    config.validate()
    if config.pretrain_epochs == 0:
        return str(config.base_model)
    texts = [t for t in corpus_texts if t.strip()]
    if not texts:
        raise ExporterError("no non-empty corpus texts to adapt on")

    torch.manual_seed(config.seed)
    tokenizer = AutoTokenizer.from_pretrained(config.base_model)
    model = AutoModelForMaskedLM.from_pretrained(config.base_model)
    model.train()
    collator = DataCollatorForLanguageModeling(
        tokenizer=tokenizer, mlm_probability=config.mask_rate, seed=config.seed
    )
    features = _encode_texts(tokenizer, texts, _effective_max_length(tokenizer, config))
    optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)
    shuffler = random.Random(config.seed)

    batch_size = config.batch_size
    epoch = 1
    while epoch <= config.pretrain_epochs:
        order = list(range(len(features)))
        shuffler.shuffle(order)
        try:
            mean_loss = _train_one_epoch(
                model, collator, features, order, optimizer, batch_size
            )
        except RuntimeError as exc:
            if _is_oom(exc) and batch_size > 1:
                batch_size = max(1, batch_size // 2)
                logger.warning(
                    "out of memory; retrying epoch %d with batch size %d",
                    epoch,
                    batch_size,
                )
                optimizer.zero_grad()
                continue
            raise
        logger.info("adaptation epoch %d/%d: mean masked-LM loss %.4f",
                    epoch, config.pretrain_epochs, mean_loss)
        epoch += 1

    model.save_pretrained(out_dir)
    tokenizer.save_pretrained(out_dir)
    return str(out_dir)


def heldout_mlm_loss(checkpoint, texts, config: ExporterConfig) -> float:
    """Deterministic masked-token cross-entropy of a checkpoint on texts.

    Masking uses the configured seed, so two checkpoints evaluated on the
    same texts see identical mask positions and are directly comparable.
    """
    texts = [t for t in texts if t.strip()]
    if not texts:
        raise ExporterError("no non-empty texts to evaluate on")
    tokenizer = AutoTokenizer.from_pretrained(checkpoint)
    model = AutoModelForMaskedLM.from_pretrained(checkpoint)
    model.eval()
    collator = DataCollatorForLanguageModeling(
        tokenizer=tokenizer, mlm_probability=config.mask_rate, seed=config.seed
    )
    features = _encode_texts(tokenizer, texts, _effective_max_length(tokenizer, config))
    order = list(range(len(features)))
    loss_sum = 0.0
    masked = 0
    with torch.no_grad():
        for batch in _batches(features, config.batch_size, order):
            inputs = collator(batch)
            out = model(**inputs)
            n = int((inputs["labels"] != -100).sum())
            loss_sum += float(out.loss) * n
            masked += n
    if masked == 0:
        raise ExporterError("masking produced no masked tokens; texts too short")
    return loss_sum / masked
