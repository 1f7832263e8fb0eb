"""Full tagger: input vectors -> BiLSTM -> linear emissions -> CRF.

Owns model assembly, per-document prediction, the per-sentence training loss
with exact gradients for every parameter, and binary checkpoint persistence.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import crf as crf_mod
from .corpus import TAG_TO_ID, TAGS, Document, TaggedSentence, decode_tags, tokenize
from .embeddings import (
    OOV_BUCKETS,
    EmbeddingFile,
    FileProvider,
    HashedLookupParams,
    HashedProvider,
    accumulate_row_grads,
    new_hashed_lookup,
)
from .errors import ConfigError, DataFormatError
from .nn import (
    BiLstm,
    LinearParams,
    LstmParams,
    linear_backward,
    linear_forward,
    new_linear_params,
    new_lstm_params,
)
from .rng import SplitMix64

CHECKPOINT_MAGIC = b"AECK"
CHECKPOINT_VERSION = 1
PROVIDER_KINDS = ("hashed", "file")


class CheckpointFormatError(DataFormatError):
    """Checkpoint bytes do not follow the expected layout."""


class CheckpointVersionError(CheckpointFormatError):
    """Checkpoint format version is not supported."""


class CheckpointShapeError(CheckpointFormatError):
    """A stored tensor's shape disagrees with the checkpoint's own config."""


@dataclass
class ModelConfig:
    embedding_dim: int
    hidden_size: int = 256
    tag_count: int = len(TAGS)
    provider_kind: str = "hashed"
    seed: int = 0
    dropout: float = 0.0  # input-vector dropout rate, training only

    def validate(self) -> None:
        if self.embedding_dim < 1:
            raise ConfigError(f"embedding_dim must be >= 1, got {self.embedding_dim}")
        if self.hidden_size < 1:
            raise ConfigError(f"hidden_size must be >= 1, got {self.hidden_size}")
        if self.tag_count != len(TAGS):
            raise ConfigError(
                f"tag_count must be {len(TAGS)}, got {self.tag_count}"
            )
        if self.provider_kind not in PROVIDER_KINDS:
            raise ConfigError(
                f"provider_kind must be one of {PROVIDER_KINDS}, got "
                f"{self.provider_kind!r}"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")


@dataclass
class Model:
    config: ModelConfig
    lstm_fwd: LstmParams
    lstm_bwd: LstmParams
    emission: LinearParams
    crf: crf_mod.CrfParams
    lookup: HashedLookupParams | None = None
    embedding_file: EmbeddingFile | None = None  # not serialized
    metadata: dict = field(default_factory=lambda: {"epoch": 0, "best_dev_macro_f1": None})

    def named_parameters(self) -> dict[str, np.ndarray]:
        """Live references to every trainable tensor, in a fixed order."""
        out: dict[str, np.ndarray] = {}
        if self.lookup is not None:
            out["lookup.matrix"] = self.lookup.matrix
        out["lstm_fwd.w"] = self.lstm_fwd.w
        out["lstm_fwd.u"] = self.lstm_fwd.u
        out["lstm_fwd.b"] = self.lstm_fwd.b
        out["lstm_bwd.w"] = self.lstm_bwd.w
        out["lstm_bwd.u"] = self.lstm_bwd.u
        out["lstm_bwd.b"] = self.lstm_bwd.b
        out["emission.weight"] = self.emission.weight
        out["emission.bias"] = self.emission.bias
        out["crf.transitions"] = self.crf.transitions
        out["crf.start"] = self.crf.start
        out["crf.end"] = self.crf.end
        return out

    def attach_embedding_file(self, emb_file: EmbeddingFile) -> None:
        if self.config.provider_kind != "file":
            raise ConfigError("model does not use the file provider")
        if emb_file.dim != self.config.embedding_dim:
            raise ConfigError(
                f"embedding file dim {emb_file.dim} != model embedding_dim "
                f"{self.config.embedding_dim}"
            )
        self.embedding_file = emb_file

    def provider(self):
        if self.config.provider_kind == "hashed":
            return HashedProvider(self.lookup)
        if self.embedding_file is None:
            raise ConfigError(
                "file-provider model has no embedding file attached"
            )
        return FileProvider(self.embedding_file)


def new_model(config: ModelConfig, rng: SplitMix64, vocab: dict[str, int] | None = None) -> Model:
    """Fresh model; draw order is lookup, forward LSTM, backward LSTM, emission."""
    config.validate()
    lookup = None
    if config.provider_kind == "hashed":
        if vocab is None:
            raise ConfigError("hashed provider requires a vocabulary")
        lookup = new_hashed_lookup(vocab, config.embedding_dim, rng)
    lstm_fwd = new_lstm_params(config.embedding_dim, config.hidden_size, rng)
    lstm_bwd = new_lstm_params(config.embedding_dim, config.hidden_size, rng)
    emission = new_linear_params(2 * config.hidden_size, config.tag_count, rng)
    return Model(
        config=config,
        lstm_fwd=lstm_fwd,
        lstm_bwd=lstm_bwd,
        emission=emission,
        crf=crf_mod.new_crf_params(),
        lookup=lookup,
    )


def clone_model(model: Model) -> Model:
    """Independent copy sharing no arrays with the original."""
    lookup = None
    if model.lookup is not None:
        lookup = HashedLookupParams(
            vocab=dict(model.lookup.vocab), matrix=model.lookup.matrix.copy()
        )
    clone = Model(
        config=ModelConfig(**vars(model.config)),
        lstm_fwd=LstmParams(
            w=model.lstm_fwd.w.copy(), u=model.lstm_fwd.u.copy(), b=model.lstm_fwd.b.copy()
        ),
        lstm_bwd=LstmParams(
            w=model.lstm_bwd.w.copy(), u=model.lstm_bwd.u.copy(), b=model.lstm_bwd.b.copy()
        ),
        emission=LinearParams(
            weight=model.emission.weight.copy(), bias=model.emission.bias.copy()
        ),
        crf=crf_mod.CrfParams(
            transitions=model.crf.transitions.copy(),
            start=model.crf.start.copy(),
            end=model.crf.end.copy(),
        ),
        lookup=lookup,
        embedding_file=model.embedding_file,
        metadata=dict(model.metadata),
    )
    return clone


def emissions_for(model: Model, doc_id: str, tokens: list[str]) -> np.ndarray:
    """Per-token tag scores for prediction; no caches kept."""
    x = model.provider().vectors(doc_id, tokens)
    h = BiLstm(model.lstm_fwd, model.lstm_bwd).forward(x, keep_cache=False)
    return linear_forward(h, model.emission)


def predict_document(model: Model, doc: Document):
    """Decode one document into (short spans, long spans, tag strings)."""
    tokens = tokenize(doc.text)
    if not tokens:
        return [], [], []
    surfaces = [t.surface for t in tokens]
    e = emissions_for(model, doc.id, surfaces)
    path, _ = crf_mod.viterbi(model.crf, e)
    tags = [TAGS[i] for i in path]
    short, long_ = decode_tags(tokens, tags)
    return short, long_, tags


def sentence_loss_and_grads(
    model: Model, sentence: TaggedSentence, dropout_rng: SplitMix64 | None = None
) -> tuple[float, dict[str, np.ndarray]]:
    """Negative log-likelihood of one tagged sentence and exact gradients.

    The returned dict has one entry per named parameter. Input-vector dropout
    applies only when the config rate is positive and a generator is given.
    """
    if not sentence.tokens:
        raise ValueError(f"document {sentence.doc_id!r}: sentence has no tokens")
    surfaces = [t.surface for t in sentence.tokens]
    gold = [TAG_TO_ID[t] for t in sentence.tags]
    provider = model.provider()
    x = provider.vectors(sentence.doc_id, surfaces)

    drop_scale = None
    if model.config.dropout > 0.0 and dropout_rng is not None:
        p = model.config.dropout
        keep = dropout_rng.uniform(0.0, 1.0, x.shape) >= p
        drop_scale = keep.astype(np.float64) / (1.0 - p)
        x = x * drop_scale

    bilstm = BiLstm(model.lstm_fwd, model.lstm_bwd)
    h = bilstm.forward(x)
    e = linear_forward(h, model.emission)
    loss, grad_e, crf_grads = crf_mod.nll_and_grad(model.crf, e, gold)
    grad_h, emission_grads = linear_backward(h, model.emission, grad_e)
    grad_x, grads_fwd, grads_bwd = bilstm.backward(grad_h)
    if drop_scale is not None:
        grad_x = grad_x * drop_scale

    grads: dict[str, np.ndarray] = {}
    if model.config.provider_kind == "hashed":
        grad_matrix = np.zeros_like(model.lookup.matrix)
        accumulate_row_grads(grad_matrix, provider.row_ids(surfaces), grad_x)
        grads["lookup.matrix"] = grad_matrix
    grads["lstm_fwd.w"] = grads_fwd.w
    grads["lstm_fwd.u"] = grads_fwd.u
    grads["lstm_fwd.b"] = grads_fwd.b
    grads["lstm_bwd.w"] = grads_bwd.w
    grads["lstm_bwd.u"] = grads_bwd.u
    grads["lstm_bwd.b"] = grads_bwd.b
    grads["emission.weight"] = emission_grads.weight
    grads["emission.bias"] = emission_grads.bias
    grads["crf.transitions"] = crf_grads.transitions
    grads["crf.start"] = crf_grads.start
    grads["crf.end"] = crf_grads.end
    return loss, grads


def _expected_shapes(config: ModelConfig, vocab_size: int | None) -> dict[str, tuple[int, ...]]:
    d, h, t = config.embedding_dim, config.hidden_size, config.tag_count
    shapes: dict[str, tuple[int, ...]] = {}
    if config.provider_kind == "hashed":
        shapes["lookup.matrix"] = (vocab_size + OOV_BUCKETS, d)
    shapes["lstm_fwd.w"] = (4 * h, d)
    shapes["lstm_fwd.u"] = (4 * h, h)
    shapes["lstm_fwd.b"] = (4 * h,)
    shapes["lstm_bwd.w"] = (4 * h, d)
    shapes["lstm_bwd.u"] = (4 * h, h)
    shapes["lstm_bwd.b"] = (4 * h,)
    shapes["emission.weight"] = (t, 2 * h)
    shapes["emission.bias"] = (t,)
    shapes["crf.transitions"] = (t, t)
    shapes["crf.start"] = (t,)
    shapes["crf.end"] = (t,)
    return shapes


def save_checkpoint(model: Model, path) -> None:
    """Write config, metadata, vocabulary, and every tensor to one binary file."""
    vocab_list = None
    if model.lookup is not None:
        vocab_list = list(model.lookup.vocab)
    block = json.dumps(
        {
            "config": {
                "embedding_dim": model.config.embedding_dim,
                "hidden_size": model.config.hidden_size,
                "tag_count": model.config.tag_count,
                "provider_kind": model.config.provider_kind,
                "seed": model.config.seed,
                "dropout": model.config.dropout,
            },
            "metadata": model.metadata,
            "vocab": vocab_list,
        },
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(block)))
        fh.write(block)
        for name, tensor in model.named_parameters().items():
            name_bytes = name.encode("utf-8")
            fh.write(struct.pack("<I", len(name_bytes)))
            fh.write(name_bytes)
            fh.write(struct.pack("<I", tensor.ndim))
            for dim in tensor.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(tensor.astype("<f8", copy=False).tobytes(order="C"))


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointFormatError(
                f"{self.path}: truncated checkpoint at offset {self.pos}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def done(self) -> bool:
        return self.pos >= len(self.data)


def load_checkpoint(path) -> Model:
    """Rebuild a model bit-identical to the one saved at this path."""
    with open(path, "rb") as fh:
        data = fh.read()
    r = _Reader(data, path)
    if r.take(4) != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"{path}: not a checkpoint file (bad magic)")
    version = r.u32()
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"{path}: unsupported checkpoint version {version}, expected "
            f"{CHECKPOINT_VERSION}"
        )
    block = r.take(r.u32())
    try:
        header = json.loads(block.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointFormatError(f"{path}: bad config block: {exc}") from exc
    for key in ("config", "metadata", "vocab"):
        if key not in header:
            raise CheckpointFormatError(f"{path}: config block missing {key!r}")
    try:
        config = ModelConfig(**header["config"])
    except TypeError as exc:
        raise CheckpointFormatError(f"{path}: bad config fields: {exc}") from exc
    try:
        config.validate()
    except ConfigError as exc:
        raise CheckpointFormatError(f"{path}: invalid config: {exc}") from exc

    vocab_list = header["vocab"]
    vocab = None
    if config.provider_kind == "hashed":
        if not isinstance(vocab_list, list):
            raise CheckpointFormatError(f"{path}: hashed checkpoint has no vocabulary")
        vocab = {key: i for i, key in enumerate(vocab_list)}
        if len(vocab) != len(vocab_list):
            raise CheckpointFormatError(f"{path}: vocabulary has duplicate keys")

    expected = _expected_shapes(config, None if vocab is None else len(vocab))
    tensors: dict[str, np.ndarray] = {}
    while not r.done():
        name = r.take(r.u32()).decode("utf-8")
        if name in tensors:
            raise CheckpointFormatError(f"{path}: duplicate tensor {name!r}")
        if name not in expected:
            raise CheckpointFormatError(f"{path}: unexpected tensor {name!r}")
        rank = r.u32()
        shape = tuple(r.u32() for _ in range(rank))
        if shape != expected[name]:
            raise CheckpointShapeError(
                f"{path}: tensor {name!r} has shape {shape}, config implies "
                f"{expected[name]}"
            )
        n_values = int(np.prod(shape, dtype=np.int64)) if shape else 1
        payload = r.take(8 * n_values)
        tensors[name] = np.frombuffer(payload, dtype="<f8").reshape(shape).copy()
    missing = sorted(set(expected) - set(tensors))
    if missing:
        raise CheckpointFormatError(f"{path}: missing tensors {missing}")

    lookup = None
    if config.provider_kind == "hashed":
        lookup = HashedLookupParams(vocab=vocab, matrix=tensors["lookup.matrix"])
    return Model(
        config=config,
        lstm_fwd=LstmParams(
            w=tensors["lstm_fwd.w"], u=tensors["lstm_fwd.u"], b=tensors["lstm_fwd.b"]
        ),
        lstm_bwd=LstmParams(
            w=tensors["lstm_bwd.w"], u=tensors["lstm_bwd.u"], b=tensors["lstm_bwd.b"]
        ),
        emission=LinearParams(
            weight=tensors["emission.weight"], bias=tensors["emission.bias"]
        ),
        crf=crf_mod.CrfParams(
            transitions=tensors["crf.transitions"],
            start=tensors["crf.start"],
            end=tensors["crf.end"],
        ),
        lookup=lookup,
        metadata=dict(header["metadata"]),
    )
