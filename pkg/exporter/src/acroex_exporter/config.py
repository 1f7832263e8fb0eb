"""Run configuration for adaptation and export."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ExporterConfigError

POOLING_MODES = ("mean", "first-subtoken")


@dataclass
class ExporterConfig:
    """Knobs for both stages.

    base_model names the starting checkpoint (a local directory or a model-hub
    id). pretrain_epochs counts full masked-LM passes over the corpus text;
    zero means the base checkpoint is used as is. The optimizer settings are
    conventional defaults and freely overridable.
    """

    base_model: str
    output_path: str = "embeddings.bin"
    pretrain_epochs: int = 3
    mask_rate: float = 0.15
    pooling: str = "mean"
    seed: int = 0
    learning_rate: float = 5.0e-5
    batch_size: int = 16
    max_length: int | None = None  # None: the tokenizer's own cap

    def validate(self) -> None:
        if not self.base_model:
            raise ExporterConfigError("base_model must be set")
        if self.pretrain_epochs < 0:
            raise ExporterConfigError(
                f"pretrain_epochs must be >= 0, got {self.pretrain_epochs}"
            )
        if not 0.0 < self.mask_rate < 1.0:
            raise ExporterConfigError(
                f"mask_rate must be in (0, 1), got {self.mask_rate}"
            )
        if self.pooling not in POOLING_MODES:
            raise ExporterConfigError(
                f"pooling must be one of {POOLING_MODES}, got {self.pooling!r}"
            )
        if self.learning_rate <= 0:
            raise ExporterConfigError(
                f"learning_rate must be > 0, got {self.learning_rate}"
            )
        if self.batch_size < 1:
            raise ExporterConfigError(
                f"batch_size must be >= 1, got {self.batch_size}"
            )
        if self.max_length is not None and self.max_length < 8:
            raise ExporterConfigError(
                f"max_length must be >= 8, got {self.max_length}"
            )
