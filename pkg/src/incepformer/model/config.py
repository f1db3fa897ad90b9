"""Architecture hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

from ..errors import ConfigError

# Continuations used only when the ablation asks for more blocks than the
# configured kernel lists hold (the 4-block defaults are never extended).
SCALE_KERNEL_EXTENSION = (13, 21)
FUSION_KERNEL_EXTENSION = (8, 5)
MAX_SCALE_BLOCKS = 6


@dataclass
class ModelConfig:
    n_channels: int = 9
    n_bands: int = 3
    n_classes: int = 40
    n_samples: int = 250
    scale_kernels: list[int] = field(default_factory=lambda: [1, 3, 5, 8])
    fusion_kernels: list[int] = field(default_factory=lambda: [32, 16, 11])
    pool_size: int = 2
    filters_per_block: int = 16
    n_scale_blocks: int = 4
    include_x1_in_concat: bool = False
    dropout: float = 0.5
    d_model: int = 64
    n_heads: int = 4
    n_encoder_layers: int = 2
    ffn_hidden: int = 128
    ffn_dropout: float = 0.1
    max_len: int | None = None
    bn_momentum: float = 0.1
    l2_coeff: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        self.scale_kernels = [int(k) for k in self.scale_kernels]
        self.fusion_kernels = [int(k) for k in self.fusion_kernels]
        self.validate()

    def validate(self) -> None:
        if self.d_model % self.n_heads:
            raise ConfigError(f"d_model={self.d_model} must be divisible by n_heads={self.n_heads}")
        if not 1 <= self.n_scale_blocks <= MAX_SCALE_BLOCKS:
            raise ConfigError(f"n_scale_blocks must lie in [1, {MAX_SCALE_BLOCKS}], got {self.n_scale_blocks}")
        for name in ("n_channels", "n_bands", "n_samples", "filters_per_block", "d_model", "ffn_hidden",
                     "pool_size", "n_encoder_layers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.n_classes < 2:
            raise ConfigError("n_classes must be at least 2")
        if any(k < 1 for k in self.scale_kernels + self.fusion_kernels):
            raise ConfigError("kernel sizes must be positive")
        for name in ("dropout", "ffn_dropout"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1)")
        if self.max_len is not None and self.max_len < self.n_samples:
            raise ConfigError("max_len must cover n_samples")

    @property
    def fused_channels(self) -> int:
        return self.n_bands * self.n_channels

    @property
    def positional_capacity(self) -> int:
        return self.max_len or self.n_samples

    def block_kernels(self) -> list[int]:
        """Kernel sizes of the parallel scale blocks x1..xk."""
        return (self.scale_kernels + list(SCALE_KERNEL_EXTENSION))[: self.n_scale_blocks]

    def chain_kernels(self) -> list[int]:
        """Kernel sizes of the k-1 cascaded fusion blocks."""
        return (self.fusion_kernels + list(FUSION_KERNEL_EXTENSION))[: self.n_scale_blocks - 1]

    def uses_x1(self) -> bool:
        return self.n_scale_blocks == 1 or self.include_x1_in_concat

    @property
    def temporal_channels(self) -> int:
        """Channel count of the temporal module's concatenated output."""
        f = self.filters_per_block
        pooled = 2 * self.fused_channels
        if self.n_scale_blocks == 1:
            return f + pooled
        return f * self.n_scale_blocks + pooled + (f if self.include_x1_in_concat else 0)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**data)
