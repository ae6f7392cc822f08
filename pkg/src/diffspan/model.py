"""Encoder + decoder composition and its configuration."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .decoder import SpanDecoder
from .encoder import VideoTextEncoder
from .nn import Module


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters.

    Defaults are the full-scale transformer settings (4 encoder layers,
    2 decoder layers, hidden 256, 8 heads, FFN 1024, dropout 0.1); the
    desk-scale synthetic runs shrink ``d``/``encoder_layers`` via config.
    """

    d_v: int = 32
    d_q: int = 32
    d: int = 256
    k: int = 64
    encoder_layers: int = 4
    decoder_layers: int = 2
    heads: int = 8
    ffn_dim: int = 1024
    max_words: int = 32
    dropout: float = 0.1
    span_mode: str = "add"
    time_every_layer: bool = False
    zero_init_heads: bool = True
    dtype: str = "float32"

    def numpy_dtype(self) -> np.dtype:
        return np.dtype(self.dtype)

    def to_dict(self) -> dict:
        return asdict(self)


class SpanDiffusionModel(Module):
    """The full conditional generator: encode once, refine spans repeatedly."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        super().__init__()
        self.config = config
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x6D6F64]))
        dtype = config.numpy_dtype()
        self.encoder = VideoTextEncoder(
            d_v=config.d_v, d_q=config.d_q, d=config.d,
            n_layers=config.encoder_layers, heads=config.heads,
            ffn_dim=config.ffn_dim, max_words=config.max_words,
            dropout=config.dropout, rng=rng, dtype=dtype,
        )
        self.decoder = SpanDecoder(
            d=config.d, n_layers=config.decoder_layers, heads=config.heads,
            ffn_dim=config.ffn_dim, dropout=config.dropout, rng=rng, dtype=dtype,
            span_mode=config.span_mode, time_every_layer=config.time_every_layer,
            zero_init_heads=config.zero_init_heads,
        )
        self._dropout_rng = rng
        for module in self._iter_modules():
            if hasattr(module, "rng"):
                module.rng = rng

    def _iter_modules(self):
        stack: list[Module] = [self]
        while stack:
            module = stack.pop()
            yield module
            stack.extend(child for _, child in module._children())

    @property
    def w_min(self) -> float:
        """Minimum span width: one clip."""
        return 1.0 / self.config.k

    def encode_examples(self, videos: np.ndarray, queries: np.ndarray, mask: np.ndarray):
        """Batched convenience path: [B, K, d_v] + [B, N, d_q] + [B, N] -> memory."""
        v_proj, q_proj = self.encoder.project_and_position(videos, queries)
        return self.encoder.encode(v_proj, q_proj, mask)

    def reseed_dropout(self, seed: int) -> None:
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x64726F70]))
        for module in self._iter_modules():
            if hasattr(module, "rng"):
                module.rng = rng
        self._dropout_rng = rng
