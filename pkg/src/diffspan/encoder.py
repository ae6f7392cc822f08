"""Video-centered multi-modal encoder.

Video and query features are projected to a shared hidden size and tagged
with positional information (a fixed sine table for clips, a learnable table
for words). Each encoder layer then runs clip self-attention, clip-to-word
cross-attention (queries from video, keys/values from text, padding masked
out) and a feed-forward block, all post-normalized. Only the video stream is
ever updated; the output is the text-enhanced clip memory.

Parameters are read-only during inference, so concurrent encode calls are
safe; training updates are single-writer.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .nn import Dropout, FeedForward, LayerNorm, Linear, Module, MultiHeadAttention, sine_positions


class EncoderLayer(Module):
    def __init__(self, d: int, heads: int, ffn_dim: int, dropout: float,
                 rng: np.random.Generator, dtype):
        super().__init__()
        self.self_attn = MultiHeadAttention(d, heads, rng, dtype, dropout)
        self.cross_attn = MultiHeadAttention(d, heads, rng, dtype, dropout)
        self.ffn = FeedForward(d, ffn_dim, rng, dtype, dropout)
        self.norm_self = LayerNorm(d, dtype)
        self.norm_cross = LayerNorm(d, dtype)
        self.norm_ffn = LayerNorm(d, dtype)
        self.drop = Dropout(dropout)

    def __call__(self, video: Tensor, text: Tensor, text_mask: np.ndarray) -> tuple[Tensor, Tensor]:
        attended, _ = self.self_attn(video, video, video)
        video = self.norm_self(video + self.drop(attended))
        fused, cross_weights = self.cross_attn(video, text, text, key_mask=text_mask)
        video = self.norm_cross(video + self.drop(fused))
        video = self.norm_ffn(video + self.drop(self.ffn(video)))
        return video, cross_weights


class VideoTextEncoder(Module):
    """Projects both modalities and fuses text into the clip sequence."""

    def __init__(self, d_v: int, d_q: int, d: int, n_layers: int, heads: int,
                 ffn_dim: int, max_words: int, dropout: float,
                 rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.d_v, self.d_q, self.d = d_v, d_q, d
        self.max_words = max_words
        self.dtype = np.dtype(dtype)
        self.proj_video = Linear(d_v, d, rng, dtype)
        self.proj_text = Linear(d_q, d, rng, dtype)
        # Learnable word-position table; clip positions use the sine table.
        self.pos_text = ad.parameter(rng.normal(0.0, 0.02, size=(max_words, d)).astype(dtype))
        self.layers = [EncoderLayer(d, heads, ffn_dim, dropout, rng, dtype) for _ in range(n_layers)]

    # -- helpers -----------------------------------------------------------
    def _check_batched(self, video, query) -> tuple[np.ndarray, np.ndarray, bool]:
        video = np.asarray(video)
        query = np.asarray(query)
        single = video.ndim == 2
        if single:
            video = video[None]
            query = query[None]
        if video.ndim != 3 or video.shape[-1] != self.d_v:
            raise ValueError(f"video features must be [K, {self.d_v}], got {video.shape}")
        if query.ndim != 3 or query.shape[-1] != self.d_q:
            raise ValueError(f"query features must be [N, {self.d_q}], got {query.shape}")
        if query.shape[1] > self.max_words:
            raise ValueError(f"query has {query.shape[1]} tokens, max_words={self.max_words}")
        return video, query, single

    def project_and_position(self, video, query) -> tuple[Tensor, Tensor]:
        """Affine projection to the hidden size plus positional embeddings.

        Accepts a single example ([K, d_v], [N, d_q]) or batched inputs with
        a leading axis.
        """
        video, query, single = self._check_batched(video, query)
        k, n = video.shape[1], query.shape[1]
        v_in = ad.as_tensor(video.astype(self.dtype, copy=False))
        q_in = ad.as_tensor(query.astype(self.dtype, copy=False))
        pos_v = ad.as_tensor(sine_positions(np.arange(k), self.d).astype(self.dtype))
        v_proj = self.proj_video(v_in) + pos_v
        q_proj = self.proj_text(q_in) + self.pos_text[:n]
        if single:
            return v_proj[0], q_proj[0]
        return v_proj, q_proj

    def _run(self, v_proj: Tensor, q_proj: Tensor, mask: np.ndarray) -> tuple[Tensor, list[Tensor]]:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != v_proj.shape[:-2] + q_proj.shape[-2:-1]:
            raise ValueError(f"mask shape {mask.shape} does not match query tokens")
        if not mask.any(axis=-1).all():
            raise ValueError("every example needs at least one unmasked query token")
        video = v_proj
        weights = []
        for layer in self.layers:
            video, cross = layer(video, q_proj, mask)
            weights.append(cross)
        return video, weights

    def encode(self, v_proj: Tensor, q_proj: Tensor, mask) -> Tensor:
        """Run the layer stack; query features are never updated."""
        single = v_proj.ndim == 2
        if single:
            v_proj = v_proj.reshape((1, *v_proj.shape))
            q_proj = q_proj.reshape((1, *q_proj.shape))
            mask = np.asarray(mask, dtype=bool)[None]
        memory, _ = self._run(v_proj, q_proj, mask)
        return memory[0] if single else memory

    def attention_weights(self, v_proj: Tensor, q_proj: Tensor, mask) -> np.ndarray:
        """Cross-attention maps, stacked as [n_layers, heads, K, N].

        Each row over word positions sums to 1; padded columns are exactly 0.
        """
        single = v_proj.ndim == 2
        if single:
            v_proj = v_proj.reshape((1, *v_proj.shape))
            q_proj = q_proj.reshape((1, *q_proj.shape))
            mask = np.asarray(mask, dtype=bool)[None]
        _, weights = self._run(v_proj, q_proj, mask)
        stacked = np.stack([w.value for w in weights], axis=-4)  # [B, L, h, K, N]
        return stacked[0] if single else stacked
