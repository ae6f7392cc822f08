"""Span refining decoder.

Each noisy span is turned into a feature vector by cropping the clip memory
under the span, soft-pooling the cropped rows (softmax weights from a d->1
map) and adding a location embedding of the (center, width) pair. A stack of
decoder layers then updates these query features - self-attention among
queries in the first layer, cross-attention against the span features of the
previously updated spans afterwards - and a per-layer linear head emits
(delta center, delta width) corrections applied additively in normalized
space, followed by a span clamp. The per-layer span estimates are all
returned so every layer can be supervised.

Gradients deliberately do NOT flow through the discrete crop indices: the
segment boundaries are integer clip indices computed from detached span
values. The continuous paths (location embedding, pooled features, the
additive delta chain) carry all the learning signal.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .nn import (
    Dropout,
    FeedForward,
    LayerNorm,
    Linear,
    Module,
    MultiHeadAttention,
    masked_softmax,
    sine_positions,
)

SPAN_MODES = ("add", "feature", "cat-fn")


def crop_indices(span_cw, k: int) -> tuple[int, int]:
    """Clip-index window of a (center, width) span over ``k`` clips.

    ``i0 = floor(start * k)``, ``i1 = ceil(end * k)``, clipped to [0, k] with
    ``i1 >= i0 + 1`` enforced (extend i1, else retract i0 at the boundary).
    """
    i0, i1 = _crop_bounds(np.asarray(span_cw, dtype=np.float64), k)
    return int(i0), int(i1)


def _crop_bounds(spans_cw: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    # Non-finite spans (a poisoned forward pass) still need defined windows;
    # the non-finite loss check aborts the step before any update happens.
    spans_cw = np.nan_to_num(spans_cw, nan=0.0, posinf=1.0, neginf=0.0)
    start = spans_cw[..., 0] - spans_cw[..., 1] / 2.0
    end = spans_cw[..., 0] + spans_cw[..., 1] / 2.0
    i0 = np.clip(np.floor(start * k), 0, k).astype(np.int64)
    i1 = np.clip(np.ceil(end * k), 0, k).astype(np.int64)
    short = i1 < i0 + 1
    i1 = np.where(short & (i0 < k), i0 + 1, i1)
    i0 = np.where(i1 < i0 + 1, i1 - 1, i0)
    return i0, i1


def clamp_cw(x: Tensor, w_min: float) -> Tensor:
    """Differentiable (center, width) clamp with the span-repair semantics.

    Mirrors :func:`diffspan.spans.clamp_span` (reorder, clip to [0, 1], width
    floor with boundary shift) using piecewise-linear tape ops, so gradients
    pass through wherever the repair is locally affine.
    """
    c, w = x[..., 0:1], x[..., 1:2]
    a, b = c - w * 0.5, c + w * 0.5
    lo = ad.clip(ad.minimum(a, b), 0.0, 1.0)
    hi = ad.clip(ad.maximum(a, b), 0.0, 1.0)
    width = ad.minimum(ad.maximum(hi - lo, w_min), 1.0)
    half = width * 0.5
    center = ad.maximum(ad.minimum((lo + hi) * 0.5, 1.0 - half), half)
    return ad.concatenate([center, width], axis=-1)


class DecoderLayer(Module):
    def __init__(self, d: int, heads: int, ffn_dim: int, dropout: float,
                 rng: np.random.Generator, dtype, zero_init_head: bool):
        super().__init__()
        self.attn = MultiHeadAttention(d, heads, rng, dtype, dropout)
        self.ffn = FeedForward(d, ffn_dim, rng, dtype, dropout)
        self.norm_attn = LayerNorm(d, dtype)
        self.norm_ffn = LayerNorm(d, dtype)
        self.drop = Dropout(dropout)
        self.delta_head = Linear(d, 2, rng, dtype, zero_init=zero_init_head)


class SpanDecoder(Module):
    """Iteratively refines (center, width) spans conditioned on clip memory."""

    def __init__(self, d: int, n_layers: int, heads: int, ffn_dim: int,
                 dropout: float, rng: np.random.Generator, dtype=np.float32,
                 span_mode: str = "add", time_every_layer: bool = False,
                 zero_init_heads: bool = True):
        super().__init__()
        if span_mode not in SPAN_MODES:
            raise ValueError(f"span_mode must be one of {SPAN_MODES}, got {span_mode!r}")
        self.d = d
        self.dtype = np.dtype(dtype)
        self.span_mode = span_mode
        self.time_every_layer = time_every_layer
        self.pool_score = Linear(d, 1, rng, dtype)       # per-clip soft-pool logit
        self.loc_embed = Linear(2, d, rng, dtype)        # (center, width) -> d
        self.cat_proj = Linear(2 * d, d, rng, dtype) if span_mode == "cat-fn" else None
        self.time_proj = Linear(d, d, rng, dtype)
        self.layers = [DecoderLayer(d, heads, ffn_dim, dropout, rng, dtype, zero_init_heads)
                       for _ in range(n_layers)]

    # -- span feature construction ------------------------------------------
    def soft_pool(self, segment) -> Tensor:
        """Softmax-weighted aggregation of an [n, d] feature segment."""
        segment = ad.as_tensor(segment, dtype=self.dtype)
        if segment.ndim != 2 or segment.shape[0] < 1:
            raise ValueError(f"segment must be [n >= 1, d], got {segment.shape}")
        logits = self.pool_score(segment).swapaxes(-1, -2)     # [1, n]
        weights = masked_softmax(logits, None)
        return (weights @ segment)[0]

    def span_features(self, memory: Tensor, spans: Tensor) -> Tensor:
        """Per-span features: soft-pooled crop of the memory + location embedding.

        ``memory`` is [B, K, d]; ``spans`` is [B, Nq, 2] in (center, width)
        form. Rows are independent. Crop windows come from the detached span
        values; see the module docstring for the gradient contract.
        """
        k = memory.shape[-2]
        i0, i1 = _crop_bounds(spans.value, k)                       # [B, Nq]
        positions = np.arange(k)
        keep = (positions >= i0[..., None]) & (positions < i1[..., None])  # [B, Nq, K]
        logits = self.pool_score(memory).swapaxes(-1, -2)           # [B, 1, K]
        weights = masked_softmax(logits, keep)                      # [B, Nq, K]
        pooled = weights @ memory                                   # [B, Nq, d]
        if self.span_mode == "feature":
            return pooled
        location = self.loc_embed(spans)
        if self.span_mode == "add":
            return pooled + location
        return self.cat_proj(ad.concatenate([pooled, location], axis=-1))

    def _time_embedding(self, t, shape: tuple[int, int]) -> Tensor:
        t_arr = np.broadcast_to(np.asarray(t, dtype=np.float64), shape)
        table = sine_positions(t_arr, self.d).astype(self.dtype)
        return self.time_proj(ad.as_tensor(table))

    # -- the refinement stack -------------------------------------------------
    def decode(self, memory: Tensor, spans_cw: np.ndarray, t, w_min: float) -> list[Tensor]:
        """Refine ``spans_cw`` ([B, Nq, 2] or [Nq, 2]) through all layers.

        ``t`` is a scalar timestep or an array broadcastable to [B, Nq]
        (training draws one per replica). Returns one [B, Nq, 2] span Tensor
        per layer, each already clamped; the last entry is the model's
        estimate of the clean span at timestep t.
        """
        spans_cw = np.asarray(spans_cw, dtype=np.float64)
        single = spans_cw.ndim == 2
        if single:
            spans_cw = spans_cw[None]
            memory = memory.reshape((1, *memory.shape))
        b, n_q = spans_cw.shape[:2]
        spans = ad.as_tensor(spans_cw.astype(self.dtype))
        query = self.span_features(memory, spans)
        time_emb = self._time_embedding(t, (b, n_q))
        query = query + time_emb
        outputs: list[Tensor] = []
        for index, layer in enumerate(self.layers):
            if index == 0:
                source = query
            else:
                source = self.span_features(memory, spans)
                if self.time_every_layer:
                    query = query + time_emb
            attended, _ = layer.attn(query, source, source)
            query = layer.norm_attn(query + layer.drop(attended))
            query = layer.norm_ffn(query + layer.drop(layer.ffn(query)))
            delta = layer.delta_head(query)
            spans = clamp_cw(spans + delta, w_min)
            outputs.append(spans)
        if single:
            outputs = [out[0] for out in outputs]
        return outputs
