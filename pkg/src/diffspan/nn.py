"""Neural building blocks on top of the tape engine.

Modules hold their parameters as ``autodiff.Tensor`` leaves and discover them
recursively through attribute order, which gives stable names for the
checkpoint format. Initialization follows fan-in-scaled uniform for affine
maps; normalization gains start at 1.
"""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


class Module:
    """Container with recursive parameter discovery and a training flag."""

    def __init__(self):
        self.training = False

    def _children(self):
        for name, attr in vars(self).items():
            if isinstance(attr, Module):
                yield name, attr
            elif isinstance(attr, (list, tuple)):
                for i, item in enumerate(attr):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        for name, attr in vars(self).items():
            if isinstance(attr, Tensor) and attr.requires_grad:
                params[f"{prefix}{name}"] = attr
        for name, child in self._children():
            params.update(child.named_parameters(prefix=f"{prefix}{name}."))
        return params

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def set_training(self, flag: bool) -> None:
        self.training = flag
        for _, child in self._children():
            child.set_training(flag)

    def load_parameters(self, arrays: dict[str, np.ndarray], prefix: str = "") -> None:
        """Overwrite parameter values in place from a name -> array mapping."""
        own = self.named_parameters(prefix)
        missing = set(own) - set(arrays)
        if missing:
            raise KeyError(f"missing parameters in checkpoint: {sorted(missing)[:5]}")
        for name, tensor in own.items():
            arr = np.asarray(arrays[name])
            if arr.shape != tensor.value.shape:
                raise ValueError(f"shape mismatch for {name}: {arr.shape} vs {tensor.value.shape}")
            tensor.value = arr.astype(tensor.value.dtype, copy=True)


class Linear(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 dtype=np.float32, zero_init: bool = False):
        super().__init__()
        if zero_init:
            weight = np.zeros((in_dim, out_dim))
            bias = np.zeros(out_dim)
        else:
            bound = 1.0 / math.sqrt(in_dim)
            weight = rng.uniform(-bound, bound, size=(in_dim, out_dim))
            bias = rng.uniform(-bound, bound, size=out_dim)
        self.weight = ad.parameter(weight.astype(dtype))
        self.bias = ad.parameter(bias.astype(dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.weight + self.bias


class LayerNorm(Module):
    def __init__(self, dim: int, dtype=np.float32, eps: float = 1e-5):
        super().__init__()
        self.gain = ad.parameter(np.ones(dim, dtype=dtype))
        self.bias = ad.parameter(np.zeros(dim, dtype=dtype))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=-1, keepdims=True)
        return centered / ad.sqrt(var + self.eps) * self.gain + self.bias


class Dropout(Module):
    """Inverted dropout; draws masks from a shared generator when training."""

    def __init__(self, rate: float):
        super().__init__()
        self.rate = float(rate)
        self.rng: np.random.Generator | None = None

    def __call__(self, x: Tensor) -> Tensor:
        if not self.training or self.rate <= 0.0:
            return x
        if self.rng is None:
            raise RuntimeError("Dropout used in training mode without an rng")
        keep = (self.rng.random(x.shape) >= self.rate).astype(x.dtype.type)
        return x * ad.as_tensor(keep / (1.0 - self.rate))


def masked_softmax(logits: Tensor, keep: np.ndarray | None, axis: int = -1) -> Tensor:
    """Softmax along ``axis`` with hard masking.

    ``keep`` is a boolean array broadcastable to ``logits``; masked entries
    come out exactly 0 (their logits go to -inf before the shifted exp).
    """
    if keep is not None:
        neg = np.where(keep, 0.0, -np.inf).astype(logits.dtype)
        logits = logits + ad.as_tensor(neg)
    shift = ad.as_tensor(np.max(logits.value, axis=axis, keepdims=True))
    weights = ad.exp(logits - shift)
    return weights / weights.sum(axis=axis, keepdims=True)


class MultiHeadAttention(Module):
    def __init__(self, dim: int, heads: int, rng: np.random.Generator,
                 dtype=np.float32, dropout: float = 0.0):
        super().__init__()
        if dim % heads != 0:
            raise ValueError(f"dim {dim} not divisible by heads {heads}")
        self.heads = heads
        self.head_dim = dim // heads
        self.q_proj = Linear(dim, dim, rng, dtype)
        self.k_proj = Linear(dim, dim, rng, dtype)
        self.v_proj = Linear(dim, dim, rng, dtype)
        self.out_proj = Linear(dim, dim, rng, dtype)
        self.attn_drop = Dropout(dropout)

    def _split(self, x: Tensor) -> Tensor:
        *lead, length, dim = x.shape
        x = x.reshape((*lead, length, self.heads, self.head_dim))
        return x.swapaxes(-3, -2)  # [..., heads, length, head_dim]

    def _merge(self, x: Tensor) -> Tensor:
        x = x.swapaxes(-3, -2)
        *lead, length, heads, head_dim = x.shape
        return x.reshape((*lead, length, heads * head_dim))

    def __call__(self, query: Tensor, key: Tensor, value: Tensor,
                 key_mask: np.ndarray | None = None) -> tuple[Tensor, Tensor]:
        """Returns (output, attention weights [..., heads, Lq, Lk])."""
        q = self._split(self.q_proj(query))
        k = self._split(self.k_proj(key))
        v = self._split(self.v_proj(value))
        scores = (q @ k.swapaxes(-1, -2)) * (1.0 / math.sqrt(self.head_dim))
        keep = None
        if key_mask is not None:
            keep = np.asarray(key_mask, dtype=bool)[..., None, None, :]
        attn = masked_softmax(scores, keep)
        out = self._merge(self.attn_drop(attn) @ v)
        return self.out_proj(out), attn


class FeedForward(Module):
    def __init__(self, dim: int, hidden: int, rng: np.random.Generator,
                 dtype=np.float32, dropout: float = 0.0):
        super().__init__()
        self.expand = Linear(dim, hidden, rng, dtype)
        self.contract = Linear(hidden, dim, rng, dtype)
        self.drop = Dropout(dropout)

    def __call__(self, x: Tensor) -> Tensor:
        return self.contract(self.drop(ad.relu(self.expand(x))))


def sine_positions(positions, dim: int) -> np.ndarray:
    """Interleaved sin/cos positional table; ``positions`` may be any shape."""
    if dim % 2 != 0:
        raise ValueError(f"sine embedding needs an even dim, got {dim}")
    pos = np.asarray(positions, dtype=np.float64)[..., None]
    freqs = 1.0 / (10000.0 ** (2.0 * np.arange(dim // 2) / dim))
    angles = pos * freqs
    out = np.empty((*angles.shape[:-1], dim))
    out[..., 0::2] = np.sin(angles)
    out[..., 1::2] = np.cos(angles)
    return out


def clip_gradient_norm(params: list[Tensor], max_norm: float) -> float:
    """Scale all gradients in place so their global L2 norm is <= max_norm."""
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(p.grad.astype(np.float64) ** 2))
    norm = math.sqrt(total)
    if norm > max_norm > 0:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad = p.grad * scale
    return norm


class AdamW:
    """Adam with decoupled weight decay."""

    def __init__(self, params: list[Tensor], lr: float, weight_decay: float = 0.0,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = float(lr)
        self.weight_decay = float(weight_decay)
        self.betas = betas
        self.eps = eps
        self.step_count = 0
        self._m = [np.zeros_like(p.value) for p in params]
        self._v = [np.zeros_like(p.value) for p in params]

    def step(self) -> None:
        self.step_count += 1
        b1, b2 = self.betas
        bias1 = 1.0 - b1 ** self.step_count
        bias2 = 1.0 - b2 ** self.step_count
        for p, m, v in zip(self.params, self._m, self._v):
            if p.grad is None:
                continue
            g = p.grad
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            update = (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            if self.weight_decay:
                update = update + self.weight_decay * p.value
            p.value = p.value - (self.lr * update).astype(p.value.dtype)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
