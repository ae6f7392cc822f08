"""Training and sampling loops for the span generator.

Training: each example's ground-truth span is replicated ``n_q_train`` times,
each replica gets its own uniform timestep and Gaussian noise, the noisy
replicas are denoised by the decoder, and every decoder layer's prediction is
supervised against the single ground truth with an L1 + generalized-IoU loss
(mean over replicas, layers and batch). One AdamW update per batch, with
global gradient-norm clipping.

Inference: start from Gaussian points, repeatedly predict the clean span and
walk the deterministic DDIM chain down a sampling sequence; the last
prediction yields the candidate set, and voting picks the final span.

The training loop is single-writer over optimizer state. Inference over
distinct examples only reads frozen parameters and may run concurrently.
"""

from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from . import schedule as sched_mod
from .autodiff import Tensor
from .data import GroundingExample
from .model import SpanDiffusionModel
from .nn import AdamW, clip_gradient_norm
from .schedule import NoiseSchedule, ddim_step, make_sampling_sequence, q_sample, sample_timesteps
from .spans import se_to_cw, vote


class NonFiniteLossError(RuntimeError):
    """Raised when a training step produces NaN/inf; the step is aborted."""


@dataclass(frozen=True)
class TrainConfig:
    n_q_train: int = 5
    t_total: int = 1000
    lambda_scale: float = 2.0
    l1_weight: float = 1.5
    giou_weight: float = 1.0
    lr: float = 1e-4
    weight_decay: float = 1e-4
    batch_size: int = 64
    epochs: int = 30
    grad_clip: float = 1.0
    cosine_lr: bool = False
    seed: int = 0

    def __post_init__(self):
        if min(self.n_q_train, self.t_total, self.batch_size, self.epochs) < 1:
            raise ValueError("n_q_train, t_total, batch_size and epochs must be >= 1")
        if self.lambda_scale <= 0 or self.lr <= 0:
            raise ValueError("lambda_scale and lr must be positive")
        if self.l1_weight < 0 or self.giou_weight < 0 or (self.l1_weight == 0 and self.giou_weight == 0):
            raise ValueError("loss weights must be >= 0 and not both zero")


@dataclass(frozen=True)
class InferConfig:
    queries: int = 5
    steps: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.queries < 1 or self.steps < 1:
            raise ValueError("queries and steps must be >= 1")


# -- losses ------------------------------------------------------------------

def span_loss(pred, gt, l1_weight: float = 1.5, giou_weight: float = 1.0):
    """Weighted L1 + (1 - GIoU) between (start, end) spans.

    Vectorized over leading axes; returns ``(total, l1_term, giou_term)``
    where the components are unweighted. Computed in float64.
    """
    from . import spans as span_ops

    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    l1 = np.abs(pred - gt).sum(axis=-1)
    giou_term = 1.0 - span_ops.giou(pred, gt)
    total = l1_weight * l1 + giou_weight * giou_term
    if total.ndim == 0:
        return float(total), float(l1), float(giou_term)
    return total, l1, giou_term


def eq2_diagnostic(x0_hat, x0):
    """Half squared error in diffusion space; logged only, never optimized."""
    diff = np.asarray(x0_hat, dtype=np.float64) - np.asarray(x0, dtype=np.float64)
    out = 0.5 * (diff * diff).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def _cw_to_se_t(cw: Tensor) -> Tensor:
    c, w = cw[..., 0:1], cw[..., 1:2]
    return ad.concatenate([c - w * 0.5, c + w * 0.5], axis=-1)


def _giou_t(pred: Tensor, gt: Tensor) -> Tensor:
    ps, pe = pred[..., 0], pred[..., 1]
    gs, ge = gt[..., 0], gt[..., 1]
    inter = ad.maximum(ad.minimum(pe, ge) - ad.maximum(ps, gs), 0.0)
    union = (pe - ps) + (ge - gs) - inter
    hull = ad.maximum(pe, ge) - ad.minimum(ps, gs)
    return inter / union - (hull - union) / hull


def _span_loss_t(pred_se: Tensor, gt_se: Tensor, cfg: TrainConfig) -> tuple[Tensor, Tensor, Tensor]:
    l1 = ad.absolute(pred_se - gt_se).sum(axis=-1)
    giou_term = 1.0 - _giou_t(pred_se, gt_se)
    return cfg.l1_weight * l1 + cfg.giou_weight * giou_term, l1, giou_term


# -- batching ----------------------------------------------------------------

def collate(examples: list[GroundingExample], max_words: int):
    """Stack a batch; query tokens are padded to ``max_words`` with a mask.

    Padding always extends to the model-wide maximum so results do not
    depend on which examples share a batch.
    """
    b = len(examples)
    k, d_v = examples[0].video.shape
    d_q = examples[0].query.shape[1]
    videos = np.stack([ex.video for ex in examples])
    queries = np.zeros((b, max_words, d_q), dtype=np.float32)
    mask = np.zeros((b, max_words), dtype=bool)
    for i, ex in enumerate(examples):
        n = ex.query.shape[0]
        if n > max_words:
            raise ValueError(f"{ex.id}: {n} tokens exceeds max_words={max_words}")
        queries[i, :n] = ex.query
        mask[i, :n] = True
    targets = np.array([ex.target for ex in examples], dtype=np.float64)
    if videos.shape[1:] != (k, d_v):
        raise ValueError("inconsistent video shapes within batch")
    return videos, queries, mask, targets


# -- training ------------------------------------------------------------------

def train_step(examples: list[GroundingExample], model: SpanDiffusionModel,
               sched: NoiseSchedule, cfg: TrainConfig, optimizer: AdamW,
               rng: np.random.Generator) -> dict[str, float]:
    """One optimizer update on a batch; returns loss scalars for logging."""
    model.set_training(True)
    videos, queries, mask, targets = collate(examples, model.config.max_words)
    b = len(examples)
    n_q = cfg.n_q_train
    w_min = model.w_min

    gt_cw = se_to_cw(targets)                                   # [B, 2]
    x0 = sched_mod.scale_to_diffusion(gt_cw, sched.lambda_scale)[:, None, :]  # [B, 1, 2]
    t = sample_timesteps(b * n_q, sched.t_total, rng).reshape(b, n_q)
    eps = rng.standard_normal((b, n_q, 2))
    x_t = q_sample(x0, t, eps, sched)                           # [B, Nq, 2]
    noisy_cw = sched_mod.unscale_from_diffusion(x_t, sched.lambda_scale, w_min)

    optimizer.zero_grad()
    memory = model.encode_examples(videos, queries, mask)
    per_layer = model.decoder.decode(memory, noisy_cw, t, w_min)

    gt_se = ad.as_tensor(np.broadcast_to(targets[:, None, :], (b, n_q, 2)).astype(memory.dtype))
    layer_totals, l1_vals, giou_vals = [], [], []
    for layer_spans in per_layer:
        total, l1, giou_term = _span_loss_t(_cw_to_se_t(layer_spans), gt_se, cfg)
        layer_totals.append(total.mean())
        l1_vals.append(float(l1.value.mean()))
        giou_vals.append(float(giou_term.value.mean()))
    loss = layer_totals[0]
    for extra in layer_totals[1:]:
        loss = loss + extra
    loss = loss * (1.0 / len(layer_totals))

    loss_value = float(loss.value)
    if not np.isfinite(loss_value):
        raise NonFiniteLossError(f"non-finite training loss: {loss_value}")
    loss.backward()
    clip_gradient_norm(optimizer.params, cfg.grad_clip)
    optimizer.step()
    optimizer.zero_grad()

    pred_x0 = sched_mod.scale_to_diffusion(per_layer[-1].value, sched.lambda_scale)
    return {
        "loss": loss_value,
        "l1": float(np.mean(l1_vals)),
        "giou": float(np.mean(giou_vals)),
        "eq2": float(eq2_diagnostic(pred_x0, np.broadcast_to(x0, pred_x0.shape)).mean()),
    }


def train(train_examples: list[GroundingExample], model: SpanDiffusionModel,
          sched: NoiseSchedule, cfg: TrainConfig,
          log_fn=None) -> list[dict[str, float]]:
    """Full training loop; returns the per-step log records."""
    streams = np.random.SeedSequence([int(cfg.seed), 0x747261]).spawn(2)
    batch_rng = np.random.default_rng(streams[0])
    noise_rng = np.random.default_rng(streams[1])
    model.reseed_dropout(cfg.seed)
    optimizer = AdamW(model.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    total_steps = cfg.epochs * max(1, int(np.ceil(len(train_examples) / cfg.batch_size)))
    history: list[dict[str, float]] = []
    step = 0
    for _epoch in range(cfg.epochs):
        order = batch_rng.permutation(len(train_examples))
        for lo in range(0, len(order), cfg.batch_size):
            batch = [train_examples[i] for i in order[lo:lo + cfg.batch_size]]
            if cfg.cosine_lr:
                optimizer.lr = cfg.lr * 0.5 * (1.0 + np.cos(np.pi * step / total_steps))
            record = train_step(batch, model, sched, cfg, optimizer, noise_rng)
            record["step"] = step
            history.append(record)
            if log_fn is not None:
                log_fn(record)
            step += 1
    model.set_training(False)
    return history


# -- inference -----------------------------------------------------------------

def _example_rng(seed: int, example_id: str, salt: int = 0) -> np.random.Generator:
    # Keyed by example id, not evaluation order, so results are order- and
    # parallelism-invariant.
    key = zlib.crc32(example_id.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed), key, salt]))


def infer_batch(examples: list[GroundingExample], model: SpanDiffusionModel,
                sched: NoiseSchedule, cfg: InferConfig):
    """Reverse diffusion for a batch; returns per-example candidate arrays.

    Output: (candidates [B, Nq, 2] (start, end), per_step list of [B, Nq, 2]).
    """
    model.set_training(False)
    videos, queries, mask, _ = collate(examples, model.config.max_words)
    b = len(examples)
    w_min = model.w_min
    x = np.stack([
        _example_rng(cfg.seed, ex.id).standard_normal((cfg.queries, 2))
        for ex in examples
    ])
    x = np.clip(x, -sched.lambda_scale, sched.lambda_scale)
    steps = make_sampling_sequence(cfg.steps, sched.t_total)
    per_step: list[np.ndarray] = []
    with ad.no_grad():
        memory = model.encode_examples(videos, queries, mask)
        for idx, t_now in enumerate(steps):
            t_prev = steps[idx + 1] if idx + 1 < len(steps) else 0
            noisy_cw = sched_mod.unscale_from_diffusion(x, sched.lambda_scale, w_min)
            outputs = model.decoder.decode(memory, noisy_cw, t_now, w_min)
            cw_hat = outputs[-1].value.astype(np.float64)
            per_step.append(_cw_to_se_batch(cw_hat))
            x0_hat = sched_mod.scale_to_diffusion(cw_hat, sched.lambda_scale)
            x = ddim_step(x, x0_hat, t_now, t_prev, sched)
    candidates = per_step[-1]
    assert candidates.shape == (b, cfg.queries, 2)
    return candidates, per_step


def _cw_to_se_batch(cw: np.ndarray) -> np.ndarray:
    c, w = cw[..., 0], cw[..., 1]
    return np.stack([c - w / 2.0, c + w / 2.0], axis=-1)


def infer(example: GroundingExample, model: SpanDiffusionModel,
          sched: NoiseSchedule, cfg: InferConfig):
    """Generate candidates for one example and vote for the final span.

    Returns ``(final_span, candidates [Nq, 2], per_step_spans)``.
    """
    candidates, per_step = infer_batch([example], model, sched, cfg)
    winner, _scores = vote(candidates[0])
    final = (float(candidates[0, winner, 0]), float(candidates[0, winner, 1]))
    return final, candidates[0], [step[0] for step in per_step]


def select_candidate(candidates: np.ndarray, selector: str,
                     seed: int, example_id: str) -> np.ndarray:
    """Pick the final span from a candidate set.

    ``vote``: summed-IoU voting. ``random``: seeded uniform choice (the
    no-voting ablation), keyed by example id for reproducibility.
    """
    if selector == "vote":
        winner, _ = vote(candidates)
    elif selector == "random":
        winner = int(_example_rng(seed, example_id, salt=1).integers(len(candidates)))
    else:
        raise ValueError(f"unknown selector {selector!r}")
    return candidates[winner]


def config_dicts(train_cfg: TrainConfig, infer_cfg: InferConfig) -> dict:
    return {"train": asdict(train_cfg), "infer": asdict(infer_cfg)}
