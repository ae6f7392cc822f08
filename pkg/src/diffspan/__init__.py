"""diffspan: generative temporal-span localization by iterative denoising.

A numpy library that frames span localization as conditional generation:
Gaussian-noise span proposals are denoised step by step, conditioned on
cross-modally encoded video/query features, then a voting pass picks the
final prediction. Includes the full training loop, deterministic DDIM
sampling, a synthetic corpus generator, metrics, checkpointing and a CLI.
"""

from .data import (
    CorpusSplits,
    GroundingExample,
    SynthConfig,
    generate_corpus,
    generate_example,
    generate_examples,
    load_feature_dataset,
    save_corpus,
)
from .evaluation import EvalReport, evaluate, evaluate_selectors, recall_at
from .model import ModelConfig, SpanDiffusionModel
from .pipeline import (
    InferConfig,
    NonFiniteLossError,
    TrainConfig,
    eq2_diagnostic,
    infer,
    span_loss,
    train,
    train_step,
)
from .schedule import (
    NoiseSchedule,
    build_cosine_schedule,
    ddim_step,
    make_sampling_sequence,
    q_sample,
    sample_timesteps,
    scale_to_diffusion,
    unscale_from_diffusion,
)
from .spans import clamp_span, cw_to_se, giou, iou, se_to_cw, vote

__version__ = "0.1.0"

__all__ = [
    "CorpusSplits",
    "EvalReport",
    "GroundingExample",
    "InferConfig",
    "ModelConfig",
    "NoiseSchedule",
    "NonFiniteLossError",
    "SpanDiffusionModel",
    "SynthConfig",
    "TrainConfig",
    "build_cosine_schedule",
    "clamp_span",
    "cw_to_se",
    "ddim_step",
    "eq2_diagnostic",
    "evaluate",
    "evaluate_selectors",
    "generate_corpus",
    "generate_example",
    "generate_examples",
    "giou",
    "infer",
    "iou",
    "load_feature_dataset",
    "make_sampling_sequence",
    "q_sample",
    "recall_at",
    "sample_timesteps",
    "save_corpus",
    "scale_to_diffusion",
    "se_to_cw",
    "span_loss",
    "train",
    "train_step",
    "unscale_from_diffusion",
    "vote",
]
