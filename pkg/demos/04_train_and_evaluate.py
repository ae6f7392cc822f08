"""End-to-end: train a small model on the synthetic task and evaluate it.

Uses a reduced corpus and model so the demo finishes in about a minute on one
CPU core. The full desk-scale recipe lives in tests/test_acceptance.py.

Run: python3 demos/04_train_and_evaluate.py
"""

import time

import numpy as np

from diffspan import (
    InferConfig,
    ModelConfig,
    SpanDiffusionModel,
    SynthConfig,
    TrainConfig,
    build_cosine_schedule,
    evaluate,
    train,
)
from diffspan.data import generate_examples

corpus_cfg = SynthConfig(seed=11)
examples = generate_examples(corpus_cfg, 500)
train_set, test_set = examples[:400], examples[400:]
print(f"corpus: {len(train_set)} train / {len(test_set)} test examples")

model_cfg = ModelConfig(d=32, k=32, encoder_layers=1, decoder_layers=2,
                        heads=4, ffn_dim=128, dropout=0.1, dtype="float32")
train_cfg = TrainConfig(epochs=20, lr=3e-3, cosine_lr=True, seed=0)
model = SpanDiffusionModel(model_cfg, seed=train_cfg.seed)
sched = build_cosine_schedule(train_cfg.t_total, train_cfg.lambda_scale)

print("training ...")
begin = time.time()
history = train(train_set, model, sched, train_cfg,
                log_fn=lambda rec: (
                    print(f"  step {rec['step']:3d}  loss {rec['loss']:.4f}  "
                          f"l1 {rec['l1']:.4f}  giou {rec['giou']:.4f}  eq2 {rec['eq2']:.3f}")
                    if rec["step"] % 20 == 0 else None))
print(f"trained {len(history)} steps in {time.time() - begin:.0f}s")

print("\nevaluating with 5 queries / 5 sampling steps ...")
report = evaluate(test_set, model, sched, InferConfig(queries=5, steps=5, seed=0))
print(f"R1@0.3 {report.r1_03:.1f}   R1@0.5 {report.r1_05:.1f}   "
      f"R1@0.7 {report.r1_07:.1f}   mean IoU {report.mean_iou:.4f}")

print("\na couple of predictions vs ground truth:")
from diffspan import infer

for ex in test_set[:4]:
    final, _, _ = infer(ex, model, sched, InferConfig(queries=5, steps=5, seed=0))
    print(f"  {ex.id}: predicted {np.round(final, 3)}  target {np.round(ex.target, 3)}")
