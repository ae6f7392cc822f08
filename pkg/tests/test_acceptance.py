"""Acceptance suite: one test per criterion, one pass/fail line each.

Run with ``pytest tests/test_acceptance.py -v -s``. The synthetic end-to-end
criteria share one session fixture that trains three seeded models on the
default synthetic task (about five CPU-minutes per seed).
"""

import time

import numpy as np
import pytest

from diffspan import autodiff as ad
from diffspan import pipeline as pipe
from diffspan import schedule as sc
from diffspan import spans
from diffspan.checkpoint import load_model, save_checkpoint
from diffspan.data import SynthConfig, generate_examples
from diffspan.decoder import SpanDecoder, crop_indices
from diffspan.evaluation import evaluate, evaluate_selectors
from diffspan.model import ModelConfig, SpanDiffusionModel
from diffspan.pipeline import InferConfig, TrainConfig, eq2_diagnostic, span_loss, train
from diffspan.schedule import build_cosine_schedule

SEEDS = (0, 1, 2)

# criterion 3 model: the full-scale transformer scaled down to desk size
ACCEPT_MODEL = ModelConfig(d=64, k=32, encoder_layers=2, decoder_layers=2, heads=8,
                           ffn_dim=256, dropout=0.1, dtype="float32")
# optimizer schedule calibrated for the 15-CPU-minute budget (see ledger);
# everything the criterion pins (N_q=5, T=1000, lambda=2) is the default
ACCEPT_TRAIN = dict(epochs=30, lr=3e-3, cosine_lr=True)


def report_line(criterion: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")


def _random_spans(rng, n, w_min=1e-3):
    lo = rng.uniform(0.0, 1.0 - w_min, size=n)
    width = rng.uniform(w_min, 1.0 - lo)
    return np.stack([lo, lo + width], axis=-1)


def _iou_oracle(a, b):
    inter = max(0.0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    return inter / union if union > 0 else 0.0


@pytest.fixture(scope="session")
def trained():
    """Default synthetic task, 2000 train / 500 test, three seeded models."""
    examples = generate_examples(SynthConfig(), 2500)
    train_set, test_set = examples[:2000], examples[2000:]
    assert len({ex.id for ex in examples}) == 2500
    runs = []
    for seed in SEEDS:
        model = SpanDiffusionModel(ACCEPT_MODEL, seed=seed)
        cfg = TrainConfig(seed=seed, **ACCEPT_TRAIN)
        sched = build_cosine_schedule(cfg.t_total, cfg.lambda_scale)
        cpu0 = time.process_time()
        train(train_set, model, sched, cfg)
        cpu_minutes = (time.process_time() - cpu0) / 60.0
        rep5 = evaluate_selectors(test_set, model, sched,
                                  InferConfig(queries=5, steps=5, seed=seed),
                                  selectors=("vote", "random"))
        rep1 = evaluate(test_set, model, sched, InferConfig(queries=5, steps=1, seed=seed))
        runs.append({
            "seed": seed, "model": model, "sched": sched, "cpu_minutes": cpu_minutes,
            "vote5": rep5["vote"], "random5": rep5["random"], "vote1": rep1,
        })
    return {"train": train_set, "test": test_set, "runs": runs}


class TestCriterion1MathCore:
    def test_property_suite_under_60s(self):
        begin = time.perf_counter()
        rng = np.random.default_rng(7)

        # IoU / GIoU fuzz over 1e5 pairs
        a, b = _random_spans(rng, 100_000), _random_spans(rng, 100_000)
        i, g = spans.iou(a, b), spans.giou(a, b)
        assert ((i >= 0) & (i <= 1)).all() and np.array_equal(spans.iou(b, a), i)
        assert (g <= i + 1e-12).all() and ((g > -1) & (g <= 1)).all()
        overlap = i > 0
        assert np.allclose(g[overlap], i[overlap]) and (g[~overlap] < i[~overlap]).all()

        # vote vs independently coded O(N^2) oracle: 1e3 sets, N <= 8
        for _ in range(1000):
            cands = _random_spans(rng, int(rng.integers(1, 9)))
            winner, scores = spans.vote(cands)
            oracle = [sum(_iou_oracle(cands[p], cands[q])
                          for q in range(len(cands)) if q != p)
                      for p in range(len(cands))]
            assert winner == int(np.argmax(oracle))
            assert np.allclose(scores, oracle, atol=1e-12)

        # schedule invariants
        for t_total in (1, 10, 100, 1000):
            sched = build_cosine_schedule(t_total)
            ab = sched.alpha_bar
            assert ab[0] == 1.0 and (np.diff(ab) < 0).all() and ((ab > 0) & (ab <= 1)).all()

        # forward-noising Monte-Carlo moments within 3 standard errors
        sched = build_cosine_schedule(1000, lambda_scale=100.0)
        x0, t, n = np.array([0.3, -0.7]), 400, 100_000
        x_t = sc.q_sample(x0, t, rng.standard_normal((n, 2)), sched)
        abt = sched.alpha_bar[t]
        assert (np.abs(x_t.mean(0) - np.sqrt(abt) * x0) < 3 * np.sqrt((1 - abt) / n)).all()
        assert (np.abs(x_t.var(0, ddof=1) - (1 - abt)) < 3 * (1 - abt) * np.sqrt(2 / (n - 1))).all()

        # DDIM oracle recovery to 1e-6
        sched = build_cosine_schedule(1000)
        x0 = rng.uniform(-1.5, 1.5, size=(100, 2))
        x = rng.standard_normal((100, 2))
        steps = list(range(1000, 0, -1))
        for idx, t_now in enumerate(steps):
            x = sc.ddim_step(x, x0, t_now, steps[idx + 1] if idx + 1 < len(steps) else 0, sched)
        assert np.abs(x - x0).max() < 1e-6

        # soft-pool convexity
        dec = SpanDecoder(d=16, n_layers=1, heads=2, ffn_dim=32, dropout=0.0,
                          rng=np.random.default_rng(23), dtype=np.float64)
        for _ in range(200):
            seg = rng.standard_normal((int(rng.integers(1, 9)), 16))
            pooled = dec.soft_pool(seg).value
            assert (pooled >= seg.min(0) - 1e-9).all() and (pooled <= seg.max(0) + 1e-9).all()
            k = int(rng.integers(8, 257))
            i0, i1 = crop_indices(spans.se_to_cw(_random_spans(rng, 1)[0]), k)
            assert 0 <= i0 < i1 <= k

        elapsed = time.perf_counter() - begin
        ok = elapsed < 60.0
        report_line("criterion 1 (math-core properties)", ok, f"suite ran in {elapsed:.1f}s (< 60s)")
        assert ok


class TestCriterion2GradientFidelity:
    def test_micro_model_gradients_under_2min(self):
        from conftest import check_gradients

        begin = time.perf_counter()
        micro = ModelConfig(d=8, k=8, encoder_layers=1, decoder_layers=1, heads=2,
                            ffn_dim=16, dropout=0.0, dtype="float64",
                            zero_init_heads=False)
        model = SpanDiffusionModel(micro, seed=2)
        synth = SynthConfig(k=8, width_range=(0.2, 0.5), seed=9)
        examples = generate_examples(synth, 2)
        cfg = TrainConfig(t_total=50, n_q_train=3)
        sched = build_cosine_schedule(50, cfg.lambda_scale)
        videos, queries, mask, targets = pipe.collate(examples, micro.max_words)
        rng = np.random.default_rng(4)
        x0 = sc.scale_to_diffusion(spans.se_to_cw(targets), cfg.lambda_scale)[:, None, :]
        t = rng.integers(1, 51, size=(2, 3))
        eps = 0.4 * rng.standard_normal((2, 3, 2))
        noisy = sc.unscale_from_diffusion(sc.q_sample(x0, t, eps, sched),
                                          cfg.lambda_scale, model.w_min)
        gt_se = ad.as_tensor(np.broadcast_to(targets[:, None, :], (2, 3, 2)))

        def loss_fn():
            memory = model.encode_examples(videos, queries, mask)
            outs = model.decoder.decode(memory, noisy, t, model.w_min)
            total = None
            for layer_spans in outs:
                term, _, _ = pipe._span_loss_t(pipe._cw_to_se_t(layer_spans), gt_se, cfg)
                total = term.mean() if total is None else total + term.mean()
            return total * (1.0 / len(outs))

        checked = check_gradients(model.named_parameters(), loss_fn, n_samples=30)
        elapsed = time.perf_counter() - begin
        ok = elapsed < 120.0 and len(checked) >= 30
        report_line("criterion 2 (gradient fidelity)", ok,
                    f"{len(checked)} sampled parameters, rel err < 1e-3, {elapsed:.1f}s (< 120s)")
        assert ok


class TestCriterion3SyntheticEndToEnd:
    def test_recall_bar_and_budget(self, trained):
        details = []
        ok = True
        for run in trained["runs"]:
            r07 = run["vote5"].r1_07 / 100.0
            details.append(f"seed {run['seed']}: R1@0.7 {r07:.3f} in {run['cpu_minutes']:.1f} CPU-min")
            ok = ok and r07 >= 0.80 and run["cpu_minutes"] < 15.0
        report_line("criterion 3 (synthetic end-to-end, bar 0.80)", ok, "; ".join(details))
        assert ok


class TestCriterion4RefinementTrend:
    def test_more_steps_do_not_hurt(self, trained):
        mean5 = np.mean([run["vote5"].mean_iou for run in trained["runs"]])
        mean1 = np.mean([run["vote1"].mean_iou for run in trained["runs"]])
        ok = mean5 >= mean1 - 0.01
        report_line("criterion 4 (iterative-refinement trend)", ok,
                    f"mean IoU: N_s=5 {mean5:.4f} vs N_s=1 {mean1:.4f} (allow -0.01)")
        assert ok


class TestCriterion5VotingAblation:
    def test_voting_beats_random_choice(self, trained):
        vote = np.mean([run["vote5"].r1_07 for run in trained["runs"]]) / 100.0
        rand = np.mean([run["random5"].r1_07 for run in trained["runs"]]) / 100.0
        ok = vote >= rand - 0.01
        report_line("criterion 5 (voting ablation direction)", ok,
                    f"R1@0.7: vote {vote:.3f} vs random {rand:.3f} (allow -0.01)")
        assert ok


class TestCriterion6Flexibility:
    def test_query_step_grid(self, trained):
        run = trained["runs"][0]
        values = {}
        for queries in (1, 5, 10):
            for steps in (1, 5):
                rep = evaluate(trained["test"], run["model"], run["sched"],
                               InferConfig(queries=queries, steps=steps, seed=run["seed"]))
                values[(queries, steps)] = rep.r1_07 / 100.0
        spread = max(values.values()) - min(values.values())
        ok = spread <= 0.15
        grid = ", ".join(f"q{q}s{s}={v:.3f}" for (q, s), v in sorted(values.items()))
        report_line("criterion 6 (train/infer flexibility)", ok,
                    f"{len(values)} runs, spread {spread:.3f} (<= 0.15); {grid}")
        assert ok


class TestCriterion7Determinism:
    CFG = ModelConfig(d=16, k=32, encoder_layers=1, decoder_layers=2, heads=4,
                      ffn_dim=32, dropout=0.1, dtype="float32")

    def _train_once(self):
        examples = generate_examples(SynthConfig(seed=13), 150)
        model = SpanDiffusionModel(self.CFG, seed=5)
        cfg = TrainConfig(seed=5, epochs=3, batch_size=32, t_total=200)
        sched = build_cosine_schedule(cfg.t_total, cfg.lambda_scale)
        train(examples[:120], model, sched, cfg)
        report = evaluate(examples[120:], model, sched, InferConfig(queries=3, steps=2, seed=5))
        return model, sched, examples, report

    def test_seed_and_checkpoint_reproducibility(self, tmp_path):
        model, sched, examples, report_a = self._train_once()
        _, _, _, report_b = self._train_once()
        same_train = report_a == report_b
        save_checkpoint(tmp_path / "ck", model, config_echo={})
        restored, _ = load_model(tmp_path / "ck")
        report_c = evaluate(examples[120:], restored, sched,
                            InferConfig(queries=3, steps=2, seed=5))
        same_ckpt = report_c == report_a
        ok = same_train and same_ckpt
        report_line("criterion 7 (determinism & persistence)", ok,
                    f"retrain bit-exact: {same_train}; checkpoint round-trip bit-exact: {same_ckpt}")
        assert ok


class TestCriterion8LossArithmetic:
    def test_span_loss_examples_and_eq2_oracle(self):
        total, _, _ = span_loss((0.0, 0.2), (0.8, 1.0), 1.5, 1.0)
        ok = abs(total - 4.0) < 1e-9
        zero, _, _ = span_loss((0.3, 0.8), (0.3, 0.8))
        ok = ok and zero == 0.0
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(1000):
            a, b = rng.standard_normal(2), rng.standard_normal(2)
            oracle = 0.5 * sum((float(x) - float(y)) ** 2 for x, y in zip(a, b))
            worst = max(worst, abs(eq2_diagnostic(a, b) - oracle))
        ok = ok and worst < 1e-9
        report_line("criterion 8 (loss arithmetic)", ok,
                    f"disjoint case |err| < 1e-9; eq2 vs oracle worst |err| {worst:.2e}")
        assert ok
