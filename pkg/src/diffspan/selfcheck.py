"""Built-in property suite, runnable in the field via ``diffspan selfcheck``.

Each check prints one pass/fail line; the runner returns the failure count.
These mirror the repository's pytest suite at smoke scale so an installed
copy can verify itself without the test tree.
"""

from __future__ import annotations

import numpy as np

from . import spans
from .data import SynthConfig, generate_example, generate_examples, mixing_maps
from .decoder import SpanDecoder, crop_indices
from .schedule import build_cosine_schedule, ddim_step, make_sampling_sequence, q_sample

CHECKS = []


def check(fn):
    CHECKS.append(fn)
    return fn


def _random_spans(rng, n):
    lo = rng.uniform(0.0, 0.95, size=n)
    hi = lo + rng.uniform(0.01, 1.0, size=n) * (1.0 - lo)
    return np.stack([lo, hi], axis=-1)


@check
def iou_giou_fuzz() -> None:
    rng = np.random.default_rng(7)
    a, b = _random_spans(rng, 100_000), _random_spans(rng, 100_000)
    iou = spans.iou(a, b)
    giou = spans.giou(a, b)
    assert ((iou >= 0) & (iou <= 1)).all()
    assert (np.abs(spans.iou(b, a) - iou) == 0).all(), "iou symmetry"
    assert (giou <= iou + 1e-12).all()
    assert ((giou > -1) & (giou <= 1)).all()
    overlapping = iou > 0
    assert np.allclose(giou[overlapping], iou[overlapping])


@check
def vote_against_bruteforce() -> None:
    rng = np.random.default_rng(11)
    for _ in range(1000):
        candidates = _random_spans(rng, int(rng.integers(1, 9)))
        winner, scores = spans.vote(candidates)
        expected = [
            sum(spans.iou(candidates[i], candidates[j])
                for j in range(len(candidates)) if j != i)
            for i in range(len(candidates))
        ]
        assert winner == int(np.argmax(expected))
        assert np.allclose(scores, expected)


@check
def clamp_fuzz() -> None:
    rng = np.random.default_rng(13)
    raw = rng.uniform(-3, 4, size=(50_000, 2))
    out = spans.clamp_span(raw, 1 / 64)
    assert (out[:, 0] <= out[:, 1]).all()
    assert ((out >= 0) & (out <= 1)).all()
    assert (out[:, 1] - out[:, 0] >= 1 / 64 - 1e-12).all()
    try:
        spans.clamp_span((np.nan, 0.5), 0.01)
    except ValueError:
        pass
    else:
        raise AssertionError("NaN input must be rejected")


@check
def schedule_invariants() -> None:
    for t_total in (1, 10, 100, 1000):
        sched = build_cosine_schedule(t_total)
        assert sched.alpha_bar[0] == 1.0
        assert (np.diff(sched.alpha_bar) < 0).all()
        assert ((sched.alpha_bar > 0) & (sched.alpha_bar <= 1)).all()


@check
def forward_noising_moments() -> None:
    sched = build_cosine_schedule(1000, lambda_scale=100.0)
    rng = np.random.default_rng(17)
    x0 = np.array([0.3, -0.7])
    t = 400
    eps = rng.standard_normal((100_000, 2))
    x_t = q_sample(x0, t, eps, sched)
    ab = sched.alpha_bar[t]
    se_mean = np.sqrt((1 - ab) / len(eps))
    assert (np.abs(x_t.mean(axis=0) - np.sqrt(ab) * x0) < 3 * se_mean).all()
    se_var = (1 - ab) * np.sqrt(2.0 / (len(eps) - 1))
    assert (np.abs(x_t.var(axis=0, ddof=1) - (1 - ab)) < 3 * se_var).all()


@check
def ddim_oracle_recovery() -> None:
    sched = build_cosine_schedule(1000)
    rng = np.random.default_rng(19)
    x0 = rng.uniform(-1.5, 1.5, size=(100, 2))
    x = rng.standard_normal((100, 2))
    for steps in ([1000] + list(range(999, 0, -1)), make_sampling_sequence(5, 1000)):
        cur = x.copy()
        for i, t_now in enumerate(steps):
            t_prev = steps[i + 1] if i + 1 < len(steps) else 0
            cur = ddim_step(cur, x0, t_now, t_prev, sched)
        assert np.abs(cur - x0).max() < 1e-6


@check
def soft_pool_convexity() -> None:
    rng = np.random.default_rng(23)
    decoder = SpanDecoder(d=16, n_layers=1, heads=2, ffn_dim=32, dropout=0.0,
                          rng=rng, dtype=np.float64)
    for _ in range(100):
        segment = rng.standard_normal((int(rng.integers(1, 9)), 16))
        pooled = decoder.soft_pool(segment).value
        assert (pooled >= segment.min(axis=0) - 1e-9).all()
        assert (pooled <= segment.max(axis=0) + 1e-9).all()
    for _ in range(200):
        k = int(rng.integers(8, 257))
        span = spans.se_to_cw(_random_spans(rng, 1)[0])
        i0, i1 = crop_indices(span, k)
        assert 0 <= i0 < i1 <= k


@check
def synthetic_structure() -> None:
    cfg = SynthConfig(noise_sigma=0.0, seed=5)
    maps = mixing_maps(cfg)
    rng = np.random.default_rng(29)
    ex = generate_example(cfg, rng, maps=maps)
    again = generate_example(cfg, np.random.default_rng(29), maps=maps)
    assert np.array_equal(ex.video, again.video) and np.array_equal(ex.query, again.query)
    # noiseless: pattern-space distance separates in-span from background clips
    pattern = maps[2].T @ ex.query.mean(axis=0).astype(np.float64)
    dist = np.linalg.norm(maps[0].T @ ex.video.T.astype(np.float64) - pattern[:, None], axis=0)
    centers = (np.arange(cfg.k) + 0.5) / cfg.k
    inside = (centers >= ex.target[0]) & (centers <= ex.target[1])
    assert set(np.flatnonzero(dist < 1e-5)) == set(np.flatnonzero(inside))
    widths = [e.target[1] - e.target[0] for e in generate_examples(cfg, 200)]
    assert all(cfg.width_range[0] - 1e-9 <= w <= cfg.width_range[1] + 1e-9 for w in widths)


def run(verbose: bool = True) -> int:
    failures = 0
    for fn in CHECKS:
        name = fn.__name__
        try:
            fn()
        except AssertionError as err:
            failures += 1
            if verbose:
                print(f"[FAIL] {name}: {err}")
        else:
            if verbose:
                print(f"[PASS] {name}")
    return failures
