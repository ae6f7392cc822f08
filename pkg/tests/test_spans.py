"""Span geometry: frozen examples, fuzz properties, and the voting oracle."""

import numpy as np
import pytest

from diffspan import spans

RNG = np.random.default_rng(42)


def random_spans(rng, n, w_min=1e-3):
    lo = rng.uniform(0.0, 1.0 - w_min, size=n)
    width = rng.uniform(w_min, 1.0 - lo)
    return np.stack([lo, lo + width], axis=-1)


# -- oracle: independent interval arithmetic ---------------------------------

def iou_oracle(a, b):
    inter = max(0.0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    return inter / union if union > 0 else 0.0


def giou_oracle(a, b):
    hull = max(a[1], b[1]) - min(a[0], b[0])
    inter = max(0.0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    return iou_oracle(a, b) - (hull - union) / hull


class TestIoU:
    def test_identity(self):
        assert spans.iou((0.2, 0.5), (0.2, 0.5)) == 1.0

    def test_disjoint(self):
        assert spans.iou((0.0, 0.2), (0.8, 1.0)) == 0.0

    def test_partial_overlap(self):
        # intersection 0.2, union 0.4 by the definitional oracle
        assert spans.iou((0.2, 0.5), (0.3, 0.6)) == pytest.approx(0.5)
        assert spans.iou((0.2, 0.5), (0.3, 0.6)) == pytest.approx(
            iou_oracle((0.2, 0.5), (0.3, 0.6)))

    def test_zero_width_identical_is_zero(self):
        assert spans.iou((0.4, 0.4), (0.4, 0.4)) == 0.0

    def test_fuzz_bounds_and_symmetry(self):
        a, b = random_spans(RNG, 100_000), random_spans(RNG, 100_000)
        vals = spans.iou(a, b)
        assert ((vals >= 0.0) & (vals <= 1.0)).all()
        assert np.array_equal(spans.iou(b, a), vals)
        widths = a[:, 1] - a[:, 0]
        self_iou = spans.iou(a, a)
        assert (self_iou[widths > 0] == 1.0).all()


class TestGIoU:
    def test_identity(self):
        assert spans.giou((0.2, 0.5), (0.2, 0.5)) == 1.0

    def test_disjoint_value(self):
        # iou 0, hull 1, union 0.4 -> 0 - 0.6/1
        assert spans.giou((0.0, 0.2), (0.8, 1.0)) == pytest.approx(-0.6)

    def test_fuzz_relations(self):
        a, b = random_spans(RNG, 100_000), random_spans(RNG, 100_000)
        g = spans.giou(a, b)
        i = spans.iou(a, b)
        assert (g <= i + 1e-12).all()
        assert ((g > -1.0) & (g <= 1.0)).all()
        overlap = i > 0
        # in 1-D the hull equals the union whenever intervals overlap
        assert np.allclose(g[overlap], i[overlap])
        assert (g[~overlap] < i[~overlap]).all()

    def test_against_oracle(self):
        for _ in range(500):
            a, b = random_spans(RNG, 1)[0], random_spans(RNG, 1)[0]
            assert spans.giou(a, b) == pytest.approx(giou_oracle(a, b), abs=1e-12)


class TestParameterizations:
    def test_se_to_cw_example(self):
        assert np.allclose(spans.se_to_cw((0.2, 0.6)), (0.4, 0.4))

    def test_full_span(self):
        assert np.allclose(spans.se_to_cw((0.0, 1.0)), (0.5, 1.0))

    def test_round_trip(self):
        w_min = 1 / 64
        se = random_spans(RNG, 10_000, w_min=w_min)
        back = spans.cw_to_se(spans.se_to_cw(se), w_min)
        assert np.allclose(back, se, atol=1e-12)


class TestClampSpan:
    def test_clip_at_boundary(self):
        assert np.allclose(spans.clamp_span((-0.1, 0.5)), (0.0, 0.5))

    def test_reorder(self):
        assert np.allclose(spans.clamp_span((0.7, 0.3)), (0.3, 0.7))

    def test_symmetric_expansion(self):
        out = spans.clamp_span((0.5, 0.5), 1 / 64)
        assert np.allclose(out, (0.4921875, 0.5078125))

    def test_expansion_shifts_inside_at_boundary(self):
        out = spans.clamp_span((0.0, 0.0), 0.1)
        assert np.allclose(out, (0.0, 0.1))
        out = spans.clamp_span((1.2, 1.4), 0.1)
        assert np.allclose(out, (0.9, 1.0))

    def test_fuzz_invariants(self):
        raw = RNG.uniform(-5.0, 6.0, size=(100_000, 2))
        w_min = 1 / 64
        out = spans.clamp_span(raw, w_min)
        assert ((out >= 0.0) & (out <= 1.0)).all()
        assert (out[:, 1] - out[:, 0] >= w_min - 1e-12).all()

    @pytest.mark.parametrize("bad", [(np.nan, 0.5), (0.2, np.inf), (-np.inf, np.nan)])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(ValueError):
            spans.clamp_span(bad, 0.01)


class TestVote:
    def test_single_span(self):
        winner, scores = spans.vote([[0.2, 0.4]])
        assert winner == 0
        assert np.allclose(scores, [0.0])

    def test_three_span_example(self):
        winner, scores = spans.vote([[0.1, 0.3], [0.12, 0.32], [0.7, 0.9]])
        assert winner == 0  # tie between 0 and 1 -> lowest index
        # brute-force oracle: iou(A,B) = 0.18/0.22, iou with C = 0
        assert scores[0] == pytest.approx(0.8181818181818182)
        assert scores[1] == pytest.approx(0.8181818181818182)
        assert scores[2] == 0.0

    def test_empty_errors(self):
        with pytest.raises(ValueError):
            spans.vote([])

    def test_against_bruteforce_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            cands = random_spans(rng, int(rng.integers(1, 9)))
            winner, scores = spans.vote(cands)
            oracle = [
                sum(iou_oracle(cands[i], cands[j]) for j in range(len(cands)) if j != i)
                for i in range(len(cands))
            ]
            assert np.allclose(scores, oracle, atol=1e-12)
            assert winner == int(np.argmax(oracle))

    def test_permutation_selects_same_span_value(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            cands = random_spans(rng, 6)
            base_winner, base_scores = spans.vote(cands)
            perm = rng.permutation(6)
            p_winner, p_scores = spans.vote(cands[perm])
            assert np.allclose(np.sort(p_scores), np.sort(base_scores))
            assert p_scores[p_winner] == pytest.approx(base_scores[base_winner])

    def test_self_iou_exclusion_matches_inclusion(self):
        rng = np.random.default_rng(13)
        for _ in range(200):
            cands = random_spans(rng, int(rng.integers(2, 8)), w_min=0.01)
            winner, scores = spans.vote(cands)
            matrix = spans.pairwise_iou(cands)
            with_self = matrix.sum(axis=1)  # adds the constant 1 to every score
            assert np.allclose(with_self - 1.0, scores, atol=1e-12)
            assert int(np.argmax(with_self)) == winner
