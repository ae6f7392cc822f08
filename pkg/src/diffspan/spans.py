"""Closed-form geometry of normalized 1-D spans.

A span is a pair ``(start, end)`` with ``0 <= start <= end <= 1``; the
center/width form is ``(center, width) = ((start+end)/2, end-start)``. All
functions are vectorized over any leading axes (last axis must have size 2)
and accept plain sequences; scalar inputs yield python floats.

Everything here is pure and stateless, so concurrent use is safe.
"""

from __future__ import annotations

import numpy as np


def _as_pairs(x, name: str = "span") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0 or arr.shape[-1] != 2:
        raise ValueError(f"{name} must have a trailing axis of size 2, got shape {arr.shape}")
    return arr


def _maybe_scalar(x: np.ndarray):
    return float(x) if x.ndim == 0 else x


def iou(a, b):
    """Intersection over union of two spans.

    Returns 0 when the union has zero length (two identical zero-width
    spans), avoiding a 0/0.
    """
    a, b = _as_pairs(a), _as_pairs(b)
    inter = np.maximum(0.0, np.minimum(a[..., 1], b[..., 1]) - np.maximum(a[..., 0], b[..., 0]))
    union = (a[..., 1] - a[..., 0]) + (b[..., 1] - b[..., 0]) - inter
    safe = np.where(union > 0.0, union, 1.0)
    return _maybe_scalar(np.where(union > 0.0, inter / safe, 0.0))


def giou(a, b):
    """Generalized IoU: ``iou - |hull \\ union| / |hull|``.

    The hull is the smallest interval enclosing both spans; for overlapping
    spans the hull equals the union and giou == iou. Range is (-1, 1].
    """
    a, b = _as_pairs(a), _as_pairs(b)
    inter = np.maximum(0.0, np.minimum(a[..., 1], b[..., 1]) - np.maximum(a[..., 0], b[..., 0]))
    union = (a[..., 1] - a[..., 0]) + (b[..., 1] - b[..., 0]) - inter
    hull = np.maximum(a[..., 1], b[..., 1]) - np.minimum(a[..., 0], b[..., 0])
    safe_union = np.where(union > 0.0, union, 1.0)
    base = np.where(union > 0.0, inter / safe_union, 0.0)
    safe_hull = np.where(hull > 0.0, hull, 1.0)
    return _maybe_scalar(np.where(hull > 0.0, base - (hull - union) / safe_hull, base))


def se_to_cw(span):
    """(start, end) -> (center, width); exact affine bijection."""
    span = _as_pairs(span)
    out = np.stack([(span[..., 0] + span[..., 1]) / 2.0, span[..., 1] - span[..., 0]], axis=-1)
    return out


def cw_to_se(cw, w_min: float = 0.0):
    """(center, width) -> (start, end), clamped to a valid span.

    Applies :func:`clamp_span` semantics, so the result lies in [0, 1] with
    width >= ``w_min``.
    """
    cw = _as_pairs(cw, "cw")
    raw = np.stack([cw[..., 0] - cw[..., 1] / 2.0, cw[..., 0] + cw[..., 1] / 2.0], axis=-1)
    return clamp_span(raw, w_min)


def clamp_span(raw, w_min: float = 0.0):
    """Repair an arbitrary real pair into a valid span.

    Coordinates are reordered if inverted and clipped to [0, 1]; a span
    narrower than ``w_min`` is expanded symmetrically around its center and
    shifted inside the unit interval if the expansion crosses a boundary
    (so the width floor survives at the boundaries).

    Raises ``ValueError`` on non-finite input rather than repairing it.
    """
    raw = _as_pairs(raw)
    if not np.isfinite(raw).all():
        raise ValueError("clamp_span requires finite coordinates")
    if not (0.0 <= w_min <= 1.0):
        raise ValueError(f"w_min must be in [0, 1], got {w_min}")
    lo = np.clip(np.minimum(raw[..., 0], raw[..., 1]), 0.0, 1.0)
    hi = np.clip(np.maximum(raw[..., 0], raw[..., 1]), 0.0, 1.0)
    width = np.minimum(np.maximum(hi - lo, w_min), 1.0)
    center = np.clip((lo + hi) / 2.0, width / 2.0, 1.0 - width / 2.0)
    return np.stack([center - width / 2.0, center + width / 2.0], axis=-1)


def pairwise_iou(spans) -> np.ndarray:
    """[N, 2] spans -> [N, N] IoU matrix."""
    spans = _as_pairs(spans)
    return iou(spans[:, None, :], spans[None, :, :])


def vote(spans) -> tuple[int, np.ndarray]:
    """Score each span by its summed IoU with all other spans.

    Returns ``(winner_index, scores)`` where ``scores[i]`` excludes the
    self-IoU and the winner is the argmax with ties broken by lowest index.
    Raises ``ValueError`` on an empty candidate list.
    """
    spans = np.asarray(spans, dtype=np.float64)
    if spans.size == 0:
        raise ValueError("vote requires at least one candidate span")
    spans = spans.reshape(-1, 2)
    matrix = pairwise_iou(spans)
    np.fill_diagonal(matrix, 0.0)
    scores = matrix.sum(axis=1)
    return int(np.argmax(scores)), scores
