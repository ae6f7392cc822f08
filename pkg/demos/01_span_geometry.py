"""Span geometry walkthrough: IoU, GIoU, clamping and voting.

Run: python3 demos/01_span_geometry.py
"""

import numpy as np

from diffspan import clamp_span, giou, iou, se_to_cw, vote

print("=== interval overlap measures ===")
pairs = [
    ((0.2, 0.5), (0.2, 0.5), "identical"),
    ((0.2, 0.5), (0.3, 0.6), "partial overlap"),
    ((0.0, 0.2), (0.8, 1.0), "disjoint"),
]
for a, b, label in pairs:
    print(f"{label:16s} iou={iou(a, b):+.4f}  giou={giou(a, b):+.4f}")

print("\nGIoU drops below zero for disjoint spans and penalizes the gap;")
print("for overlapping spans the enclosing hull equals the union, so giou == iou.")

print("\n=== clamping raw predictions into valid spans ===")
w_min = 1 / 64
for raw in [(-0.1, 0.5), (0.7, 0.3), (0.5, 0.5), (1.2, 1.4)]:
    print(f"raw {str(raw):14s} -> {np.round(clamp_span(raw, w_min), 6)}")
print(f"(width floor w_min = 1/64 = {w_min:.6f}; degenerate spans expand around their center)")

print("\n=== center/width parameterization ===")
span = (0.2, 0.6)
print(f"span {span} -> (center, width) {tuple(np.round(se_to_cw(span), 6))}")

print("\n=== voting among candidate spans ===")
candidates = np.array([
    [0.10, 0.30],
    [0.12, 0.32],
    [0.11, 0.33],
    [0.70, 0.90],   # outlier
])
winner, scores = vote(candidates)
for i, (span_i, score) in enumerate(zip(candidates, scores)):
    marker = "  <- winner" if i == winner else ""
    print(f"candidate {i} {span_i}  score {score:.4f}{marker}")
print("each candidate is scored by its summed IoU with all the others,")
print("so the cluster wins and the outlier is ignored.")
