"""Keypoint selection and differentiable confidence-weighted keypoint voting.

A keypoint's scene position is recovered from per-point votes: every scene
point ``s_i`` casts ``s_i + v_ik`` for keypoint ``k``, and the votes are
blended with per-keypoint softmax confidences, so one bad vote with a small
weight barely moves the result while the whole map stays differentiable in
both the offsets and the raw confidence logits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diff
from .diff import value
from .validation import as_points, check_dims

__all__ = [
    "OffsetField",
    "fps_sample",
    "keypoint_config",
    "true_offsets",
    "normalize_confidences",
    "aggregate_keypoints",
    "predict_keypoints",
    "aggregate_keypoints_backward",
]


@dataclass
class OffsetField:
    """Per-point, per-keypoint offset votes with raw confidence logits.

    ``offsets[i, k]`` is the predicted vector from scene point ``i`` to
    keypoint ``k``; ``confidence_logits[i, k]`` is its unnormalized weight.
    """

    offsets: np.ndarray
    confidence_logits: np.ndarray

    def __post_init__(self):
        off = value(self.offsets)
        logit = value(self.confidence_logits)
        if off.ndim != 3 or off.shape[2] != 3:
            raise ValueError(f"offsets must have shape (N, K, 3), got {off.shape}")
        if logit.shape != off.shape[:2]:
            raise ValueError(
                f"confidence_logits shape {logit.shape} does not match offsets {off.shape[:2]}"
            )

    @property
    def n_points(self) -> int:
        return value(self.offsets).shape[0]

    @property
    def n_keypoints(self) -> int:
        return value(self.offsets).shape[1]


def fps_sample(points, k: int) -> np.ndarray:
    """Farthest point sampling, deterministic.

    The seed is the point farthest from the centroid; every further pick
    maximizes the minimum distance to the points already chosen.  Ties break
    toward the lowest index.
    """
    pts = as_points(points, "model points")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > pts.shape[0]:
        raise ValueError(f"cannot sample {k} keypoints from {pts.shape[0]} points")
    centroid = pts.mean(axis=0)
    chosen = [int(np.argmax(((pts - centroid) ** 2).sum(axis=1)))]
    min_d2 = ((pts - pts[chosen[0]]) ** 2).sum(axis=1)
    while len(chosen) < k:
        nxt = int(np.argmax(min_d2))
        chosen.append(nxt)
        min_d2 = np.minimum(min_d2, ((pts - pts[nxt]) ** 2).sum(axis=1))
    return pts[chosen].copy()


def keypoint_config(points, k_fps: int = 8) -> np.ndarray:
    """FPS keypoints plus the model centroid: ``k_fps + 1`` keypoints total."""
    pts = as_points(points, "model points")
    return np.vstack([fps_sample(pts, k_fps), pts.mean(axis=0)])


def true_offsets(scene_keypoints, scene_points):
    """Ground-truth votes ``x_k - s_i``, shape (N, K, 3)."""
    kps = as_points(scene_keypoints, "scene keypoints")
    scene = as_points(scene_points, "scene points")
    return kps[None, :, :] - scene[:, None, :]


def normalize_confidences(logits):
    """Per-keypoint softmax over scene points; columns sum to one.

    The stabilizing max is taken on the primal part, so the map stays exactly
    shift invariant and differentiable.
    """
    check_dims(logits, 2, "confidence_logits")
    pivot = np.asarray(value(logits)).max(axis=0)
    z = np.exp(logits - pivot[None, :])
    return z / z.sum(axis=0)[None, :]


def aggregate_keypoints(scene_points, offsets, confidences):
    """Confidence-weighted vote blend: ``x_k = sum_i c_ik (s_i + v_ik)``."""
    check_dims(scene_points, 2, "scene_points", last=3)
    check_dims(offsets, 3, "offsets", last=3)
    check_dims(confidences, 2, "confidences")
    n, k = value(offsets).shape[:2]
    if value(scene_points).shape[0] != n or value(confidences).shape != (n, k):
        raise ValueError(
            f"dimension mismatch: scene {value(scene_points).shape}, "
            f"offsets {value(offsets).shape}, confidences {value(confidences).shape}"
        )
    votes = scene_points[:, None, :] + offsets
    return (confidences[:, :, None] * votes).sum(0)


def predict_keypoints(scene_points, offsets, confidence_logits):
    """Votes plus softmax confidences in one step; differentiable in both fields."""
    return aggregate_keypoints(
        scene_points, offsets, normalize_confidences(confidence_logits)
    )


def aggregate_keypoints_backward(scene_points, offsets, confidence_logits, grad_keypoints):
    """Closed-form vector-Jacobian product of :func:`predict_keypoints`.

    Given the gradient of a scalar loss with respect to the aggregated
    keypoints, returns its gradients with respect to the offsets and the
    confidence logits.  Matches forward-mode differentiation exactly; kept as
    an explicit formula because training needs it at full scene scale.
    """
    scene = as_points(scene_points, "scene_points")
    off = np.asarray(offsets, dtype=np.float64)
    g_kp = np.asarray(grad_keypoints, dtype=np.float64)
    w = normalize_confidences(np.asarray(confidence_logits, dtype=np.float64))
    votes = scene[:, None, :] + off
    xhat = (w[:, :, None] * votes).sum(0)
    g_offsets = w[:, :, None] * g_kp[None, :, :]
    g_logits = w * ((votes - xhat[None, :, :]) * g_kp[None, :, :]).sum(-1)
    return g_offsets, g_logits
