"""Pose evaluation metrics: ADD, ADD-S, threshold accuracy, and AUC."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose, apply_pose
from .validation import as_points

__all__ = [
    "add_metric",
    "add_s_metric",
    "auc",
    "accuracy_at",
    "EvalReport",
    "evaluate_poses",
]

DEFAULT_AUC_THRESHOLD = 0.1
TWO_CM = 0.02


def add_metric(pred: Pose, truth: Pose, model_points) -> float:
    """Mean distance between model points under the two poses."""
    pts = as_points(model_points, "model_points")
    a = apply_pose(truth.primal(), pts)
    b = apply_pose(pred.primal(), pts)
    return float(np.linalg.norm(a - b, axis=1).mean())


def add_s_metric(pred: Pose, truth: Pose, model_points) -> float:
    """Closest-point variant of ADD, tolerant to object symmetry.

    For every model point under the predicted pose, takes the distance to the
    nearest model point under the ground-truth pose; brute force O(N^2).
    """
    pts = as_points(model_points, "model_points")
    true_pts = apply_pose(truth.primal(), pts)
    pred_pts = apply_pose(pred.primal(), pts)
    total = 0.0
    step = 512
    for start in range(0, pred_pts.shape[0], step):
        block = pred_pts[start : start + step]
        d2 = ((true_pts[None, :, :] - block[:, None, :]) ** 2).sum(-1)
        total += float(np.sqrt(d2.min(axis=1)).sum())
    return total / pts.shape[0]


def auc(distances, max_threshold: float = DEFAULT_AUC_THRESHOLD) -> float:
    """Exact area under the accuracy-vs-threshold step curve, normalized to 1.

    Equals ``mean(max(0, 1 - d / T))``: each sample contributes the fraction
    of thresholds in ``[0, T]`` it passes, so samples beyond ``T`` contribute
    nothing.
    """
    if not max_threshold > 0:
        raise ValueError("max_threshold must be > 0")
    d = np.asarray(distances, dtype=np.float64)
    if d.size == 0:
        raise ValueError("distances must be nonempty")
    return float(np.clip(1.0 - d / max_threshold, 0.0, 1.0).mean())


def accuracy_at(distances, threshold: float) -> float:
    """Fraction of samples strictly below ``threshold`` (boundary counts as miss)."""
    if not threshold > 0:
        raise ValueError("threshold must be > 0")
    d = np.asarray(distances, dtype=np.float64)
    if d.size == 0:
        raise ValueError("distances must be nonempty")
    return float((d < threshold).mean())


@dataclass
class EvalReport:
    """Per-sample metrics plus the standard aggregates."""

    add: np.ndarray
    add_s: np.ndarray
    correct_at_2cm: np.ndarray
    correct_at_10pct_diameter: np.ndarray
    auc_add_s: float = field(default=0.0)
    accuracy_2cm: float = field(default=0.0)
    accuracy_10pct: float = field(default=0.0)

    def __post_init__(self):
        self.add = np.asarray(self.add, dtype=np.float64)
        self.add_s = np.asarray(self.add_s, dtype=np.float64)
        self.correct_at_2cm = np.asarray(self.correct_at_2cm, dtype=bool)
        self.correct_at_10pct_diameter = np.asarray(self.correct_at_10pct_diameter, dtype=bool)
        if np.any(self.add_s > self.add + 1e-12):
            raise ValueError("add_s must never exceed add")
        for name in ("auc_add_s", "accuracy_2cm", "accuracy_10pct"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @property
    def n_samples(self) -> int:
        return int(self.add.size)


def evaluate_poses(
    pred_poses,
    true_poses,
    model_points,
    diameter: float | None = None,
    auc_max_threshold: float = DEFAULT_AUC_THRESHOLD,
) -> EvalReport:
    """Batch metric evaluation over matched pose lists.

    The 2 cm accuracy follows the symmetric metric (ADD-S); the 10%-diameter
    accuracy follows ADD.  ``diameter`` defaults to the exact cloud diameter.
    """
    from .geometry import cloud_diameter

    pts = as_points(model_points, "model_points")
    if diameter is None:
        diameter = cloud_diameter(pts)
    adds, add_ss = [], []
    for pred, truth in zip(pred_poses, true_poses, strict=True):
        adds.append(add_metric(pred, truth, pts))
        add_ss.append(add_s_metric(pred, truth, pts))
    adds = np.asarray(adds)
    add_ss = np.asarray(add_ss)
    return EvalReport(
        add=adds,
        add_s=add_ss,
        correct_at_2cm=add_ss < TWO_CM,
        correct_at_10pct_diameter=adds < 0.1 * diameter,
        auc_add_s=auc(add_ss, auc_max_threshold),
        accuracy_2cm=accuracy_at(add_ss, TWO_CM),
        accuracy_10pct=float((adds < 0.1 * diameter).mean()),
    )
