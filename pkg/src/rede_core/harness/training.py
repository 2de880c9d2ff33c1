"""Toy end-to-end trainer: per-scene vote parameters fit by gradient descent.

This is the smallest construct that exercises gradient flow through the full
chain vote aggregation -> minimal-solver bank -> soft pose aggregation ->
pose loss: instead of a shared network, the offsets and confidence logits of
one scene are free parameters.  The pose-loss gradient is assembled from a
forward-mode pass seeded at the aggregated keypoints (3K tangents) composed
with the closed-form Jacobian of the aggregation layer, which is exact and
keeps full-scene training fast; tests pin it against end-to-end forward mode.

Zero-initialized offsets place every predicted keypoint at the scene
centroid, so initially every minimal triple is degenerate and the pose term
is undefined.  Training therefore starts on the offset loss alone and folds
the pose term into the objective at the first iterate where the solver bank
produces a valid pose; trace rows before that record ``nan`` pose loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import diff
from ..exceptions import DegenerateAggregationError, NoValidCandidateError
from ..geometry import Pose, apply_pose
from ..keypoints import (
    aggregate_keypoints_backward,
    predict_keypoints,
    true_offsets,
)
from ..losses import LossConfig, offset_loss, offset_loss_grad, pose_loss
from ..solver import estimate_pose
from .scenes import RunConfig, SceneSample, model_from_id

__all__ = ["ToyPredictor", "train_toy", "pose_term_gradient", "corrupt_offset_targets"]

_MIN_STEP = 1e-14
_STEP_GROWTH = 1.25
_MAX_STEP = 1.0


@dataclass
class ToyPredictor:
    """Per-scene free parameters plus the hyperparameters that trained them."""

    offsets: np.ndarray
    confidence_logits: np.ndarray
    step_size: float
    n_iter: int


def _pose_term(kps, model_kps, scene, model, true_pose, cfg: RunConfig, loss_cfg: LossConfig):
    est, _ = estimate_pose(
        model_kps,
        kps,
        scene,
        model,
        lam=cfg.lam,
        max_scene_points=cfg.max_scene_points,
    )
    return pose_loss(est, true_pose, loss_cfg)


def pose_term_gradient(
    offsets: np.ndarray,
    logits: np.ndarray,
    model_kps: np.ndarray,
    scene: np.ndarray,
    model: np.ndarray,
    true_pose: Pose,
    cfg: RunConfig,
    loss_cfg: LossConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the pose loss in the vote parameters.

    Forward mode through the solver and loss, seeded at the K x 3 aggregated
    keypoints, then pushed through the aggregation layer's exact Jacobian.
    """
    kps0 = predict_keypoints(scene, offsets, logits)
    pv = diff.ParameterVector.from_arrays({"kps": kps0})

    def f(params):
        return _pose_term(params["kps"], model_kps, scene, model, true_pose, cfg, loss_cfg)

    g_kp = diff.grad(f, pv).reshape(kps0.shape)
    return aggregate_keypoints_backward(scene, offsets, logits, g_kp)


def corrupt_offset_targets(
    targets: np.ndarray, fraction: float, scale: float, seed: int
) -> np.ndarray:
    """Displace a random ``fraction`` of each keypoint's target offsets.

    Models wrong regression labels: the pose supervision stays clean while
    part of the offset supervision points elsewhere, which is the situation
    where the pose term in the joint loss earns its keep.
    """
    out = np.array(targets, dtype=np.float64, copy=True)
    n, k = out.shape[:2]
    m = int(fraction * n)
    if m == 0:
        return out
    rng = np.random.default_rng(np.random.SeedSequence((0xBE7A, seed)))
    for col in range(k):
        rows = rng.choice(n, size=m, replace=False)
        dirs = rng.standard_normal((m, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        out[rows, col, :] += scale * dirs
    return out


def train_toy(
    sample: SceneSample,
    model_kps: np.ndarray,
    cfg: RunConfig,
    model_points: np.ndarray | None = None,
    target_offsets: np.ndarray | None = None,
) -> tuple[ToyPredictor, list[dict]]:
    """Plain gradient descent on the joint loss, with backtracking on increase.

    Offsets and logits start at zero.  Steps that would increase the active
    objective are halved until they improve it, so the loss trace is
    non-increasing once the pose term has joined the objective.  Returns the
    trained parameters and one trace row per iteration with the loss
    decomposition (``pose_loss`` is ``nan`` while the bank is degenerate).

    ``target_offsets`` overrides the offset regression targets (normally the
    ground-truth offsets), e.g. with :func:`corrupt_offset_targets`.
    """
    scene = sample.scene_points
    model = (
        np.asarray(model_points, dtype=np.float64)
        if model_points is not None
        else model_from_id(sample.model_id).points
    )
    loss_cfg = LossConfig(alpha=cfg.alpha, beta=cfg.beta)
    truth_kps = apply_pose(sample.true_pose, model_kps)
    if target_offsets is None:
        target_offsets = true_offsets(truth_kps, scene)
    else:
        target_offsets = np.asarray(target_offsets, dtype=np.float64)
        if target_offsets.shape != (scene.shape[0], model_kps.shape[0], 3):
            raise ValueError("target_offsets shape does not match the scene and keypoints")

    n, k = scene.shape[0], model_kps.shape[0]
    offsets = np.zeros((n, k, 3))
    logits = np.zeros((n, k))

    def parts(off, logi):
        """(offset_term, pose_term_or_nan, solvable)"""
        off_term = float(offset_loss(off, target_offsets))
        try:
            kps = predict_keypoints(scene, off, logi)
            p_term = float(
                diff.value(
                    _pose_term(kps, model_kps, scene, model, sample.true_pose, cfg, loss_cfg)
                )
            )
        except (NoValidCandidateError, DegenerateAggregationError):
            return off_term, float("nan"), False
        return off_term, p_term, math.isfinite(p_term)

    def total(off_term, p_term, solvable, pose_active):
        if pose_active:
            if not solvable:
                return float("inf")
            return off_term + loss_cfg.beta * p_term
        return off_term

    off_term, p_term, solvable = parts(offsets, logits)
    pose_active = bool(loss_cfg.beta > 0 and solvable)
    loss = total(off_term, p_term, solvable, pose_active)

    step = float(cfg.train_step_size)
    trace: list[dict] = []

    def record(iteration):
        trace.append(
            {
                "iteration": iteration,
                "loss": loss,
                "offset_loss": off_term,
                "pose_loss": p_term,
                "offset_loss_mean": off_term / (n * k * 3),
                "step": step,
            }
        )

    for iteration in range(cfg.train_iters):
        if not np.isfinite(loss):
            raise RuntimeError(f"non-finite loss at iteration {iteration}")
        g_off = offset_loss_grad(offsets, target_offsets)
        g_log = np.zeros_like(logits)
        if pose_active:
            gp_off, gp_log = pose_term_gradient(
                offsets, logits, model_kps, scene, model, sample.true_pose, cfg, loss_cfg
            )
            g_off = g_off + loss_cfg.beta * gp_off
            g_log = loss_cfg.beta * gp_log

        accepted = False
        while step >= _MIN_STEP:
            trial_off = offsets - step * g_off
            trial_log = logits - step * g_log
            t_off, t_pose, t_solv = parts(trial_off, trial_log)
            trial_loss = total(t_off, t_pose, t_solv, pose_active)
            if np.isfinite(trial_loss) and trial_loss <= loss:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            record(iteration)
            break

        offsets, logits = trial_off, trial_log
        off_term, p_term, solvable = t_off, t_pose, t_solv
        if loss_cfg.beta > 0 and not pose_active and solvable:
            pose_active = True
        loss = total(off_term, p_term, solvable, pose_active)
        record(iteration)
        step = min(step * _STEP_GROWTH, _MAX_STEP)

    predictor = ToyPredictor(
        offsets=offsets,
        confidence_logits=logits,
        step_size=float(cfg.train_step_size),
        n_iter=int(cfg.train_iters),
    )
    return predictor, trace
