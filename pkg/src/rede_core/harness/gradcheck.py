"""Forward-mode vs finite-difference validation suite.

Builds seeded, explicitly non-degenerate instances (no near-collinear
keypoint triples, no near-equal singular values, no tight nearest-neighbour
margins) and compares ``grad`` against ``fd_grad`` component by component for
the offset loss, the pose loss, and the full joint pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import diff
from ..geometry import Pose, apply_pose, normalize_quat, random_pose
from ..keypoints import predict_keypoints, true_offsets
from ..losses import LossConfig, joint_loss, offset_loss, pose_loss
from ..solver import _solve_bank, estimate_pose

__all__ = ["GradCheckResult", "gradcheck_instance", "gradcheck_suite", "max_relative_error"]

_GRAD_FLOOR = 1e-8


@dataclass
class GradCheckResult:
    name: str
    seed: int
    max_rel_error: float
    n_checked: int

    @property
    def ok(self) -> bool:
        return self.max_rel_error < 1e-4


def max_relative_error(g: np.ndarray, fd: np.ndarray, abs_tol: float = 0.0) -> tuple[float, int]:
    """Worst relative disagreement over components with ``|g|`` above the floor.

    ``abs_tol`` ignores disagreements smaller than the central-difference
    roundoff resolution (about ``eps * |f| / h``); components the oracle
    cannot resolve say nothing about the gradient.
    """
    mask = np.abs(g) > _GRAD_FLOOR
    if abs_tol > 0.0:
        mask &= np.abs(g - fd) > abs_tol
    if not np.any(mask):
        return 0.0, int((np.abs(g) > _GRAD_FLOOR).sum())
    rel = np.abs(g[mask] - fd[mask]) / np.maximum(np.abs(fd[mask]), 1e-12)
    return float(rel.max()), int((np.abs(g) > _GRAD_FLOOR).sum())


def _triples_well_conditioned(model_kps: np.ndarray, scene_kps: np.ndarray) -> bool:
    triples, _, _, degenerate = _solve_bank(model_kps, scene_kps)
    if np.any(degenerate):
        return False
    m = model_kps[triples]
    x = scene_kps[triples]
    mc = m - m.mean(1, keepdims=True)
    xc = x - x.mean(1, keepdims=True)
    H = np.einsum("cki,ckj->cij", mc, xc)
    S = np.linalg.svd(H, compute_uv=False)
    s2 = S**2
    # the third singular value of a minimal triple is ~0 by construction; only
    # the (s0, s1) gap and the collinearity ratio s1/s0 threaten conditioning
    gap01 = np.abs(s2[:, 0] - s2[:, 1]) / np.maximum(s2[:, 0], 1e-300)
    return bool(gap01.min() > 1e-3) and bool(np.all(S[:, 1] / S[:, 0] > 1e-3))


def _nn_margins_ok(model_kps, scene_kps, scene, model, margin: float) -> bool:
    _, quats, ts, _ = _solve_bank(model_kps, scene_kps)
    from ..geometry import quat_to_rotmat

    R = quat_to_rotmat(quats)
    moved = np.matmul(model[None], np.swapaxes(R, -1, -2)) + ts[:, None, :]
    d2 = ((moved[:, :, None, :] - scene[None, None, :, :]) ** 2).sum(-1)
    d = np.sqrt(np.sort(d2, axis=1))
    return bool((d[:, 1, :] - d[:, 0, :]).min() > margin)


@dataclass
class GradCheckInstance:
    model: np.ndarray
    model_kps: np.ndarray
    scene: np.ndarray
    true_pose: Pose
    pred_offsets: np.ndarray
    pred_logits: np.ndarray
    pred_pose: Pose
    lam: float


def gradcheck_instance(
    seed: int, n_points: int = 12, k: int = 4, model_points: int = 18
) -> GradCheckInstance:
    """Seeded random instance, rejection-sampled away from degeneracies."""
    for attempt in range(64):
        rng = np.random.default_rng(np.random.SeedSequence((0x64AD, seed, attempt)))
        model = rng.standard_normal((model_points, 3)) * 0.4
        model_kps = rng.standard_normal((k, 3)) * 0.45
        true_pose = random_pose(rng, 0.3)
        scene = apply_pose(true_pose, model[rng.choice(model_points, n_points, replace=False)])
        scene = scene + rng.normal(0.0, 0.01, scene.shape)
        kps_true = apply_pose(true_pose, model_kps)
        pred_kps = kps_true + rng.normal(0.0, 0.04, kps_true.shape)

        offsets = true_offsets(pred_kps, scene) + rng.normal(0.0, 0.03, (n_points, k, 3))
        logits = rng.normal(0.0, 0.5, (n_points, k))
        pred_quat = normalize_quat(true_pose.quat + rng.normal(0.0, 0.05, 4))
        pred_pose = Pose(quat=pred_quat, t=true_pose.t + rng.normal(0.0, 0.03, 3))

        kps_now = predict_keypoints(scene, offsets, logits)
        if not _triples_well_conditioned(model_kps, kps_now):
            continue
        if not _nn_margins_ok(model_kps, kps_now, scene, model, margin=1e-4):
            continue
        return GradCheckInstance(
            model=model,
            model_kps=model_kps,
            scene=scene,
            true_pose=true_pose,
            pred_offsets=offsets,
            pred_logits=logits,
            pred_pose=pred_pose,
            lam=0.05,
        )
    raise RuntimeError(f"could not build a non-degenerate instance for seed {seed}")


def _check_offset_loss(inst: GradCheckInstance, seed: int) -> GradCheckResult:
    target = true_offsets(apply_pose(inst.true_pose, inst.model_kps), inst.scene)
    pv = diff.ParameterVector.from_arrays({"offsets": inst.pred_offsets})

    def f(params):
        return offset_loss(params["offsets"], target)

    g = diff.grad(f, pv)
    fd = diff.fd_grad(f, pv)
    err, n = max_relative_error(g, fd)
    return GradCheckResult("offset_loss", seed, err, n)


def _check_pose_loss(inst: GradCheckInstance, seed: int) -> GradCheckResult:
    pv = diff.ParameterVector.from_arrays(
        {"quat": np.asarray(inst.pred_pose.quat), "t": np.asarray(inst.pred_pose.t)}
    )

    def f(params):
        return pose_loss(Pose(quat=params["quat"], t=params["t"]), inst.true_pose)

    g = diff.grad(f, pv)
    fd = diff.fd_grad(f, pv)
    err, n = max_relative_error(g, fd)
    return GradCheckResult("pose_loss", seed, err, n)


def _check_joint_pipeline(inst: GradCheckInstance, seed: int) -> GradCheckResult:
    target = true_offsets(apply_pose(inst.true_pose, inst.model_kps), inst.scene)
    cfg = LossConfig(alpha=0.01, beta=0.1)
    pv = diff.ParameterVector.from_arrays(
        {"offsets": inst.pred_offsets, "confidence_logits": inst.pred_logits}
    )

    def f(params):
        kps = predict_keypoints(inst.scene, params["offsets"], params["confidence_logits"])
        est, _ = estimate_pose(
            inst.model_kps, kps, inst.scene, inst.model, lam=inst.lam, max_scene_points=None
        )
        return joint_loss(offset_loss(params["offsets"], target), pose_loss(est, inst.true_pose, cfg), cfg)

    g = diff.grad(f, pv)
    fd = diff.fd_grad(f, pv)
    err, n = max_relative_error(g, fd)
    return GradCheckResult("joint_pipeline", seed, err, n)


def gradcheck_suite(seed: int, n_instances: int = 10, **sizes) -> list[GradCheckResult]:
    """Run all three checks over ``n_instances`` seeded instances."""
    results = []
    for i in range(n_instances):
        inst = gradcheck_instance(seed + i, **sizes)
        results.append(_check_offset_loss(inst, seed + i))
        results.append(_check_pose_loss(inst, seed + i))
        results.append(_check_joint_pipeline(inst, seed + i))
    return results
