"""Classical point-to-point ICP refinement."""

from __future__ import annotations

import numpy as np

from .exceptions import DegenerateConfigurationError
from .geometry import Pose, apply_pose
from .solver import kabsch_solve, residue
from .validation import as_points

__all__ = ["icp_refine"]


def _nearest_indices(scene: np.ndarray, moved: np.ndarray) -> np.ndarray:
    """Index of the nearest moved-model point for every scene point."""
    norms = (moved**2).sum(-1)
    idx = np.empty(scene.shape[0], dtype=np.intp)
    step = 1024
    for start in range(0, scene.shape[0], step):
        block = scene[start : start + step]
        sq = norms[None, :] - 2.0 * block @ moved.T
        idx[start : start + step] = np.argmin(sq, axis=1)
    return idx


def icp_refine(
    init: Pose,
    scene_points,
    model_points,
    max_iters: int = 50,
    tol: float = 1e-9,
    return_trace: bool = False,
):
    """Refine a pose by alternating NN correspondence and closed-form alignment.

    Correspondences run scene -> transformed model over all scene points (no
    trimming); each step re-solves the full pose on the matched pairs.  Stops
    once the mean NN residue improves by less than ``tol`` or after
    ``max_iters``; the best pose seen is returned, so its residue never
    exceeds the initial one and the accepted-residue trace is non-increasing.
    """
    scene = as_points(scene_points, "scene_points")
    model = as_points(model_points, "model_points")
    best = init.primal()
    best_res = residue(best, scene, model, max_scene_points=None)
    trace = [best_res]
    current = best
    for _ in range(max_iters):
        moved = apply_pose(current, model)
        idx = _nearest_indices(scene, moved)
        try:
            candidate = kabsch_solve(model[idx], scene)
        except DegenerateConfigurationError:
            break
        res = residue(candidate, scene, model, max_scene_points=None)
        improvement = best_res - res
        if res < best_res:
            best, best_res = candidate, res
            trace.append(res)
        if improvement < tol:
            break
        current = candidate
    if return_trace:
        return best, trace
    return best
