"""Scikit-learn style facade over the differentiable pose pipeline.

``RobustPoseEstimator`` is fit per scene: given one observed cloud ``X`` and
its ground-truth pose ``y``, it learns per-point offset votes and confidence
logits by gradient descent through the vote aggregation, the minimal-solver
bank, and the pose loss.  The fitted state exposes the estimated pose, and
``get_params``/``set_params``/``clone`` work as usual so the hyperparameters
(temperature, loss trade-offs, step size) compose with model-selection tools.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .geometry import Pose, cloud_diameter
from .harness.scenes import RunConfig, SceneSample
from .harness.training import train_toy
from .keypoints import keypoint_config, predict_keypoints
from .metrics import add_metric
from .refine import icp_refine
from .solver import DEFAULT_TEMPERATURE, estimate_pose
from .validation import as_points

__all__ = ["RobustPoseEstimator"]


def _as_pose(y) -> Pose:
    if isinstance(y, Pose):
        return y
    return Pose.from_vector(np.asarray(y, dtype=np.float64))


class RobustPoseEstimator(BaseEstimator):
    """Per-scene 6D pose estimator trained end to end through the solver.

    Parameters
    ----------
    model_points : array-like of shape (M, 3)
        Object model cloud; keypoints are selected from it at fit time.
    n_fps_keypoints : int
        Farthest-point-sampled keypoints; the model centroid is always added.
    temperature : float
        Softmax temperature for candidate-pose elimination, in meters.
    alpha, beta : float
        Pose-loss rotation balance and joint-loss trade-off.
    n_iter, step_size : int, float
        Gradient-descent schedule for the per-scene fit.
    max_scene_points : int
        Residue subsampling cap.
    refine_icp : bool
        Run classical ICP on the estimated pose after fitting.
    random_state : int
        Reserved for forward compatibility; the fit itself is deterministic.
    """

    def __init__(
        self,
        model_points=None,
        n_fps_keypoints: int = 8,
        temperature: float = DEFAULT_TEMPERATURE,
        alpha: float = 0.01,
        beta: float = 0.1,
        n_iter: int = 100,
        step_size: float = 1e-2,
        max_scene_points: int = 512,
        refine_icp: bool = False,
        random_state: int = 0,
    ):
        self.model_points = model_points
        self.n_fps_keypoints = n_fps_keypoints
        self.temperature = temperature
        self.alpha = alpha
        self.beta = beta
        self.n_iter = n_iter
        self.step_size = step_size
        self.max_scene_points = max_scene_points
        self.refine_icp = refine_icp
        self.random_state = random_state

    def _config(self) -> RunConfig:
        return RunConfig(
            n_fps_keypoints=self.n_fps_keypoints,
            lam=self.temperature,
            alpha=self.alpha,
            beta=self.beta,
            max_scene_points=self.max_scene_points,
            train_iters=self.n_iter,
            train_step_size=self.step_size,
        )

    def fit(self, X, y):
        """Learn vote parameters for scene ``X`` supervised by pose ``y``.

        ``X`` is the observed (N, 3) cloud; ``y`` is the ground-truth pose as
        a :class:`Pose` or a 7-vector ``[qw, qx, qy, qz, tx, ty, tz]``.
        """
        if self.model_points is None:
            raise ValueError("model_points must be provided to fit")
        model = as_points(self.model_points, "model_points", min_points=4)
        scene = as_points(X, "X", min_points=3)
        pose = _as_pose(y)

        self.model_points_ = model
        self.diameter_ = cloud_diameter(model)
        self.keypoints_ = keypoint_config(model, self.n_fps_keypoints)
        sample = SceneSample(
            model_id="estimator",
            true_pose=pose,
            scene_points=scene,
            visibility_mask=np.ones(scene.shape[0], dtype=bool),
            noise_sigma=0.0,
            occlusion_fraction=0.0,
            seed=self.random_state,
        )
        predictor, trace = train_toy(sample, self.keypoints_, self._config(), model_points=model)
        self.offsets_ = predictor.offsets
        self.confidence_logits_ = predictor.confidence_logits
        self.loss_trace_ = trace
        self.n_scene_points_ = scene.shape[0]
        self.pose_ = self._solve(scene)
        return self

    def _check_fitted(self):
        if not hasattr(self, "offsets_"):
            raise NotFittedError("this RobustPoseEstimator instance is not fitted yet")

    def _solve(self, scene: np.ndarray) -> Pose:
        kps = predict_keypoints(scene, self.offsets_, self.confidence_logits_)
        pose, bank = estimate_pose(
            self.keypoints_,
            kps,
            scene,
            self.model_points_,
            lam=self.temperature,
            max_scene_points=self.max_scene_points,
        )
        self.candidate_bank_ = bank
        if self.refine_icp:
            pose = icp_refine(pose, scene, self.model_points_)
        return pose

    def predict(self, X) -> np.ndarray:
        """Pose for the fitted scene's points as a 7-vector.

        The learned votes are tied to the fitted scene, so ``X`` must have the
        same point count (normally it is the same cloud).
        """
        self._check_fitted()
        scene = as_points(X, "X", min_points=3)
        if scene.shape[0] != self.n_scene_points_:
            raise ValueError(
                f"X has {scene.shape[0]} points but the estimator was fitted on "
                f"{self.n_scene_points_}"
            )
        return self._solve(scene).as_vector()

    def fit_predict(self, X, y) -> np.ndarray:
        return self.fit(X, y).predict(X)

    def score(self, X, y) -> float:
        """Negative mean model-point displacement (higher is better)."""
        self._check_fitted()
        pred = Pose.from_vector(self.predict(X))
        return -add_metric(pred, _as_pose(y), self.model_points_)
