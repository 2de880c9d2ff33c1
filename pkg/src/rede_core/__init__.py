"""rede-core: differentiable robust 6D rigid-pose estimation.

Scene keypoints are located by confidence-weighted per-point voting, the pose
is solved by a bank of closed-form minimal solvers whose candidates are
blended with residue-softmax weights, and the whole chain is differentiable
end to end, so pose error can supervise the vote parameters directly.
"""

from .diff import Dual, ParameterVector, fd_grad, grad
from .estimator import RobustPoseEstimator
from .exceptions import (
    ConfigError,
    DegenerateAggregationError,
    DegenerateConfigurationError,
    IllConditionedGradientWarning,
    NoValidCandidateError,
    NonFiniteGradientError,
    PlyParseError,
)
from .geometry import (
    PointCloud,
    Pose,
    apply_pose,
    cloud_diameter,
    compose_pose,
    geodesic_angle,
    invert_pose,
    normalize_quat,
    quat_to_rotmat,
    random_pose,
    rotmat_to_quat,
)
from .keypoints import (
    OffsetField,
    aggregate_keypoints,
    fps_sample,
    keypoint_config,
    normalize_confidences,
    predict_keypoints,
    true_offsets,
)
from .losses import LossConfig, joint_loss, offset_loss, pose_loss, smooth_l1
from .metrics import EvalReport, accuracy_at, add_metric, add_s_metric, auc, evaluate_poses
from .refine import icp_refine
from .solver import (
    CandidateBank,
    aggregate_rotation,
    aggregate_translation,
    estimate_pose,
    kabsch_solve,
    minimal_bank,
    residue,
    softmax_weights,
)

__version__ = "0.1.0"

__all__ = [
    "CandidateBank",
    "ConfigError",
    "DegenerateAggregationError",
    "DegenerateConfigurationError",
    "Dual",
    "EvalReport",
    "IllConditionedGradientWarning",
    "LossConfig",
    "NoValidCandidateError",
    "NonFiniteGradientError",
    "OffsetField",
    "ParameterVector",
    "PlyParseError",
    "PointCloud",
    "Pose",
    "RobustPoseEstimator",
    "accuracy_at",
    "add_metric",
    "add_s_metric",
    "aggregate_keypoints",
    "aggregate_rotation",
    "aggregate_translation",
    "apply_pose",
    "auc",
    "cloud_diameter",
    "compose_pose",
    "estimate_pose",
    "evaluate_poses",
    "fd_grad",
    "fps_sample",
    "geodesic_angle",
    "grad",
    "icp_refine",
    "invert_pose",
    "joint_loss",
    "kabsch_solve",
    "keypoint_config",
    "minimal_bank",
    "normalize_confidences",
    "normalize_quat",
    "offset_loss",
    "pose_loss",
    "predict_keypoints",
    "quat_to_rotmat",
    "random_pose",
    "residue",
    "rotmat_to_quat",
    "smooth_l1",
    "softmax_weights",
    "true_offsets",
]
