"""Closed-form pose solving and soft outlier-pose elimination.

The estimator enumerates every 3-combination of keypoints, solves each triple
in closed form (SVD orthogonal Procrustes with reflection correction), scores
every candidate by the mean scene-to-transformed-model nearest-neighbour
distance, converts the scores to softmax weights with temperature ``lam``,
and blends the candidates: translations by weighted mean, rotations by
sign-aligned weighted quaternion sum.  A candidate built from a bad keypoint
picks up a large residue and an exponentially small weight, so it is
eliminated softly and the whole map stays differentiable with respect to the
predicted keypoints (nearest-neighbour assignments are held fixed during the
tangent pass).

Degenerate (near-collinear) triples are never dropped: they keep their slot
in the bank, carry an infinite residue and therefore exactly zero weight.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import diff, geometry as geo
from .diff import value
from .exceptions import (
    DegenerateAggregationError,
    DegenerateConfigurationError,
    IllConditionedGradientWarning,
    NoValidCandidateError,
)
from .geometry import Pose
from .validation import check_dims

__all__ = [
    "DEFAULT_TEMPERATURE",
    "DEGENERACY_TOL",
    "BankCandidate",
    "CandidateBank",
    "kabsch_solve",
    "minimal_bank",
    "residue",
    "softmax_weights",
    "aggregate_translation",
    "aggregate_rotation",
    "estimate_pose",
]

DEFAULT_TEMPERATURE = 0.01
DEGENERACY_TOL = 1e-9
_GRAD_GAP_WARN = 1e-6
_GRAD_GAP_CLAMP = 1e-12


@dataclass
class BankCandidate:
    """One minimal-solver slot: keypoint triple, solved pose, degeneracy flag."""

    triple: tuple[int, int, int]
    pose: Pose | None
    degenerate: bool


@dataclass
class CandidateBank:
    """All C(K,3) candidates with their residues and softmax weights."""

    triples: np.ndarray
    quats: object
    translations: object
    residues: object
    weights: object
    lam: float
    degenerate: np.ndarray

    def __len__(self) -> int:
        return self.triples.shape[0]

    def candidates(self) -> list[BankCandidate]:
        out = []
        for i, tr in enumerate(self.triples):
            deg = bool(self.degenerate[i])
            pose = None if deg else Pose(quat=self.quats[i], t=self.translations[i])
            out.append(BankCandidate(triple=tuple(int(j) for j in tr), pose=pose, degenerate=deg))
        return out


def _mt(x):
    return x.swapaxes(-1, -2) if diff.is_dual(x) else np.swapaxes(x, -1, -2)


def _dist_with_subgradient(vec):
    """Euclidean norm along the last axis, zero tangent at exactly zero.

    The norm has no derivative at 0; the minimal-norm subgradient (zero) is
    used there, consistent with the fixed nearest-neighbour convention.  On
    noiseless scenes a candidate pose can align points exactly, so the guard
    is reachable in normal use.
    """
    sq = (vec * vec).sum(-1)
    if not diff.is_dual(sq):
        return np.sqrt(sq)
    root = np.sqrt(sq.val)
    positive = sq.val > 0.0
    denom = np.where(positive, 2.0 * root, 1.0)
    dot = (sq.dot / denom[..., None]) * positive[..., None]
    return diff.Dual(root, dot)


def _triples(k: int) -> np.ndarray:
    return np.array(list(itertools.combinations(range(k), 3)), dtype=np.intp)


def _procrustes(H):
    """Batched rotation from cross-covariances ``H`` (..., 3, 3).

    Returns ``(R, degenerate)``.  Degenerate entries (second singular value
    below ``DEGENERACY_TOL`` relative to the largest) get an identity rotation
    and a raised flag.  Dual input propagates tangents through the SVD with
    the closed-form perturbation of the orthogonal factors.
    """
    Hv = value(H)
    U, S, Vt = np.linalg.svd(Hv)
    V = np.swapaxes(Vt, -1, -2)
    det = np.linalg.det(np.matmul(V, np.swapaxes(U, -1, -2)))
    dvec = np.concatenate(
        [np.ones(det.shape + (2,)), np.sign(det)[..., None]], axis=-1
    )
    R = np.matmul(V * dvec[..., None, :], np.swapaxes(U, -1, -2))

    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(S[..., 0] > 0.0, S[..., 1] / np.maximum(S[..., 0], 1e-300), 0.0)
    degenerate = ratio < DEGENERACY_TOL
    if np.any(degenerate):
        R = np.where(degenerate[..., None, None], np.eye(3), R)

    if not diff.is_dual(H):
        return R, degenerate

    width = H.width
    dH = np.moveaxis(H.dot, -1, 0)  # (P, ..., 3, 3)
    A = np.matmul(np.swapaxes(U, -1, -2), np.matmul(dH, V))

    S2 = S**2
    denom = S2[..., None, :] - S2[..., :, None]  # denom[i, j] = s_j^2 - s_i^2
    scale = np.maximum(S2[..., 0], 1e-300)[..., None, None]
    off = ~np.eye(3, dtype=bool)
    rel_gap = np.abs(denom) / scale
    tight = off & (rel_gap < _GRAD_GAP_WARN) & ~degenerate[..., None, None]
    if np.any(tight):
        warnings.warn(
            "near-equal singular values in the pose solve; factor derivatives are amplified",
            IllConditionedGradientWarning,
            stacklevel=2,
        )
    sign = np.where(denom >= 0.0, 1.0, -1.0)
    denom = sign * np.maximum(np.abs(denom), _GRAD_GAP_CLAMP * scale)
    F = np.where(off, 1.0 / denom, 0.0)

    AS = A * S[..., None, :]          # (A S)_ij = A_ij s_j
    SAt = S[..., :, None] * np.swapaxes(A, -1, -2)   # (S A^T)_ij = s_i A_ji
    SA = S[..., :, None] * A          # (S A)_ij = s_i A_ij
    AtS = np.swapaxes(A, -1, -2) * S[..., None, :]   # (A^T S)_ij = A_ji s_j
    omega_u = F * (AS + SAt)
    omega_v = F * (SA + AtS)

    inner = omega_v * dvec[..., None, :] - dvec[..., :, None] * omega_u
    dR = np.matmul(V, np.matmul(inner, np.swapaxes(U, -1, -2)))
    dR = np.where(degenerate[..., None, None], 0.0, dR)
    return diff.Dual(R, np.moveaxis(dR, 0, -1)), degenerate


def _weighted_stats(kps, weights):
    """Weighted centroid and centered coordinates for one keypoint set (K, 3)."""
    if weights is None:
        centroid = kps.mean(0)
    else:
        centroid = (weights[:, None] * kps).sum(0)
    return centroid, kps - centroid


def kabsch_solve(model_kps, scene_kps, weights=None) -> Pose:
    """Least-squares rigid alignment of keypoint correspondences.

    Minimizes ``sum_k w_k ||R m_k + t - x_k||^2`` in closed form: centroid
    subtraction, 3x3 cross-covariance, SVD, reflection correction via the
    sign of ``det(V U^T)``.  ``weights`` (optional, nonnegative) selects the
    weighted variant used as an ablation baseline.

    Raises :class:`DegenerateConfigurationError` when the keypoints are
    (near-)collinear.
    """
    check_dims(model_kps, 2, "model_kps", last=3)
    check_dims(scene_kps, 2, "scene_kps", last=3)
    k = value(model_kps).shape[0]
    if value(scene_kps).shape[0] != k:
        raise ValueError("model and scene keypoint counts differ")
    if k < 3:
        raise ValueError("need at least 3 keypoint correspondences")
    if weights is not None:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (k,) or np.any(weights < 0) or weights.sum() <= 0:
            raise ValueError("weights must be nonnegative with positive sum")
        weights = weights / weights.sum()

    mbar, mc = _weighted_stats(model_kps, weights)
    xbar, xc = _weighted_stats(scene_kps, weights)
    w_col = 1.0 if weights is None else weights[:, None, None]
    H = (w_col * (mc[:, :, None] * xc[:, None, :])).sum(0)

    R, degenerate = _procrustes(H[None] if diff.is_dual(H) else value(H)[None])
    if bool(degenerate[0]):
        raise DegenerateConfigurationError(
            "keypoint configuration is near-collinear; rotation is not unique"
        )
    R = R[0]
    t = xbar - diff.matvec(R, mbar)
    return Pose(quat=geo.rotmat_to_quat(R), t=t)


def _solve_bank(model_kps, scene_kps):
    """Solve every keypoint triple; returns (triples, quats, translations, degenerate)."""
    check_dims(model_kps, 2, "model_kps", last=3)
    check_dims(scene_kps, 2, "scene_kps", last=3)
    k = value(model_kps).shape[0]
    if value(scene_kps).shape[0] != k:
        raise ValueError("model and scene keypoint counts differ")
    if k < 3:
        raise ValueError("need at least 3 keypoints")
    triples = _triples(k)

    m = model_kps[triples]
    x = scene_kps[triples]
    mbar = m.mean(1)
    xbar = x.mean(1)
    mc = m - mbar[:, None, :]
    xc = x - xbar[:, None, :]
    H = (mc[:, :, :, None] * xc[:, :, None, :]).sum(1)

    R, degenerate = _procrustes(H)
    quats = geo.rotmat_to_quat(R)
    ts = xbar - diff.matvec(R, mbar)
    return triples, quats, ts, degenerate


def minimal_bank(model_kps, scene_kps) -> list[BankCandidate]:
    """One closed-form solve per keypoint 3-combination, in lexicographic order.

    Degenerate triples keep their slot with ``pose=None`` and the flag set;
    downstream they receive an infinite residue and exactly zero weight.
    """
    triples, quats, ts, degenerate = _solve_bank(model_kps, scene_kps)
    out = []
    for i, tr in enumerate(triples):
        deg = bool(degenerate[i])
        pose = None if deg else Pose(quat=quats[i], t=ts[i])
        out.append(BankCandidate(triple=tuple(int(j) for j in tr), pose=pose, degenerate=deg))
    return out


def _subsample_scene(scene_points, max_scene_points, seed):
    scene_v = value(scene_points)
    n = scene_v.shape[0]
    if max_scene_points is None or n <= max_scene_points:
        return scene_v
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=max_scene_points, replace=False))
    return scene_v[idx]


def _residues_batch(quats, ts, scene, model, degenerate):
    """Mean scene-to-transformed-model NN distance per candidate.

    Nearest neighbours are found on primal values and held fixed; distances
    are then recomputed through the (possibly dual) candidate poses.  Entries
    flagged degenerate get ``+inf`` with zero tangents.

    The search runs in the model frame (scene points mapped through each
    candidate's inverse), which is the same assignment because rigid motions
    preserve distances, but needs one KD-tree instead of C dense matrices.
    """
    C = value(quats).shape[0]
    Rv = geo.quat_to_rotmat(value(quats))
    tv = value(ts)
    scene_local = np.matmul(scene[None, :, :] - tv[:, None, :], Rv)
    tree = cKDTree(model)
    _, nn_idx = tree.query(scene_local.reshape(-1, 3), k=1, workers=1)
    nn_idx = nn_idx.reshape(C, scene.shape[0])
    nn_pts = model[nn_idx]  # (C, N, 3)

    R = geo.quat_to_rotmat(quats) if diff.is_dual(quats) else Rv
    moved_nn = diff.matmul(nn_pts, _mt(R)) + ts[:, None, :]
    dists = _dist_with_subgradient(moved_nn - scene[None, :, :])
    res = dists.mean(axis=1)
    if np.any(degenerate):
        res = diff.where(~degenerate, res, np.inf)
    return res


def residue(pose: Pose, scene_points, model_points, max_scene_points: int | None = 512,
            subsample_seed: int = 0):
    """Mean distance from scene points to their NN among transformed model points.

    The mean (rather than the sum) keeps the value comparable across scene
    sizes, so one temperature setting works for any N.  Scene points beyond
    ``max_scene_points`` are uniformly subsampled with a fixed seed.
    """
    scene = _subsample_scene(scene_points, max_scene_points, subsample_seed)
    model = value(model_points)
    if scene.shape[0] == 0 or model.shape[0] == 0:
        raise ValueError("scene and model clouds must be nonempty")
    quats = pose.quat[None] if diff.is_dual(pose.quat) else value(pose.quat)[None]
    ts = pose.t[None] if diff.is_dual(pose.t) else value(pose.t)[None]
    res = _residues_batch(quats, ts, scene, model, np.zeros(1, dtype=bool))
    return res[0] if diff.is_dual(res) else float(res[0])


def softmax_weights(residues, lam: float):
    """Temperature softmax over negative residues: ``w_i = exp(-d_i / lam) / sum``.

    Stabilized by pivoting on the smallest finite residue; ``+inf`` residues
    (degenerate candidates) map to exactly zero weight.  Raises
    :class:`NoValidCandidateError` if nothing is finite.
    """
    if not lam > 0:
        raise ValueError("lam must be > 0")
    if not diff.is_dual(residues):
        residues = np.asarray(residues, dtype=np.float64)
    rv = value(residues)
    finite = np.isfinite(rv)
    if not np.any(finite):
        raise NoValidCandidateError("all candidates are degenerate")
    pivot = rv[finite].min()
    shifted = diff.where(finite, residues, pivot) - pivot
    z = np.exp(-(shifted / lam)) * finite.astype(np.float64)
    return z / z.sum()


def aggregate_translation(weights, translations):
    """Weighted mean of candidate translations."""
    return (weights[:, None] * translations).sum(0)


def aggregate_rotation(weights, quats):
    """Weighted quaternion blend: sign-align, sum, normalize.

    Every quaternion is flipped to the hemisphere of the highest-weight
    candidate before summing (q and -q are the same rotation, but their sum
    cancels); the blend is then normalized to unit length.
    """
    wv = value(weights)
    qv = value(quats)
    ref = int(np.argmax(wv))
    flip = np.where(qv @ qv[ref] < 0.0, -1.0, 1.0)
    total = (weights[:, None] * quats * flip[:, None]).sum(0)
    if float(np.linalg.norm(value(total))) < 1e-9:
        raise DegenerateAggregationError("weighted quaternion sum cancelled to zero")
    return geo.normalize_quat(total)


def estimate_pose(
    model_kps,
    pred_scene_kps,
    scene_points,
    model_points,
    lam: float = DEFAULT_TEMPERATURE,
    max_scene_points: int | None = 512,
    subsample_seed: int = 0,
) -> tuple[Pose, CandidateBank]:
    """Full robust solve: triple bank, residue scoring, soft aggregation.

    Differentiable with respect to ``pred_scene_kps``; the returned bank
    exposes every candidate for inspection.
    """
    triples, quats, ts, degenerate = _solve_bank(model_kps, pred_scene_kps)
    scene = _subsample_scene(scene_points, max_scene_points, subsample_seed)
    model = value(model_points)
    residues = _residues_batch(quats, ts, scene, model, degenerate)
    weights = softmax_weights(residues, lam)
    t_hat = aggregate_translation(weights, ts)
    q_hat = aggregate_rotation(weights, quats)
    bank = CandidateBank(
        triples=triples,
        quats=quats,
        translations=ts,
        residues=residues,
        weights=weights,
        lam=float(lam),
        degenerate=degenerate,
    )
    return Pose(quat=q_hat, t=t_hat), bank
