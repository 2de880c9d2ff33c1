"""Command-line interface.

Subcommands: ``gen`` (write scene JSON files), ``solve`` (pose one scene and
print a candidate-bank summary), ``train-toy`` (per-scene gradient-descent
fit with a loss-trace CSV), ``eval`` (batch metrics), ``gradcheck``
(forward-mode vs finite differences), ``ablate`` (four-mode sweep).

Exit codes: 0 success, 1 usage error, 2 invalid configuration or input
files, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import geometry as geo
from .exceptions import (
    ConfigError,
    DegenerateAggregationError,
    DegenerateConfigurationError,
    NonFiniteGradientError,
    NoValidCandidateError,
    PlyParseError,
)
from .harness import ablation, gradcheck, scenes, training
from .harness.ply import load_ply
from .keypoints import keypoint_config, predict_keypoints
from .metrics import add_metric
from .solver import estimate_pose

__all__ = ["main", "entry"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="rede-core", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--config", type=str, default=None, help="JSON run configuration")
        p.add_argument("--out", type=str, default=".", help="output directory")

    p_gen = sub.add_parser("gen", help="generate scene sample JSON files")
    common(p_gen)

    p_solve = sub.add_parser("solve", help="estimate the pose of one scene sample")
    common(p_solve)
    p_solve.add_argument("--scene", type=str, required=True, help="scene sample JSON")
    p_solve.add_argument("--model", type=str, default=None, help="override model with an ASCII PLY")

    p_train = sub.add_parser("train-toy", help="fit per-scene vote parameters by gradient descent")
    common(p_train)
    p_train.add_argument("--scene", type=str, required=True, help="scene sample JSON")
    p_train.add_argument("--model", type=str, default=None, help="override model with an ASCII PLY")

    p_eval = sub.add_parser("eval", help="batch evaluation over the configured grid")
    common(p_eval)

    p_gc = sub.add_parser("gradcheck", help="compare forward-mode gradients with finite differences")
    common(p_gc)
    p_gc.add_argument("--instances", type=int, default=10, help="number of seeded instances")

    p_abl = sub.add_parser("ablate", help="run the four-mode ablation sweep")
    common(p_abl)
    return parser


def _load_config(args) -> scenes.RunConfig:
    cfg = scenes.RunConfig.from_json_file(args.config) if args.config else scenes.RunConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=int(args.seed))
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_sample_and_model(args, cfg):
    sample = scenes.load_scene(args.scene)
    if getattr(args, "model", None):
        model = load_ply(args.model).with_diameter()
    else:
        model = scenes.model_from_id(sample.model_id)
    return sample, model


def _cmd_gen(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    model = cfg.load_model()
    sample_id = 0
    written = []
    for i_occ, occ in enumerate(cfg.occlusion_fractions):
        for i_noise, noise in enumerate(cfg.noise_sigmas):
            for j in range(cfg.n_samples):
                seed = ablation._sample_seed(cfg.seed, i_occ, i_noise, j)
                sample = scenes.generate_scene(
                    model,
                    model_id=cfg.model_id,
                    noise_sigma=noise,
                    occlusion_fraction=occ,
                    seed=seed,
                    max_translation=cfg.max_translation,
                )
                path = out / f"scene_{sample_id:04d}.json"
                scenes.save_scene(path, sample)
                written.append(path.name)
                sample_id += 1
    print(f"wrote {len(written)} scene files to {out}")
    return 0


def _cmd_solve(args) -> int:
    cfg = _load_config(args)
    sample, model = _load_sample_and_model(args, cfg)
    model = model.with_diameter()
    model_kps = keypoint_config(model.points, cfg.n_fps_keypoints)
    truth_kps = geo.apply_pose(sample.true_pose, model_kps)
    field, _ = scenes.synth_votes(
        sample,
        truth_kps,
        float(model.diameter),
        vote_noise_sigma=cfg.vote_noise_sigma,
        vote_shrink=cfg.vote_shrink,
        corrupt_vote_fraction=cfg.corrupt_vote_fraction,
        corrupt_keypoint_count=cfg.corrupt_keypoint_count,
        corruption_scale=cfg.corruption_scale,
        informative=cfg.doe_keypoints,
        informative_logit_gap=cfg.informative_logit_gap,
        informative_dist_weight=cfg.informative_dist_weight,
    )
    pred_kps = predict_keypoints(sample.scene_points, field.offsets, field.confidence_logits)
    pose, bank = estimate_pose(
        model_kps,
        pred_kps,
        sample.scene_points,
        model.points,
        lam=cfg.lam,
        max_scene_points=cfg.max_scene_points,
    )
    add = add_metric(pose, sample.true_pose, model.points)
    rot_err = geo.geodesic_angle(
        geo.quat_to_rotmat(np.asarray(pose.quat)),
        geo.quat_to_rotmat(np.asarray(sample.true_pose.quat)),
    )
    weights = np.asarray(bank.weights, dtype=np.float64)
    order = np.argsort(-weights)[:5]
    print(f"pose quat (w,x,y,z): {np.asarray(pose.quat).round(6).tolist()}")
    print(f"pose t (m):          {np.asarray(pose.t).round(6).tolist()}")
    print(f"ADD vs ground truth: {add:.6g} m | rotation error: {rot_err:.6g} rad")
    print(
        f"bank: {len(bank)} candidates, {int(bank.degenerate.sum())} degenerate, "
        f"max weight {weights.max():.4g}"
    )
    print("top candidates (triple, residue, weight):")
    for i in order:
        res = float(np.asarray(bank.residues)[i])
        print(f"  {tuple(int(v) for v in bank.triples[i])}  {res:.6g}  {weights[i]:.4g}")
    if args.out != ".":
        out = _out_dir(args)
        payload = {
            "pose": {"quat": np.asarray(pose.quat).tolist(), "t": np.asarray(pose.t).tolist()},
            "add": add,
            "rotation_error_rad": rot_err,
            "n_candidates": len(bank),
            "n_degenerate": int(bank.degenerate.sum()),
        }
        (out / "solve.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return 0


def _cmd_train_toy(args) -> int:
    cfg = _load_config(args)
    sample, model = _load_sample_and_model(args, cfg)
    model_kps = keypoint_config(model.points, cfg.n_fps_keypoints)
    predictor, trace = training.train_toy(sample, model_kps, cfg, model_points=model.points)
    out = _out_dir(args)
    trace_path = out / "loss_trace.csv"
    with open(trace_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "loss", "offset_loss", "pose_loss", "offset_loss_mean", "step"])
        for row in trace:
            writer.writerow(
                [
                    row["iteration"],
                    repr(row["loss"]),
                    repr(row["offset_loss"]),
                    repr(row["pose_loss"]),
                    repr(row["offset_loss_mean"]),
                    repr(row["step"]),
                ]
            )
    first, last = trace[0], trace[-1]
    print(f"trained {len(trace)} iterations (requested {predictor.n_iter})")
    print(f"loss {first['loss']:.6g} -> {last['loss']:.6g}")
    print(f"pose_loss {first['pose_loss']:.6g} -> {last['pose_loss']:.6g}")
    print(f"trace written to {trace_path}")
    return 0


def _cmd_eval(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    result = ablation.run_eval(cfg)
    ablation.write_rows_csv(out / "report.csv", result.rows)
    ablation.write_summary_json(out / "summary.json", result)
    for mode, rep in result.reports.items():
        print(
            f"{mode}: n={rep.n_samples} mean ADD={rep.add.mean():.6g} "
            f"AUC(ADD-S)={rep.auc_add_s:.4f} acc@2cm={rep.accuracy_2cm:.4f} "
            f"acc@10%d={rep.accuracy_10pct:.4f}"
        )
    print(f"report written to {out / 'report.csv'}")
    return 0


def _cmd_gradcheck(args) -> int:
    cfg = _load_config(args)
    results = gradcheck.gradcheck_suite(cfg.seed, n_instances=args.instances)
    failed = 0
    for r in results:
        status = "PASS" if r.ok else "FAIL"
        print(f"{status} {r.name} seed={r.seed} max_rel_err={r.max_rel_error:.3e} ({r.n_checked} comps)")
        failed += 0 if r.ok else 1
    if failed:
        print(f"{failed} gradient checks failed", file=sys.stderr)
        return 3
    print(f"all {len(results)} gradient checks passed")
    return 0


def _cmd_ablate(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    result = ablation.run_ablation(cfg)
    ablation.write_rows_csv(out / "ablation_report.csv", result.rows)
    ablation.write_curve_csv(out / "ablation_curve.csv", result.curve)
    ablation.write_summary_json(out / "ablation_summary.json", result)
    for mode in ablation.MODES:
        rep = result.reports[mode]
        print(
            f"{mode}: mean ADD={rep.add.mean():.6g} acc@10%d={rep.accuracy_10pct:.4f} "
            f"AUC(ADD-S)={rep.auc_add_s:.4f}"
        )
    print(f"reports written to {out}")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "solve": _cmd_solve,
    "train-toy": _cmd_train_toy,
    "eval": _cmd_eval,
    "gradcheck": _cmd_gradcheck,
    "ablate": _cmd_ablate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    if not args.command:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, PlyParseError, FileNotFoundError) as exc:
        print(f"invalid config or input: {exc}", file=sys.stderr)
        return 2
    except (
        NonFiniteGradientError,
        NoValidCandidateError,
        DegenerateAggregationError,
        DegenerateConfigurationError,
        FloatingPointError,
        RuntimeError,
    ) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
