"""Synthetic-scene harness: generation, toy training, ablations, and file I/O."""

from .ablation import (
    MODES,
    AblationResult,
    run_ablation,
    run_eval,
    write_curve_csv,
    write_rows_csv,
    write_summary_json,
)
from .parallel import ordered_map, thread_cap
from .ply import load_ply, save_ply
from .scenes import (
    RunConfig,
    SceneSample,
    generate_scene,
    load_scene,
    make_model,
    model_from_id,
    save_scene,
    synth_votes,
)
from .training import ToyPredictor, corrupt_offset_targets, train_toy

__all__ = [
    "MODES",
    "AblationResult",
    "RunConfig",
    "SceneSample",
    "ToyPredictor",
    "corrupt_offset_targets",
    "generate_scene",
    "load_ply",
    "load_scene",
    "make_model",
    "model_from_id",
    "ordered_map",
    "run_ablation",
    "run_eval",
    "save_ply",
    "save_scene",
    "synth_votes",
    "thread_cap",
    "train_toy",
    "write_curve_csv",
    "write_rows_csv",
    "write_summary_json",
]
