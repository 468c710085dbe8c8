# Copyright (C) 2021 posecast contributors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
#
# SPDX-License-Identifier: Apache-2.0
# License-Filename: LICENSE

"""
The ``posecast`` command line.

Sub-commands: ``synth``, ``train-pose``, ``train-render``, ``forecast``,
``render`` and ``eval``. Relative paths are resolved against ``--workdir``.
Every command writes ``<output>.manifest.json`` next to its output.

Exit codes: 0 on success, 2 on invalid input, 3 on any other failure.
"""

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from posecast.__version__ import __version__
from posecast.ada_render import (
    RenderArch,
    RenderLossWeights,
    RenderTrainConfig,
    build_extractor,
    gan_train,
    image_to_tensor,
    load_renderer,
    load_triples,
    render_sequence,
    tensor_to_image,
    write_triples,
)
from posecast.config.default import PoseCastConfig
from posecast.exceptions import MissingCheckpointError, ValidationError
from posecast.forecaster import (
    MODEL_NAMES,
    ModelConfig,
    forecast_batch,
    forecast_to_record,
    is_forecast_file,
    iter_forecasts,
    load_forecaster,
    write_forecasts,
)
from posecast.logconf import LEVELS, cli_logging
from posecast.metrics import (
    JointScoreParams,
    action_eval,
    build_report,
    held_out_split,
    image_mse_psnr,
    plot_pose_table,
    pose_features,
    sequence_pose_eval,
    write_report,
    write_report_csv,
)
from posecast.pose_data import (
    Pose,
    SynthConfig,
    filter_clips,
    load_clips,
    load_png,
    posemap_radius_for,
    rasterize_posemap,
    save_posemap_png,
    synth_clips,
    synth_render_triples,
    write_clips,
)
from posecast.pose_training import TrainConfig, read_loss_curve, train, write_loss_curve
from posecast.utils import resolve, seed_everything, write_manifest

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_FAILURE = 3


class Context:
    """Resolved global options of one invocation."""

    def __init__(self, args: argparse.Namespace, argv: Sequence[str]):
        self.args = args
        self.argv = list(argv)
        self.workdir = Path(args.workdir) if args.workdir else None
        if args.config:
            config = PoseCastConfig.from_file(self.path(args.config))
        else:
            config = PoseCastConfig.from_default()
        self.config = config.with_overrides(args.set)
        runtime = self.config.section("runtime")
        self.seed = args.seed if args.seed is not None else int(runtime["seed"])
        workers = args.workers if args.workers is not None else runtime["workers"]
        self.workers = int(workers)

    def path(self, value) -> Path:
        return resolve(self.workdir, value)

    def manifest(self, output: Path, command: str, **extra):
        write_manifest(
            output, command, self.argv, self.config.digest(), self.seed, extra or None
        )


def cmd_synth(ctx: Context) -> int:
    """Generate synthetic clips, or rendering triples with ``--triples``."""
    args = ctx.args
    out = ctx.path(args.out)
    if args.count < 0:
        raise ValidationError("--count must be >= 0.")
    seed_everything(ctx.seed)
    if args.triples:
        resolution = int(ctx.config.section("render")["resolution"])
        triples = synth_render_triples(args.count, resolution, ctx.seed)
        write_triples(triples, out)
        logger.info("Wrote %d rendering triples to %s", len(triples), out)
    else:
        cfg = SynthConfig.from_config(ctx.config.section("synth"))
        cfg.validate()
        clips = synth_clips(cfg, args.count, ctx.seed)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_clips(clips, out)
        logger.info("Wrote %d synthetic clips to %s", len(clips), out)
    ctx.manifest(out, "synth", count=args.count)
    return EXIT_OK


def _training_clips(ctx: Context, path) -> list:
    clips = load_clips(ctx.path(path))
    if ctx.args.filter:
        data = ctx.config.section("data")
        clips = filter_clips(clips, int(data["min_joints"]), int(data["min_targets"]))
    if not clips:
        raise ValidationError("No clips left for training.")
    return clips


def cmd_train_pose(ctx: Context) -> int:
    """Train the forecaster (one stage per invocation)."""
    args = ctx.args
    section = ctx.config.section("train")
    section["stage"] = args.stage
    section["seed"] = ctx.seed
    config = TrainConfig.from_config(section)
    if config.stage == 2 and not (args.init_from or args.resume):
        raise MissingCheckpointError(
            "Stage 2 needs --init-from with a stage-1 checkpoint."
        )
    model_section = ctx.config.section("model")
    model_section["interaction"] = MODEL_NAMES[args.model]
    if args.model != "mg":
        model_section["refine"] = False
    model_config = ModelConfig.from_config(model_section)

    clips = _training_clips(ctx, args.clips)
    out = ctx.path(args.out)
    curve_path = ctx.path(args.curve) if args.curve else Path(str(out) + ".loss.csv")
    seed_everything(ctx.seed)
    result = train(
        clips,
        config,
        model_config,
        init_from=ctx.path(args.init_from) if args.init_from else None,
        resume=ctx.path(args.resume) if args.resume else None,
        max_iterations=args.max_iterations,
        progress=args.progress,
    )
    result.save(out)
    write_loss_curve(result.curve, curve_path, append=bool(args.resume))
    logger.info(
        "Stage %d finished at iteration %d, final loss %.6g",
        config.stage,
        result.iteration,
        result.final_loss,
    )
    ctx.manifest(
        out,
        "train-pose",
        stage=config.stage,
        iteration=result.iteration,
        curve_rows=len(read_loss_curve(curve_path)),
    )
    return EXIT_OK


def cmd_train_render(ctx: Context) -> int:
    """Train the adaptive renderer on a triples index."""
    args = ctx.args
    render_section = ctx.config.section("render")
    arch = RenderArch.from_config(render_section)
    weights = RenderLossWeights.from_config(ctx.config.section("render_loss"))
    train_section = ctx.config.section("render_train")
    train_section["seed"] = ctx.seed
    if args.iterations is not None:
        train_section["iterations"] = args.iterations
    config = RenderTrainConfig.from_config(train_section)
    triples = load_triples(ctx.path(args.triples))
    seed_everything(ctx.seed)
    extractor = build_extractor(
        render_section["extractor"], int(render_section["extractor_seed"])
    )
    result = gan_train(triples, arch, weights, config, extractor, progress=args.progress)
    out = ctx.path(args.out)
    result.save(out)
    curve_path = ctx.path(args.curve) if args.curve else Path(str(out) + ".loss.csv")
    _write_render_curve(result.curve, curve_path)
    ctx.manifest(
        out,
        "train-render",
        iterations=config.iterations,
        gamma=result.weights.gamma,
        updates=len(result.schedule),
    )
    return EXIT_OK


def _write_render_curve(rows: List[Dict], path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = ["iteration", "transfer", "adversarial", "discriminator"]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in columns})


def cmd_forecast(ctx: Context) -> int:
    """Forecast the future poses of every clip."""
    args = ctx.args
    model, _ = load_forecaster(ctx.path(args.checkpoint))
    expected = MODEL_NAMES[args.model]
    if model.config.interaction != expected:
        raise ValidationError(
            f"Checkpoint holds a '{model.config.interaction}' model, "
            f"--model {args.model} needs '{expected}'."
        )
    clips = load_clips(ctx.path(args.clips))
    seed_everything(ctx.seed)
    results = forecast_batch(
        clips, model, args.T2, workers=ctx.workers, seed=ctx.seed
    )
    records = [forecast_to_record(c, r) for c, r in zip(clips, results)]
    out = ctx.path(args.out)
    write_forecasts(records, out, args.model)
    if args.posemaps:
        resolution = int(ctx.config.section("render")["resolution"])
        _write_posemaps(records, out.parent / (out.stem + "_posemaps"), resolution)
    logger.info("Forecast %d clips with model %s", len(records), args.model)
    ctx.manifest(out, "forecast", model=args.model, clips=len(records))
    return EXIT_OK


def _pose_frames(record) -> np.ndarray:
    return np.asarray(record["poses"], dtype=np.float64)


def _write_posemaps(records, directory: Path, resolution: int):
    radius = posemap_radius_for(resolution)
    for record in records:
        poses = _pose_frames(record)
        for k, person_id in enumerate(record["person_ids"]):
            person_dir = directory / str(record["clip_id"]) / f"person_{person_id}"
            person_dir.mkdir(parents=True, exist_ok=True)
            for t, joints in enumerate(poses[k]):
                image = rasterize_posemap(Pose(joints), resolution, resolution, radius)
                save_posemap_png(image, person_dir / f"posemap_{t:03d}.png")


def cmd_render(ctx: Context) -> int:
    """Render one frame sequence per forecast person.

    References are read from ``<references>/<clip_id>/person_<id>.png``.
    """
    args = ctx.args
    renderer, _ = load_renderer(ctx.path(args.checkpoint))
    resolution = renderer.arch.resolution
    radius = posemap_radius_for(resolution)
    references = ctx.path(args.references)
    out = ctx.path(args.out)
    frames = 0
    seed_everything(ctx.seed)
    for record in iter_forecasts(ctx.path(args.forecast)):
        poses = _pose_frames(record)
        for k, person_id in enumerate(record["person_ids"]):
            ref_path = references / str(record["clip_id"]) / f"person_{person_id}.png"
            if not ref_path.exists():
                raise ValidationError(f"Missing reference image {ref_path}.")
            reference = image_to_tensor(load_png(ref_path))
            posemaps = [
                rasterize_posemap(Pose(joints), resolution, resolution, radius)
                for joints in poses[k]
            ]
            person_dir = out / str(record["clip_id"]) / f"person_{person_id}"
            person_dir.mkdir(parents=True, exist_ok=True)
            for t, image in enumerate(render_sequence(posemaps, reference, renderer)):
                target = person_dir / f"frame_{t:03d}.png"
                save_posemap_png(tensor_to_image(image), target)
                frames += 1
    logger.info("Rendered %d frames to %s", frames, out)
    ctx.manifest(out, "render", frames=frames)
    return EXIT_OK


def _predicted_poses(path: Path) -> Dict[str, np.ndarray]:
    if is_forecast_file(path):
        return {str(r["clip_id"]): _pose_frames(r) for r in iter_forecasts(path)}
    return {
        c.clip_id: np.stack([t.joints[c.T1 :] for t in c.tracks])
        for c in load_clips(path)
    }


def _eval_pose(ctx: Context, pred_path: Path, ref_path: Path):
    refs = load_clips(ref_path)
    preds = _predicted_poses(pred_path)
    pred_list, ref_list, masks = [], [], []
    for clip in refs:
        if clip.clip_id not in preds:
            raise ValidationError(f"No prediction for clip '{clip.clip_id}'.")
        pred_list.append(preds[clip.clip_id])
        ref_list.append(np.stack([t.joints[clip.T1 :] for t in clip.tracks]))
        masks.append(np.stack([t.visibility[clip.T1 :] for t in clip.tracks]))
    params = JointScoreParams.from_config(ctx.config.section("metrics"))
    return sequence_pose_eval(pred_list, ref_list, params, masks)


def _eval_image(pred_dir: Path, ref_dir: Path):
    names = sorted(p.relative_to(ref_dir) for p in ref_dir.rglob("*.png"))
    if not names:
        raise ValidationError(f"No PNG frames under {ref_dir}.")
    missing = [str(n) for n in names if not (pred_dir / n).exists()]
    if missing:
        raise ValidationError(f"Missing generated frames: {missing[:5]}")
    gen = np.stack([load_png(pred_dir / n) for n in names])
    goal = np.stack([load_png(ref_dir / n) for n in names])
    return image_mse_psnr(gen, goal)


def _action_samples(clip, future=None):
    if not clip.labels:
        raise ValidationError(f"Clip '{clip.clip_id}' has no action labels.")
    samples = []
    for k, track in enumerate(clip.tracks):
        joints = track.joints
        if future is not None:
            joints = np.concatenate([track.joints[: clip.T1], future[k]])
        samples.append((joints, clip.labels[k]))
    return samples


def action_clip_split(ctx: Context, refs, preds):
    """Return the classifier-training clips and the predicted test clips.

    With ``--action-train`` the classifier learns from that file; otherwise the
    reference clips are split into disjoint halves with the run seed.
    """
    args = ctx.args
    if args.action_train:
        train_clips = load_clips(ctx.path(args.action_train))
        test_clips = refs
    else:
        train_ids, test_ids = held_out_split([c.clip_id for c in refs], ctx.seed)
        logger.warning(
            "No --action-train given; training the classifier on %d held-out "
            "reference clips and testing on %d.",
            len(train_ids),
            len(test_ids),
        )
        by_id = {c.clip_id: c for c in refs}
        train_clips = [by_id[i] for i in train_ids]
        test_clips = [by_id[i] for i in test_ids]
    overlap = {c.clip_id for c in train_clips} & {c.clip_id for c in test_clips}
    if overlap:
        raise ValidationError(
            f"Action training and test clips overlap: {sorted(overlap)[:5]}"
        )
    for clip in test_clips:
        if clip.clip_id not in preds:
            raise ValidationError(f"No prediction for clip '{clip.clip_id}'.")
    return train_clips, test_clips


def _eval_action(ctx: Context, pred_path: Path, ref_path: Path):
    refs = load_clips(ref_path)
    preds = _predicted_poses(pred_path)
    train_clips, test_clips = action_clip_split(ctx, refs, preds)
    fit = [s for c in train_clips for s in _action_samples(c)]
    held = [s for c in test_clips for s in _action_samples(c, preds[c.clip_id])]
    return action_eval(
        pose_features(np.stack([x for x, _ in fit])),
        [y for _, y in fit],
        pose_features(np.stack([x for x, _ in held])),
        [y for _, y in held],
        seed=ctx.seed,
    )


def cmd_eval(ctx: Context) -> int:
    """Evaluate predictions against references and write a report."""
    args = ctx.args
    pred, ref, out = ctx.path(args.pred), ctx.path(args.ref), ctx.path(args.out)
    seed_everything(ctx.seed)
    pose = image = action = None
    if args.mode == "pose":
        pose = _eval_pose(ctx, pred, ref)
    elif args.mode == "image":
        image = _eval_image(pred, ref)
    else:
        action = _eval_action(ctx, pred, ref)
    report = build_report(
        args.mode, pose=pose, image=image, action=action, meta={"pred": str(args.pred)}
    )
    write_report(report, out)
    if args.csv:
        write_report_csv(report, ctx.path(args.csv))
    if args.plot and pose is not None:
        plot_pose_table({args.mode: pose}, ctx.path(args.plot))
    ctx.manifest(out, "eval", mode=args.mode)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="posecast", description="Multi-person pose forecasting and rendering."
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--workdir", help="Root for relative paths.")
    parser.add_argument("--config", help="HOCON/JSON config file.")
    parser.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", help="Config override."
    )
    parser.add_argument("--seed", type=int, help="Seed for every random operation.")
    parser.add_argument("--workers", type=int, help="Parallel workers where supported.")
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=LEVELS,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="Generate synthetic clips or rendering triples.")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--triples", action="store_true", help="Write rendering triples.")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train-pose", help="Train the pose forecaster.")
    p.add_argument("--clips", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stage", type=int, choices=[1, 2], default=1)
    p.add_argument("--init-from", help="Stage-1 checkpoint (required for stage 2).")
    p.add_argument("--resume", help="Checkpoint of an interrupted run to continue.")
    p.add_argument("--model", choices=sorted(MODEL_NAMES), default="mg")
    p.add_argument("--curve", help="Loss curve CSV (default <out>.loss.csv).")
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--filter", action="store_true", help="Apply data.min_* filters.")
    p.add_argument("--progress", action="store_true")
    p.set_defaults(func=cmd_train_pose)

    p = sub.add_parser("train-render", help="Train the adaptive renderer.")
    p.add_argument("--triples", required=True, help="Triples index.jsonl.")
    p.add_argument("--out", required=True)
    p.add_argument("--iterations", type=int)
    p.add_argument("--curve")
    p.add_argument("--progress", action="store_true")
    p.set_defaults(func=cmd_train_render)

    p = sub.add_parser("forecast", help="Forecast future poses.")
    p.add_argument("--clips", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", choices=sorted(MODEL_NAMES), default="mg")
    p.add_argument("--T2", type=int, help="Future length (default: the clip's).")
    p.add_argument("--posemaps", action="store_true", help="Also write posemap PNGs.")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("render", help="Render forecast poses into frames.")
    p.add_argument("--forecast", required=True)
    p.add_argument("--references", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("eval", help="Evaluate predictions.")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=["pose", "image", "action"], default="pose")
    p.add_argument(
        "--action-train",
        help="Labelled clips for the action classifier (default: held-out split).",
    )
    p.add_argument("--csv")
    p.add_argument("--plot")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the command line and return its exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    cli_logging(args.log_level)
    try:
        ctx = Context(args, argv)
        logger.info("Running %s", args.command)
        code = args.func(ctx)
        logger.info("Finished %s", args.command)
        return code
    except ValidationError as e:
        logger.error("%s", e)
        print(f"posecast: error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as e:
        logger.exception("Command %s failed", args.command)
        print(f"posecast: failure: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
