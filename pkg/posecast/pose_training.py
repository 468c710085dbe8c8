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
Two-stage training of the pose forecaster.

Stage 1 fits the person level (person LSTMs, interaction mechanism and coarse
decoder) with the first-layer pose loss. Stage 2 starts from a stage-1
checkpoint and fits every parameter with the final-output loss plus a weighted
first-layer loss.
"""

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import torch
from tqdm import tqdm

from posecast.exceptions import (
    ConfigError,
    MissingCheckpointError,
    ShapeError,
    TrainingDivergedError,
    ValidationError,
)
from posecast.forecaster import (
    ModelConfig,
    PoseForecaster,
    encode_observations,
    load_forecaster,
    refine_poses,
    rollout_coarse,
    save_forecaster,
)
from posecast.pose_data import SceneClip, clip_to_tensors

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ("iteration", "stage", "loss")


@dataclass
class TrainConfig:
    """Optimization settings of :func:`train`."""

    stage: int = 1
    lr: float = 1e-5
    w_s1: float = 0.1
    clip_norm: float = 5.0
    epochs: int = 10
    batch_size: int = 8
    seed: int = 0
    temperature_start: float = 1.0
    temperature_end: float = 0.1
    per_joint_average: bool = False
    teacher_forcing: bool = True
    log_every: int = 10

    @classmethod
    def from_config(cls, section: Dict[str, Any]) -> "TrainConfig":
        known = {k: v for k, v in section.items() if k in cls.__dataclass_fields__}
        cfg = cls(**known)
        cfg.validate()
        return cfg

    def validate(self):
        if self.stage not in (1, 2):
            raise ConfigError(f"stage must be 1 or 2, got {self.stage}.")
        if not self.lr > 0:
            raise ConfigError("lr must be > 0.")
        if self.w_s1 < 0:
            raise ConfigError("w_s1 must be >= 0.")
        if not self.clip_norm > 0:
            raise ConfigError("clip_norm must be > 0.")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1.")
        if not (self.temperature_start > 0 and self.temperature_end > 0):
            raise ConfigError("Temperatures must be > 0.")


def _check_pair(pred: torch.Tensor, truth: torch.Tensor):
    if pred.shape != truth.shape:
        raise ShapeError(
            f"Prediction {tuple(pred.shape)} and ground truth "
            f"{tuple(truth.shape)} differ."
        )
    if pred.dim() != 4 or pred.shape[-1] != 2:
        raise ShapeError(f"Poses must be (N, T, J, 2), got {tuple(pred.shape)}.")


def pose_mse(
    pred: torch.Tensor,
    truth: torch.Tensor,
    mask: Optional[torch.Tensor] = None,
    per_joint_average: bool = False,
) -> torch.Tensor:
    """Squared joint error summed over time and joints, averaged over persons.

    :param pred: Predicted poses ``(N, T, J, 2)``.
    :param truth: Ground-truth poses of the same shape.
    :param mask: Optional ``(N, T, J)`` boolean mask of joints to count.
    :param per_joint_average: Also divide by ``T * J``.
    :raises ShapeError: If the shapes differ.
    """
    _check_pair(pred, truth)
    sq = ((pred - truth) ** 2).sum(dim=-1)
    if mask is not None:
        sq = sq * mask.to(sq.dtype)
    N, T, J = sq.shape
    total = sq.sum() / N
    if per_joint_average:
        total = total / (T * J)
    return total


def loss_stage1(coarse, truth, mask=None, per_joint_average=False) -> torch.Tensor:
    """First-layer pose loss of the coarse predictions."""
    return pose_mse(coarse, truth, mask, per_joint_average)


def loss_stage2(
    refined, coarse, truth, w_s1: float = 0.1, mask=None, per_joint_average=False
) -> torch.Tensor:
    """Final-output loss plus ``w_s1`` times the first-layer loss."""
    mse2 = pose_mse(refined, truth, mask, per_joint_average)
    mse1 = pose_mse(coarse, truth, mask, per_joint_average)
    return mse2 + w_s1 * mse1


def temperature_at(
    iteration: int, total: int, start: float = 1.0, end: float = 0.1
) -> float:
    """Exponentially decay the assignment temperature from ``start`` to ``end``."""
    if total <= 1:
        return end if iteration > 0 else start
    frac = min(max(iteration / (total - 1), 0.0), 1.0)
    return start * (end / start) ** frac


def clip_gradients(parameters: Iterable[torch.nn.Parameter], max_norm: float) -> float:
    """Clip the global gradient norm in place and return the norm before clipping."""
    params = [p for p in parameters if p.grad is not None]
    if not params:
        return 0.0
    norm = torch.nn.utils.clip_grad_norm_(params, max_norm)
    return float(norm)


def epoch_order(num_clips: int, seed: int, epoch: int) -> List[int]:
    """Return the clip order of an epoch; a pure function of ``(seed, epoch)``."""
    rng = np.random.default_rng([seed, epoch])
    return rng.permutation(num_clips).tolist()


@dataclass
class TrainResult:
    """Outcome of :func:`train`."""

    model: PoseForecaster
    config: TrainConfig
    curve: List[Dict[str, Any]] = field(default_factory=list)
    iteration: int = 0
    optimizer_state: Optional[Dict[str, Any]] = None

    @property
    def final_loss(self) -> float:
        return self.curve[-1]["loss"] if self.curve else math.nan

    def save(self, path: Union[str, Path]) -> Path:
        """Save the trained model with optimizer state and iteration for resuming."""
        return save_forecaster(
            self.model,
            path,
            extra={
                "stage": self.config.stage,
                "iteration": self.iteration,
                "train": asdict(self.config),
            },
            optimizer_state=self.optimizer_state,
        )


def clip_losses(
    clip: SceneClip,
    model: PoseForecaster,
    config: TrainConfig,
    temperature: float,
    generator: Optional[torch.Generator] = None,
) -> Dict[str, torch.Tensor]:
    """Forward one clip and return the loss components of the configured stage."""
    tensors = clip_to_tensors(clip, model.dtype)
    truth = tensors.poses[:, clip.T1 : clip.T1 + clip.T2]
    mask = tensors.visibility[:, clip.T1 : clip.T1 + clip.T2]
    snapshot = encode_observations(clip, model, temperature, generator=generator)
    teacher = None
    if config.stage == 1 and config.teacher_forcing:
        teacher = truth[:, : clip.T2 - 1]
    rollout = rollout_coarse(snapshot, model, clip.T2, teacher, temperature, generator)
    mse1 = loss_stage1(rollout.coarse, truth, mask, config.per_joint_average)
    if config.stage == 1:
        return {"loss": mse1, "mse1": mse1}
    refined = refine_poses(rollout.coarse, snapshot, model)
    loss = loss_stage2(
        refined, rollout.coarse, truth, config.w_s1, mask, config.per_joint_average
    )
    mse2 = pose_mse(refined, truth, mask, config.per_joint_average)
    return {"loss": loss, "mse1": mse1, "mse2": mse2}


def _initial_model(
    config: TrainConfig,
    model_config: Optional[ModelConfig],
    init_from: Optional[Union[str, Path, PoseForecaster]],
) -> PoseForecaster:
    if isinstance(init_from, PoseForecaster):
        return init_from
    if init_from is not None:
        model, _ = load_forecaster(init_from)
        return model
    if config.stage == 2:
        raise MissingCheckpointError("Stage 2 training needs a stage-1 checkpoint.")
    torch.manual_seed(config.seed)
    return PoseForecaster(model_config or ModelConfig())


def train(
    clips: Sequence[SceneClip],
    config: Optional[TrainConfig] = None,
    model_config: Optional[ModelConfig] = None,
    init_from: Optional[Union[str, Path, PoseForecaster]] = None,
    resume: Optional[Union[str, Path]] = None,
    max_iterations: Optional[int] = None,
    progress: bool = False,
) -> TrainResult:
    """Train a forecaster on ``clips``.

    :param clips: Training clips.
    :param config: Optimization settings; the stage is taken from here.
    :param model_config: Architecture of a fresh stage-1 model.
    :param init_from: Stage-1 checkpoint path (or model) to start from.
    :param resume: Checkpoint written by an interrupted run of the same
        configuration; training continues at its stored iteration.
    :param max_iterations: Stop after this many total iterations.
    :param progress: Show a tqdm progress bar.
    :return: A :class:`TrainResult`.
    :raises MissingCheckpointError: Stage 2 without ``init_from`` or ``resume``.
    :raises TrainingDivergedError: If a loss becomes NaN or infinite.
    """
    config = config or TrainConfig()
    config.validate()
    if not clips:
        raise ValidationError("No training clips.")
    start_iteration = 0
    optimizer_state = None
    if resume is not None:
        model, extra = load_forecaster(resume)
        start_iteration = int(extra.get("iteration", 0))
        optimizer_state = extra.get("optimizer_state")
    else:
        model = _initial_model(config, model_config, init_from)
    if config.stage == 2 and not model.config.refine:
        raise ValidationError("Stage 2 needs a model with a refiner.")

    params = model.coarse_parameters() if config.stage == 1 else list(model.parameters())
    optimizer = torch.optim.Adam(params, lr=config.lr)
    if optimizer_state is not None:
        optimizer.load_state_dict(optimizer_state)

    per_epoch = math.ceil(len(clips) / config.batch_size)
    total = per_epoch * config.epochs
    if max_iterations is not None:
        total = min(total, max_iterations)
    logger.info(
        "Training stage %d on %d clips for %d iterations (from %d)",
        config.stage,
        len(clips),
        total,
        start_iteration,
    )
    model.train()
    curve: List[Dict[str, Any]] = []
    iteration = start_iteration
    with tqdm(total=total, initial=start_iteration, disable=not progress) as bar:
        while iteration < total:
            epoch, offset = divmod(iteration, per_epoch)
            order = epoch_order(len(clips), config.seed, epoch)
            batch = order[offset * config.batch_size : (offset + 1) * config.batch_size]
            temperature = temperature_at(
                iteration, total, config.temperature_start, config.temperature_end
            )
            generator = None
            if model.config.gumbel:
                generator = torch.Generator()
                generator.manual_seed(config.seed * 1000003 + iteration)

            optimizer.zero_grad()
            parts = [
                clip_losses(clips[i], model, config, temperature, generator)
                for i in batch
            ]
            components = {
                k: torch.stack([p[k] for p in parts]).mean() for k in parts[0]
            }
            loss = components["loss"]
            if not torch.isfinite(loss):
                values = {k: v.item() for k, v in components.items()}
                logger.error(
                    "Loss is not finite at iteration %d, stage %d: %s",
                    iteration,
                    config.stage,
                    values,
                )
                raise TrainingDivergedError(iteration, config.stage, values)
            loss.backward()
            grad_norm = clip_gradients(params, config.clip_norm)
            optimizer.step()
            value = loss.item()

            curve.append({"iteration": iteration, "stage": config.stage, "loss": value})
            if config.log_every and iteration % config.log_every == 0:
                logger.info(
                    "iteration=%d stage=%d loss=%.6g temperature=%.4f grad_norm=%.4g",
                    iteration,
                    config.stage,
                    value,
                    temperature,
                    grad_norm,
                )
            iteration += 1
            bar.update(1)

    model.eval()
    return TrainResult(
        model=model,
        config=config,
        curve=curve,
        iteration=iteration,
        optimizer_state=optimizer.state_dict(),
    )


def write_loss_curve(
    rows: Sequence[Dict[str, Any]], path: Union[str, Path], append: bool = False
) -> Path:
    """Write ``iteration,stage,loss`` rows as CSV.

    :param append: Add rows to an existing curve instead of replacing it.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    new_file = not (append and path.exists())
    with open(path, "a" if append else "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=CURVE_COLUMNS, lineterminator="\n")
        if new_file:
            writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in CURVE_COLUMNS})
    return path


def read_loss_curve(path: Union[str, Path]) -> List[Dict[str, Any]]:
    """Read a curve written by :func:`write_loss_curve`."""
    with open(path, "r", newline="", encoding="utf-8") as f:
        return [
            {
                "iteration": int(r["iteration"]),
                "stage": int(r["stage"]),
                "loss": float(r["loss"]),
            }
            for r in csv.DictReader(f)
        ]
