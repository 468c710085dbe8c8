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
Hierarchical multi-person pose forecasting.

The first layer is a person-level LSTM that consumes poses and locations and
is conditioned on an interaction context. The context is, depending on
:attr:`ModelConfig.interaction`:

- ``"group"``: the state of the person's dynamic group (the full model),
- ``"social"``: a social pooling of neighbours' states on a spatial grid,
- ``"none"``: zeros (vanilla LSTM).

A coarse decoder maps person state and context to the next pose. The second
layer is a spatio-temporal LSTM unrolled over the kinematic tree and over
time, which adds refinement vectors to the coarse poses.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import ijson
import torch
import torch.nn.functional as F
from torch import nn

from posecast.__version__ import __version__
from posecast.checkpoint import load_checkpoint, save_checkpoint
from posecast.exceptions import ConfigError, ShapeError, ValidationError
from posecast.group_dynamics import (
    GroupAssignment,
    GroupStates,
    InteractionParams,
    assign_groups,
    assignment_to_dict,
    group_contexts,
    init_group_states,
    init_groups,
    update_group_states,
)
from posecast.pose_data import (
    SceneClip,
    clip_to_tensors,
    dfs_joint_order,
    kinematic_parents,
)
from posecast.utils import torch_dtype

logger = logging.getLogger(__name__)

INTERACTIONS = ("group", "none", "social")
MODEL_NAMES = {"mg": "group", "vanilla": "none", "social": "social"}


@dataclass
class ModelConfig:
    """Sizes and switches of a :class:`PoseForecaster`."""

    num_joints: int = 14
    person_size: int = 256
    group_size: int = 256
    joint_size: int = 128
    interaction: str = "group"
    refine: bool = True
    social_grid: int = 4
    social_neighbourhood: float = 0.5
    zero_refiner_head: bool = True
    gumbel: bool = False
    straight_through: bool = True
    eval_temperature: float = 0.1
    dtype: str = "float32"

    @classmethod
    def from_config(cls, section: Dict[str, Any]) -> "ModelConfig":
        known = {k: v for k, v in section.items() if k in cls.__dataclass_fields__}
        cfg = cls(**known)
        cfg.validate()
        return cfg

    def validate(self):
        if self.interaction not in INTERACTIONS:
            raise ConfigError(
                f"interaction must be one of {INTERACTIONS}, got '{self.interaction}'."
            )
        for name in ("num_joints", "person_size", "group_size", "joint_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1.")
        if self.social_grid < 1 or self.social_neighbourhood <= 0:
            raise ConfigError("Social grid and neighbourhood must be positive.")
        if self.eval_temperature <= 0:
            raise ConfigError("eval_temperature must be > 0.")
        torch_dtype(self.dtype)


class PersonEncoder(nn.Module):
    """Person-level LSTM over per-frame pose + location features and a context."""

    def __init__(self, num_joints: int, person_size: int, context_size: int):
        super().__init__()
        self.input_proj = nn.Linear(2 * num_joints + 4, person_size)
        self.cell = nn.LSTMCell(person_size + context_size, person_size)

    def forward(self, pose, box, context, state):
        x = F.relu(self.input_proj(torch.cat([pose.flatten(1), box], dim=1)))
        return self.cell(torch.cat([x, context], dim=1), state)


class CoarseDecoder(nn.Module):
    """Affine map from person state and context to ``2J`` pose coordinates."""

    def __init__(self, num_joints: int, person_size: int, context_size: int):
        super().__init__()
        self.num_joints = num_joints
        self.linear = nn.Linear(person_size + context_size, 2 * num_joints)

    def forward(self, h, context):
        out = self.linear(torch.cat([h, context], dim=1))
        return out.view(-1, self.num_joints, 2)


class STLSTMCell(nn.Module):
    """Spatio-temporal LSTM cell with a spatial and a temporal predecessor."""

    def __init__(self, input_size: int, hidden_size: int):
        super().__init__()
        self.hidden_size = hidden_size
        self.gates = nn.Linear(input_size + 2 * hidden_size, 5 * hidden_size)

    def forward(self, x, spatial, temporal):
        (h_s, c_s), (h_t, c_t) = spatial, temporal
        i, f_s, f_t, o, u = self.gates(torch.cat([x, h_s, h_t], dim=1)).chunk(5, dim=1)
        c = (
            torch.sigmoid(i) * torch.tanh(u)
            + torch.sigmoid(f_s) * c_s
            + torch.sigmoid(f_t) * c_t
        )
        h = torch.sigmoid(o) * torch.tanh(c)
        return h, c


def refine_schedule(num_joints: int, T2: int) -> List[Tuple[int, int]]:
    """Return the ``(t, joint)`` unroll order: time-major, tree DFS within a step."""
    order = dfs_joint_order(num_joints)
    return [(t, j) for t in range(T2) for j in order]


class JointRefiner(nn.Module):
    """Joint-level refiner producing additive per-joint deltas.

    The input of joint ``j`` at step ``t`` is its coarse coordinate, a one-hot
    joint code and a summary of the person's encoding. The spatial predecessor
    is the parent joint at the same step, the temporal one is the same joint at
    the previous step; both are zero where they do not exist.
    """

    SUMMARY_SIZE = 16

    def __init__(self, num_joints, person_size, joint_size, zero_head=True):
        super().__init__()
        self.num_joints = num_joints
        self.joint_size = joint_size
        self.summary = nn.Linear(person_size, self.SUMMARY_SIZE)
        self.cell = STLSTMCell(2 + num_joints + self.SUMMARY_SIZE, joint_size)
        self.head = nn.Linear(joint_size, 2)
        self.parents = kinematic_parents(num_joints)
        if zero_head:
            nn.init.zeros_(self.head.weight)
            nn.init.zeros_(self.head.bias)

    def forward(self, coarse, person_h, trace: Optional[list] = None):
        N, T2, J, _ = coarse.shape
        if J != self.num_joints:
            raise ShapeError(f"Refiner built for {self.num_joints} joints, got {J}.")
        summary = torch.tanh(self.summary(person_h))
        codes = torch.eye(J, dtype=coarse.dtype)
        zero = coarse.new_zeros(N, self.joint_size)
        prev_step: Dict[int, Tuple[torch.Tensor, torch.Tensor]] = {}
        deltas = [[None] * J for _ in range(T2)]
        for t in range(T2):
            step: Dict[int, Tuple[torch.Tensor, torch.Tensor]] = {}
            for tt, j in refine_schedule(J, 1):
                p = self.parents[j]
                spatial = step[p] if p >= 0 else (zero, zero)
                temporal = prev_step.get(j, (zero, zero))
                x = torch.cat(
                    [coarse[:, t, j], codes[j].expand(N, J), summary], dim=1
                )
                step[j] = self.cell(x, spatial, temporal)
                deltas[t][j] = self.head(step[j][0])
                if trace is not None:
                    trace.append((t, j))
            prev_step = step
        return torch.stack([torch.stack(row, dim=1) for row in deltas], dim=1)


def social_pool(
    H: torch.Tensor, positions: torch.Tensor, grid: int = 4, neighbourhood: float = 0.5
) -> torch.Tensor:
    """Sum neighbours' states into a ``grid x grid`` window around every person.

    :param H: Person states ``(N, H_p)``.
    :param positions: Scene-normalized centers ``(N, 2)``.
    :param grid: Cells per side.
    :param neighbourhood: Side length of the window, in scene units.
    :return: Pooled states ``(N, grid, grid, H_p)``; a person is never its own neighbour.
    """
    N = H.shape[0]
    rel = positions[None, :, :] - positions[:, None, :]
    half = neighbourhood / 2.0
    inside = (rel.abs() < half).all(dim=-1) & ~torch.eye(N, dtype=torch.bool)
    cell = torch.floor((rel + half) / neighbourhood * grid).long().clamp(0, grid - 1)
    index = cell[..., 1] * grid + cell[..., 0]
    onehot = F.one_hot(index, grid * grid).to(H.dtype) * inside[..., None].to(H.dtype)
    pooled = torch.einsum("ijc,jh->ich", onehot, H)
    return pooled.view(N, grid, grid, H.shape[1])


class PoseForecaster(nn.Module):
    """The multi-granularity forecaster and its two baselines in one module."""

    def __init__(self, config: Optional[ModelConfig] = None):
        super().__init__()
        self.config = config or ModelConfig()
        self.config.validate()
        c = self.config
        self.encoder = PersonEncoder(c.num_joints, c.person_size, c.group_size)
        self.decoder = CoarseDecoder(c.num_joints, c.person_size, c.group_size)
        if c.interaction == "group":
            self.interaction = InteractionParams(c.person_size)
            self.W_hg = nn.Linear(c.person_size, c.group_size, bias=False)
            self.group_cell = nn.LSTMCell(c.group_size, c.group_size)
        if c.interaction == "social":
            self.social_embed = nn.Linear(
                c.social_grid * c.social_grid * c.person_size, c.group_size, bias=False
            )
        if c.refine:
            self.refiner = JointRefiner(
                c.num_joints, c.person_size, c.joint_size, c.zero_refiner_head
            )
        self.to(torch_dtype(c.dtype))

    @property
    def dtype(self) -> torch.dtype:
        return next(self.parameters()).dtype

    def coarse_parameters(self) -> List[nn.Parameter]:
        """Parameters of the person level: encoder, interaction and decoder."""
        return [p for n, p in self.named_parameters() if not n.startswith("refiner.")]

    def refiner_parameters(self) -> List[nn.Parameter]:
        return [p for n, p in self.named_parameters() if n.startswith("refiner.")]


@dataclass
class Snapshot:
    """State of a scene after encoding the observed frames."""

    person_h: torch.Tensor
    person_c: torch.Tensor
    last_pose: torch.Tensor
    last_box: torch.Tensor
    assignment: Optional[GroupAssignment] = None
    groups: Optional[GroupStates] = None
    history: List[GroupAssignment] = field(default_factory=list)
    interaction: str = "group"


@dataclass
class RolloutResult:
    """Coarse poses ``(N, T2, J, 2)`` and the per-step assignments of a rollout."""

    coarse: torch.Tensor
    assignments: List[GroupAssignment]
    snapshot: Snapshot


@dataclass
class ForecastResult:
    """Coarse and refined future poses plus the assignment history."""

    coarse: torch.Tensor
    refined: torch.Tensor
    deltas: torch.Tensor
    assignments: List[GroupAssignment]
    observed_assignments: List[GroupAssignment] = field(default_factory=list)


def _context(
    model: PoseForecaster,
    interaction: str,
    H: torch.Tensor,
    box: torch.Tensor,
    assignment: Optional[GroupAssignment],
    groups: Optional[GroupStates],
) -> torch.Tensor:
    if interaction == "group":
        return group_contexts(assignment, groups)
    if interaction == "social":
        c = model.config
        pooled = social_pool(H, box[:, :2], c.social_grid, c.social_neighbourhood)
        return F.relu(model.social_embed(pooled.flatten(1)))
    return H.new_zeros(H.shape[0], model.config.group_size)


def _resolve_interaction(model: PoseForecaster, interaction: Optional[str]) -> str:
    interaction = interaction or model.config.interaction
    if interaction == "group" and not hasattr(model, "interaction"):
        raise ValidationError("This model has no group interaction parameters.")
    if interaction == "social" and not hasattr(model, "social_embed"):
        raise ValidationError("This model has no social pooling parameters.")
    return interaction


def _advance_groups(model, H, assignment, groups, temperature, generator):
    assignment = assign_groups(
        H,
        assignment,
        model.interaction,
        temperature,
        model.config.gumbel,
        generator,
        model.config.straight_through,
    )
    groups = update_group_states(assignment, H, groups, model.W_hg, model.group_cell)
    return assignment, groups


def encode_observations(
    clip: SceneClip,
    model: PoseForecaster,
    temperature: Optional[float] = None,
    interaction: Optional[str] = None,
    generator: Optional[torch.Generator] = None,
) -> Snapshot:
    """Run the person LSTMs over the observed frames.

    After every frame the persons choose their groups and the group LSTMs
    advance. The returned snapshot holds the state after frame ``T1``.

    :raises ValidationError: If the clip has no observed frame.
    """
    if clip.T1 < 1:
        raise ValidationError("At least one observed frame is needed.")
    if clip.J != model.config.num_joints:
        raise ShapeError(
            f"Model expects {model.config.num_joints} joints, clip has {clip.J}."
        )
    interaction = _resolve_interaction(model, interaction)
    temperature = temperature or model.config.eval_temperature
    tensors = clip_to_tensors(clip, model.dtype)
    N = clip.num_persons
    h = tensors.poses.new_zeros(N, model.config.person_size)
    c = h.clone()
    assignment, groups = None, None
    if interaction == "group":
        assignment = init_groups(N, model.dtype)
        groups = init_group_states(assignment, model.config.group_size, model.dtype)
    history = []
    for t in range(clip.T1):
        box = tensors.boxes[:, t]
        ctx = _context(model, interaction, h, box, assignment, groups)
        h, c = model.encoder(tensors.poses[:, t], box, ctx, (h, c))
        if interaction == "group":
            assignment, groups = _advance_groups(
                model, h, assignment, groups, temperature, generator
            )
            history.append(assignment)
    return Snapshot(
        person_h=h,
        person_c=c,
        last_pose=tensors.poses[:, clip.T1 - 1],
        last_box=tensors.boxes[:, clip.T1 - 1],
        assignment=assignment,
        groups=groups,
        history=history,
        interaction=interaction,
    )


def rollout_coarse(
    snapshot: Snapshot,
    model: PoseForecaster,
    T2: int,
    teacher_poses: Optional[torch.Tensor] = None,
    temperature: Optional[float] = None,
    generator: Optional[torch.Generator] = None,
) -> RolloutResult:
    """Autoregressively generate ``T2`` coarse poses per person.

    Each step the person LSTM consumes the previous pose and the interaction
    context, the decoder emits the next pose and the groups are updated from
    the new person states. Locations stay at the last observed box.

    :param teacher_poses: Optional ground truth ``(N, >= T2 - 1, J, 2)`` fed back
        instead of the predictions (teacher forcing).
    """
    if T2 < 1:
        raise ValidationError("T2 must be >= 1.")
    temperature = temperature or model.config.eval_temperature
    interaction = snapshot.interaction
    h, c = snapshot.person_h, snapshot.person_c
    assignment, groups = snapshot.assignment, snapshot.groups
    prev_pose, box = snapshot.last_pose, snapshot.last_box
    poses, history = [], []
    for s in range(T2):
        ctx = _context(model, interaction, h, box, assignment, groups)
        h, c = model.encoder(prev_pose, box, ctx, (h, c))
        pose = model.decoder(h, ctx)
        poses.append(pose)
        if interaction == "group":
            assignment, groups = _advance_groups(
                model, h, assignment, groups, temperature, generator
            )
            history.append(assignment)
        if teacher_poses is not None and s < teacher_poses.shape[1]:
            prev_pose = teacher_poses[:, s]
        else:
            prev_pose = pose
    final = Snapshot(h, c, prev_pose, box, assignment, groups, history, interaction)
    return RolloutResult(torch.stack(poses, dim=1), history, final)


def refine_poses(
    coarse: torch.Tensor,
    snapshot: Snapshot,
    model: PoseForecaster,
    trace: Optional[list] = None,
) -> torch.Tensor:
    """Return refined poses ``coarse + deltas`` from the joint-level refiner.

    :param trace: If given, the ``(t, joint)`` visiting order is appended to it.
    """
    if not hasattr(model, "refiner"):
        raise ValidationError("This model was built without a refiner.")
    return coarse + model.refiner(coarse, snapshot.person_h, trace)


def _horizon(clip: SceneClip, T2: Optional[int]) -> int:
    if T2 is None:
        return clip.T2
    if T2 < 1:
        raise ValidationError(f"T2 must be at least 1, got {T2}.")
    return int(T2)


def forecast(
    clip: SceneClip,
    model: PoseForecaster,
    T2: Optional[int] = None,
    temperature: Optional[float] = None,
    generator: Optional[torch.Generator] = None,
) -> ForecastResult:
    """Predict the future poses of every person of ``clip``."""
    T2 = _horizon(clip, T2)
    snapshot = encode_observations(clip, model, temperature, generator=generator)
    rollout = rollout_coarse(
        snapshot, model, T2, temperature=temperature, generator=generator
    )
    if model.config.refine:
        refined = refine_poses(rollout.coarse, snapshot, model)
    else:
        refined = rollout.coarse
    return ForecastResult(
        coarse=rollout.coarse,
        refined=refined,
        deltas=refined - rollout.coarse,
        assignments=rollout.assignments,
        observed_assignments=snapshot.history,
    )


def forecast_baseline_vanilla(
    clip: SceneClip, model: PoseForecaster, T2: Optional[int] = None
) -> torch.Tensor:
    """Forecast with a zero interaction context and without refinement."""
    snapshot = encode_observations(clip, model, interaction="none")
    return rollout_coarse(snapshot, model, _horizon(clip, T2)).coarse


def forecast_baseline_social(
    clip: SceneClip, model: PoseForecaster, T2: Optional[int] = None
) -> torch.Tensor:
    """Forecast with social pooling as interaction context, without refinement."""
    snapshot = encode_observations(clip, model, interaction="social")
    return rollout_coarse(snapshot, model, _horizon(clip, T2)).coarse


def predict(
    clip: SceneClip,
    model: PoseForecaster,
    T2: Optional[int] = None,
    generator: Optional[torch.Generator] = None,
):
    """Return the final poses of the model's own kind (refined for the full model).

    :param generator: Source of the Gumbel noise when the model samples groups.
    """
    if model.config.interaction == "none":
        poses = forecast_baseline_vanilla(clip, model, T2)
        return ForecastResult(poses, poses, torch.zeros_like(poses), [])
    if model.config.interaction == "social":
        poses = forecast_baseline_social(clip, model, T2)
        return ForecastResult(poses, poses, torch.zeros_like(poses), [])
    return forecast(clip, model, T2, generator=generator)


def forecast_batch(
    clips: Sequence[SceneClip],
    model: PoseForecaster,
    T2: Optional[int] = None,
    workers: int = 1,
    seed: int = 0,
) -> List[ForecastResult]:
    """Forecast independent clips, optionally on a thread pool; order is kept.

    Clip ``i`` draws its Gumbel noise from a generator seeded with ``seed + i``,
    so the results do not depend on ``workers``.
    """

    def run(index, clip):
        generator = torch.Generator().manual_seed(seed + index)
        with torch.no_grad():
            return predict(clip, model, T2, generator=generator)

    model.eval()
    if workers <= 1:
        return [run(i, clip) for i, clip in enumerate(clips)]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(run, range(len(clips)), clips))


def save_forecaster(
    model: PoseForecaster,
    path: Union[str, Path],
    extra: Optional[Dict[str, Any]] = None,
    optimizer_state: Optional[Dict[str, Any]] = None,
) -> Path:
    """Save a forecaster checkpoint."""
    return save_checkpoint(
        path,
        "forecaster",
        asdict(model.config),
        model.state_dict(),
        extra=extra,
        optimizer_state=optimizer_state,
    )


def load_forecaster(path: Union[str, Path]) -> Tuple[PoseForecaster, Dict[str, Any]]:
    """Load a forecaster checkpoint; returns the model and the checkpoint extras."""
    ckpt = load_checkpoint(path, kind="forecaster")
    model = PoseForecaster(ModelConfig.from_config(ckpt.config))
    model.load_state_dict(ckpt.state_dict)
    extra = dict(ckpt.manifest.get("extra", {}))
    extra["optimizer_state"] = ckpt.optimizer_state
    return model, extra


FORECAST_KIND = "posecast-forecast"


def forecast_to_record(clip: SceneClip, result: ForecastResult) -> Dict[str, Any]:
    """Return the JSON record of one forecast clip."""

    def plain(t: torch.Tensor):
        return t.detach().cpu().double().tolist()

    return {
        "clip_id": clip.clip_id,
        "T1": clip.T1,
        "T2": int(result.refined.shape[1]),
        "person_ids": [track.person_id for track in clip.tracks],
        "poses": plain(result.refined.clamp(0.0, 1.0)),
        "coarse": plain(result.coarse),
        "refined": plain(result.refined),
        "assignments": [assignment_to_dict(a) for a in result.assignments],
        "observed_assignments": [
            assignment_to_dict(a) for a in result.observed_assignments
        ],
    }


def write_forecasts(
    records: Sequence[Dict[str, Any]], path: Union[str, Path], model: str
) -> Path:
    """Write forecast records as one JSON document, ``kind`` first."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "kind": FORECAST_KIND,
        "version": __version__,
        "model": model,
        "clips": list(records),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f)
        f.write("\n")
    return path


def is_forecast_file(path: Union[str, Path]) -> bool:
    """Tell forecast documents apart from clip files by their first key."""
    with open(path, "rb") as f:
        try:
            key, value = next(ijson.kvitems(f, "", multiple_values=True))
        except (StopIteration, ijson.JSONError):
            return False
    return key == "kind" and value == FORECAST_KIND


def iter_forecasts(path: Union[str, Path]) -> Iterator[Dict[str, Any]]:
    """Stream the clip records of a forecast document.

    :raises ValidationError: If the file is not a forecast document.
    """
    if not is_forecast_file(path):
        raise ValidationError(f"{path} is not a forecast file.")
    with open(path, "rb") as f:
        for record in ijson.items(f, "clips.item", use_float=True):
            yield record
