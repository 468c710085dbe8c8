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
Pose and scene data model, clip file I/O, posemap rasterization and the
synthetic scene generator.

Coordinates of joints are normalized to the person crop (``[0, 1]`` in both
directions); person locations are scene-normalized boxes ``(cx, cy, w, h)``.
Clip files are line-delimited JSON, one clip per line::

    {"clip_id": "c0", "T1": 6, "T2": 5, "J": 14,
     "tracks": [{"person_id": 0, "boxes": [[cx, cy, w, h], ...],
                 "poses": [[[x, y, v], ...], ...]}, ...],
     "labels": [...], "true_groups": [...]}
"""

import colorsys
import json
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from PIL import Image, ImageDraw

from posecast.exceptions import ClipFormatError, ConfigError, ValidationError

logger = logging.getLogger(__name__)

NUM_JOINTS = 14

JOINT_NAMES = (
    "head",
    "neck",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "right_hip",
    "right_knee",
    "right_ankle",
    "left_hip",
    "left_knee",
    "left_ankle",
)

# parent of every joint, -1 marks the root (neck)
KINEMATIC_TREE = (1, -1, 1, 2, 3, 1, 5, 6, 1, 8, 9, 1, 11, 12)

_TEMPLATE_14 = (
    (0.50, 0.12),
    (0.50, 0.22),
    (0.38, 0.25),
    (0.33, 0.40),
    (0.30, 0.55),
    (0.62, 0.25),
    (0.67, 0.40),
    (0.70, 0.55),
    (0.43, 0.55),
    (0.42, 0.72),
    (0.41, 0.88),
    (0.57, 0.55),
    (0.58, 0.72),
    (0.59, 0.88),
)


def kinematic_parents(num_joints: int = NUM_JOINTS) -> Tuple[int, ...]:
    """Return the parent index of every joint (``-1`` for the root).

    The 14-joint skeleton is rooted at the neck. Any other joint count uses a
    simple chain rooted at joint 0.
    """
    if num_joints == NUM_JOINTS:
        return KINEMATIC_TREE
    if num_joints < 1:
        raise ValidationError("A skeleton needs at least one joint.")
    return (-1,) + tuple(range(num_joints - 1))


def dfs_joint_order(num_joints: int = NUM_JOINTS) -> List[int]:
    """Return the depth-first traversal of the kinematic tree.

    Children are visited in increasing joint index.
    """
    parents = kinematic_parents(num_joints)
    children: Dict[int, List[int]] = {j: [] for j in range(num_joints)}
    root = parents.index(-1)
    for j, p in enumerate(parents):
        if p >= 0:
            children[p].append(j)
    order: List[int] = []
    stack = [root]
    while stack:
        j = stack.pop()
        order.append(j)
        stack.extend(reversed(children[j]))
    return order


def parent_of(joint: int, num_joints: int = NUM_JOINTS) -> int:
    """Return the parent of ``joint`` or ``-1`` for the root."""
    return kinematic_parents(num_joints)[joint]


@dataclass
class Pose:
    """One person's 2D joints at one timestep; every joint is visible by default."""

    joints: np.ndarray
    visibility: Optional[np.ndarray] = None

    def __post_init__(self):
        self.joints = np.asarray(self.joints, dtype=np.float64)
        if self.visibility is None:
            self.visibility = np.ones(self.joints.shape[:1], dtype=bool)
        self.visibility = np.asarray(self.visibility, dtype=bool)
        if self.joints.ndim != 2 or self.joints.shape[1] != 2:
            raise ValidationError(f"Pose joints must be (J, 2), got {self.joints.shape}.")
        if self.visibility.shape != (self.joints.shape[0],):
            raise ValidationError("Pose visibility must have one flag per joint.")

    @property
    def num_joints(self) -> int:
        return self.joints.shape[0]

    @property
    def num_visible(self) -> int:
        return int(self.visibility.sum())


@dataclass
class PersonTrack:
    """Pose track and location track of one person, stored as arrays.

    ``joints`` is ``(T, J, 2)``, ``visibility`` is ``(T, J)`` and ``boxes`` is
    ``(T, 4)`` holding ``(cx, cy, w, h)``.
    """

    person_id: int
    joints: np.ndarray
    visibility: np.ndarray
    boxes: np.ndarray

    def __post_init__(self):
        self.joints = np.asarray(self.joints, dtype=np.float64)
        self.visibility = np.asarray(self.visibility, dtype=bool)
        self.boxes = np.asarray(self.boxes, dtype=np.float64)

    def __len__(self) -> int:
        return self.joints.shape[0]

    @property
    def poses(self) -> List[Pose]:
        return [Pose(self.joints[t], self.visibility[t]) for t in range(len(self))]

    def pose(self, t: int) -> Pose:
        return Pose(self.joints[t], self.visibility[t])

    def min_visible(self) -> int:
        """Return the smallest number of visible joints over all timesteps."""
        return int(self.visibility.sum(axis=1).min()) if len(self) else 0


@dataclass
class SceneClip:
    """A multi-person clip split into ``T1`` observed and ``T2`` future steps."""

    clip_id: str
    tracks: List[PersonTrack]
    T1: int
    T2: int
    J: int = NUM_JOINTS
    labels: Optional[List[int]] = None
    true_groups: Optional[List[int]] = None

    @property
    def num_persons(self) -> int:
        return len(self.tracks)

    @property
    def length(self) -> int:
        return self.T1 + self.T2


def validate_clip(clip: SceneClip) -> None:
    """Check all invariants of a :class:`SceneClip`.

    :raises ValidationError: On the first violated invariant.
    """
    if clip.T1 < 1 or clip.T2 < 0:
        raise ValidationError(f"Clip {clip.clip_id}: T1 must be >= 1 and T2 >= 0.")
    if clip.num_persons < 2:
        raise ValidationError(f"Clip {clip.clip_id}: needs at least 2 persons.")
    T = clip.length
    for track in clip.tracks:
        if track.joints.shape != (T, clip.J, 2):
            raise ValidationError(
                f"Clip {clip.clip_id}, person {track.person_id}: poses have shape "
                f"{track.joints.shape}, expected {(T, clip.J, 2)}."
            )
        if track.visibility.shape != (T, clip.J):
            raise ValidationError(
                f"Clip {clip.clip_id}, person {track.person_id}: bad visibility shape."
            )
        if track.boxes.shape != (T, 4):
            raise ValidationError(
                f"Clip {clip.clip_id}, person {track.person_id}: boxes have shape "
                f"{track.boxes.shape}, expected {(T, 4)}."
            )
        visible = track.joints[track.visibility]
        if not np.all(np.isfinite(track.joints)) or not np.all(np.isfinite(track.boxes)):
            raise ValidationError(f"Clip {clip.clip_id}: non-finite coordinates.")
        if visible.size and (visible.min() < 0.0 or visible.max() > 1.0):
            raise ValidationError(
                f"Clip {clip.clip_id}, person {track.person_id}: visible joint "
                "outside [0, 1]."
            )
    for name in ("labels", "true_groups"):
        values = getattr(clip, name)
        if values is not None and len(values) != clip.num_persons:
            raise ValidationError(
                f"Clip {clip.clip_id}: {name} has {len(values)} entries for "
                f"{clip.num_persons} persons."
            )


@dataclass
class LoadReport:
    """Counters collected while loading a clip file."""

    loaded: int = 0
    skipped: int = 0
    reasons: List[str] = field(default_factory=list)


def _clip_from_record(record: dict) -> SceneClip:
    """Build a clip from a decoded JSON record; shape errors raise ValidationError."""
    T1, T2, J = int(record["T1"]), int(record["T2"]), int(record["J"])
    tracks = []
    for entry in record["tracks"]:
        boxes = entry["boxes"]
        poses = entry["poses"]
        for pose in poses:
            if len(pose) != J:
                raise ValidationError(
                    f"person {entry['person_id']} has a pose with {len(pose)} joints, "
                    f"expected {J}"
                )
            for joint in pose:
                if len(joint) != 3:
                    raise ValidationError("joints must be [x, y, v] triples")
        arr = np.asarray(poses, dtype=np.float64).reshape(len(poses), J, 3)
        box_arr = np.asarray(boxes, dtype=np.float64)
        if box_arr.ndim != 2 or (len(boxes) and box_arr.shape[1] != 4):
            raise ValidationError("boxes must be [cx, cy, w, h] quadruples")
        tracks.append(
            PersonTrack(
                person_id=int(entry["person_id"]),
                joints=arr[..., :2],
                visibility=arr[..., 2] > 0.5,
                boxes=box_arr.reshape(-1, 4),
            )
        )
    labels = record.get("labels")
    groups = record.get("true_groups")
    clip = SceneClip(
        clip_id=str(record.get("clip_id", "")),
        tracks=tracks,
        T1=T1,
        T2=T2,
        J=J,
        labels=[int(x) for x in labels] if labels is not None else None,
        true_groups=[int(x) for x in groups] if groups is not None else None,
    )
    validate_clip(clip)
    return clip


def load_clips_with_report(path: Union[str, Path]) -> Tuple[List[SceneClip], LoadReport]:
    """Load a clip file and return the valid clips plus a :class:`LoadReport`.

    :param path: Path of a line-delimited JSON clip file.
    :return: A tuple of clips and the load report.
    :raises ClipFormatError: If a line is not a JSON object with the required keys.
    """
    report = LoadReport()
    clips: List[SceneClip] = []
    with open(path, "rb") as f:
        for line_number, raw in enumerate(f, start=1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as e:
                raise ClipFormatError(
                    f"invalid UTF-8 at byte {e.start}", line_number, str(path)
                )
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ClipFormatError(f"invalid JSON ({e.msg})", line_number, str(path))
            if not isinstance(record, dict):
                raise ClipFormatError("expected a JSON object", line_number, str(path))
            missing = [k for k in ("T1", "T2", "J", "tracks") if k not in record]
            if missing:
                raise ClipFormatError(
                    f"missing keys {missing}", line_number, str(path)
                )
            try:
                clip = _clip_from_record(record)
            except (ValidationError, ValueError, TypeError, KeyError) as e:
                report.skipped += 1
                report.reasons.append(f"line {line_number}: {e}")
                logger.warning("Skipping clip on line %d of %s: %s", line_number, path, e)
                continue
            clips.append(clip)
            report.loaded += 1
    if report.skipped:
        warnings.warn(f"Skipped {report.skipped} invalid clip(s) while reading {path}.")
    return clips, report


def load_clips(path: Union[str, Path]) -> List[SceneClip]:
    """Load valid clips from a line-delimited JSON clip file.

    Clips failing validation are skipped with a warning; see
    :func:`load_clips_with_report` for the counters.
    """
    clips, _ = load_clips_with_report(path)
    return clips


def clip_to_record(clip: SceneClip) -> dict:
    """Return the JSON-serializable record of a clip."""
    tracks = []
    for track in clip.tracks:
        poses = np.concatenate(
            [track.joints, track.visibility[..., None].astype(np.float64)], axis=-1
        )
        tracks.append(
            {
                "person_id": int(track.person_id),
                "boxes": track.boxes.tolist(),
                "poses": poses.tolist(),
            }
        )
    record = {
        "clip_id": clip.clip_id,
        "T1": clip.T1,
        "T2": clip.T2,
        "J": clip.J,
        "tracks": tracks,
    }
    if clip.labels is not None:
        record["labels"] = list(clip.labels)
    if clip.true_groups is not None:
        record["true_groups"] = list(clip.true_groups)
    return record


def write_clips(clips: Sequence[SceneClip], path: Union[str, Path]) -> None:
    """Write clips to a line-delimited JSON file, replacing any existing file.

    :raises OSError: If the path is not writable.
    """
    with open(path, "w", encoding="utf-8") as f:
        for clip in clips:
            f.write(json.dumps(clip_to_record(clip), separators=(",", ":")))
            f.write("\n")


def filter_clips(
    clips: Sequence[SceneClip], min_joints: int, min_targets: int
) -> List[SceneClip]:
    """Drop poorly observed persons, then clips with too few persons left.

    A person is dropped when, at any timestep, fewer than ``min_joints`` of its
    joints are visible. A clip is dropped when fewer than ``min_targets``
    persons remain, or fewer than two, since a scene needs at least two people.

    :param clips: Input clips, left untouched.
    :param min_joints: Minimum visible joints per person and timestep.
    :param min_targets: Minimum number of remaining persons per clip.
    :return: The surviving clips.
    """
    if min_joints < 0:
        raise ValidationError("min_joints must be >= 0.")
    if min_targets < 1:
        raise ValidationError("min_targets must be >= 1.")
    result = []
    for clip in clips:
        keep = [i for i, t in enumerate(clip.tracks) if t.min_visible() >= min_joints]
        if len(keep) < max(min_targets, 2):
            continue
        result.append(
            replace(
                clip,
                tracks=[clip.tracks[i] for i in keep],
                labels=[clip.labels[i] for i in keep] if clip.labels else clip.labels,
                true_groups=[clip.true_groups[i] for i in keep]
                if clip.true_groups
                else clip.true_groups,
            )
        )
    return result


class ClipTensors(NamedTuple):
    """Dense tensors of a clip: poses (N,T,J,2), visibility (N,T,J), boxes (N,T,4)."""

    poses: torch.Tensor
    visibility: torch.Tensor
    boxes: torch.Tensor


def clip_to_tensors(clip: SceneClip, dtype: torch.dtype = torch.float32) -> ClipTensors:
    """Stack the tracks of a clip into dense tensors."""
    poses = torch.as_tensor(np.stack([t.joints for t in clip.tracks]), dtype=dtype)
    vis = torch.as_tensor(np.stack([t.visibility for t in clip.tracks]))
    boxes = torch.as_tensor(np.stack([t.boxes for t in clip.tracks]), dtype=dtype)
    return ClipTensors(poses, vis, boxes)


def clip_from_tensors(
    template: SceneClip, poses: torch.Tensor, clip_id: Optional[str] = None
) -> SceneClip:
    """Return a copy of ``template`` whose future poses are replaced by ``poses``.

    :param template: Clip providing observed frames, boxes and metadata.
    :param poses: Predicted future poses shaped ``(N, T2, J, 2)``.
    """
    pred = poses.detach().cpu().double().numpy().clip(0.0, 1.0)
    tracks = []
    for i, track in enumerate(template.tracks):
        joints = track.joints.copy()
        vis = track.visibility.copy()
        joints[template.T1 :] = pred[i]
        vis[template.T1 :] = True
        tracks.append(replace(track, joints=joints, visibility=vis))
    return replace(template, tracks=tracks, clip_id=clip_id or template.clip_id)


@dataclass
class PosemapImage:
    """Binary posemap stored as 8-bit 0/255 pixels shaped ``(H, W)``."""

    pixels: np.ndarray

    def to_tensor(self, dtype: torch.dtype = torch.float32) -> torch.Tensor:
        """Return the posemap as a ``(1, H, W)`` tensor with values in {0, 1}."""
        return torch.as_tensor(self.pixels > 0, dtype=dtype).unsqueeze(0)


def posemap_radius_for(resolution: int, base_radius: int = 2, base_resolution: int = 64):
    """Return the joint disk radius for a resolution, scaling linearly from 2 at 64."""
    return max(1, int(round(base_radius * resolution / base_resolution)))


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def rasterize_posemap(pose: Pose, H: int, W: int, radius: int) -> PosemapImage:
    """Draw white disks at the visible joints of ``pose`` on a black canvas.

    :param pose: The pose to draw.
    :param H: Image height, at least 8.
    :param W: Image width, at least 8.
    :param radius: Disk radius in pixels, at least 1.
    :return: The :class:`PosemapImage`.
    """
    if H < 8 or W < 8:
        raise ValidationError("Posemaps must be at least 8x8.")
    if radius < 1:
        raise ValidationError("Posemap radius must be >= 1.")
    canvas = np.zeros((H, W), dtype=bool)
    rows = np.arange(H)[:, None]
    cols = np.arange(W)[None, :]
    for (x, y), visible in zip(pose.joints, pose.visibility):
        if not visible:
            continue
        cx = _round_half_up(x * (W - 1))
        cy = _round_half_up(y * (H - 1))
        canvas |= (cols - cx) ** 2 + (rows - cy) ** 2 <= radius * radius
    return PosemapImage(canvas.astype(np.uint8) * 255)


def save_posemap_png(image: Union[PosemapImage, np.ndarray], path: Union[str, Path]):
    """Save a posemap or an RGB ``uint8`` array as PNG."""
    pixels = image.pixels if isinstance(image, PosemapImage) else np.asarray(image)
    mode = "L" if pixels.ndim == 2 else "RGB"
    Image.fromarray(pixels.astype(np.uint8), mode=mode).save(str(path), format="PNG")


def load_png(path: Union[str, Path], mode: str = "RGB") -> np.ndarray:
    """Load a PNG as a ``uint8`` array (``"L"`` for grayscale, ``"RGB"`` for color)."""
    with Image.open(str(path)) as img:
        return np.asarray(img.convert(mode), dtype=np.uint8)


@dataclass
class SynthConfig:
    """Parameters of the synthetic scene generator."""

    num_persons: int = 6
    observed: int = 6
    future: int = 5
    num_joints: int = NUM_JOINTS
    num_groups: int = 2
    noise: float = 0.0
    velocity_scale: float = 0.01
    limb_amplitude: float = 0.04
    num_actions: int = 4

    @classmethod
    def from_config(cls, section: dict) -> "SynthConfig":
        known = {k: v for k, v in section.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def validate(self):
        if self.num_persons < 2:
            raise ConfigError("A synthetic scene needs at least 2 persons.")
        if not 1 <= self.num_groups <= self.num_persons - 1:
            raise ConfigError("num_groups must be between 1 and num_persons - 1.")
        if self.observed < 1 or self.future < 1:
            raise ConfigError("observed and future lengths must be >= 1.")
        if self.num_joints < 2:
            raise ConfigError("num_joints must be >= 2.")
        if self.noise < 0:
            raise ConfigError("noise must be >= 0.")
        if self.num_actions < 1:
            raise ConfigError("num_actions must be >= 1.")


def template_pose(num_joints: int = NUM_JOINTS) -> np.ndarray:
    """Return a standing pose in crop coordinates, shaped ``(J, 2)``."""
    if num_joints == NUM_JOINTS:
        return np.array(_TEMPLATE_14, dtype=np.float64)
    j = np.arange(num_joints, dtype=np.float64)
    return np.stack(
        [0.5 + 0.1 * np.sin(j), 0.15 + 0.7 * j / max(num_joints - 1, 1)], axis=1
    )


def _joint_depths(num_joints: int) -> np.ndarray:
    parents = kinematic_parents(num_joints)
    depth = np.zeros(num_joints)
    for j in dfs_joint_order(num_joints):
        if parents[j] >= 0:
            depth[j] = depth[parents[j]] + 1
    return depth


def limb_displacement(
    num_joints: int, t: np.ndarray, omega: float, phase: float, amplitude: float
) -> np.ndarray:
    """Return joint displacements shaped ``(len(t), J, 2)`` of a limb oscillation.

    The root does not move; amplitudes grow with the depth in the tree.
    """
    depth = _joint_depths(num_joints)
    amp = amplitude * depth / max(depth.max(), 1.0)
    j = np.arange(num_joints)
    theta = 0.7 * j
    direction = np.stack([np.cos(theta), 0.3 * np.sin(theta)], axis=1)
    wave = np.sin(omega * t[:, None] + phase + 0.5 * j[None, :])
    return wave[..., None] * amp[None, :, None] * direction[None]


def synth_scene(cfg: SynthConfig, seed: int) -> SceneClip:
    """Generate a synthetic multi-person clip with known groups.

    Persons of one true group share a velocity and a phase-locked limb
    oscillation. Each group also carries an action class that fixes the
    oscillation frequency band, recorded as the person labels.

    :param cfg: Generator parameters.
    :param seed: Seed; equal seeds give identical clips.
    :return: The clip, with ``true_groups`` and ``labels`` filled in.
    :raises ConfigError: If ``cfg`` is invalid.
    """
    cfg.validate()
    rng = np.random.default_rng(seed)
    N, K, J = cfg.num_persons, cfg.num_groups, cfg.num_joints
    T = cfg.observed + cfg.future
    groups = rng.permutation(np.arange(N) % K)
    actions = rng.integers(0, cfg.num_actions, size=K)
    velocity = rng.uniform(-1.0, 1.0, size=(K, 2)) * cfg.velocity_scale
    phase = rng.uniform(0.0, 2.0 * np.pi, size=K)
    omega = 0.3 + 0.3 * actions + rng.uniform(0.0, 0.1, size=K)
    centers = rng.uniform(0.2, 0.8, size=(N, 2))
    sizes = np.array([0.08, 0.16]) * rng.uniform(0.9, 1.1, size=(N, 1))
    jitter = rng.uniform(-0.02, 0.02, size=(N, J, 2))
    base = template_pose(J)
    t = np.arange(T, dtype=np.float64)
    tracks = []
    for i in range(N):
        k = groups[i]
        joints = base[None] + jitter[i][None] + limb_displacement(
            J, t, omega[k], phase[k], cfg.limb_amplitude
        )
        loc = centers[i][None] + velocity[k][None] * t[:, None]
        if cfg.noise > 0:
            joints = joints + rng.normal(0.0, cfg.noise, size=joints.shape)
            loc = loc + rng.normal(0.0, 0.1 * cfg.noise, size=loc.shape)
        boxes = np.concatenate([loc, np.repeat(sizes[i][None], T, axis=0)], axis=1)
        tracks.append(
            PersonTrack(
                person_id=i,
                joints=np.clip(joints, 0.0, 1.0),
                visibility=np.ones((T, J), dtype=bool),
                boxes=boxes,
            )
        )
    return SceneClip(
        clip_id=f"synth-{seed}",
        tracks=tracks,
        T1=cfg.observed,
        T2=cfg.future,
        J=J,
        labels=[int(actions[g]) for g in groups],
        true_groups=[int(g) for g in groups],
    )


def synth_clips(cfg: SynthConfig, count: int, seed: int) -> List[SceneClip]:
    """Generate ``count`` clips with seeds ``seed, seed + 1, ...``."""
    return [synth_scene(cfg, seed + i) for i in range(count)]


def draw_figure(
    pose: Pose, color: Tuple[int, int, int], H: int, W: int, thickness: int = 0
) -> np.ndarray:
    """Draw a uniform-color stick figure on black and return ``(H, W, 3)`` uint8."""
    thickness = thickness or max(2, W // 16)
    img = Image.new("RGB", (W, H), (0, 0, 0))
    draw = ImageDraw.Draw(img)
    parents = kinematic_parents(pose.num_joints)
    pts = [(x * (W - 1), y * (H - 1)) for x, y in pose.joints]
    for j, p in enumerate(parents):
        if p >= 0 and pose.visibility[j] and pose.visibility[p]:
            draw.line([pts[p], pts[j]], fill=tuple(color), width=thickness)
    r = thickness
    for (x, y), visible in zip(pts, pose.visibility):
        if visible:
            draw.ellipse([x - r / 2, y - r / 2, x + r / 2, y + r / 2], fill=tuple(color))
    return np.asarray(img, dtype=np.uint8)


@dataclass
class RenderTriple:
    """Posemap, appearance reference and goal frame of one person.

    ``posemap`` is ``(H, W)`` uint8; ``reference`` and ``goal`` are
    ``(H, W, 3)`` uint8.
    """

    posemap: np.ndarray
    reference: np.ndarray
    goal: np.ndarray
    color: Optional[Tuple[int, int, int]] = None


def _hsv_color(rng: np.random.Generator) -> Tuple[int, int, int]:
    r, g, b = colorsys.hsv_to_rgb(rng.uniform(0.0, 1.0), 0.9, 1.0)
    return int(round(r * 255)), int(round(g * 255)), int(round(b * 255))


def synth_render_triples(count: int, resolution: int, seed: int) -> List[RenderTriple]:
    """Generate rendering triples of uniformly colored synthetic figures.

    Reference and goal show the same figure in two poses of one oscillation,
    the posemap is the goal pose.
    """
    rng = np.random.default_rng(seed)
    radius = posemap_radius_for(resolution)
    base = template_pose()
    vis = np.ones(NUM_JOINTS, dtype=bool)
    triples = []
    for _ in range(count):
        color = _hsv_color(rng)
        omega, phase = rng.uniform(0.3, 1.3), rng.uniform(0.0, 2.0 * np.pi)
        t = np.array([0.0, rng.uniform(2.0, 6.0)])
        disp = limb_displacement(NUM_JOINTS, t, omega, phase, 0.08)
        ref_pose = Pose(np.clip(base + disp[0], 0.0, 1.0), vis)
        goal_pose = Pose(np.clip(base + disp[1], 0.0, 1.0), vis)
        posemap = rasterize_posemap(goal_pose, resolution, resolution, radius)
        triples.append(
            RenderTriple(
                posemap=posemap.pixels,
                reference=draw_figure(ref_pose, color, resolution, resolution),
                goal=draw_figure(goal_pose, color, resolution, resolution),
                color=color,
            )
        )
    return triples
