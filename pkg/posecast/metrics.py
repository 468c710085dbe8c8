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
Evaluation metrics for forecast poses, rendered frames and actions.

Pose distances are measured in pixels at :attr:`JointScoreParams.resolution`:
a normalized coordinate ``x`` maps to ``x * resolution`` pixels. Image errors
use the 8-bit scale, so PSNR values here are not comparable to numbers
computed on other pixel conventions.
"""

import csv
import json
import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import jsonschema
import numpy as np
import torch
from torch import nn

from posecast.__version__ import __version__
from posecast._compact import HAS_MATPLOTLIB, require
from posecast.exceptions import ConfigError, ShapeError, ValidationError

if HAS_MATPLOTLIB:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt  # noqa

logger = logging.getLogger(__name__)

REPORT_SCHEMA = Path(__file__).parent / "schemas" / "report.schema.json"
MODES = ("pose", "image", "action")


@dataclass
class JointScoreParams:
    """Tolerance ``mu`` (pixels) and falloff ``sigma2`` (pixels squared)."""

    mu: float = 5.0
    sigma2: float = 72.0
    resolution: int = 256

    @classmethod
    def from_config(cls, section: Dict[str, Any]) -> "JointScoreParams":
        known = {k: v for k, v in section.items() if k in cls.__dataclass_fields__}
        params = cls(**known)
        params.validate()
        return params

    def validate(self):
        if self.mu < 0:
            raise ConfigError("mu must be >= 0.")
        if not self.sigma2 > 0:
            raise ConfigError("sigma2 must be > 0.")
        if self.resolution < 1:
            raise ConfigError("resolution must be >= 1.")


def score_from_distance(distance, params: Optional[JointScoreParams] = None):
    """Joint score of pixel distances: 1 below ``mu``, Gaussian falloff beyond."""
    params = params or JointScoreParams()
    d = np.asarray(distance, dtype=np.float64)
    falloff = np.exp(-((d - params.mu) ** 2) / (2.0 * params.sigma2))
    out = np.where(d < params.mu, 1.0, falloff)
    return float(out) if out.ndim == 0 else out


def pixel_distances(pred, ref, resolution: int = 256) -> np.ndarray:
    """Euclidean distances in pixels between normalized joints ``(..., 2)``."""
    pred = np.asarray(pred, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if pred.shape != ref.shape or pred.shape[-1] != 2:
        raise ShapeError(f"Cannot compare joints {pred.shape} and {ref.shape}.")
    return np.linalg.norm((pred - ref) * resolution, axis=-1)


def joint_score(pred, ref, params: Optional[JointScoreParams] = None) -> float:
    """Score of one predicted joint against its reference, in ``(0, 1]``.

    :param pred: Predicted ``(x, y)`` in normalized coordinates.
    :param ref: Reference ``(x, y)`` in normalized coordinates.
    """
    params = params or JointScoreParams()
    distance = pixel_distances(pred, ref, params.resolution)
    return float(score_from_distance(distance, params))


def joint_scores(pred, ref, params: Optional[JointScoreParams] = None) -> np.ndarray:
    """Vectorised :func:`joint_score` over arrays of joints ``(..., 2)``."""
    params = params or JointScoreParams()
    distance = pixel_distances(pred, ref, params.resolution)
    return np.asarray(score_from_distance(distance, params))


@dataclass
class StepMetrics:
    step: int
    mse: float
    joint_score: float


@dataclass
class PoseEvalTable:
    """Per-step pose errors of one model over a set of clips."""

    steps: List[StepMetrics] = field(default_factory=list)

    @property
    def mean_mse(self) -> float:
        return float(np.mean([s.mse for s in self.steps])) if self.steps else math.nan

    @property
    def mean_joint_score(self) -> float:
        if not self.steps:
            return math.nan
        return float(np.mean([s.joint_score for s in self.steps]))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "steps": [asdict(s) for s in self.steps],
            "mean_mse": self.mean_mse,
            "mean_joint_score": self.mean_joint_score,
        }


def _as_array(x) -> np.ndarray:
    if isinstance(x, torch.Tensor):
        return x.detach().cpu().double().numpy()
    return np.asarray(x, dtype=np.float64)


def sequence_pose_eval(
    pred,
    ref,
    params: Optional[JointScoreParams] = None,
    visibility=None,
    first_step: int = 1,
) -> PoseEvalTable:
    """Per future step: mean squared pixel distance and mean joint score.

    :param pred: Predicted poses ``(N, T2, J, 2)``, or a list of such arrays
        (one per clip, person counts may differ).
    :param ref: Reference poses, same layout.
    :param visibility: Optional ``(N, T2, J)`` masks (or a list) of reference
        joints to count.
    :param first_step: Number of the first step in the table.
    """
    params = params or JointScoreParams()
    preds = pred if isinstance(pred, (list, tuple)) else [pred]
    refs = ref if isinstance(ref, (list, tuple)) else [ref]
    if len(preds) != len(refs):
        raise ShapeError("Predictions and references hold different clip counts.")
    if visibility is None:
        masks = [None] * len(preds)
    else:
        masks = visibility if isinstance(visibility, (list, tuple)) else [visibility]
    dists, keep = [], []
    for p, r, m in zip(preds, refs, masks):
        p, r = _as_array(p), _as_array(r)
        if p.ndim != 4:
            raise ShapeError(f"Poses must be (N, T2, J, 2), got {p.shape}.")
        d = pixel_distances(p, r, params.resolution)
        dists.append(d.transpose(1, 0, 2).reshape(d.shape[1], -1))
        mask = np.ones(d.shape, dtype=bool) if m is None else np.asarray(m, dtype=bool)
        keep.append(mask.transpose(1, 0, 2).reshape(d.shape[1], -1))
    if len({d.shape[0] for d in dists}) > 1:
        raise ShapeError("All clips must have the same number of future steps.")
    d_all = np.concatenate(dists, axis=1)
    k_all = np.concatenate(keep, axis=1)
    table = PoseEvalTable()
    for t in range(d_all.shape[0]):
        d = d_all[t][k_all[t]]
        if d.size == 0:
            table.steps.append(StepMetrics(first_step + t, math.nan, math.nan))
            continue
        scores = score_from_distance(d, params)
        table.steps.append(
            StepMetrics(first_step + t, float(np.mean(d ** 2)), float(np.mean(scores)))
        )
    return table


def image_mse_psnr(frames_gen, frames_goal):
    """MSE and PSNR on the 8-bit scale over all frames, pixels and channels.

    :return: ``(mse, psnr)``; ``psnr`` is ``inf`` when the frames are identical.
    """
    gen = np.asarray(frames_gen, dtype=np.float64)
    goal = np.asarray(frames_goal, dtype=np.float64)
    if gen.shape != goal.shape:
        raise ShapeError(f"Frame shapes differ: {gen.shape} vs {goal.shape}.")
    if gen.size == 0:
        raise ValidationError("No frames to compare.")
    mse = float(np.mean((gen - goal) ** 2))
    if mse == 0.0:
        return 0.0, math.inf
    return mse, 10.0 * math.log10(255.0 ** 2 / mse)


class ActionClassifier(nn.Module):
    """GRU over per-frame features followed by a linear classifier."""

    def __init__(self, input_size: int, num_classes: int, hidden_size: int = 32):
        super().__init__()
        self.gru = nn.GRU(input_size, hidden_size, batch_first=True)
        self.head = nn.Linear(hidden_size, num_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        _, h = self.gru(x)
        return self.head(h[-1])


def pose_features(poses) -> np.ndarray:
    """Flatten pose sequences ``(M, T, J, 2)`` to ``(M, T, 2J)`` features."""
    p = _as_array(poses)
    return p.reshape(p.shape[0], p.shape[1], -1)


def frame_features(frames, size: int = 8) -> np.ndarray:
    """Grayscale ``size x size`` average-pooled frames.

    :param frames: ``(M, T, H, W, 3)`` uint8 sequences with ``H`` and ``W``
        divisible by ``size``.
    :return: ``(M, T, size * size)`` features in [0, 1].
    """
    f = np.asarray(frames, dtype=np.float64) / 255.0
    M, T, H, W = f.shape[:4]
    if H % size or W % size:
        raise ShapeError(f"Frames {H}x{W} are not divisible by {size}.")
    gray = f.mean(axis=-1)
    pooled = gray.reshape(M, T, size, H // size, size, W // size).mean(axis=(3, 5))
    return pooled.reshape(M, T, size * size)


def confusion_matrix(true, pred, num_classes: int) -> np.ndarray:
    """``(C, C)`` counts with true classes as rows."""
    out = np.zeros((num_classes, num_classes), dtype=np.int64)
    for t, p in zip(true, pred):
        out[int(t), int(p)] += 1
    return out


def train_action_classifier(
    features,
    labels: Sequence[int],
    num_classes: int,
    epochs: int = 200,
    lr: float = 1e-2,
    seed: int = 0,
) -> ActionClassifier:
    """Fit an :class:`ActionClassifier` with full-batch Adam."""
    x = torch.as_tensor(np.asarray(features), dtype=torch.float32)
    y = torch.as_tensor(list(labels), dtype=torch.long)
    if x.dim() != 3 or x.shape[0] != y.shape[0]:
        raise ShapeError("Features must be (M, T, F) with one label per sequence.")
    torch.manual_seed(seed)
    model = ActionClassifier(x.shape[2], num_classes)
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    loss_fn = nn.CrossEntropyLoss()
    model.train()
    for _ in range(epochs):
        optimizer.zero_grad()
        loss = loss_fn(model(x), y)
        loss.backward()
        optimizer.step()
    model.eval()
    return model


@dataclass
class ActionEvalResult:
    accuracy: float
    non_majority_accuracy: float
    majority_class: int
    confusion: List[List[int]]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def non_majority_accuracy(true, pred, majority_class: int) -> float:
    """Accuracy over the samples whose true class is not ``majority_class``."""
    pairs = [(t, p) for t, p in zip(true, pred) if t != majority_class]
    if not pairs:
        return math.nan
    return sum(1 for t, p in pairs if t == p) / len(pairs)


def held_out_split(
    clip_ids: Sequence[str], seed: int = 0, train_fraction: float = 0.5
) -> Tuple[List[str], List[str]]:
    """Split clip ids into disjoint classifier-training and test lists.

    The ids are shuffled with ``seed``; both lists keep the input order.

    :raises ValidationError: If fewer than two distinct ids are given.
    """
    ids = list(dict.fromkeys(str(c) for c in clip_ids))
    if len(ids) < 2:
        raise ValidationError("A held-out split needs at least two clips.")
    order = np.random.default_rng(seed).permutation(len(ids))
    n_train = min(max(int(round(len(ids) * train_fraction)), 1), len(ids) - 1)
    train = set(order[:n_train].tolist())
    return (
        [c for i, c in enumerate(ids) if i in train],
        [c for i, c in enumerate(ids) if i not in train],
    )


def action_eval(
    train_features,
    train_labels: Sequence[int],
    test_features,
    test_labels: Sequence[int],
    num_classes: Optional[int] = None,
    epochs: int = 200,
    seed: int = 0,
) -> ActionEvalResult:
    """Train a classifier on real sequences and test it on generated ones.

    The majority class is the most frequent training label (lowest id on ties).
    """
    train_labels = [int(v) for v in train_labels]
    test_labels = [int(v) for v in test_labels]
    if not train_labels or not test_labels:
        raise ValidationError("action_eval needs training and test sequences.")
    num_classes = num_classes or max(train_labels + test_labels) + 1
    model = train_action_classifier(
        train_features, train_labels, num_classes, epochs=epochs, seed=seed
    )
    with torch.no_grad():
        logits = model(torch.as_tensor(np.asarray(test_features), dtype=torch.float32))
    pred = logits.argmax(dim=1).tolist()
    counts = Counter(train_labels)
    majority = min(counts, key=lambda c: (-counts[c], c))
    accuracy = sum(1 for t, p in zip(test_labels, pred) if t == p) / len(test_labels)
    return ActionEvalResult(
        accuracy=accuracy,
        non_majority_accuracy=non_majority_accuracy(test_labels, pred, majority),
        majority_class=majority,
        confusion=confusion_matrix(test_labels, pred, num_classes).tolist(),
    )


def _finite(value: float):
    if value is None:
        return None
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if math.isnan(value):
        return None
    return value


def build_report(
    mode: str,
    pose: Optional[PoseEvalTable] = None,
    image: Optional[tuple] = None,
    action: Optional[ActionEvalResult] = None,
    meta: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    """Assemble an evaluation report dictionary.

    Infinite values are written as the string ``"inf"`` and undefined ones as
    ``null``.
    """
    if mode not in MODES:
        raise ValidationError(f"Unknown evaluation mode '{mode}'.")
    report: Dict[str, Any] = {"version": __version__, "mode": mode, "meta": meta or {}}
    if pose is not None:
        report["pose"] = {
            "steps": [
                {
                    "step": s.step,
                    "mse": _finite(s.mse),
                    "joint_score": _finite(s.joint_score),
                }
                for s in pose.steps
            ],
            "mean_mse": _finite(pose.mean_mse),
            "mean_joint_score": _finite(pose.mean_joint_score),
        }
    if image is not None:
        mse, psnr = image
        report["image"] = {"mse": _finite(mse), "psnr": _finite(psnr)}
    if action is not None:
        data = action.to_dict()
        data["non_majority_accuracy"] = _finite(data["non_majority_accuracy"])
        report["action"] = data
    return report


def load_report_schema() -> Dict[str, Any]:
    with open(REPORT_SCHEMA, "r", encoding="utf-8") as f:
        return json.load(f)


def validate_report(report: Dict[str, Any]) -> None:
    """Validate a report against the bundled JSON schema.

    :raises ValidationError: If the report does not match the schema.
    """
    try:
        jsonschema.validate(report, load_report_schema())
    except jsonschema.ValidationError as e:
        raise ValidationError(f"Invalid report: {e.message}") from e


def write_report(report: Dict[str, Any], path: Union[str, Path]) -> Path:
    """Validate and write a report as JSON."""
    validate_report(report)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def report_rows(report: Dict[str, Any]) -> List[Dict[str, Any]]:
    """Flatten a report into ``section, step, metric, value`` rows."""
    rows = []
    for s in report.get("pose", {}).get("steps", []):
        for metric in ("mse", "joint_score"):
            rows.append(
                {
                    "section": "pose",
                    "step": s["step"],
                    "metric": metric,
                    "value": s[metric],
                }
            )
    for section in ("image", "action"):
        for metric, value in report.get(section, {}).items():
            if not isinstance(value, list):
                rows.append(
                    {"section": section, "step": "", "metric": metric, "value": value}
                )
    return rows


def write_report_csv(report: Dict[str, Any], path: Union[str, Path]) -> Path:
    """Export a report as CSV rows (see :func:`report_rows`)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(
            f, fieldnames=["section", "step", "metric", "value"], lineterminator="\n"
        )
        writer.writeheader()
        writer.writerows(report_rows(report))
    return path


def plot_pose_table(
    tables: Dict[str, PoseEvalTable], path: Union[str, Path]
) -> Path:
    """Plot per-step MSE and joint score of one or more models to ``path``.

    :raises ConfigError: If matplotlib is not installed.
    """
    require(HAS_MATPLOTLIB, "plot_pose_table", "matplotlib", "plot")
    fig, (ax_mse, ax_score) = plt.subplots(1, 2, figsize=(9, 3.5))
    for name, table in tables.items():
        steps = [s.step for s in table.steps]
        ax_mse.plot(steps, [s.mse for s in table.steps], marker="o", label=name)
        ax_score.plot(steps, [s.joint_score for s in table.steps], marker="o", label=name)
    ax_mse.set_xlabel("step")
    ax_mse.set_ylabel("MSE (px^2)")
    ax_score.set_xlabel("step")
    ax_score.set_ylabel("joint score")
    ax_score.legend()
    fig.tight_layout()
    fig.savefig(str(path), metadata={"Software": None})
    plt.close(fig)
    return Path(path)
