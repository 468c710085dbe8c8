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

"""This module tests the joint score, per-step pose tables and image errors."""

import math

import numpy as np
import pytest

from posecast.exceptions import ShapeError, ValidationError
from posecast.metrics import (
    JointScoreParams,
    image_mse_psnr,
    joint_score,
    joint_scores,
    pixel_distances,
    score_from_distance,
    sequence_pose_eval,
)


@pytest.mark.parametrize(
    "distance, expected", [(0.0, 1.0), (4.9, 1.0), (5.0, 1.0), (17.0, math.exp(-1.0))]
)
def test_score_from_distance(distance, expected):
    """Test the score at and beyond the tolerance."""
    assert score_from_distance(distance) == pytest.approx(expected, rel=1e-12)


def test_score_decreases_with_distance():
    """Test that the score falls monotonically beyond the tolerance."""
    scores = score_from_distance(np.linspace(5.0, 60.0, 12))
    assert np.all(np.diff(scores) < 0)
    assert np.all(scores > 0)


def test_joint_score_in_pixels():
    """Test that normalized coordinates are scaled by the resolution."""
    assert joint_score([0.0, 0.0], [17.0 / 256, 0.0]) == pytest.approx(math.exp(-1.0))
    params = JointScoreParams(resolution=128)
    assert joint_score([0.0, 0.0], [17.0 / 128, 0.0], params) == pytest.approx(
        math.exp(-1.0)
    )
    scores = joint_scores(np.zeros((3, 2)), np.zeros((3, 2)))
    assert scores.tolist() == [1.0, 1.0, 1.0]


def test_pixel_distances_shape_mismatch():
    """Test that joint arrays must agree."""
    with pytest.raises(ShapeError):
        pixel_distances(np.zeros((3, 2)), np.zeros((2, 2)))


def test_sequence_pose_eval_shift():
    """Test per-step errors of a prediction shifted by three pixels."""
    ref = np.random.default_rng(0).uniform(0.2, 0.8, size=(2, 3, 14, 2))
    pred = ref.copy()
    pred[..., 0] += 3.0 / 256
    table = sequence_pose_eval(pred, ref)
    assert [s.step for s in table.steps] == [1, 2, 3]
    for s in table.steps:
        assert s.mse == pytest.approx(9.0)
        assert s.joint_score == 1.0
    assert table.mean_mse == pytest.approx(9.0)


def test_sequence_pose_eval_perfect_and_growing():
    """Test a perfect first step followed by growing errors."""
    ref = np.full((1, 3, 2, 2), 0.5)
    pred = ref.copy()
    pred[0, 1, :, 1] += 10.0 / 256
    pred[0, 2, :, 1] += 20.0 / 256
    table = sequence_pose_eval(pred, ref, first_step=0)
    assert [s.step for s in table.steps] == [0, 1, 2]
    assert table.steps[0].mse == 0.0
    assert table.steps[1].mse == pytest.approx(100.0)
    assert table.steps[2].joint_score == pytest.approx(score_from_distance(20.0))
    assert table.steps[2].joint_score < table.steps[1].joint_score


def test_sequence_pose_eval_clip_list_and_mask():
    """Test clips with different person counts and an empty masked step."""
    a = np.full((2, 2, 3, 2), 0.5)
    b = np.full((3, 2, 3, 2), 0.5)
    b_pred = b.copy()
    b_pred[..., 0] += 2.0 / 256
    mask_a = np.ones((2, 2, 3), dtype=bool)
    mask_b = np.ones((3, 2, 3), dtype=bool)
    mask_a[:, 1] = False
    mask_b[:, 1] = False
    table = sequence_pose_eval([a, b_pred], [a, b], visibility=[mask_a, mask_b])
    assert table.steps[0].mse == pytest.approx(4.0 * 9 / 15)
    assert math.isnan(table.steps[1].mse)
    with pytest.raises(ShapeError):
        sequence_pose_eval([a], [a, b])


def test_image_mse_psnr():
    """Test the 8-bit MSE and PSNR conventions."""
    goal = np.zeros((2, 4, 4, 3), dtype=np.uint8)
    assert image_mse_psnr(goal, goal) == (0.0, math.inf)
    mse, psnr = image_mse_psnr(goal + 1, goal)
    assert mse == 1.0
    assert psnr == pytest.approx(48.1308, abs=1e-3)
    mse, psnr = image_mse_psnr(np.full((4, 4, 3), 255.0), np.zeros((4, 4, 3)))
    assert psnr == pytest.approx(0.0)


def test_image_mse_psnr_errors():
    """Test mismatched and empty frame sets."""
    with pytest.raises(ShapeError):
        image_mse_psnr(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))
    with pytest.raises(ValidationError):
        image_mse_psnr(np.zeros((0, 4, 4, 3)), np.zeros((0, 4, 4, 3)))
