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

"""Module for providing test fixtures for the forecaster tests."""

import pytest
import torch

from posecast.forecaster import ModelConfig, PoseForecaster
from posecast.pose_data import SynthConfig, synth_scene

SMALL = dict(person_size=8, group_size=6, joint_size=5, dtype="float64")


def small_model(seed=0, **overrides):
    """Build a tiny 64-bit forecaster with seeded weights."""
    torch.manual_seed(seed)
    return PoseForecaster(ModelConfig(**{**SMALL, **overrides}))


@pytest.fixture()
def model():
    """The full model with a zero-initialized refiner head."""
    return small_model()


@pytest.fixture()
def live_model():
    """The full model with a randomly initialized refiner head."""
    return small_model(zero_refiner_head=False)


@pytest.fixture()
def scene():
    """A four-person synthetic clip with three observed and two future frames."""
    return synth_scene(SynthConfig(num_persons=4, observed=3, future=2), seed=0)
