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

"""Module for providing test fixtures for the training tests."""

import os

import pytest

from posecast.forecaster import ModelConfig
from posecast.pose_data import SynthConfig, synth_clips
from posecast.pose_training import TrainConfig

RUN_SLOW = os.environ.get("POSECAST_RUN_SLOW") == "1"


@pytest.fixture()
def model_config():
    """A tiny 64-bit architecture."""
    return ModelConfig(person_size=8, group_size=6, joint_size=5, dtype="float64")


@pytest.fixture()
def clips():
    """Four small synthetic training clips."""
    return synth_clips(SynthConfig(num_persons=4, observed=3, future=2), count=4, seed=0)


@pytest.fixture()
def train_config():
    """Stage-1 settings for a few quick iterations."""
    return TrainConfig(
        lr=1e-3, epochs=2, batch_size=2, temperature_start=0.5, temperature_end=0.5
    )
