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

"""Module for providing test fixtures for the pose data tests."""

import numpy as np
import pytest

from posecast.pose_data import PersonTrack, SceneClip, SynthConfig


def make_clip(N=3, T1=2, T2=2, J=14, seed=0, clip_id="clip-0"):
    """Return a valid clip with random joints inside the unit square."""
    rng = np.random.default_rng(seed)
    T = T1 + T2
    tracks = [
        PersonTrack(
            person_id=i,
            joints=rng.uniform(0.1, 0.9, size=(T, J, 2)),
            visibility=np.ones((T, J), dtype=bool),
            boxes=np.tile([0.5, 0.5, 0.1, 0.2], (T, 1)),
        )
        for i in range(N)
    ]
    return SceneClip(clip_id=clip_id, tracks=tracks, T1=T1, T2=T2, J=J)


@pytest.fixture()
def clip():
    """A small valid clip of three persons."""
    return make_clip()


@pytest.fixture()
def synth_cfg():
    """Default synthetic generator settings without noise."""
    return SynthConfig()
