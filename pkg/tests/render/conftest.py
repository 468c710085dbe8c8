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

"""Module for providing test fixtures for the rendering tests."""

import pytest
import torch
from torch import nn

from posecast.ada_render import RenderArch, Renderer
from posecast.pose_data import synth_render_triples

RESOLUTION = 32


class ScaledFeatures(nn.Module):
    """Extractor whose layer ``k`` is a fixed smooth function of the image."""

    def forward(self, image, layers):
        names = ["relu1_2", "relu2_2", "relu3_2", "relu4_2", "relu5_2"]
        return {
            name: image * (names.index(name) + 1) + image ** 2
            for name in layers
            if name in names
        }


@pytest.fixture()
def arch():
    """The shallow variant at 32x32."""
    return RenderArch.variant("5-5-10", RESOLUTION)


@pytest.fixture()
def renderer(arch):
    """A seeded renderer in evaluation mode."""
    torch.manual_seed(0)
    r = Renderer(arch)
    r.eval()
    return r


@pytest.fixture()
def triples():
    """Four synthetic triples at 32x32."""
    return synth_render_triples(count=4, resolution=RESOLUTION, seed=0)


@pytest.fixture()
def stub_extractor():
    """A smooth stand-in for a perceptual network."""
    return ScaledFeatures()
