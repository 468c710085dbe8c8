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

"""Module for providing test fixtures for the group interaction tests."""

import pytest
import torch
from torch import nn

from posecast.group_dynamics import InteractionParams

PERSON_SIZE = 8
GROUP_SIZE = 6


@pytest.fixture()
def params():
    """Interaction weights with spread-out scores, 64-bit."""
    torch.manual_seed(0)
    p = InteractionParams(PERSON_SIZE).double()
    with torch.no_grad():
        p.W_hs.weight.mul_(4.0)
    return p


@pytest.fixture()
def zero_params():
    """Interaction weights and biases that are all zero."""
    p = InteractionParams(PERSON_SIZE).double()
    for tensor in p.parameters():
        nn.init.zeros_(tensor)
    return p


@pytest.fixture()
def group_cell():
    """Projection ``W_hg`` and group LSTM cell, 64-bit."""
    torch.manual_seed(1)
    W_hg = nn.Linear(PERSON_SIZE, GROUP_SIZE, bias=False).double()
    cell = nn.LSTMCell(GROUP_SIZE, GROUP_SIZE).double()
    return W_hg, cell


@pytest.fixture()
def rng():
    """A seeded torch generator."""
    gen = torch.Generator()
    gen.manual_seed(1234)
    return gen
