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

"""This module tests group state updates, contexts and gradients."""

import pytest
import torch
import torch.nn.functional as F

from posecast.exceptions import ShapeError
from posecast.group_dynamics import (
    GroupAssignment,
    GroupStates,
    assign_groups,
    group_context,
    group_contexts,
    init_group_states,
    init_groups,
    update_group_states,
)

from .conftest import GROUP_SIZE, PERSON_SIZE


def _assignment(hard, K):
    hard = torch.tensor(hard)
    return GroupAssignment(F.one_hot(hard, K).double(), hard)


def _random_states(K, seed=0):
    gen = torch.Generator().manual_seed(seed)
    g = torch.randn(K, GROUP_SIZE, dtype=torch.float64, generator=gen)
    c = torch.randn(K, GROUP_SIZE, dtype=torch.float64, generator=gen)
    return GroupStates(g, c, torch.zeros(K, dtype=torch.long))


def test_single_member_input(group_cell):
    """Test that a single-member group receives exactly that member's projection."""
    W_hg, cell = group_cell
    H = torch.randn(3, PERSON_SIZE, dtype=torch.float64)
    a = _assignment([0, 0, 1], 2)
    prev = _random_states(2)
    new = update_group_states(a, H, prev, W_hg, cell)
    g, c = cell(W_hg(H[2])[None], (prev.g[1:2], prev.c[1:2]))
    assert torch.allclose(new.g[1], g[0], atol=1e-12)
    assert torch.allclose(new.c[1], c[0], atol=1e-12)
    assert new.counts.tolist() == [2, 1]


def test_straight_line_update(group_cell):
    """Test every group against a per-group re-implementation."""
    W_hg, cell = group_cell
    torch.manual_seed(2)
    H = torch.randn(5, PERSON_SIZE, dtype=torch.float64)
    hard = [2, 0, 2, 0, 2]
    a = _assignment(hard, 4)
    prev = _random_states(4, seed=1)
    new = update_group_states(a, H, prev, W_hg, cell)
    for k in range(4):
        members = [i for i, h in enumerate(hard) if h == k]
        if members:
            x = torch.stack([W_hg(H[i]) for i in members]).mean(dim=0)
        else:
            x = torch.zeros(GROUP_SIZE, dtype=torch.float64)
        g, c = cell(x[None], (prev.g[k : k + 1], prev.c[k : k + 1]))
        assert torch.allclose(new.g[k], g[0], atol=1e-12)
        assert torch.allclose(new.c[k], c[0], atol=1e-12)


def test_disjoint_groups_are_independent(group_cell):
    """Test that changing one group's members leaves another group untouched."""
    W_hg, cell = group_cell
    H = torch.randn(4, PERSON_SIZE, dtype=torch.float64)
    prev = _random_states(3, seed=2)
    first = update_group_states(_assignment([0, 0, 1, 1], 3), H, prev, W_hg, cell)
    H2 = H.clone()
    H2[2:] = torch.randn(2, PERSON_SIZE, dtype=torch.float64)
    second = update_group_states(_assignment([0, 0, 1, 1], 3), H2, prev, W_hg, cell)
    assert torch.equal(first.g[0], second.g[0])
    assert not torch.equal(first.g[1], second.g[1])


def test_update_shape_mismatch(group_cell):
    """Test that inconsistent group states are rejected."""
    W_hg, cell = group_cell
    H = torch.randn(3, PERSON_SIZE, dtype=torch.float64)
    with pytest.raises(ShapeError):
        update_group_states(_assignment([0, 0, 1], 2), H, _random_states(3), W_hg, cell)


def test_init_group_states_zero():
    """Test that group states start at zero with the initial counts."""
    a = init_groups(4, torch.float64)
    states = init_group_states(a, GROUP_SIZE, torch.float64)
    assert states.g.shape == (3, GROUP_SIZE)
    assert float(states.g.abs().sum()) == 0.0
    assert states.counts.tolist() == [2, 1, 1]


def test_group_context_is_group_state():
    """Test that a person's context is its group's state."""
    states = _random_states(3)
    a = _assignment([2, 2, 0, 1], 3)
    assert torch.equal(group_context(a, states, 0), states.g[2])
    assert torch.equal(group_context(a, states, 0), group_context(a, states, 1))
    assert torch.equal(group_contexts(a, states)[3], states.g[1])


def test_context_changes_with_group():
    """Test that only a person whose group changed sees a new context."""
    states = _random_states(3)
    before = _assignment([0, 0, 1, 2], 3)
    after = _assignment([1, 0, 1, 2], 3)
    ctx = group_context
    assert not torch.equal(ctx(before, states, 0), ctx(after, states, 0))
    for i in (1, 2, 3):
        assert torch.equal(ctx(before, states, i), ctx(after, states, i))


def test_soft_assignment_gradient(params):
    """Test d(soft assignment)/d(person states) against central differences."""
    torch.manual_seed(11)
    H = torch.randn(4, PERSON_SIZE, dtype=torch.float64, requires_grad=True)
    prev = _assignment([0, 0, 1, 2], 3)

    def soft(states):
        return assign_groups(states, prev, params, 0.5).soft

    assert torch.autograd.gradcheck(soft, (H,), eps=1e-6, atol=1e-8, rtol=1e-4)


def test_group_context_gradient_reaches_assignment_scores(params, group_cell):
    """Test that contexts backpropagate into the interaction weights."""
    W_hg, cell = group_cell
    H = torch.randn(4, PERSON_SIZE, dtype=torch.float64)
    a = assign_groups(H, init_groups(4, torch.float64), params, 0.5)
    states = update_group_states(a, H, _random_states(3), W_hg, cell)
    group_contexts(a, states).sum().backward()
    assert params.W_hs.weight.grad is not None
    assert float(params.W_hs.weight.grad.abs().sum()) > 0.0


def test_relaxed_assignment_uses_soft_memberships(params, group_cell):
    """Test that a relaxed assignment feeds soft-weighted means forward."""
    W_hg, cell = group_cell
    H = torch.randn(4, PERSON_SIZE, dtype=torch.float64)
    start = init_groups(4, torch.float64)
    a = assign_groups(H, start, params, 0.7, straight_through=False)
    assert not a.straight_through
    assert torch.equal(group_contexts(a, _random_states(3)), a.soft @ _random_states(3).g)
    prev = _random_states(3)
    new = update_group_states(a, H, prev, W_hg, cell)
    mass = a.soft.sum(dim=0)
    inputs = (a.soft.t() @ W_hg(H)) / mass[:, None]
    g, c = cell(inputs, (prev.g, prev.c))
    assert torch.allclose(new.g, g, atol=1e-12)
    assert torch.allclose(new.c, c, atol=1e-12)
    assert a.detach().straight_through is False
