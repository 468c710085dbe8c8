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
Dynamic group-based interaction between persons of a scene.

Given ``N`` persons there are ``N - 1`` groups. At every step each person
scores every group by its mean pairwise interaction score with the group's
current members (or by its self-score for an empty group) and joins the best
one. The hard choice drives the bookkeeping; a low-temperature softmax over the
same scores carries the gradients (straight-through).
"""

import json
import logging
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from posecast.exceptions import ShapeError, ValidationError

logger = logging.getLogger(__name__)


class InteractionParams(nn.Module):
    """Weights of the state-to-score transformation.

    ``W_hh`` maps summed person states to a hidden vector (with bias
    ``b_hh``) and ``W_hs`` maps that to a scalar (with bias ``b_hs``).
    """

    def __init__(self, person_size: int = 256):
        super().__init__()
        self.person_size = person_size
        self.W_hh = nn.Linear(person_size, person_size)
        self.W_hs = nn.Linear(person_size, 1)

    def forward(self, summed: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.W_hs(self.W_hh(summed)).squeeze(-1))


@dataclass
class GroupAssignment:
    """Soft ``(N, N-1)`` row-stochastic assignment and hard group index per person.

    With ``straight_through`` the membership used downstream is the one-hot of
    ``hard`` in the forward pass; otherwise it is ``soft`` itself.
    """

    soft: torch.Tensor
    hard: torch.Tensor
    straight_through: bool = True

    @property
    def num_persons(self) -> int:
        return self.hard.shape[0]

    @property
    def num_groups(self) -> int:
        return self.soft.shape[1]

    def counts(self) -> torch.Tensor:
        return torch.bincount(self.hard, minlength=self.num_groups)

    def detach(self) -> "GroupAssignment":
        return GroupAssignment(
            self.soft.detach(), self.hard.clone(), self.straight_through
        )


@dataclass
class GroupStates:
    """Hidden states ``g`` and cell memories ``c`` of the ``N - 1`` group LSTMs."""

    g: torch.Tensor
    c: torch.Tensor
    counts: torch.Tensor

    @property
    def num_groups(self) -> int:
        return self.g.shape[0]


def init_groups(N: int, dtype: torch.dtype = torch.float32) -> GroupAssignment:
    """Place persons 0 and 1 in group 0 and every other person alone.

    :param N: Number of persons, at least 2.
    :return: The initial :class:`GroupAssignment` over ``N - 1`` groups.
    :raises ValidationError: If ``N < 2``.
    """
    if N < 2:
        raise ValidationError(f"Group assignment needs at least 2 persons, got {N}.")
    hard = torch.tensor([0] + list(range(N - 1)), dtype=torch.long)
    soft = F.one_hot(hard, N - 1).to(dtype)
    return GroupAssignment(soft=soft, hard=hard)


def init_group_states(
    assignment: GroupAssignment, group_size: int, dtype: torch.dtype = torch.float32
) -> GroupStates:
    """Return zero group states sized for ``assignment``."""
    K = assignment.num_groups
    zeros = torch.zeros(K, group_size, dtype=dtype)
    return GroupStates(g=zeros, c=zeros.clone(), counts=assignment.counts())


def _check_state(h: torch.Tensor, params: InteractionParams, name: str):
    if h.shape[-1] != params.person_size:
        raise ShapeError(
            f"{name} has size {h.shape[-1]}, expected person size {params.person_size}."
        )


def interaction_score(
    h_i: torch.Tensor, h_j: torch.Tensor, params: InteractionParams
) -> torch.Tensor:
    """Return the interaction score of two persons, a scalar in ``(0, 1)``.

    :raises ShapeError: If a state does not have the person state size.
    """
    _check_state(h_i, params, "h_i")
    _check_state(h_j, params, "h_j")
    if h_i.dim() != 1 or h_j.dim() != 1:
        raise ShapeError("interaction_score expects two state vectors.")
    return params(h_i + h_j)


def pairwise_scores(H: torch.Tensor, params: InteractionParams) -> torch.Tensor:
    """Return the symmetric ``(N, N)`` matrix of interaction scores."""
    if H.dim() != 2:
        raise ShapeError(f"Person states must be (N, H_p), got {tuple(H.shape)}.")
    _check_state(H, params, "H")
    return params(H[:, None, :] + H[None, :, :])


def membership_matrix(hard: torch.Tensor, num_groups: int, dtype=torch.float32):
    """Return the ``(N, K)`` one-hot membership matrix of a hard assignment."""
    return F.one_hot(hard, num_groups).to(dtype)


def candidate_scores(P: torch.Tensor, prev_hard: torch.Tensor, num_groups: int):
    """Score every group for every person from pairwise scores ``P``.

    A non-empty group scores the mean of ``P[i, j]`` over its members ``j``;
    this includes ``P[i, i]`` for the person's own group. An empty group
    scores ``P[i, i]``.
    """
    M = membership_matrix(prev_hard, num_groups, P.dtype)
    counts = M.sum(dim=0)
    means = (P @ M) / counts.clamp(min=1.0)
    diag = torch.diagonal(P)[:, None].expand_as(means)
    return torch.where(counts[None, :] > 0, means, diag)


def _tie_break_argmax(scores: torch.Tensor, prev_hard: torch.Tensor) -> torch.Tensor:
    """Argmax per row, preferring the previous group and then the lowest index."""
    best = scores.max(dim=1, keepdim=True).values
    tol = 8 * torch.finfo(scores.dtype).eps * best.abs().clamp(min=1.0)
    candidates = scores >= best - tol
    keep_prev = candidates.gather(1, prev_hard[:, None]).squeeze(1)
    lowest = torch.argmax(candidates.to(torch.int8), dim=1)
    return torch.where(keep_prev, prev_hard, lowest)


def sample_gumbel(
    shape, dtype=torch.float32, generator: Optional[torch.Generator] = None, eps=1e-20
) -> torch.Tensor:
    """Draw standard Gumbel noise."""
    U = torch.rand(shape, dtype=dtype, generator=generator)
    return -torch.log(-torch.log(U + eps) + eps)


def assign_groups(
    H: torch.Tensor,
    prev: GroupAssignment,
    params: InteractionParams,
    temperature: float,
    gumbel: bool = False,
    generator: Optional[torch.Generator] = None,
    straight_through: bool = True,
) -> GroupAssignment:
    """Let every person choose its group for the next step.

    :param H: Person states ``(N, H_p)``.
    :param prev: The previous assignment; defines the current group members.
    :param params: Interaction weights.
    :param temperature: Softmax temperature, strictly positive.
    :param gumbel: Add Gumbel noise to the group scores before choosing.
    :param generator: Random generator for the Gumbel noise.
    :param straight_through: Use one-hot memberships in the forward pass.
    :return: The new :class:`GroupAssignment`.
    :raises ValidationError: If ``temperature <= 0``.
    """
    if not temperature > 0:
        raise ValidationError(f"Temperature must be > 0, got {temperature}.")
    if H.shape[0] != prev.num_persons:
        raise ShapeError(
            f"{H.shape[0]} person states for an assignment of {prev.num_persons}."
        )
    P = pairwise_scores(H, params)
    scores = candidate_scores(P, prev.hard, prev.num_groups)
    if gumbel:
        scores = scores + sample_gumbel(scores.shape, scores.dtype, generator)
    soft = torch.softmax(scores / temperature, dim=1)
    hard = _tie_break_argmax(scores.detach(), prev.hard)
    return GroupAssignment(soft=soft, hard=hard, straight_through=straight_through)


def relaxed_membership(assignment: GroupAssignment) -> torch.Tensor:
    """Membership matrix of ``assignment``.

    Straight-through assignments are exactly one-hot forward with soft gradients
    backward; relaxed ones return ``soft``.
    """
    soft = assignment.soft
    if not assignment.straight_through:
        return soft
    hard = membership_matrix(assignment.hard, assignment.num_groups, soft.dtype)
    return hard + (soft - soft.detach())


def update_group_states(
    assignment: GroupAssignment,
    H: torch.Tensor,
    prev: GroupStates,
    W_hg: nn.Linear,
    cell: nn.LSTMCell,
) -> GroupStates:
    """Advance every group LSTM by one step.

    The input of a non-empty group is the mean of ``W_hg h_i`` over its
    members; empty groups advance with a zero input. Relaxed assignments
    weight the mean by the soft memberships.

    :raises ShapeError: On inconsistent shapes.
    """
    K = assignment.num_groups
    if H.shape[0] != assignment.num_persons:
        raise ShapeError("Person states and assignment disagree on N.")
    if prev.g.shape[0] != K or prev.c.shape != prev.g.shape:
        raise ShapeError(f"Group states must hold {K} groups.")
    if W_hg.in_features != H.shape[1] or W_hg.out_features != cell.input_size:
        raise ShapeError("W_hg does not map person states to the group cell input.")
    if cell.hidden_size != prev.g.shape[1]:
        raise ShapeError("Group cell size does not match the group states.")
    M = relaxed_membership(assignment)
    counts = assignment.counts()
    if assignment.straight_through:
        mass = counts.clamp(min=1).to(H.dtype)
    else:
        mass = M.sum(dim=0).clamp(min=1e-6)
    inputs = (M.t() @ W_hg(H)) / mass[:, None]
    g, c = cell(inputs, (prev.g, prev.c))
    return GroupStates(g=g, c=c, counts=counts)


def group_context(
    assignment: GroupAssignment, states: GroupStates, i: int
) -> torch.Tensor:
    """Return the state of the group person ``i`` belongs to."""
    return states.g[assignment.hard[i]]


def group_contexts(assignment: GroupAssignment, states: GroupStates) -> torch.Tensor:
    """Return the ``(N, G)`` group contexts of all persons, differentiable."""
    return relaxed_membership(assignment) @ states.g


def co_membership(hard: Union[torch.Tensor, Sequence[int]]) -> np.ndarray:
    """Return the ``(N, N)`` boolean matrix of persons sharing a group."""
    h = np.asarray(hard.tolist() if isinstance(hard, torch.Tensor) else hard)
    return h[:, None] == h[None, :]


def rand_index(hard: Sequence[int], true_groups: Sequence[int]) -> float:
    """Return the Rand index between a hard assignment and reference groups."""
    a = co_membership(hard)
    b = co_membership(true_groups)
    pairs = list(combinations(range(len(a)), 2))
    if not pairs:
        return 1.0
    agree = sum(1 for i, j in pairs if a[i, j] == b[i, j])
    return agree / len(pairs)


def dump_assignments(history: Sequence[GroupAssignment], path: Union[str, Path]):
    """Write per-step soft and hard assignments as JSON."""
    payload = {"steps": [assignment_to_dict(a) for a in history]}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f)


def assignment_to_dict(a: GroupAssignment) -> dict:
    return {"soft": a.soft.detach().double().tolist(), "hard": a.hard.tolist()}


def assignment_from_dict(d: dict, dtype=torch.float64) -> GroupAssignment:
    return GroupAssignment(
        soft=torch.tensor(d["soft"], dtype=dtype),
        hard=torch.tensor(d["hard"], dtype=torch.long),
    )


def load_assignments(path: Union[str, Path]) -> List[GroupAssignment]:
    """Read a dump written by :func:`dump_assignments`."""
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    return [assignment_from_dict(step) for step in payload["steps"]]
