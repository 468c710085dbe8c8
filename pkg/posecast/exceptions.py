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

"""This module defines the exceptions raised by posecast.

All exceptions derive from :class:`PoseCastError`. Errors caused by bad
inputs derive from :class:`ValidationError`; the command line maps those to
exit code 2 and everything else to exit code 3.
"""

from typing import Dict, Optional, Union


class PoseCastError(Exception):
    """Base class of all posecast exceptions."""

    pass


class ValidationError(PoseCastError):
    """Exception raised when an input violates a documented invariant."""

    pass


class ConfigError(ValidationError):
    """Exception raised for an invalid or inconsistent configuration value."""

    pass


class ShapeError(ValidationError):
    """Exception raised when array or tensor shapes do not fit together.

    Example:

    >>> try:
    >>>     interaction_score(h_i, h_j[:3], params)
    >>> except ShapeError as e:
    >>>     print(e)
    """

    pass


class ClipFormatError(ValidationError):
    """Exception raised for a malformed line in a clip file.

    The exception keeps the offending line number (1-based) and the file path,
    so callers can point users at the exact location.
    """

    def __init__(self, message: str, line_number: int, path: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.line_number = line_number
        self.path = path

    def __str__(self):
        """Return the message prefixed with the file location."""
        where = f"{self.path}:" if self.path else "line "
        return f"{where}{self.line_number}: {self.message}"


class CheckpointError(PoseCastError):
    """Exception raised when a checkpoint is missing, corrupt or incompatible."""

    pass


class MissingCheckpointError(CheckpointError, ValidationError):
    """Exception raised when a required checkpoint was not provided."""

    pass


class TrainingDivergedError(PoseCastError):
    """Exception raised when a training loss becomes NaN or infinite.

    The exception value keeps the iteration, the training stage and the loss
    components that were computed right before aborting.
    """

    def __init__(
        self, iteration: int, stage: Union[int, str], components: Dict[str, float]
    ):
        super().__init__(iteration, stage, components)
        self.iteration = iteration
        self.stage = stage
        self.components = components

    def __str__(self):
        """Return a diagnostic listing iteration, stage and loss components."""
        parts = ", ".join(f"{k}={v}" for k, v in sorted(self.components.items()))
        return (
            f"Training diverged at iteration {self.iteration} "
            f"(stage {self.stage}): {parts}"
        )
