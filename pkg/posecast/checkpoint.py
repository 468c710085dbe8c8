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
Checkpoint archives.

A checkpoint is a zip archive holding ``manifest.json`` (kind, package
version, model configuration, parameter shapes and free-form extras) and
``params.pt`` (the named parameter tensors, optionally followed by an
optimizer state). Entries carry a fixed timestamp so that saving the same
parameters twice yields identical bytes.
"""

import io
import json
import logging
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import torch

from posecast.__version__ import __version__
from posecast.exceptions import CheckpointError

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
PARAMS_NAME = "params.pt"
_FIXED_DATE = (1980, 1, 1, 0, 0, 0)


@dataclass
class Checkpoint:
    """Content of a checkpoint archive."""

    manifest: Dict[str, Any]
    state_dict: Dict[str, torch.Tensor]
    optimizer_state: Optional[Dict[str, Any]] = None
    extra_states: Dict[str, Any] = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return self.manifest.get("kind", "")

    @property
    def config(self) -> Dict[str, Any]:
        return self.manifest.get("config", {})


def _write_entry(zf: zipfile.ZipFile, name: str, data: bytes):
    info = zipfile.ZipInfo(name, date_time=_FIXED_DATE)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def save_checkpoint(
    path: Union[str, Path],
    kind: str,
    config: Dict[str, Any],
    state_dict: Dict[str, torch.Tensor],
    extra: Optional[Dict[str, Any]] = None,
    optimizer_state: Optional[Dict[str, Any]] = None,
    extra_states: Optional[Dict[str, Any]] = None,
) -> Path:
    """Write a checkpoint archive.

    :param path: Target file, replaced if it exists.
    :param kind: What the archive holds, e.g. ``"forecaster"`` or ``"renderer"``.
    :param config: JSON-serializable model configuration.
    :param state_dict: Named parameter tensors.
    :param extra: JSON-serializable extras (iteration, stage, gamma, ...).
    :param optimizer_state: Optional optimizer ``state_dict`` for resuming.
    :param extra_states: Optional further tensor dictionaries (e.g. discriminator).
    :return: The path written.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest = {
        "kind": kind,
        "version": __version__,
        "config": config,
        "shapes": {k: list(v.shape) for k, v in state_dict.items()},
        "extra": extra or {},
    }
    buffer = io.BytesIO()
    torch.save(
        {
            "state_dict": {k: v.detach().cpu() for k, v in state_dict.items()},
            "optimizer": optimizer_state,
            "extra_states": extra_states or {},
        },
        buffer,
    )
    with zipfile.ZipFile(path, "w") as zf:
        _write_entry(
            zf, MANIFEST_NAME, json.dumps(manifest, indent=2, sort_keys=True).encode()
        )
        _write_entry(zf, PARAMS_NAME, buffer.getvalue())
    logger.info("Saved %s checkpoint to %s", kind, path)
    return path


def load_checkpoint(path: Union[str, Path], kind: Optional[str] = None) -> Checkpoint:
    """Read a checkpoint archive.

    :param path: Archive path.
    :param kind: If given, the expected kind.
    :return: The :class:`Checkpoint`.
    :raises CheckpointError: If the archive is missing, corrupt or of another kind.
    """
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"Checkpoint {path} does not exist.")
    try:
        with zipfile.ZipFile(path, "r") as zf:
            manifest = json.loads(zf.read(MANIFEST_NAME).decode("utf-8"))
            payload = torch.load(io.BytesIO(zf.read(PARAMS_NAME)), map_location="cpu")
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError, RuntimeError) as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e
    if kind is not None and manifest.get("kind") != kind:
        raise CheckpointError(
            f"Checkpoint {path} holds a '{manifest.get('kind')}', expected '{kind}'."
        )
    return Checkpoint(
        manifest=manifest,
        state_dict=payload["state_dict"],
        optimizer_state=payload.get("optimizer"),
        extra_states=payload.get("extra_states") or {},
    )
