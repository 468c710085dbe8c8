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
This is a collection of small utilities shared by the posecast modules.

They are almost unspecific to pose forecasting or rendering, but convenient
to use: seeding and run manifests.
"""
import hashlib
import json
import logging
import random
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

import numpy as np
import torch

from posecast.__version__ import __version__
from posecast.exceptions import ConfigError

logger = logging.getLogger(__name__)

DTYPES = {"float32": torch.float32, "float64": torch.float64}


def seed_everything(seed: int) -> torch.Generator:
    """Seed python, numpy and torch and return a fresh torch generator.

    :param seed: An int seed.
    :return: A :class:`torch.Generator` seeded with ``seed``.
    """
    random.seed(seed)
    np.random.seed(seed % (2 ** 32))
    torch.manual_seed(seed)
    gen = torch.Generator()
    gen.manual_seed(seed)
    return gen


def torch_dtype(name: Union[str, torch.dtype]) -> torch.dtype:
    """Return the torch dtype for a config name like ``"float64"``."""
    if isinstance(name, torch.dtype):
        return name
    try:
        return DTYPES[name]
    except KeyError:
        raise ConfigError(f"Unsupported dtype '{name}', use one of {sorted(DTYPES)}.")


def file_sha256(path: Union[str, Path]) -> str:
    """Return the SHA-256 hex digest of a file's bytes."""
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def resolve(workdir: Optional[Union[str, Path]], path: Union[str, Path]) -> Path:
    """Resolve ``path`` relative to ``workdir`` unless it is absolute."""
    p = Path(path)
    if p.is_absolute() or workdir is None:
        return p
    return Path(workdir) / p


def write_manifest(
    output: Union[str, Path],
    command: str,
    argv: Iterable[str],
    config_digest: str,
    seed: int,
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    """Write ``<output>.manifest.json`` describing how ``output`` was produced.

    :param output: The file or directory the manifest belongs to.
    :param command: Name of the command that produced it.
    :param argv: The command line arguments.
    :param config_digest: Digest of the effective configuration.
    :param seed: The seed used.
    :param extra: Optional additional entries.
    :return: Path of the manifest file.
    """
    output = Path(output)
    manifest = {
        "command": command,
        "argv": list(argv),
        "config_digest": config_digest,
        "version": __version__,
        "seed": seed,
    }
    if output.is_file():
        manifest["sha256"] = file_sha256(output)
    if extra:
        manifest.update(extra)
    path = output.parent / (output.name + ".manifest.json")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    logger.debug("Wrote manifest %s", path)
    return path
