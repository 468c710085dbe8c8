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

"""This module defines classes for default configuration for the project."""

import copy
import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

from pyhocon import ConfigFactory, ConfigTree
from pyhocon.exceptions import ConfigException

from posecast.exceptions import ConfigError

# : This config dictionary is used by default to create object of PoseCastConfig
# : class if user does not provide a config file. Network sizes are the
# : full-scale ones; datasets/sample.conf holds a desk-scale setup.
DEFAULT_CONFIG: Dict[str, Any] = {
    "data": {
        "num_joints": 14,
        "min_joints": 10,
        "min_targets": 10,
        "posemap_resolution": 64,
        "posemap_radius": 2,
    },
    "synth": {
        "num_persons": 6,
        "observed": 6,
        "future": 5,
        "num_joints": 14,
        "num_groups": 2,
        "noise": 0.0,
        "velocity_scale": 0.01,
        "limb_amplitude": 0.04,
    },
    "model": {
        "num_joints": 14,
        "person_size": 256,
        "group_size": 256,
        "joint_size": 128,
        "interaction": "group",
        "refine": True,
        "social_grid": 4,
        "social_neighbourhood": 0.5,
        "zero_refiner_head": True,
        "gumbel": False,
        "straight_through": True,
        "dtype": "float32",
    },
    "train": {
        "stage": 1,
        "lr": 1e-5,
        "w_s1": 0.1,
        "clip_norm": 5.0,
        "epochs": 10,
        "batch_size": 8,
        "seed": 0,
        "temperature_start": 1.0,
        "temperature_end": 0.1,
        "per_joint_average": False,
        "teacher_forcing": True,
        "log_every": 10,
    },
    "render": {
        "variant": "8-5-10",
        "resolution": 64,
        "base_channels": 16,
        "max_channels": 128,
        "kernel": 5,
        "skips": False,
        "extractor": "fixed",
        "extractor_seed": 1234,
    },
    "render_loss": {
        "alpha": 5.0,
        "beta": 0.1,
        "gamma": "auto",
        "content_layers": ["relu4_2"],
        "style_layers": ["relu1_2", "relu2_2", "relu3_2", "relu4_2", "relu5_2"],
        "calibration_triples": 32,
    },
    "render_train": {
        "lr": 1e-3,
        "beta1": 0.5,
        "iterations": 200,
        "batch_size": 8,
        "adversarial_weight": 1.0,
        "generator_steps": 2,
        "discriminator_steps": 1,
        "collapse_threshold": 1e-4,
        "collapse_patience": 100,
        "seed": 0,
    },
    "metrics": {
        "mu": 5.0,
        "sigma2": 72.0,
        "resolution": 256,
    },
    "runtime": {
        "workers": 1,
        "seed": 0,
    },
}


class PoseCastConfig:
    """This class defines methods to manage configurations for project."""

    def __init__(self, **kwargs):
        self.config = kwargs

    @classmethod
    def from_default(cls) -> "PoseCastConfig":
        """Return the default config for the project."""
        return cls(**copy.deepcopy(DEFAULT_CONFIG))

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "PoseCastConfig":
        """Return the config from file path provided, merged over the defaults.

        :param path: A HOCON, JSON or properties file.
        :return: An object of :class:`PoseCastConfig`.
        :raises ConfigError: If the file cannot be parsed.
        """
        try:
            config_data = ConfigFactory.parse_file(str(path))
        except (ConfigException, OSError) as e:
            raise ConfigError(f"Cannot read config file {path}: {e}") from e
        merged = config_data.with_fallback(ConfigFactory.from_dict(DEFAULT_CONFIG))
        return cls(**_plain(merged))

    def with_overrides(self, overrides: Optional[Iterable[str]]) -> "PoseCastConfig":
        """Return a new config with ``key=value`` overrides applied.

        :param overrides: Strings like ``"train.lr=1e-4"``.
        :return: An object of :class:`PoseCastConfig`.
        :raises ConfigError: If an override cannot be parsed.
        """
        overrides = list(overrides or [])
        if not overrides:
            return PoseCastConfig(**copy.deepcopy(self.config))
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"Override '{item}' is not of the form key=value.")
        try:
            patch = ConfigFactory.parse_string("\n".join(overrides))
        except ConfigException as e:
            raise ConfigError(f"Cannot parse overrides {overrides}: {e}") from e
        merged = patch.with_fallback(ConfigFactory.from_dict(self.config))
        return PoseCastConfig(**_plain(merged))

    def section(self, name: str) -> Dict[str, Any]:
        """Return a copy of one top-level section.

        :param name: Section name, e.g. ``"train"``.
        :raises ConfigError: If the section does not exist.
        """
        if name not in self.config:
            raise ConfigError(f"Unknown config section '{name}'.")
        return copy.deepcopy(dict(self.config[name]))

    def digest(self) -> str:
        """Return the SHA-256 hex digest of the canonical JSON form."""
        blob = json.dumps(self.config, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _plain(tree: ConfigTree) -> Dict[str, Any]:
    return json.loads(json.dumps(tree.as_plain_ordered_dict()))
