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

"""Logging setup for library users and for the command line.

The library itself only attaches a :class:`logging.NullHandler` to the
``posecast`` logger; applications opt in with :func:`setup_logging`.
"""

import json
import logging
import logging.config
import os
from pathlib import Path
from typing import Optional, Union

from posecast.exceptions import ConfigError

DEFAULT_LOG_CONFIG = str(Path(__file__).parent / "config" / "logconfig.json")

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


def load_log_config(path: Union[str, Path], log_dir: Optional[Union[str, Path]] = None):
    """Read a :func:`logging.config.dictConfig` JSON file.

    :param path: Path of the JSON file.
    :param log_dir: If given, relative ``filename`` entries of file handlers
        are placed in this directory instead of the working directory.
    :return: The configuration dictionary.
    """
    with open(path, "r", encoding="utf-8") as f:
        config = json.load(f)
    if log_dir is not None:
        for handler in config.get("handlers", {}).values():
            filename = handler.get("filename")
            if filename and not os.path.isabs(filename):
                handler["filename"] = str(Path(log_dir) / filename)
    return config


def setup_logging(
    default_path: Optional[str] = DEFAULT_LOG_CONFIG,
    default_level: int = logging.ERROR,
    env_key: str = "POSECAST_LOG_CONFIG",
    log_dir: Optional[Union[str, Path]] = None,
):
    """Set up logging configuration.

    The file named by the environment variable ``env_key`` wins over
    ``default_path``; ``None`` skips the bundled file. Without a file, a
    console configuration at ``default_level`` is installed.

    :param default_path: Path of a JSON logging configuration.
    :param default_level: Level of the console fallback.
    :param env_key: Environment variable naming an alternative JSON file.
    :param log_dir: Directory for relative log file names.
    """
    path = os.environ.get(env_key) or default_path
    if path and os.path.exists(path):
        logging.config.dictConfig(load_log_config(path, log_dir))
    else:
        logging.basicConfig(level=default_level, format=LOG_FORMAT)


def cli_logging(level_name: str) -> int:
    """Console logging for one command line run.

    :param level_name: One of :data:`LEVELS`, case insensitive.
    :return: The numeric level.
    :raises ConfigError: For an unknown level name.
    """
    name = level_name.upper()
    if name not in LEVELS:
        raise ConfigError(f"Unknown log level '{level_name}'.")
    level = getattr(logging, name)
    setup_logging(default_path=None, default_level=level)
    logging.getLogger("posecast").setLevel(level)
    return level


logging.getLogger("posecast").addHandler(logging.NullHandler())
