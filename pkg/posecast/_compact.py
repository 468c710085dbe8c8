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

"""Optional dependencies and the flags telling whether they are installed."""

import importlib
from types import ModuleType
from typing import Optional

from posecast.exceptions import ConfigError


def optional_import(name: str) -> Optional[ModuleType]:
    """Import module ``name`` if it is installed, else return ``None``."""
    try:
        return importlib.import_module(name)
    except ImportError:
        return None


HAS_MATPLOTLIB = optional_import("matplotlib") is not None

HAS_TORCHVISION = optional_import("torchvision") is not None


def require(flag: bool, feature: str, package: str, extra: str):
    """Raise :class:`ConfigError` naming the extra to install when ``flag`` is false."""
    if not flag:
        raise ConfigError(
            f"{feature} requires {package}; "
            f"install it with 'pip install posecast[{extra}]'."
        )
