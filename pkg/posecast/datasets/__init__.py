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

"""This package provides small datasets for experiments and tests."""

import warnings
from pathlib import Path
from typing import List

from posecast.config.default import PoseCastConfig
from posecast.pose_data import (
    RenderTriple,
    SceneClip,
    SynthConfig,
    load_clips,
    synth_clips,
    synth_render_triples,
    write_clips,
)

DATASETS_HOME = Path(__file__).parent


def sample_config_path() -> Path:
    """Return the path of the bundled ``sample.conf`` (a small desk-scale setup)."""
    return DATASETS_HOME / "sample.conf"


def get_synthetic_clips(count: int = 20, seed: int = 0) -> List[SceneClip]:
    """Return synthetic clips generated with the default synth settings.

    The clips are cached next to this module after the first call, unless the
    file cannot be saved, in which case they are generated again every time.

    :param count: Number of clips.
    :param seed: Seed of the first clip.
    :return: A list of :class:`SceneClip`.
    """
    cached = DATASETS_HOME / f"synthetic_{count}_{seed}.jsonl"
    if cached.exists():
        return load_clips(cached)
    cfg = SynthConfig.from_config(PoseCastConfig.from_default().section("synth"))
    clips = synth_clips(cfg, count, seed)
    try:
        write_clips(clips, cached)
    except IOError:
        warnings.warn(
            f"Could not cache synthetic clips to {DATASETS_HOME}. "
            "Check if you have write access. Will regenerate next time."
        )
    return clips


def get_render_triples(
    count: int = 32, resolution: int = 64, seed: int = 0
) -> List[RenderTriple]:
    """Return synthetic rendering triples of uniformly colored figures."""
    return synth_render_triples(count, resolution, seed)
