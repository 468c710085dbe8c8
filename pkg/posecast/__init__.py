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

"""posecast - forecast and render multi-person scenes.

posecast predicts the future 2D poses of every person in a clip with a
hierarchical recurrent model in which persons dynamically form groups, and
renders predicted poses into frames with an adaptive appearance network
conditioned on a single reference image.
"""

from pathlib import Path
from typing import List, Optional, Sequence, Union

from posecast.__version__ import __version__  # noqa: F401
from posecast.logconf import setup_logging  # noqa: F401

from .ada_render import (
    RenderArch,
    RenderLossWeights,
    RenderTrainConfig,
    RenderTrainResult,
    Renderer,
    build_extractor,
    gan_train,
    load_renderer,
    render_sequence,
)
from .config.default import PoseCastConfig
from .forecaster import (
    MODEL_NAMES,
    ForecastResult,
    ModelConfig,
    PoseForecaster,
    forecast,
    forecast_batch,
    load_forecaster,
)
from .pose_data import SceneClip, SynthConfig, load_clips, synth_clips, write_clips
from .pose_training import TrainConfig, TrainResult, train


class PoseCast:
    """A single interface to the data, training, forecasting and rendering steps."""

    def __init__(self, config: Optional[PoseCastConfig] = None):
        """Instantiate a PoseCast object, optionally with a custom configuration.

        :param config: An object of :class:`PoseCastConfig`. If not provided the
            defaults from :py:mod:`posecast.config.default` are used.
        """
        self.config = config or PoseCastConfig.from_default()

    def synth(self, count: int, seed: int = 0) -> List[SceneClip]:
        """Generate synthetic clips with the configured generator."""
        cfg = SynthConfig.from_config(self.config.section("synth"))
        cfg.validate()
        return synth_clips(cfg, count, seed)

    def model_config(self, model: str = "mg") -> ModelConfig:
        """Return the model configuration of ``mg``, ``vanilla`` or ``social``."""
        section = self.config.section("model")
        section["interaction"] = MODEL_NAMES[model]
        if model != "mg":
            section["refine"] = False
        return ModelConfig.from_config(section)

    def train_pose(
        self,
        clips: Sequence[SceneClip],
        stage: int = 1,
        model: str = "mg",
        init_from: Optional[Union[str, Path, PoseForecaster]] = None,
        **kwargs,
    ) -> TrainResult:
        """Train one stage of a forecaster; see :func:`posecast.pose_training.train`."""
        section = self.config.section("train")
        section["stage"] = stage
        return train(
            clips,
            TrainConfig.from_config(section),
            self.model_config(model),
            init_from=init_from,
            **kwargs,
        )

    def forecast(self, clips: Sequence[SceneClip], model: PoseForecaster, workers=None):
        """Forecast every clip; returns one :class:`ForecastResult` per clip."""
        runtime = self.config.section("runtime")
        workers = workers or int(runtime["workers"])
        return forecast_batch(clips, model, workers=workers, seed=int(runtime["seed"]))

    def train_render(self, triples, **kwargs) -> RenderTrainResult:
        """Train an adaptive renderer; see :func:`posecast.ada_render.gan_train`."""
        render = self.config.section("render")
        return gan_train(
            triples,
            RenderArch.from_config(render),
            RenderLossWeights.from_config(self.config.section("render_loss")),
            RenderTrainConfig.from_config(self.config.section("render_train")),
            build_extractor(render["extractor"], int(render["extractor_seed"])),
            **kwargs,
        )


__all__ = [
    "ForecastResult",
    "ModelConfig",
    "PoseCast",
    "PoseCastConfig",
    "PoseForecaster",
    "Renderer",
    "SceneClip",
    "TrainConfig",
    "forecast",
    "load_clips",
    "load_forecaster",
    "load_renderer",
    "render_sequence",
    "setup_logging",
    "train",
    "write_clips",
]
