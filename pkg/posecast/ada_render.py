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
Adaptive appearance rendering.

A :class:`Renderer` turns a posemap and a single reference image into an RGB
frame. A fully convolutional branch computes a bank of ``5 x 5`` filters from
the reference; the bank replaces the last convolution between the posemap
encoder and the image decoder. Training combines a conditional patch
discriminator with a transfer loss made of pixel, perceptual content and Gram
style terms.
"""

import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn
from tqdm import tqdm

from posecast._compact import HAS_TORCHVISION, require
from posecast.checkpoint import load_checkpoint, save_checkpoint
from posecast.exceptions import (
    ConfigError,
    ShapeError,
    TrainingDivergedError,
    ValidationError,
)
from posecast.pose_data import (
    PosemapImage,
    RenderTriple,
    load_png,
    save_posemap_png,
)

logger = logging.getLogger(__name__)

#: ``name -> (ed_layers, fcn_layers, n_filters)``
VARIANTS = {
    "8-5-10": (8, 5, 10),
    "8-3-56": (8, 3, 56),
    "8-3-10": (8, 3, 10),
    "5-5-10": (5, 5, 10),
}

_VARIANT_FIELDS = ("name", "ed_layers", "fcn_layers", "n_filters", "resolution")

LAYER_NAMES = tuple(f"relu{b}_{k}" for b in range(1, 6) for k in (1, 2))

TRIPLE_KEYS = ("posemap", "reference", "goal")

_VGG19_INDICES = {
    "relu1_1": 1,
    "relu1_2": 3,
    "relu2_1": 6,
    "relu2_2": 8,
    "relu3_1": 11,
    "relu3_2": 13,
    "relu4_1": 20,
    "relu4_2": 22,
    "relu5_1": 29,
    "relu5_2": 31,
}


@dataclass
class RenderArch:
    """Geometry of the rendering network.

    ``ed_layers`` is the depth at 256x256; smaller resolutions use
    :attr:`encoder_depth`.
    """

    name: str = "8-5-10"
    ed_layers: int = 8
    fcn_layers: int = 5
    n_filters: int = 10
    kernel: int = 5
    resolution: int = 64
    base_channels: int = 16
    max_channels: int = 128
    fcn_max_channels: int = 64
    skips: bool = False

    @classmethod
    def variant(cls, name: str, resolution: int = 64, **kwargs) -> "RenderArch":
        """Return one of the named variants at ``resolution``."""
        if name not in VARIANTS:
            raise ConfigError(f"Unknown variant '{name}', use one of {sorted(VARIANTS)}.")
        ed, fcn, n = VARIANTS[name]
        arch = cls(name, ed, fcn, n, resolution=resolution, **kwargs)
        arch.validate()
        return arch

    @classmethod
    def from_config(cls, section: Dict[str, Any]) -> "RenderArch":
        known = {
            k: v
            for k, v in section.items()
            if k in cls.__dataclass_fields__ and k not in _VARIANT_FIELDS
        }
        variant = section.get("variant", "8-5-10")
        return cls.variant(variant, section["resolution"], **known)

    def validate(self):
        if (self.ed_layers, self.fcn_layers, self.n_filters) not in VARIANTS.values():
            raise ConfigError(
                f"({self.ed_layers}, {self.fcn_layers}, {self.n_filters}) is not a "
                "known variant."
            )
        if self.kernel != 5:
            raise ConfigError("Adaptive filters are 5x5.")
        r = self.resolution
        if r < 8 or r & (r - 1):
            raise ConfigError(f"Resolution must be a power of two >= 8, got {r}.")
        if self.base_channels < 1 or self.max_channels < self.base_channels:
            raise ConfigError("Invalid channel configuration.")

    @property
    def encoder_depth(self) -> int:
        if self.resolution >= 256:
            return self.ed_layers
        max_depth = int(math.log2(self.resolution)) - 1
        return max(1, int(round(self.ed_layers * max_depth / 8)))

    @property
    def encoder_channels(self) -> List[int]:
        return [
            min(self.base_channels * 2 ** i, self.max_channels)
            for i in range(self.encoder_depth)
        ]

    @property
    def enc_channels(self) -> int:
        """Channel count ``C_enc`` of the encoder output."""
        return self.encoder_channels[-1]

    @property
    def bank_shape(self) -> Tuple[int, int, int, int]:
        return (self.n_filters, self.enc_channels, self.kernel, self.kernel)


@dataclass
class FilterBank:
    """Adaptive filters ``(n_filters, C_enc, 5, 5)``, or ``(B, ...)`` for a batch."""

    weights: torch.Tensor

    def __post_init__(self):
        if self.weights.dim() not in (4, 5):
            raise ShapeError(f"Invalid filter bank shape {tuple(self.weights.shape)}.")
        if not torch.isfinite(self.weights).all():
            raise ValidationError("Filter bank has non-finite values.")

    @property
    def batched(self) -> bool:
        return self.weights.dim() == 5

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.weights.shape[-4:])


@dataclass
class RenderLossWeights:
    """Weights and feature layers of :func:`transfer_loss`."""

    alpha: float = 5.0
    beta: float = 0.1
    gamma: Union[float, str] = "auto"
    content_layers: List[str] = field(default_factory=lambda: ["relu4_2"])
    style_layers: List[str] = field(
        default_factory=lambda: ["relu1_2", "relu2_2", "relu3_2", "relu4_2", "relu5_2"]
    )
    calibration_triples: int = 32

    @classmethod
    def from_config(cls, section: Dict[str, Any]) -> "RenderLossWeights":
        known = {k: v for k, v in section.items() if k in cls.__dataclass_fields__}
        weights = cls(**known)
        weights.validate()
        return weights

    @property
    def needs_calibration(self) -> bool:
        return self.gamma == "auto"

    def validate(self):
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("Loss weights must be >= 0.")
        if not self.needs_calibration:
            if not isinstance(self.gamma, (int, float)) or self.gamma < 0:
                raise ConfigError(f"gamma must be 'auto' or >= 0, got {self.gamma!r}.")
        for layer in list(self.content_layers) + list(self.style_layers):
            if layer not in LAYER_NAMES:
                raise ConfigError(f"Unknown feature layer '{layer}'.")


@dataclass
class RenderTrainConfig:
    """Optimization settings of :func:`gan_train`."""

    lr: float = 1e-3
    beta1: float = 0.5
    iterations: int = 200
    batch_size: int = 8
    adversarial_weight: float = 1.0
    generator_steps: int = 2
    discriminator_steps: int = 1
    collapse_threshold: float = 1e-4
    collapse_patience: int = 100
    seed: int = 0
    log_every: int = 10

    @classmethod
    def from_config(cls, section: Dict[str, Any]) -> "RenderTrainConfig":
        known = {k: v for k, v in section.items() if k in cls.__dataclass_fields__}
        cfg = cls(**known)
        cfg.validate()
        return cfg

    def validate(self):
        if not self.lr > 0:
            raise ConfigError("lr must be > 0.")
        if self.iterations < 0 or self.batch_size < 1:
            raise ConfigError("iterations must be >= 0 and batch_size >= 1.")
        if self.adversarial_weight < 0:
            raise ConfigError("adversarial_weight must be >= 0.")
        if self.generator_steps < 1 or self.discriminator_steps < 0:
            raise ConfigError("Need at least one generator step per iteration.")


class PosemapEncoder(nn.Module):
    """Stride-2 ``conv - BatchNorm - ReLU`` stack over a one-channel posemap."""

    def __init__(self, arch: RenderArch):
        super().__init__()
        layers = []
        in_ch = 1
        for i, out_ch in enumerate(arch.encoder_channels):
            block = [nn.Conv2d(in_ch, out_ch, arch.kernel, stride=2, padding=2)]
            if i > 0:
                block.append(nn.BatchNorm2d(out_ch))
            block.append(nn.ReLU())
            layers.append(nn.Sequential(*block))
            in_ch = out_ch
        self.layers = nn.ModuleList(layers)

    def forward(self, x: torch.Tensor) -> List[torch.Tensor]:
        features = []
        for layer in self.layers:
            x = layer(x)
            features.append(x)
        return features


class FilterGenerator(nn.Module):
    """Fully convolutional branch that maps a reference image to a filter bank."""

    def __init__(self, arch: RenderArch):
        super().__init__()
        self.arch = arch
        layers = []
        in_ch = 3
        for i in range(arch.fcn_layers):
            out_ch = min(arch.base_channels * 2 ** i, arch.fcn_max_channels)
            layers += [nn.Conv2d(in_ch, out_ch, 3, stride=2, padding=1), nn.ReLU()]
            in_ch = out_ch
        self.convs = nn.Sequential(*layers)
        self.to_bank = nn.Linear(in_ch, int(np.prod(arch.bank_shape)))
        self.scale = 1.0 / math.sqrt(arch.enc_channels * arch.kernel * arch.kernel)

    def forward(self, reference: torch.Tensor) -> torch.Tensor:
        pooled = self.convs(reference).mean(dim=(2, 3))
        bank = self.to_bank(pooled) * self.scale
        return bank.view(reference.shape[0], *self.arch.bank_shape)


class ImageDecoder(nn.Module):
    """Transposed convolutions from the injected features back to an RGB image."""

    def __init__(self, arch: RenderArch):
        super().__init__()
        self.skips = arch.skips
        ch = arch.encoder_channels
        depth = len(ch)
        layers = []
        for d in range(depth):
            if d == 0:
                in_ch = arch.n_filters
            else:
                in_ch = ch[depth - 1 - d] * (2 if arch.skips else 1)
            last = d == depth - 1
            out_ch = 3 if last else ch[depth - 2 - d]
            block = [
                nn.ConvTranspose2d(
                    in_ch, out_ch, arch.kernel, stride=2, padding=2, output_padding=1
                )
            ]
            if not last:
                block += [nn.BatchNorm2d(out_ch), nn.ReLU()]
            layers.append(nn.Sequential(*block))
        self.layers = nn.ModuleList(layers)

    def forward(self, x: torch.Tensor, features: Sequence[torch.Tensor]) -> torch.Tensor:
        depth = len(self.layers)
        for d, layer in enumerate(self.layers):
            if d > 0 and self.skips:
                x = torch.cat([x, features[depth - 1 - d]], dim=1)
            x = layer(x)
        return torch.sigmoid(x)


def inject_filters(features: torch.Tensor, bank: Union[FilterBank, torch.Tensor]):
    """Convolve encoder features with an adaptive bank (stride 1, same padding).

    :param features: Encoder output ``(B, C_enc, h, w)``.
    :param bank: A bank shared by the batch or one bank per sample.
    :return: ``(B, n_filters, h, w)``.
    :raises ShapeError: If the bank does not match the feature channels.
    """
    weights = bank.weights if isinstance(bank, FilterBank) else bank
    B, C, h, w = features.shape
    if weights.dim() == 4:
        weights = weights.unsqueeze(0).expand(B, *weights.shape)
    n, c_in, k = weights.shape[1], weights.shape[2], weights.shape[-1]
    if c_in != C or weights.shape[0] != B:
        raise ShapeError(
            f"Filter bank {tuple(weights.shape)} does not fit features "
            f"{tuple(features.shape)}."
        )
    out = F.conv2d(
        features.reshape(1, B * C, h, w),
        weights.reshape(B * n, C, k, k),
        padding=k // 2,
        groups=B,
    )
    return out.view(B, n, h, w)


class Renderer(nn.Module):
    """Posemap encoder, adaptive filter generator and image decoder."""

    def __init__(self, arch: Optional[RenderArch] = None):
        super().__init__()
        self.arch = arch or RenderArch()
        self.arch.validate()
        self.encoder = PosemapEncoder(self.arch)
        self.filters = FilterGenerator(self.arch)
        self.decoder = ImageDecoder(self.arch)

    def compute_filters(self, reference: torch.Tensor) -> FilterBank:
        """Return the filter bank of a ``(3, R, R)`` or ``(B, 3, R, R)`` reference."""
        single = reference.dim() == 3
        ref = reference.unsqueeze(0) if single else reference
        R = self.arch.resolution
        if ref.dim() != 4 or ref.shape[1] != 3 or tuple(ref.shape[2:]) != (R, R):
            raise ValidationError(
                f"Reference must be RGB at {R}x{R}, got {tuple(reference.shape)}."
            )
        weights = self.filters(ref)
        return FilterBank(weights[0] if single else weights)

    def render(self, posemap: torch.Tensor, bank: FilterBank) -> torch.Tensor:
        """Render ``(B, 1, R, R)`` posemaps into ``(B, 3, R, R)`` images in [0, 1]."""
        R = self.arch.resolution
        if posemap.dim() == 3:
            posemap = posemap.unsqueeze(0)
        if posemap.shape[1] != 1 or tuple(posemap.shape[2:]) != (R, R):
            raise ShapeError(f"Posemap must be 1x{R}x{R}, got {tuple(posemap.shape)}.")
        if bank.shape != self.arch.bank_shape:
            raise ShapeError(f"Bank {bank.shape} does not match {self.arch.bank_shape}.")
        features = self.encoder(posemap)
        injected = inject_filters(features[-1], bank)
        return self.decoder(injected, features)

    def forward(self, posemap: torch.Tensor, reference: torch.Tensor) -> torch.Tensor:
        return self.render(posemap, self.compute_filters(reference))


def compute_filters(reference: torch.Tensor, renderer: Renderer) -> FilterBank:
    """Compute the adaptive filter bank of a reference image."""
    return renderer.compute_filters(reference)


def render(
    posemap: Union[PosemapImage, torch.Tensor], bank: FilterBank, renderer: Renderer
) -> torch.Tensor:
    """Render one posemap (or a batch) with a precomputed bank."""
    if isinstance(posemap, PosemapImage):
        posemap = posemap.to_tensor(next(renderer.parameters()).dtype)
    return renderer.render(posemap, bank)


def render_sequence(
    posemaps: Sequence[Union[PosemapImage, torch.Tensor]],
    reference: torch.Tensor,
    renderer: Renderer,
) -> List[torch.Tensor]:
    """Render frame by frame with one filter bank computed from ``reference``.

    :return: One ``(3, R, R)`` image per posemap.
    """
    renderer.eval()
    with torch.no_grad():
        bank = renderer.compute_filters(reference)
        return [render(p, bank, renderer)[0] for p in posemaps]


def image_to_tensor(image: np.ndarray, dtype: torch.dtype = torch.float32):
    """Convert an ``(H, W, 3)`` uint8 image to a ``(3, H, W)`` tensor in [0, 1]."""
    arr = np.asarray(image, dtype=np.float64) / 255.0
    return torch.as_tensor(arr.transpose(2, 0, 1).copy(), dtype=dtype)


def tensor_to_image(tensor: torch.Tensor) -> np.ndarray:
    """Convert a ``(3, H, W)`` tensor in [0, 1] to an ``(H, W, 3)`` uint8 image."""
    arr = tensor.detach().cpu().double().clamp(0.0, 1.0).numpy().transpose(1, 2, 0)
    return np.floor(arr * 255.0 + 0.5).astype(np.uint8)


class PerceptualExtractor(nn.Module):
    """Small frozen VGG-like extractor with seeded random weights.

    Five blocks of two ``3 x 3`` convolutions with ReLU, max pooling between
    blocks. Layer ``relu{b}_{k}`` has ``ceil(R / 2 ** (b - 1))`` pixels per side.
    """

    def __init__(self, seed: int = 1234, channels: Sequence[int] = (8, 16, 32, 32, 32)):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        self.blocks = nn.ModuleList()
        in_ch = 3
        for out_ch in channels:
            conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
            conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
            for conv in (conv1, conv2):
                fan_in = conv.weight[0].numel()
                with torch.no_grad():
                    conv.weight.copy_(
                        torch.randn(conv.weight.shape, generator=gen)
                        * math.sqrt(2.0 / fan_in)
                    )
                    conv.bias.zero_()
            self.blocks.append(nn.ModuleList([conv1, conv2]))
            in_ch = out_ch
        self.requires_grad_(False)
        self.eval()

    def forward(
        self, image: torch.Tensor, layers: Sequence[str]
    ) -> Dict[str, torch.Tensor]:
        wanted = set(layers)
        out: Dict[str, torch.Tensor] = {}
        x = image
        for b, (conv1, conv2) in enumerate(self.blocks, start=1):
            if b > 1:
                x = F.max_pool2d(x, 2, ceil_mode=True)
            x = F.relu(conv1(x))
            if f"relu{b}_1" in wanted:
                out[f"relu{b}_1"] = x
            x = F.relu(conv2(x))
            if f"relu{b}_2" in wanted:
                out[f"relu{b}_2"] = x
            if len(out) == len(wanted):
                break
        return out


class VGGExtractor(nn.Module):
    """Pretrained VGG-19 features from torchvision, ImageNet-normalized input."""

    def __init__(self):
        super().__init__()
        require(HAS_TORCHVISION, "The vgg19 extractor", "torchvision", "vgg")
        from torchvision.models import VGG19_Weights, vgg19

        self.features = vgg19(weights=VGG19_Weights.DEFAULT).features[:32]
        self.register_buffer("mean", torch.tensor([0.485, 0.456, 0.406])[:, None, None])
        self.register_buffer("std", torch.tensor([0.229, 0.224, 0.225])[:, None, None])
        self.requires_grad_(False)
        self.eval()

    def forward(
        self, image: torch.Tensor, layers: Sequence[str]
    ) -> Dict[str, torch.Tensor]:
        index = {_VGG19_INDICES[name]: name for name in layers}
        out = {}
        x = (image - self.mean) / self.std
        for i, module in enumerate(self.features):
            x = module(x)
            if i in index:
                out[index[i]] = x
            if len(out) == len(index):
                break
        return out


def build_extractor(
    kind: str = "fixed", seed: int = 1234, dtype: torch.dtype = torch.float32
) -> nn.Module:
    """Return the perceptual feature extractor named by ``kind``."""
    if kind == "fixed":
        return PerceptualExtractor(seed).to(dtype)
    if kind == "vgg19":
        return VGGExtractor().to(dtype)
    raise ConfigError(f"Unknown extractor '{kind}', use 'fixed' or 'vgg19'.")


def perceptual_features(
    image: torch.Tensor, layers: Sequence[str], extractor: nn.Module
) -> Dict[str, torch.Tensor]:
    """Return the activations of ``extractor`` at ``layers``."""
    for layer in layers:
        if layer not in LAYER_NAMES:
            raise ValidationError(f"Unknown feature layer '{layer}'.")
    return extractor(image, layers)


def gram_matrix(features: torch.Tensor) -> torch.Tensor:
    """Inner products of feature channels over spatial positions, ``(B, C, C)``."""
    B, C = features.shape[:2]
    flat = features.reshape(B, C, -1)
    return flat @ flat.transpose(1, 2)


def _sum_sq(x: torch.Tensor) -> torch.Tensor:
    return (x ** 2).flatten(1).sum(dim=1)


def transfer_loss(
    gen: torch.Tensor,
    goal: torch.Tensor,
    reference: torch.Tensor,
    weights: RenderLossWeights,
    extractor: nn.Module,
) -> Tuple[torch.Tensor, Dict[str, torch.Tensor]]:
    """Weighted sum of pixel, content and style sums of squares.

    Each term is summed per image and averaged over the batch.

    :param gen: Generated images ``(B, 3, H, W)`` in [0, 1].
    :param goal: Real frames of the same shape.
    :param reference: Appearance references of the same shape.
    :return: ``(total, {"mse": ..., "content": ..., "style": ...})``.
    :raises ValidationError: If ``gamma`` has not been calibrated.
    """
    if weights.needs_calibration:
        raise ValidationError("gamma is 'auto'; calibrate it before computing losses.")
    if gen.shape != goal.shape or gen.shape != reference.shape:
        raise ShapeError("Generated, goal and reference images must have one shape.")
    mse = _sum_sq(gen - goal).mean()
    layers = sorted(set(weights.content_layers) | set(weights.style_layers))
    f_gen = perceptual_features(gen, layers, extractor)
    f_goal = perceptual_features(goal, weights.content_layers, extractor)
    f_ref = perceptual_features(reference, weights.style_layers, extractor)
    content = sum(
        (_sum_sq(f_gen[name] - f_goal[name]).mean() for name in weights.content_layers),
        gen.new_zeros(()),
    )
    style = sum(
        (
            _sum_sq(gram_matrix(f_gen[name]) - gram_matrix(f_ref[name])).mean()
            for name in weights.style_layers
        ),
        gen.new_zeros(()),
    )
    total = weights.alpha * mse + weights.beta * content + float(weights.gamma) * style
    return total, {"mse": mse, "content": content, "style": style}


@dataclass
class TripleTensors:
    """Batched triples.

    Posemaps are ``(B, 1, R, R)``, references and goals ``(B, 3, R, R)``.
    """

    posemaps: torch.Tensor
    references: torch.Tensor
    goals: torch.Tensor

    def __len__(self) -> int:
        return self.posemaps.shape[0]

    def take(self, index: Sequence[int]) -> "TripleTensors":
        idx = torch.as_tensor(list(index), dtype=torch.long)
        return TripleTensors(self.posemaps[idx], self.references[idx], self.goals[idx])


def triples_to_tensors(
    triples: Sequence[RenderTriple], dtype: torch.dtype = torch.float32
) -> TripleTensors:
    """Stack rendering triples into tensors."""
    if not triples:
        raise ValidationError("No rendering triples.")
    return TripleTensors(
        posemaps=torch.stack([PosemapImage(t.posemap).to_tensor(dtype) for t in triples]),
        references=torch.stack([image_to_tensor(t.reference, dtype) for t in triples]),
        goals=torch.stack([image_to_tensor(t.goal, dtype) for t in triples]),
    )


def calibrate_style_weight(
    data: TripleTensors,
    renderer: Renderer,
    weights: RenderLossWeights,
    extractor: nn.Module,
    count: Optional[int] = None,
) -> float:
    """Choose ``gamma`` so that mean weighted style and content losses match.

    :param count: Number of triples to use, by default ``weights.calibration_triples``.
    :return: The calibrated ``gamma``.
    """
    count = min(count or weights.calibration_triples, len(data))
    probe = RenderLossWeights(
        alpha=0.0,
        beta=1.0,
        gamma=1.0,
        content_layers=list(weights.content_layers),
        style_layers=list(weights.style_layers),
    )
    batch = data.take(range(count))
    with torch.no_grad():
        gen = renderer(batch.posemaps, batch.references)
        _, parts = transfer_loss(gen, batch.goals, batch.references, probe, extractor)
    content, style = float(parts["content"]), float(parts["style"])
    if style <= 0.0:
        warnings.warn("Style loss is zero during calibration; using gamma = 1.")
        return 1.0
    gamma = weights.beta * content / style
    logger.info(
        "Calibrated gamma=%.6g on %d triples (content=%.6g, style=%.6g)",
        gamma,
        count,
        content,
        style,
    )
    return gamma


class PatchDiscriminator(nn.Module):
    """Conditional patch discriminator over ``(posemap, image)`` pairs, logits out."""

    def __init__(self, base_channels: int = 16, num_layers: int = 3):
        super().__init__()
        layers: List[nn.Module] = []
        in_ch = 4
        for i in range(num_layers):
            out_ch = base_channels * 2 ** i
            layers.append(nn.Conv2d(in_ch, out_ch, 4, stride=2, padding=1))
            if i > 0:
                layers.append(nn.BatchNorm2d(out_ch))
            layers.append(nn.LeakyReLU(0.2))
            in_ch = out_ch
        layers.append(nn.Conv2d(in_ch, 1, 4, stride=1, padding=1))
        self.net = nn.Sequential(*layers)

    def forward(self, posemap: torch.Tensor, image: torch.Tensor) -> torch.Tensor:
        return self.net(torch.cat([posemap, image], dim=1))


@dataclass
class RenderTrainResult:
    """Outcome of :func:`gan_train`."""

    renderer: Renderer
    discriminator: PatchDiscriminator
    weights: RenderLossWeights
    schedule: List[str] = field(default_factory=list)
    curve: List[Dict[str, Any]] = field(default_factory=list)
    collapsed: bool = False

    def save(self, path: Union[str, Path]) -> Path:
        return save_renderer(self.renderer, path, self.weights, self.discriminator)


def _batch_index(n: int, size: int, seed: int, iteration: int) -> List[int]:
    rng = np.random.default_rng([seed, iteration])
    return rng.choice(n, size=size, replace=n < size).tolist()


def gan_train(
    triples: Union[Sequence[RenderTriple], TripleTensors],
    arch: Optional[RenderArch] = None,
    weights: Optional[RenderLossWeights] = None,
    config: Optional[RenderTrainConfig] = None,
    extractor: Optional[nn.Module] = None,
    progress: bool = False,
) -> RenderTrainResult:
    """Train a renderer with a conditional GAN plus the transfer loss.

    Every iteration runs ``generator_steps`` generator updates and then
    ``discriminator_steps`` discriminator updates on one batch; the order is
    recorded in :attr:`RenderTrainResult.schedule`.

    :raises TrainingDivergedError: If a loss becomes NaN or infinite.
    """
    arch = arch or RenderArch()
    weights = weights or RenderLossWeights()
    config = config or RenderTrainConfig()
    config.validate()
    weights.validate()
    data = triples if isinstance(triples, TripleTensors) else triples_to_tensors(triples)
    if tuple(data.goals.shape[-2:]) != (arch.resolution, arch.resolution):
        raise ValidationError(
            f"Triples are {tuple(data.goals.shape[-2:])}, the renderer is "
            f"{arch.resolution}x{arch.resolution}."
        )
    torch.manual_seed(config.seed)
    renderer = Renderer(arch)
    discriminator = PatchDiscriminator(arch.base_channels)
    extractor = extractor or build_extractor()
    if weights.needs_calibration:
        renderer.eval()
        gamma = calibrate_style_weight(data, renderer, weights, extractor)
        weights = RenderLossWeights(**{**asdict(weights), "gamma": gamma})

    betas = (config.beta1, 0.999)
    opt_g = torch.optim.Adam(renderer.parameters(), lr=config.lr, betas=betas)
    opt_d = torch.optim.Adam(discriminator.parameters(), lr=config.lr, betas=betas)
    bce = nn.BCEWithLogitsLoss()
    schedule: List[str] = []
    curve: List[Dict[str, Any]] = []
    streak, collapsed = 0, False
    renderer.train()
    discriminator.train()

    for it in tqdm(range(config.iterations), disable=not progress):
        batch = data.take(_batch_index(len(data), config.batch_size, config.seed, it))
        row: Dict[str, Any] = {"iteration": it}
        for _ in range(config.generator_steps):
            opt_g.zero_grad()
            gen = renderer(batch.posemaps, batch.references)
            l_t, parts = transfer_loss(
                gen, batch.goals, batch.references, weights, extractor
            )
            loss = l_t
            adv = gen.new_zeros(())
            if config.adversarial_weight > 0:
                logits = discriminator(batch.posemaps, gen)
                adv = bce(logits, torch.ones_like(logits))
                loss = loss + config.adversarial_weight * adv
            if not torch.isfinite(loss):
                values = {k: float(v) for k, v in parts.items()}
                values["adversarial"] = float(adv)
                logger.error("Render loss is not finite at iteration %d: %s", it, values)
                raise TrainingDivergedError(it, "render", values)
            loss.backward()
            opt_g.step()
            schedule.append("G")
            row.update(transfer=float(l_t), adversarial=float(adv))
        for _ in range(config.discriminator_steps):
            opt_d.zero_grad()
            with torch.no_grad():
                fake = renderer(batch.posemaps, batch.references)
            real_logits = discriminator(batch.posemaps, batch.goals)
            fake_logits = discriminator(batch.posemaps, fake)
            d_loss = 0.5 * (
                bce(real_logits, torch.ones_like(real_logits))
                + bce(fake_logits, torch.zeros_like(fake_logits))
            )
            d_loss.backward()
            opt_d.step()
            schedule.append("D")
            row["discriminator"] = float(d_loss)
            streak = streak + 1 if float(d_loss) < config.collapse_threshold else 0
            if streak == config.collapse_patience:
                collapsed = True
                message = (
                    f"Discriminator loss below {config.collapse_threshold} for "
                    f"{streak} consecutive iterations (iteration {it})."
                )
                logger.warning(message)
                warnings.warn(message)
        curve.append(row)
        if config.log_every and it % config.log_every == 0:
            logger.info("render iteration=%d %s", it, row)

    renderer.eval()
    discriminator.eval()
    return RenderTrainResult(renderer, discriminator, weights, schedule, curve, collapsed)


def save_renderer(
    renderer: Renderer,
    path: Union[str, Path],
    weights: Optional[RenderLossWeights] = None,
    discriminator: Optional[PatchDiscriminator] = None,
) -> Path:
    """Save a renderer checkpoint (with its discriminator when given)."""
    extra_states = {}
    if discriminator is not None:
        extra_states["discriminator"] = discriminator.state_dict()
    return save_checkpoint(
        path,
        "renderer",
        {"arch": asdict(renderer.arch)},
        renderer.state_dict(),
        extra={"loss": asdict(weights) if weights is not None else None},
        extra_states=extra_states,
    )


def load_renderer(path: Union[str, Path]) -> Tuple[Renderer, Dict[str, Any]]:
    """Load a renderer checkpoint; returns the model and the checkpoint extras."""
    ckpt = load_checkpoint(path, kind="renderer")
    arch = RenderArch(**ckpt.config["arch"])
    renderer = Renderer(arch)
    renderer.load_state_dict(ckpt.state_dict)
    renderer.eval()
    extra = dict(ckpt.manifest.get("extra", {}))
    extra["extra_states"] = ckpt.extra_states
    return renderer, extra


def write_triples(triples: Sequence[RenderTriple], directory: Union[str, Path]) -> Path:
    """Write triples as PNGs plus an ``index.jsonl`` of relative paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index = directory / "index.jsonl"
    with open(index, "w", encoding="utf-8") as f:
        for i, t in enumerate(triples):
            entry = {}
            for key in TRIPLE_KEYS:
                name = f"{key}_{i:05d}.png"
                save_posemap_png(getattr(t, key), directory / name)
                entry[key] = name
            f.write(json.dumps(entry, sort_keys=True) + "\n")
    return index


def load_triples(index: Union[str, Path]) -> List[RenderTriple]:
    """Read an index file of ``{"posemap", "reference", "goal"}`` image paths.

    Relative paths are resolved against the index file's directory.
    """
    index = Path(index)
    triples = []
    with open(index, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
                paths = {k: index.parent / entry[k] for k in TRIPLE_KEYS}
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise ValidationError(f"{index}:{number}: invalid triple entry ({e}).")
            triples.append(
                RenderTriple(
                    posemap=load_png(paths["posemap"], "L"),
                    reference=load_png(paths["reference"]),
                    goal=load_png(paths["goal"]),
                )
            )
    return triples


def figure_mask(image: np.ndarray, threshold: int = 32) -> np.ndarray:
    """Pixels of a figure drawn on black: any channel above ``threshold``."""
    return np.asarray(image).max(axis=-1) > threshold


def mean_figure_color(image: np.ndarray, mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Mean RGB of the figure pixels of an ``(H, W, 3)`` image."""
    image = np.asarray(image, dtype=np.float64)
    mask = figure_mask(image) if mask is None else np.asarray(mask, dtype=bool)
    if not mask.any():
        return np.zeros(3)
    return image[mask].mean(axis=0)


def appearance_transfer_rate(
    rendered: Sequence[np.ndarray],
    references: Sequence[np.ndarray],
    masks: Optional[Sequence[np.ndarray]] = None,
    num_distractors: int = 9,
    seed: int = 0,
) -> float:
    """Fraction of frames whose figure color is closest to their own reference.

    For every rendered frame the mean figure color is compared (L2 in RGB)
    with its reference's and with those of ``num_distractors`` other
    references drawn at random.

    :param masks: Figure masks of the rendered frames, e.g. from the goals.
    """
    n = len(rendered)
    if n != len(references):
        raise ValidationError("Need one reference per rendered frame.")
    if n < 2:
        raise ValidationError("Need at least two frames.")
    rng = np.random.default_rng(seed)
    ref_colors = [mean_figure_color(r) for r in references]
    hits = 0
    for i, frame in enumerate(rendered):
        color = mean_figure_color(frame, None if masks is None else masks[i])
        others = [j for j in range(n) if j != i]
        k = min(num_distractors, len(others))
        picks = rng.choice(others, size=k, replace=False)
        own = np.linalg.norm(color - ref_colors[i])
        if all(own < np.linalg.norm(color - ref_colors[j]) for j in picks):
            hits += 1
    return hits / n
